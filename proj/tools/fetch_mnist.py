#!/usr/bin/env python3
"""Build gzipped IDX files from the digits bundled in the npm `mnist` package.

The package ships 10 000 MNIST digits as JSON arrays of pixel/255 values
rounded to three decimals; round(v * 255) recovers the original byte exactly.
The digits are pooled, shuffled with a fixed seed and split into a 9000-image
train file and a 1000-image test file.

Usage: fetch_mnist.py [--package DIR] [--out DIR]
If --package is omitted the tarball is downloaded from the npm registry.
"""
import argparse
import gzip
import io
import json
import random
import struct
import tarfile
import urllib.request
from pathlib import Path

TARBALL = "https://registry.npmjs.org/mnist/-/mnist-1.1.0.tgz"
SIDE = 28
PIXELS = SIDE * SIDE


def load_digits(package_dir):
    samples = []
    for digit in range(10):
        if package_dir:
            raw = Path(package_dir, "src", "digits", f"{digit}.json").read_text()
        else:
            raw = _tar_members()[f"package/src/digits/{digit}.json"]
        data = json.loads(raw)["data"]
        assert len(data) % PIXELS == 0
        for i in range(len(data) // PIXELS):
            chunk = data[i * PIXELS:(i + 1) * PIXELS]
            pixels = bytes(int(round(v * 255)) for v in chunk)
            samples.append((pixels, digit))
    return samples


_members = None


def _tar_members():
    global _members
    if _members is None:
        blob = urllib.request.urlopen(TARBALL, timeout=120).read()
        _members = {}
        with tarfile.open(fileobj=io.BytesIO(blob), mode="r:gz") as tar:
            for m in tar.getmembers():
                if m.name.endswith(".json") and "/digits/" in m.name:
                    _members[m.name] = tar.extractfile(m).read().decode()
    return _members


def write_images(path, samples):
    header = struct.pack(">IIII", 0x00000803, len(samples), SIDE, SIDE)
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(header)
        for pixels, _ in samples:
            f.write(pixels)


def write_labels(path, samples):
    header = struct.pack(">II", 0x00000801, len(samples))
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(header)
        f.write(bytes(label for _, label in samples))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--package", help="unpacked npm `mnist` package directory")
    ap.add_argument("--out", default="data/mnist")
    ap.add_argument("--test-count", type=int, default=1000)
    args = ap.parse_args()

    samples = load_digits(args.package)
    random.Random(50).shuffle(samples)
    test = samples[:args.test_count]
    train = samples[args.test_count:]

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_images(out / "train-images-idx3-ubyte.gz", train)
    write_labels(out / "train-labels-idx1-ubyte.gz", train)
    write_images(out / "t10k-images-idx3-ubyte.gz", test)
    write_labels(out / "t10k-labels-idx1-ubyte.gz", test)
    print(f"wrote {len(train)} train / {len(test)} test images to {out}")


if __name__ == "__main__":
    main()
