#include <zlib.h>

#include <cstring>
#include <fstream>

#include "dlrs/mnist.hpp"

namespace dlrs::mnist {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t at, const char* what) {
  if (bytes.size() < at + 4) {
    throw IdxError(IdxError::Kind::kTruncated, std::string(what) + ": truncated header");
  }
  return (std::uint32_t{bytes[at]} << 24) | (std::uint32_t{bytes[at + 1]} << 16) |
         (std::uint32_t{bytes[at + 2]} << 8) | std::uint32_t{bytes[at + 3]};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::string hex(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "0x%08x", v);
  return buf;
}

}  // namespace

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  // gzread passes uncompressed files through unchanged.
  gzFile file = gzopen(path.c_str(), "rb");
  if (!file) throw IdxError(IdxError::Kind::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> out;
  std::uint8_t buf[1 << 16];
  for (;;) {
    const int n = gzread(file, buf, sizeof(buf));
    if (n < 0) {
      int code = 0;
      const std::string msg = gzerror(file, &code);
      gzclose(file);
      throw IdxError(IdxError::Kind::kIo, "error reading " + path.string() + ": " + msg);
    }
    if (n == 0) break;
    out.insert(out.end(), buf, buf + n);
  }
  gzclose(file);
  return out;
}

Dataset parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels,
                  Split split) {
  const auto image_magic = read_be32(images, 0, "images");
  if (image_magic != kImageMagic) {
    throw IdxError(IdxError::Kind::kBadMagic,
                   "images: bad magic " + hex(image_magic) + ", expected " + hex(kImageMagic));
  }
  const auto label_magic = read_be32(labels, 0, "labels");
  if (label_magic != kLabelMagic) {
    throw IdxError(IdxError::Kind::kBadMagic,
                   "labels: bad magic " + hex(label_magic) + ", expected " + hex(kLabelMagic));
  }

  const std::size_t count = read_be32(images, 4, "images");
  Dataset data;
  data.split = split;
  data.rows = read_be32(images, 8, "images");
  data.cols = read_be32(images, 12, "images");
  const std::size_t label_count = read_be32(labels, 4, "labels");
  if (label_count != count) {
    throw IdxError(IdxError::Kind::kCountMismatch,
                   "count mismatch: " + std::to_string(count) + " images but " +
                       std::to_string(label_count) + " labels");
  }

  const std::size_t payload = count * data.rows * data.cols;
  if (images.size() < 16 + payload) {
    throw IdxError(IdxError::Kind::kTruncated, "images: expected " + std::to_string(payload) +
                                                    " pixel bytes, found " +
                                                    std::to_string(images.size() - 16));
  }
  if (labels.size() < 8 + count) {
    throw IdxError(IdxError::Kind::kTruncated, "labels: expected " + std::to_string(count) +
                                                    " label bytes, found " +
                                                    std::to_string(labels.size() - 8));
  }

  data.pixels.resize(payload);
  for (std::size_t i = 0; i < payload; ++i) {
    data.pixels[i] = static_cast<float>(images[16 + i]) / 255.0f;
  }
  data.labels.assign(labels.begin() + 8, labels.begin() + 8 + static_cast<std::ptrdiff_t>(count));
  for (std::size_t i = 0; i < count; ++i) {
    if (data.labels[i] > 9) {
      throw IdxError(IdxError::Kind::kBadLabel,
                     "label " + std::to_string(data.labels[i]) + " at index " + std::to_string(i) +
                         " is outside [0, 9]");
    }
  }
  return data;
}

Dataset read_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 Split split) {
  const auto images = read_file_bytes(images_path);
  const auto labels = read_file_bytes(labels_path);
  return parse_idx(images, labels, split);
}

std::vector<std::uint8_t> encode_idx_images(const Dataset& data) {
  std::vector<std::uint8_t> out;
  out.reserve(16 + data.pixels.size());
  put_be32(out, kImageMagic);
  put_be32(out, static_cast<std::uint32_t>(data.size()));
  put_be32(out, static_cast<std::uint32_t>(data.rows));
  put_be32(out, static_cast<std::uint32_t>(data.cols));
  for (float p : data.pixels) {
    out.push_back(static_cast<std::uint8_t>(std::lround(static_cast<double>(p) * 255.0)));
  }
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(const Dataset& data) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + data.labels.size());
  put_be32(out, kLabelMagic);
  put_be32(out, static_cast<std::uint32_t>(data.size()));
  out.insert(out.end(), data.labels.begin(), data.labels.end());
  return out;
}

void write_idx(const Dataset& data, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path) {
  const auto write = [](const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IdxError(IdxError::Kind::kIo, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IdxError(IdxError::Kind::kIo, "failed writing " + path.string());
  };
  write(images_path, encode_idx_images(data));
  write(labels_path, encode_idx_labels(data));
}

Dataset take_first(const Dataset& data, std::size_t count) {
  if (count == 0 || count >= data.size()) return data;
  Dataset out;
  out.rows = data.rows;
  out.cols = data.cols;
  out.split = data.split;
  out.pixels.assign(data.pixels.begin(),
                    data.pixels.begin() + static_cast<std::ptrdiff_t>(count * data.pixels_per_image()));
  out.labels.assign(data.labels.begin(), data.labels.begin() + static_cast<std::ptrdiff_t>(count));
  return out;
}

}  // namespace dlrs::mnist
