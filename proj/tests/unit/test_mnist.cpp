#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <map>

#include "dlrs/error.hpp"
#include "dlrs/mnist.hpp"
#include "support/oracles.hpp"

using namespace dlrs;
using namespace dlrs::mnist;

namespace {

using Bytes = std::vector<std::uint8_t>;

void put_be32(Bytes& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(v >> s));
}

// Two 28x28 images: image 0 has pixel 0 = 255 and pixel 783 = 51, image 1
// has pixel 392 = 128; labels 7 and 3.
Bytes fixture_images() {
  Bytes b{0x00, 0x00, 0x08, 0x03, 0x00, 0x00, 0x00, 0x02,
          0x00, 0x00, 0x00, 0x1c, 0x00, 0x00, 0x00, 0x1c};
  Bytes pixels(2 * 784, 0);
  pixels[0] = 0xff;
  pixels[783] = 0x33;
  pixels[784 + 392] = 0x80;
  b.insert(b.end(), pixels.begin(), pixels.end());
  return b;
}

Bytes fixture_labels(std::initializer_list<std::uint8_t> labels = {7, 3}) {
  Bytes b{0x00, 0x00, 0x08, 0x01};
  put_be32(b, static_cast<std::uint32_t>(labels.size()));
  b.insert(b.end(), labels.begin(), labels.end());
  return b;
}

IdxError::Kind error_kind(const Bytes& images, const Bytes& labels) {
  try {
    parse_idx(images, labels);
  } catch (const IdxError& e) {
    return e.kind();
  }
  FAIL("no error");
  return IdxError::Kind::kIo;
}

// n samples of a 2x2 "image" whose pixel (label % 4) is lit.
Dataset toy(std::size_t n, std::size_t classes = 4) {
  Dataset d;
  d.rows = 2;
  d.cols = 2;
  for (std::size_t i = 0; i < n; ++i) {
    const auto label = static_cast<std::uint8_t>(i % classes);
    for (std::size_t p = 0; p < 4; ++p) d.pixels.push_back(p == label % 4 ? 1.0f : 0.0f);
    d.labels.push_back(label);
  }
  return d;
}

}  // namespace

TEST_CASE("hand-authored IDX fixture") {
  const auto d = parse_idx(fixture_images(), fixture_labels(), Split::kTest);
  REQUIRE(d.size() == 2);
  CHECK(d.rows == 28);
  CHECK(d.cols == 28);
  CHECK(d.split == Split::kTest);
  CHECK(d.labels == std::vector<std::uint8_t>{7, 3});
  CHECK(d.image(0)[0] == 1.0f);
  CHECK(d.image(0)[783] == static_cast<float>(51.0 / 255.0));
  CHECK(d.image(0)[1] == 0.0f);
  CHECK(d.image(1)[392] == static_cast<float>(128.0 / 255.0));
  CHECK(std::count_if(d.pixels.begin(), d.pixels.end(), [](float v) { return v != 0.0f; }) == 3);
}

TEST_CASE("IDX errors are distinct") {
  auto bad_magic = fixture_images();
  bad_magic[2] = 0x00;
  bad_magic[3] = 0x00;
  CHECK(error_kind(bad_magic, fixture_labels()) == IdxError::Kind::kBadMagic);
  CHECK(error_kind(fixture_images(), fixture_images()) == IdxError::Kind::kBadMagic);
  CHECK(error_kind(fixture_images(), fixture_labels({1, 2, 3})) == IdxError::Kind::kCountMismatch);
  auto truncated = fixture_images();
  truncated.resize(truncated.size() - 1);
  CHECK(error_kind(truncated, fixture_labels()) == IdxError::Kind::kTruncated);
  CHECK(error_kind(Bytes{0x00, 0x00}, fixture_labels()) == IdxError::Kind::kTruncated);
  CHECK(error_kind(fixture_images(), fixture_labels({7, 12})) == IdxError::Kind::kBadLabel);
  CHECK_THROWS_AS(read_idx("/nonexistent/images", "/nonexistent/labels"), IdxError);
}

TEST_CASE("IDX round trip through bytes and files") {
  const auto d = parse_idx(fixture_images(), fixture_labels());
  CHECK(encode_idx_images(d) == fixture_images());
  CHECK(encode_idx_labels(d) == fixture_labels());

  const auto dir = std::filesystem::temp_directory_path() / "dlrs_idx_rt";
  std::filesystem::create_directories(dir);
  write_idx(d, dir / "img", dir / "lbl");
  const auto back = read_idx(dir / "img", dir / "lbl");
  CHECK(back.pixels == d.pixels);
  CHECK(back.labels == d.labels);
  std::filesystem::remove_all(dir);
}

TEST_CASE("bundled gzip test split reads transparently") {
  const std::filesystem::path root = DLRS_SOURCE_DIR "/data/mnist";
  const auto d = read_idx(root / "t10k-images-idx3-ubyte.gz", root / "t10k-labels-idx1-ubyte.gz");
  CHECK(d.size() == 1000);
  CHECK(d.pixels_per_image() == 784);
  CHECK(*std::max_element(d.labels.begin(), d.labels.end()) == 9);
  CHECK(*std::max_element(d.pixels.begin(), d.pixels.end()) <= 1.0f);
  CHECK(take_first(d, 10).size() == 10);
  CHECK(take_first(d, 0).size() == 1000);
}

TEST_CASE("batch sampler covers every sample once per epoch") {
  oracle::Gen g(89);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = g.index(1, 300);
    const BatchPlan plan{g.index(1, 64), g.index(0, 1000), false};
    BatchSampler s(plan, n);
    for (int epoch = 0; epoch < 3; ++epoch) {
      std::vector<std::size_t> seen;
      for (const auto& b : s.next_epoch()) {
        CHECK(b.size() <= plan.batch_size);
        seen.insert(seen.end(), b.begin(), b.end());
      }
      std::sort(seen.begin(), seen.end());
      std::vector<std::size_t> all(n);
      std::iota(all.begin(), all.end(), std::size_t{0});
      CHECK(seen == all);
    }
  }
  BatchSampler drop({64, 1, true}, 130);
  const auto batches = drop.next_epoch();
  CHECK(batches.size() == 2);
  for (const auto& b : batches) CHECK(b.size() == 64);
}

TEST_CASE("batch orders depend only on the plan") {
  BatchSampler a({16, 50, false}, 100), b({16, 50, false}, 100), c({16, 51, false}, 100);
  const auto ea = a.next_epoch();
  CHECK(ea == b.next_epoch());
  CHECK(ea != c.next_epoch());
  CHECK(a.next_epoch() != ea);
}

TEST_CASE("accuracy") {
  auto d = toy(40, 4);
  // Classes 0-3 lit on pixels 0-3; W = 1000 I picks the lit pixel.
  nn::NetSpec spec{{4, 4}, {nn::Activation::kLogSoftmax}};
  std::vector<double> p(spec.parameter_count(), 0.0);
  for (std::size_t c = 0; c < 4; ++c) p[c * 4 + c] = 1000.0;
  CHECK(evaluate_accuracy(nn::Net::from_parameters(spec, p), d) == 1.0);

  // Constant logits: every prediction is class 0.
  Dataset balanced = toy(100, 10);
  balanced.pixels.assign(balanced.size() * 4, 0.0f);
  nn::NetSpec ten{{4, 10}, {nn::Activation::kIdentity}};
  const auto zero = nn::Net::from_parameters(ten, std::vector<double>(ten.parameter_count(), 0.0));
  CHECK(evaluate_accuracy(zero, balanced) == 0.1);

  oracle::Gen g(97);
  for (int i = 0; i < 10; ++i) {
    const auto net = oracle::random_net(g, nn::NetSpec{{4, 5, 10}, {nn::Activation::kTanh, nn::Activation::kLogSoftmax}});
    const double acc = evaluate_accuracy(net, balanced);
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
  }
}

TEST_CASE("classifier training bookkeeping") {
  ClassifierConfig cfg;
  cfg.net = dense_classifier(4, 3, 4);
  cfg.epochs = 0;
  const auto train = toy(2), test = toy(4);
  const auto none = train_classifier(train, test, cfg);
  CHECK(none.epochs.empty());
  const auto init = nn::Net::build(cfg.net, derive_seed(cfg.seed, RngStream::kInit));
  CHECK(std::equal(init.parameters().begin(), init.parameters().end(), none.net.parameters().begin()));

  cfg.epochs = 1;
  cfg.batches.batch_size = 1;
  const auto one = train_classifier(train, test, cfg);
  REQUIRE(one.epochs.size() == 1);
  CHECK(one.epochs[0].batches == 2);

  cfg.net = dense_classifier(784, 8, 10);
  CHECK_THROWS_AS(train_classifier(train, test, cfg), ConfigError);
}

TEST_CASE("scheduler choice does not move the data order") {
  ClassifierConfig cfg;
  cfg.net = dense_classifier(4, 6, 4);
  cfg.epochs = 4;
  cfg.batches.batch_size = 8;
  const auto train = toy(64), test = toy(16);
  cfg.scheduler = DlrsConfig{0.01, 0.5, 1.0, 0.1, 1e-8, 1.0};
  const auto dlrs_run = train_classifier(train, test, cfg);
  cfg.scheduler = AdacompConfig{0.01, 0.1, 1e-8, 1.0};
  const auto ada_run = train_classifier(train, test, cfg);
  cfg.scheduler = ConstantConfig{0.01};
  const auto const_run = train_classifier(train, test, cfg);
  for (std::size_t e = 0; e < 4; ++e) {
    CHECK(dlrs_run.epochs[e].batch_order_hash == ada_run.epochs[e].batch_order_hash);
    CHECK(dlrs_run.epochs[e].batch_order_hash == const_run.epochs[e].batch_order_hash);
  }
  // Same seed and config: identical records.
  const auto again = train_classifier(train, test, cfg);
  CHECK(records_csv(again.epochs, false) == records_csv(const_run.epochs, false));
}
