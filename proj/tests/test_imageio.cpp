#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "resshift/error.hpp"
#include "resshift/imageio.hpp"

using namespace resshift;

namespace {

Image quantized(Shape shape, Rng& rng) {
  Image img(shape);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<double>(rng.below(256)) / 255.0;
  return img;
}

nn::DenoiserConfig small_net() {
  nn::DenoiserConfig cfg;
  cfg.base_width = 4;
  cfg.depth = 1;
  cfg.time_embed_dim = 8;
  return cfg;
}

}  // namespace

TEST_CASE("decode netpbm") {
  const Image one = decode_image(std::string("P5\n1 1\n255\n") + '\xff');
  CHECK(one == Image({1, 1, 1}, 1.0));
  const Image rgb = decode_image(std::string("P6 # colour\n2 1\n# max\n255\n") +
                                 std::string("\x00\x80\xff\x33\x66\x99", 6));
  CHECK(rgb.shape() == Shape{3, 1, 2});
  CHECK(rgb.at(1, 0, 0) == 128.0 / 255.0);
  CHECK(rgb.at(2, 0, 1) == 0x99 / 255.0);
}

TEST_CASE("decode errors carry offsets") {
  CHECK_THROWS_AS(decode_image("P2\n1 1\n255\n0"), ParseError);
  CHECK_THROWS_AS(decode_image("P5\n1 1\n65535\n00"), ParseError);
  try {
    decode_image(std::string("P5\n2 2\n255\n") + "abc");
    FAIL("truncated payload accepted");
  } catch (const ParseError& e) {
    CHECK(e.offset() >= 11);
  }
  CHECK_THROWS_AS(decode_image("P5\n2"), ParseError);
  CHECK_THROWS_AS(decode_image(""), ParseError);
}

TEST_CASE("encode netpbm") {
  const std::string zeros = encode_image(Image({1, 2, 2}, 0.0));
  CHECK(zeros == std::string("P5\n2 2\n255\n") + std::string(4, '\0'));
  CHECK(encode_image(Image({1, 1, 1}, 0.5)).back() == static_cast<char>(128));
  CHECK(encode_image(Image({3, 1, 1}, 1.0)).rfind("P6\n1 1\n255\n", 0) == 0);
  CHECK_THROWS_AS(encode_image(Image({1, 1, 1}, 1.2)), RangeError);
  CHECK_THROWS_AS(encode_image(Image({1, 1, 1}, -0.1)), RangeError);
  CHECK_THROWS_AS(encode_image(Image({2, 1, 1}, 0.5)), ShapeError);
  Rng rng(1);
  const Image img = quantized({3, 5, 7}, rng);
  CHECK(encode_image(img) == encode_image(img));
}

TEST_CASE("image round trip on the 256-level lattice") {
  Rng rng(2);
  const auto dir = testutil::scratch_dir("imageio");
  for (int c : {1, 3}) {
    const Image img = quantized({c, 9, 13}, rng);
    write_image(img, dir / "x.pnm");
    CHECK(read_image(dir / "x.pnm") == img);
  }
  CHECK_THROWS_AS(read_image(dir / "missing.pgm"), UsageError);
}

TEST_CASE("checkpoint round trip") {
  nn::Denoiser net(small_net(), 5);
  nn::AdamState adam;
  for (auto& p : net.parameters()) {
    for (double& g : p.value.grad()) g = 0.01;
  }
  nn::adam_step(net.parameters(), adam);
  const Checkpoint ckpt = make_checkpoint(net, {15, 0.3, 2.0}, 1, 77, &adam);
  const std::string bytes = encode_checkpoint(ckpt);
  const Checkpoint back = decode_checkpoint(bytes);
  CHECK(back == ckpt);
  CHECK(encode_checkpoint(back) == bytes);

  const auto dir = testutil::scratch_dir("ckpt");
  save_checkpoint(ckpt, dir / "a.rskt");
  save_checkpoint(load_checkpoint(dir / "a.rskt"), dir / "b.rskt");
  CHECK(read_file(dir / "a.rskt") == read_file(dir / "b.rskt"));

  nn::Denoiser other(small_net(), 6);
  nn::AdamState other_adam;
  restore(back, other, &other_adam);
  CHECK(other_adam == adam);
  for (std::size_t i = 0; i < net.parameters().size(); ++i) {
    const auto a = net.parameters()[i].value.data();
    const auto b = other.parameters()[i].value.data();
    CHECK(std::equal(a.begin(), a.end(), b.begin()));
  }
}

TEST_CASE("checkpoint corruption") {
  nn::Denoiser net(small_net(), 5);
  const std::string bytes = encode_checkpoint(make_checkpoint(net, {}, 0, 1, nullptr));

  // A payload byte flip still parses but changes a value.
  std::string flipped = bytes;
  flipped[flipped.size() - 3] ^= 0x40;
  const Checkpoint c = decode_checkpoint(flipped);
  CHECK(c.tensors.back().data != decode_checkpoint(bytes).tensors.back().data);

  // The first record's name length follows the fixed header.
  const std::size_t header = 4 + 4 + 5 * 4 + 4 + 8 + 8 + 8 + 8 + 1 + 4;
  std::string bad_len = bytes;
  bad_len[header + 3] = '\x7f';
  CHECK_THROWS_AS(decode_checkpoint(bad_len), CorruptCheckpoint);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 1)), CorruptCheckpoint);
  CHECK_THROWS_AS(decode_checkpoint(bytes + "x"), CorruptCheckpoint);
  CHECK_THROWS_AS(decode_checkpoint("RSKX" + bytes.substr(4)), CorruptCheckpoint);
  std::string bad_version = bytes;
  bad_version[4] = 9;
  CHECK_THROWS_AS(decode_checkpoint(bad_version), CorruptCheckpoint);
}

TEST_CASE("checkpoint guards") {
  nn::Denoiser net(small_net(), 5);
  const Checkpoint ckpt = make_checkpoint(net, {15, 0.3, 2.0}, 0, 1, nullptr);
  CHECK_NOTHROW(require_matching_schedule(ckpt, {15, 0.3, 2.0}));
  CHECK_THROWS_AS(require_matching_schedule(ckpt, {10, 0.3, 2.0}), ConfigConflict);
  CHECK_THROWS_AS(require_matching_schedule(ckpt, {15, 0.5, 2.0}), ConfigConflict);

  auto cfg = small_net();
  cfg.base_width = 8;
  nn::Denoiser wider(cfg, 1);
  CHECK_THROWS_AS(restore(ckpt, wider, nullptr), ConfigConflict);

  Checkpoint missing = ckpt;
  missing.tensors.pop_back();
  nn::Denoiser same(small_net(), 2);
  CHECK_THROWS_AS(restore(missing, same, nullptr), CorruptCheckpoint);
}
