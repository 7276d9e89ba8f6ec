#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "csr/image.hpp"
#include "doctest.h"
#include "support/synth.hpp"

using namespace csr;
using namespace csr::testsupport;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

void write_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("P5 bytes map linearly to [0,1]") {
  const std::string path = temp_path("imaging_p5_map.pgm");
  write_bytes(path, std::string("P5\n2 2\n255\n") +
                        std::string("\x00\x80\xff\x40", 4));
  const GrayImage img = load_image(path);
  REQUIRE(img.height == 2);
  REQUIRE(img.width == 2);
  CHECK(img.pixels[0] == 0.0);
  CHECK(img.pixels[1] == doctest::Approx(128.0 / 255.0).epsilon(1e-15));
  CHECK(img.pixels[2] == 1.0);
  CHECK(img.pixels[3] == doctest::Approx(64.0 / 255.0).epsilon(1e-15));
}

TEST_CASE("save(load(x)) is byte-identical for canonical P5 files") {
  const std::string src = temp_path("imaging_roundtrip_src.pgm");
  const std::string dst = temp_path("imaging_roundtrip_dst.pgm");
  save_image(synth_image(23, 31, 5), src);
  save_image(load_image(src), dst);
  CHECK(read_bytes(src) == read_bytes(dst));
}

TEST_CASE("P6 color converts via BT.601 luminance") {
  const std::string path = temp_path("imaging_p6.ppm");
  std::string bytes = "P6\n2 1\n255\n";
  bytes += '\xff';  // (255, 0, 0)
  bytes += '\x00';
  bytes += '\x00';
  bytes += '\x64';  // gray (100, 100, 100)
  bytes += '\x64';
  bytes += '\x64';
  write_bytes(path, bytes);
  const GrayImage img = load_image(path);
  CHECK(img.pixels[0] == doctest::Approx(0.299).epsilon(1e-12));
  // BT.601 weights sum to 1, so gray RGB maps to the same gray.
  CHECK(img.pixels[1] == doctest::Approx(100.0 / 255.0).epsilon(1e-12));
}

TEST_CASE("malformed image files raise format errors naming the problem") {
  const std::string path = temp_path("imaging_bad.pgm");
  SUBCASE("wrong magic") {
    write_bytes(path, "P3\n2 2\n255\n0000");
    CHECK_THROWS_AS(load_image(path), FormatError);
  }
  SUBCASE("unsupported maxval") {
    write_bytes(path, "P5\n2 2\n65535\n\x00\x00\x00\x00\x00\x00\x00\x00");
    CHECK_THROWS_AS(load_image(path), FormatError);
  }
  SUBCASE("truncated pixel data") {
    write_bytes(path, std::string("P5\n2 2\n255\n") + "\x01\x02");
    CHECK_THROWS_AS(load_image(path), FormatError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_image(temp_path("imaging_does_not_exist.pgm")),
                    FormatError);
  }
  SUBCASE("byte offset appears in the message") {
    write_bytes(path, std::string("P5\n2 2\n255\n") + "\x01\x02");
    try {
      load_image(path);
      FAIL("expected a FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("byte") != std::string::npos);
    }
  }
}

TEST_CASE("header parsing tolerates comments and extra whitespace") {
  const std::string path = temp_path("imaging_comment.pgm");
  write_bytes(path, std::string("P5\n# a comment line\n 2\t2 \n255\n") +
                        std::string("\x01\x02\x03\x04", 4));
  const GrayImage img = load_image(path);
  CHECK(img.height == 2);
  CHECK(img.width == 2);
  CHECK(img.pixels[3] == doctest::Approx(4.0 / 255.0).epsilon(1e-15));
}

TEST_CASE("patch counts follow floor((dim - size)/stride) + 1") {
  const GrayImage img = synth_image(256, 256, 9);
  CHECK(extract_patches(img, 32, 14).patches.size() == 289);  // 17 x 17
  CHECK(extract_patches(img, 32, 21).patches.size() == 121);  // 11 x 11
  CHECK(extract_patches(img, 32, 32).patches.size() == 64);   // 8 x 8

  const PatchGrid grid = extract_patches(img, 32, 14);
  CHECK(grid.rows == 17);
  CHECK(grid.cols == 17);
}

TEST_CASE("patch contents come from the right offsets") {
  GrayImage img(4, 6);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 6; ++x) img.at(y, x) = (y * 6 + x) / 100.0;
  const PatchGrid grid = extract_patches(img, 2, 2);
  REQUIRE(grid.rows == 2);
  REQUIRE(grid.cols == 3);
  // patch (1, 2) starts at pixel (2, 4)
  const FeatureMap& p = grid.patches[1 * 3 + 2];
  CHECK(p.data[0] == doctest::Approx(img.at(2, 4)).epsilon(1e-15));
  CHECK(p.data[3] == doctest::Approx(img.at(3, 5)).epsilon(1e-15));
}

TEST_CASE("extract then assemble is the identity on divisible images") {
  const GrayImage img = synth_image(96, 64, 3);
  const GrayImage back = assemble_nonoverlapping(extract_patches(img, 32, 32));
  REQUIRE(back.height == 96);
  REQUIRE(back.width == 64);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    CHECK(back.pixels[i] == img.pixels[i]);
}

TEST_CASE("assemble places patches as blocks") {
  PatchGrid grid;
  grid.rows = 2;
  grid.cols = 2;
  grid.patch_size = 4;
  const double levels[4] = {0.0, 0.25, 0.5, 0.75};
  for (double level : levels) {
    FeatureMap patch(4, 4, 1);
    for (double& v : patch.data) v = level;
    grid.patches.push_back(patch);
  }
  const GrayImage img = assemble_nonoverlapping(grid);
  CHECK(img.at(0, 0) == 0.0);
  CHECK(img.at(0, 7) == 0.25);
  CHECK(img.at(7, 0) == 0.5);
  CHECK(img.at(7, 7) == 0.75);

  SUBCASE("single patch grid is that patch") {
    PatchGrid one;
    one.rows = one.cols = 1;
    one.patch_size = 4;
    one.patches.push_back(grid.patches[3]);
    const GrayImage single = assemble_nonoverlapping(one);
    CHECK(single.height == 4);
    CHECK(single.at(2, 2) == 0.75);
  }
  SUBCASE("inconsistent patch shapes are rejected") {
    grid.patches[2] = FeatureMap(3, 4, 1);
    CHECK_THROWS_AS(assemble_nonoverlapping(grid), UsageError);
  }
}

TEST_CASE("images smaller than the patch are a usage error") {
  const GrayImage img = synth_image(16, 40, 4);
  CHECK_THROWS_AS(extract_patches(img, 32, 14), UsageError);
}

TEST_CASE("padding reaches the next multiple and crop undoes it") {
  SUBCASE("multiples pass through unchanged") {
    const GrayImage img = synth_image(256, 256, 21);
    const PaddedImage padded = pad_to_multiple(img, 32);
    CHECK(padded.image.height == 256);
    CHECK(padded.image.width == 256);
  }
  SUBCASE("250x260 pads to 256x288") {
    const GrayImage img = synth_image(250, 260, 22);
    const PaddedImage padded = pad_to_multiple(img, 32);
    CHECK(padded.image.height == 256);
    CHECK(padded.image.width == 288);
    CHECK(padded.orig_height == 250);
    CHECK(padded.orig_width == 260);
    const GrayImage back = crop(padded.image, 250, 260);
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
      CHECK(back.pixels[i] == img.pixels[i]);
  }
  SUBCASE("reflection mirrors the edge") {
    GrayImage img(2, 3);
    for (int y = 0; y < 2; ++y)
      for (int x = 0; x < 3; ++x) img.at(y, x) = (y * 3 + x) / 10.0;
    const PaddedImage padded = pad_to_multiple(img, 4);
    REQUIRE(padded.image.height == 4);
    REQUIRE(padded.image.width == 4);
    // column 3 mirrors column 2; rows 2,3 mirror rows 1,0.
    CHECK(padded.image.at(0, 3) == img.at(0, 2));
    CHECK(padded.image.at(2, 0) == img.at(1, 0));
    CHECK(padded.image.at(3, 0) == img.at(0, 0));
    CHECK(padded.image.at(3, 3) == img.at(0, 2));
  }
  SUBCASE("pads larger than the image fold the reflection") {
    GrayImage img(2, 2);
    img.at(0, 0) = 0.1;
    img.at(0, 1) = 0.2;
    img.at(1, 0) = 0.3;
    img.at(1, 1) = 0.4;
    const PaddedImage padded = pad_to_multiple(img, 8);
    CHECK(padded.image.height == 8);
    CHECK(padded.image.width == 8);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        CHECK(padded.image.at(y, x) >= 0.1);
        CHECK(padded.image.at(y, x) <= 0.4);
      }
    // Period-4 reflection: index 4 maps back to 0.
    CHECK(padded.image.at(0, 4) == img.at(0, 0));
    CHECK(padded.image.at(4, 0) == img.at(0, 0));
  }
  SUBCASE("crop-of-pad identity on random images") {
    for (int trial = 0; trial < 5; ++trial) {
      const int h = 9 + trial * 7, w = 13 + trial * 5;
      const GrayImage img = noise_image(h, w, 500 + trial);
      const PaddedImage padded = pad_to_multiple(img, 32);
      const GrayImage back = crop(padded.image, h, w);
      REQUIRE(back.pixels.size() == img.pixels.size());
      for (std::size_t i = 0; i < img.pixels.size(); ++i)
        CHECK(back.pixels[i] == img.pixels[i]);
    }
  }
}

TEST_CASE("psnr follows the 8-bit quantized convention") {
  SUBCASE("identical images hit the +infinity sentinel") {
    const GrayImage img = synth_image(32, 32, 31);
    CHECK(psnr(img, img) == std::numeric_limits<double>::infinity());
  }
  SUBCASE("constant difference of 10/255 gives 28.1308 dB") {
    GrayImage a(16, 16), b(16, 16);
    for (double& v : a.pixels) v = 100.0 / 255.0;
    for (double& v : b.pixels) v = 110.0 / 255.0;
    CHECK(psnr(a, b) ==
          doctest::Approx(10.0 * std::log10(255.0 * 255.0 / 100.0))
              .epsilon(1e-12));
    CHECK(psnr(a, b) == doctest::Approx(28.1308).epsilon(1e-4));
  }
  SUBCASE("black versus white is 0 dB") {
    GrayImage a(8, 8), b(8, 8);
    for (double& v : b.pixels) v = 1.0;
    CHECK(psnr(a, b) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("symmetry") {
    const GrayImage a = synth_image(24, 24, 41);
    const GrayImage b = synth_image(24, 24, 42);
    CHECK(psnr(a, b) == psnr(b, a));
  }
  SUBCASE("quantized unit-scale computation equals raw 8-bit computation") {
    const GrayImage a = noise_image(16, 16, 43);
    const GrayImage b = noise_image(16, 16, 44);
    const std::vector<unsigned char> qa = quantize8(a), qb = quantize8(b);
    double mse = 0.0;
    for (std::size_t i = 0; i < qa.size(); ++i) {
      const double d = double(qa[i]) - double(qb[i]);
      mse += d * d;
    }
    mse /= static_cast<double>(qa.size());
    CHECK(psnr(a, b) ==
          doctest::Approx(10.0 * std::log10(255.0 * 255.0 / mse))
              .epsilon(1e-12));
  }
  SUBCASE("shape mismatch is a usage error") {
    CHECK_THROWS_AS(psnr(GrayImage(4, 4), GrayImage(4, 5)), UsageError);
  }
}

TEST_CASE("feature-map conversions preserve values and reject multi-channel") {
  const GrayImage img = synth_image(12, 10, 51);
  const FeatureMap map = to_feature_map(img);
  CHECK(map.height == 12);
  CHECK(map.width == 10);
  CHECK(map.channels == 1);
  const GrayImage back = to_image(map);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    CHECK(back.pixels[i] == img.pixels[i]);
  CHECK_THROWS_AS(to_image(FeatureMap(4, 4, 2)), ConfigError);
}
