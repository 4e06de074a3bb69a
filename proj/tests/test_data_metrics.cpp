#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "evae/data.hpp"
#include "evae/errors.hpp"
#include "evae/metrics.hpp"
#include "evae/rng.hpp"

using namespace evae;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

void put_u32_be(std::ofstream& out, std::uint32_t v) {
  const unsigned char bytes[4] = {static_cast<unsigned char>(v >> 24),
                                  static_cast<unsigned char>(v >> 16),
                                  static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

std::string write_idx(const std::string& name, std::uint32_t magic, std::uint32_t count,
                      std::uint32_t rows, std::uint32_t cols,
                      const std::vector<unsigned char>& data) {
  const std::string path = temp_path(name);
  std::ofstream out(path, std::ios::binary);
  put_u32_be(out, magic);
  put_u32_be(out, count);
  put_u32_be(out, rows);
  put_u32_be(out, cols);
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size()));
  return path;
}

}  // namespace

TEST_CASE("idx loader reads a handcrafted file exactly") {
  const std::vector<unsigned char> bytes = {0, 255, 128, 64, 1, 2, 3, 255};
  const std::string path = write_idx("idx_good.bin", 0x00000803u, 2, 2, 2, bytes);
  ImageDataset ds = load_idx(path);
  CHECK(ds.count() == 2);
  CHECK(ds.height == 2);
  CHECK(ds.width == 2);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(ds.pixels[0][i] == bytes[i] / 255.0);
    CHECK(ds.pixels[1][i] == bytes[4 + i] / 255.0);
  }
}

TEST_CASE("idx loader rejects bad headers and truncation") {
  const std::vector<unsigned char> bytes = {0, 255, 128, 64};
  const std::string wrong_magic = write_idx("idx_magic.bin", 0x00000801u, 1, 2, 2, bytes);
  try {
    load_idx(wrong_magic);
    CHECK(false);
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("magic") != std::string::npos);
  }

  const std::string zero_count = write_idx("idx_zero.bin", 0x00000803u, 0, 2, 2, {});
  CHECK_THROWS_AS(load_idx(zero_count), FormatError);

  const std::string zero_shape = write_idx("idx_shape.bin", 0x00000803u, 1, 0, 2, {});
  CHECK_THROWS_AS(load_idx(zero_shape), FormatError);

  // header promises 2 images but only 6 of 8 data bytes are present
  const std::vector<unsigned char> short_bytes = {0, 1, 2, 3, 4, 5};
  const std::string truncated = write_idx("idx_trunc.bin", 0x00000803u, 2, 2, 2, short_bytes);
  try {
    load_idx(truncated);
    CHECK(false);
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("truncated at byte") != std::string::npos);
  }

  CHECK_THROWS_AS(load_idx(temp_path("idx_missing.bin")), FormatError);
}

TEST_CASE("idx save and load round-trip on the 255-level grid") {
  Rng rng(51);
  ImageDataset ds = synth_dataset("two-blob", 5, 6, rng);
  const std::string path = temp_path("idx_roundtrip.bin");
  save_idx(ds, path);
  ImageDataset back = load_idx(path);
  REQUIRE(back.count() == ds.count());
  REQUIRE(back.height == ds.height);
  REQUIRE(back.width == ds.width);
  for (int i = 0; i < ds.count(); ++i) {
    for (std::size_t j = 0; j < ds.pixels[i].size(); ++j) {
      CHECK(back.pixels[i][j] == ds.pixels[i][j]);
    }
  }
}

TEST_CASE("idx writer validates its input") {
  ImageDataset empty;
  CHECK_THROWS_AS(save_idx(empty, temp_path("idx_never.bin")), ValidationError);

  ImageDataset mismatched;
  mismatched.height = 2;
  mismatched.width = 2;
  mismatched.pixels = {{0.0, 0.5, 1.0}};  // 3 pixels, not 4
  CHECK_THROWS_AS(save_idx(mismatched, temp_path("idx_never.bin")), ValidationError);
}

TEST_CASE("synthetic datasets are deterministic, bounded, and quantized") {
  Rng a(7), b(7);
  ImageDataset one = synth_dataset("two-blob", 10, 8, a);
  ImageDataset two = synth_dataset("two-blob", 10, 8, b);
  for (int i = 0; i < 10; ++i) {
    for (std::size_t j = 0; j < one.pixels[i].size(); ++j) {
      CHECK(one.pixels[i][j] == two.pixels[i][j]);
    }
  }
  for (const auto& img : one.pixels) {
    for (double v : img) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      CHECK(std::abs(v * 255.0 - std::round(v * 255.0)) < 1e-9);
    }
  }

  Rng c(7);
  ImageDataset bars = synth_dataset("bars", 4, 5, c);
  CHECK(bars.count() == 4);
  CHECK(bars.height == 5);

  Rng d(7);
  CHECK_THROWS_AS(synth_dataset("two-blob", 1, 3, d), ConfigError);
  CHECK_THROWS_AS(synth_dataset("two-blob", 0, 8, d), ConfigError);
  CHECK_THROWS_AS(synth_dataset("nope", 1, 8, d), ConfigError);
}

TEST_CASE("pgm grid writer produces the advertised header and size") {
  Rng rng(8);
  ImageDataset ds = synth_dataset("bars", 3, 4, rng);
  const std::string path = temp_path("grid.pgm");
  write_pgm_grid(ds, path, 1, 2);

  std::ifstream in(path, std::ios::binary);
  std::string magic, dims, maxval;
  std::getline(in, magic);
  std::getline(in, dims);
  std::getline(in, maxval);
  CHECK(magic == "P5");
  CHECK(dims == "8 4");
  CHECK(maxval == "255");
  std::vector<char> rest((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(rest.size() == 32);

  CHECK_THROWS_AS(write_pgm_grid(ds, path, 0, 2), ConfigError);
  ImageDataset empty;
  CHECK_THROWS_AS(write_pgm_grid(empty, path, 1, 1), ValidationError);
}

TEST_CASE("sharpness is zero on constants and exact on a centered delta") {
  ImageDataset flat;
  flat.height = 4;
  flat.width = 4;
  flat.pixels = {std::vector<double>(16, 0.7)};
  CHECK(sharpness(flat) == 0.0);

  // 5x5 delta: the valid 3x3 response map is {-4, four 1s, four 0s},
  // population variance 20/9
  ImageDataset delta;
  delta.height = 5;
  delta.width = 5;
  delta.pixels = {std::vector<double>(25, 0.0)};
  delta.pixels[0][12] = 1.0;
  CHECK(sharpness(delta) == doctest::Approx(20.0 / 9.0).epsilon(1e-12));

  // intensity scaling by c multiplies the response variance by c^2
  ImageDataset scaled = delta;
  for (auto& v : scaled.pixels[0]) v *= 0.2;
  CHECK(sharpness(scaled) == doctest::Approx(0.04 * 20.0 / 9.0).epsilon(1e-12));
}

TEST_CASE("sharpness validates shapes") {
  ImageDataset tiny;
  tiny.height = 2;
  tiny.width = 2;
  tiny.pixels = {std::vector<double>(4, 0.0)};
  CHECK_THROWS_AS(sharpness(tiny), DimensionError);

  ImageDataset empty;
  CHECK_THROWS_AS(sharpness(empty), ValidationError);

  ImageDataset mismatched;
  mismatched.height = 3;
  mismatched.width = 3;
  mismatched.pixels = {std::vector<double>(8, 0.0)};  // 8 pixels, not 9
  CHECK_THROWS_AS(sharpness(mismatched), ValidationError);
}

TEST_CASE("frechet distance between gaussians, scalar cases") {
  // unit variances one apart: distance is the squared mean gap
  CHECK(frechet_gaussian({0.0}, {1.0}, {1.0}, {1.0}) == doctest::Approx(1.0).epsilon(1e-12));
  // equal means, variances 4 and 1: 4 + 1 - 2*sqrt(4)
  CHECK(frechet_gaussian({0.5}, {4.0}, {0.5}, {1.0}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(frechet_gaussian({1.0, 2.0}, {1.0, 0.0, 0.0, 1.0}, {1.0, 2.0}, {1.0, 0.0, 0.0, 1.0}) ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("frechet distance validates dimensions and reports ridging") {
  CHECK_THROWS_AS(frechet_gaussian({}, {}, {}, {}), DimensionError);
  CHECK_THROWS_AS(frechet_gaussian({0.0}, {1.0}, {0.0, 0.0}, {1.0, 0.0, 0.0, 1.0}),
                  DimensionError);
  CHECK_THROWS_AS(frechet_gaussian({0.0, 0.0}, {1.0}, {0.0, 0.0}, {1.0, 0.0, 0.0, 1.0}),
                  DimensionError);

  bool regularized = false;
  const double d = frechet_gaussian({0.0, 0.0}, {0.0, 0.0, 0.0, 0.0}, {0.0, 0.0},
                                    {1.0, 0.0, 0.0, 1.0}, &regularized);
  CHECK(regularized);
  CHECK(std::isfinite(d));
  CHECK(d >= 0.0);
}

TEST_CASE("fid proxy is near zero against itself and flags bad inputs") {
  Rng rng(61);
  ImageDataset a = synth_dataset("two-blob", 60, 8, rng);
  CHECK(fid_proxy(a, a) < 1e-8);

  ImageDataset few = synth_dataset("two-blob", 10, 8, rng);
  CHECK_THROWS_AS(fid_proxy(a, few), ValidationError);
  CHECK_THROWS_AS(fid_proxy(few, a), ValidationError);

  ImageDataset other_shape = synth_dataset("two-blob", 60, 6, rng);
  CHECK_THROWS_AS(fid_proxy(a, other_shape), DimensionError);

  FidOptions bad;
  bad.components = 0;
  CHECK_THROWS_AS(fid_proxy(a, a, bad), ConfigError);
}

TEST_CASE("fid proxy separates fresh draws from blurred ones") {
  Rng rng(62);
  ImageDataset real = synth_dataset("two-blob", 100, 8, rng);
  ImageDataset fresh = synth_dataset("two-blob", 100, 8, rng);

  // box-blur the fresh set to manufacture a distribution shift
  ImageDataset blurred = fresh;
  const int side = fresh.width;
  for (auto& img : blurred.pixels) {
    std::vector<double> src = img;
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        double acc = 0.0;
        int cnt = 0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int yy = y + dy, xx = x + dx;
            if (yy < 0 || yy >= side || xx < 0 || xx >= side) continue;
            acc += src[static_cast<std::size_t>(yy) * side + xx];
            ++cnt;
          }
        }
        img[static_cast<std::size_t>(y) * side + x] = acc / cnt;
      }
    }
  }

  const double fid_fresh = fid_proxy(real, fresh);
  const double fid_blur = fid_proxy(real, blurred);
  CHECK(fid_blur > fid_fresh);
  CHECK(sharpness(blurred) < sharpness(fresh));
}

TEST_CASE("fid proxy with a joint basis is symmetric") {
  Rng rng(63);
  ImageDataset a = synth_dataset("two-blob", 80, 8, rng);
  ImageDataset b = synth_dataset("bars", 80, 8, rng);
  FidOptions joint;
  joint.fit = FidFit::joint;
  const double ab = fid_proxy(a, b, joint);
  const double ba = fid_proxy(b, a, joint);
  CHECK(ab == doctest::Approx(ba).epsilon(1e-6));
  CHECK(ab > 0.0);
}

TEST_CASE("sign test tail probabilities are exact") {
  CHECK(binomial_test(15, 16) == doctest::Approx(17.0 / 65536.0).epsilon(1e-12));
  CHECK(binomial_test(0, 16) == 1.0);
  CHECK(binomial_test(16, 16) == doctest::Approx(1.0 / 65536.0).epsilon(1e-12));
  CHECK(binomial_test(8, 16) == doctest::Approx(39203.0 / 65536.0).epsilon(1e-12));

  for (int w = 1; w <= 16; ++w) CHECK(binomial_test(w, 16) < binomial_test(w - 1, 16));

  CHECK_THROWS_AS(binomial_test(1, 0), DomainError);
  CHECK_THROWS_AS(binomial_test(-1, 16), DomainError);
  CHECK_THROWS_AS(binomial_test(17, 16), DomainError);
}
