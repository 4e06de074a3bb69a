#include "evae/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "evae/errors.hpp"

namespace evae {
namespace {

constexpr std::uint32_t kIdxImageMagic = 0x00000803u;

std::uint32_t read_u32_be(std::ifstream& in, const std::string& path, std::size_t offset) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (in.gcount() != 4) {
    throw FormatError(path + ": truncated at byte " + std::to_string(offset) +
                      " while reading a 32-bit header field");
  }
  return (static_cast<std::uint32_t>(buf[0]) << 24) | (static_cast<std::uint32_t>(buf[1]) << 16) |
         (static_cast<std::uint32_t>(buf[2]) << 8) | static_cast<std::uint32_t>(buf[3]);
}

void write_u32_be(std::ofstream& out, std::uint32_t v) {
  unsigned char buf[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(buf), 4);
}

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

double quantize255(double v) { return std::round(clamp01(v) * 255.0) / 255.0; }

}  // namespace

ImageDataset load_idx(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path + ": cannot open for reading");

  const std::uint32_t magic = read_u32_be(in, path, 0);
  if (magic != kIdxImageMagic) {
    char msg[160];
    std::snprintf(msg, sizeof(msg), "%s: bad magic 0x%08x at byte 0 (expected 0x%08x)",
                  path.c_str(), magic, kIdxImageMagic);
    throw FormatError(msg);
  }
  const std::uint32_t count = read_u32_be(in, path, 4);
  const std::uint32_t rows = read_u32_be(in, path, 8);
  const std::uint32_t cols = read_u32_be(in, path, 12);
  if (count == 0) throw FormatError(path + ": header declares zero images");
  if (rows == 0 || cols == 0) throw FormatError(path + ": header declares an empty image shape");

  ImageDataset ds;
  ds.height = static_cast<int>(rows);
  ds.width = static_cast<int>(cols);
  ds.pixels.resize(count);

  const std::size_t per_image = static_cast<std::size_t>(rows) * cols;
  std::vector<unsigned char> raw(per_image);
  for (std::uint32_t i = 0; i < count; ++i) {
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(per_image));
    if (static_cast<std::size_t>(in.gcount()) != per_image) {
      const std::size_t offset = 16 + static_cast<std::size_t>(i) * per_image +
                                 static_cast<std::size_t>(std::max<std::streamsize>(in.gcount(), 0));
      throw FormatError(path + ": truncated at byte " + std::to_string(offset) + " (image " +
                        std::to_string(i) + " of " + std::to_string(count) + ")");
    }
    auto& row = ds.pixels[i];
    row.resize(per_image);
    for (std::size_t j = 0; j < per_image; ++j) row[j] = static_cast<double>(raw[j]) / 255.0;
  }
  return ds;
}

void save_idx(const ImageDataset& dataset, const std::string& path) {
  if (dataset.count() == 0) throw ValidationError("save_idx: dataset holds no images");
  if (dataset.height <= 0 || dataset.width <= 0) {
    throw ValidationError("save_idx: dataset has an empty image shape");
  }
  const std::size_t per_image = static_cast<std::size_t>(dataset.pixels_per_image());
  for (const auto& row : dataset.pixels) {
    if (row.size() != per_image) {
      throw ValidationError("save_idx: image pixel count does not match height*width");
    }
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(path + ": cannot open for writing");
  write_u32_be(out, kIdxImageMagic);
  write_u32_be(out, static_cast<std::uint32_t>(dataset.count()));
  write_u32_be(out, static_cast<std::uint32_t>(dataset.height));
  write_u32_be(out, static_cast<std::uint32_t>(dataset.width));

  std::vector<unsigned char> raw(per_image);
  for (const auto& row : dataset.pixels) {
    for (std::size_t j = 0; j < per_image; ++j) {
      raw[j] = static_cast<unsigned char>(std::lround(clamp01(row[j]) * 255.0));
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(per_image));
  }
  if (!out) throw FormatError(path + ": write failed");
}

ImageDataset synth_dataset(const std::string& kind, int count, int side, Rng& rng) {
  if (count <= 0) throw ConfigError("synth_dataset: count must be positive");
  if (side < 4) throw ConfigError("synth_dataset: side length must be at least 4");
  const bool two_blob = kind == "two-blob";
  const bool bars = kind == "bars";
  if (!two_blob && !bars) {
    throw ConfigError("synth_dataset: unknown kind '" + kind + "' (use two-blob or bars)");
  }

  ImageDataset ds;
  ds.height = side;
  ds.width = side;
  ds.pixels.resize(count);
  const double s = static_cast<double>(side);

  for (int i = 0; i < count; ++i) {
    auto& img = ds.pixels[i];
    img.assign(static_cast<std::size_t>(side) * side, 0.0);
    if (two_blob) {
      const double cx1 = s * (0.30 + 0.08 * rng.uniform(-1.0, 1.0));
      const double cy1 = s * (0.30 + 0.08 * rng.uniform(-1.0, 1.0));
      const double cx2 = s * (0.70 + 0.08 * rng.uniform(-1.0, 1.0));
      const double cy2 = s * (0.70 + 0.08 * rng.uniform(-1.0, 1.0));
      const double sigma = s * 0.12;
      const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
      for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
          const double d1 = (x - cx1) * (x - cx1) + (y - cy1) * (y - cy1);
          const double d2 = (x - cx2) * (x - cx2) + (y - cy2) * (y - cy2);
          const double v = std::exp(-d1 * inv2s2) + std::exp(-d2 * inv2s2);
          img[static_cast<std::size_t>(y) * side + x] = quantize255(v);
        }
      }
    } else {
      const bool horizontal = rng.uniform01() < 0.5;
      const int pos = static_cast<int>(rng.uniform01() * (side - 2));
      const int thickness = 1 + static_cast<int>(rng.uniform01() * 2.0);
      for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
          const int along = horizontal ? y : x;
          const bool on = along >= pos && along < pos + thickness;
          img[static_cast<std::size_t>(y) * side + x] = on ? quantize255(0.9) : 0.0;
        }
      }
    }
  }
  return ds;
}

void write_pgm_grid(const ImageDataset& dataset, const std::string& path, int rows, int cols) {
  if (rows <= 0 || cols <= 0) throw ConfigError("write_pgm_grid: rows and cols must be positive");
  if (dataset.count() == 0) throw ValidationError("write_pgm_grid: dataset holds no images");
  const int n = std::min(rows * cols, dataset.count());
  const int grid_h = rows * dataset.height;
  const int grid_w = cols * dataset.width;

  std::vector<unsigned char> canvas(static_cast<std::size_t>(grid_h) * grid_w, 0);
  for (int i = 0; i < n; ++i) {
    const int gr = i / cols;
    const int gc = i % cols;
    const auto& img = dataset.pixels[i];
    for (int y = 0; y < dataset.height; ++y) {
      for (int x = 0; x < dataset.width; ++x) {
        const std::size_t dst =
            static_cast<std::size_t>(gr * dataset.height + y) * grid_w + gc * dataset.width + x;
        canvas[dst] = static_cast<unsigned char>(
            std::lround(clamp01(img[static_cast<std::size_t>(y) * dataset.width + x]) * 255.0));
      }
    }
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(path + ": cannot open for writing");
  out << "P5\n" << grid_w << " " << grid_h << "\n255\n";
  out.write(reinterpret_cast<const char*>(canvas.data()), static_cast<std::streamsize>(canvas.size()));
  if (!out) throw FormatError(path + ": write failed");
}

}  // namespace evae
