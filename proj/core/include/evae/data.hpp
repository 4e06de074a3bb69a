#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evae/rng.hpp"

namespace evae {

// Grayscale image set, one row per image, pixels in [0, 1].
struct ImageDataset {
  int height = 0;
  int width = 0;
  std::vector<std::vector<double>> pixels;

  int count() const { return static_cast<int>(pixels.size()); }
  int pixels_per_image() const { return height * width; }
};

// Reads an IDX container of unsigned-byte images (magic 0x00000803) and
// rescales pixels to [0, 1]. Throws FormatError naming the byte offset when
// the file is truncated or the magic does not match.
ImageDataset load_idx(const std::string& path);

// Writes the dataset back out as unsigned bytes (values are rounded to the
// nearest of the 256 levels), so load_idx(save_idx(d)) round-trips exactly
// for datasets whose pixels already sit on the k/255 grid.
void save_idx(const ImageDataset& dataset, const std::string& path);

// Deterministic synthetic sets for desk-scale experiments. "two-blob" places
// two soft Gaussian bumps at jittered positions; "bars" draws a random
// horizontal or vertical bar. Pixels are quantized to the k/255 grid so the
// IDX round trip is exact. Side length must be at least 4.
ImageDataset synth_dataset(const std::string& kind, int count, int side, Rng& rng);

// Tiles the first rows*cols images into one binary PGM (P5) for eyeballing.
void write_pgm_grid(const ImageDataset& dataset, const std::string& path, int rows, int cols);

}  // namespace evae
