#pragma once

#include "caol/image.hpp"

#include <string>
#include <vector>

namespace caol {

class Majorizer;  // majorizers.hpp

// Image files. Two formats:
//   * binary PGM (P5), 8-bit for maxval <= 255 and 16-bit big-endian above,
//     loaded as values/maxval in [0,1];
//   * raw little-endian float64 with a 16-byte header: magic "CAOLIMG0",
//     then height and width as uint32 LE.

Image load_image(const std::string& path);  // dispatches on file magic
Image load_pgm(const std::string& path);
void save_pgm(const Image& x, const std::string& path, int maxval = 255);
Image load_raw(const std::string& path);
void save_raw(const Image& x, const std::string& path);

// Filter bank files: magic "CAOLFB00", then rh, rw, K as uint32 LE, then
// the R x K tap matrix column-major as float64 LE (each column is one
// filter's taps in row-major order).
FilterBank load_filterbank(const std::string& path);
void save_filterbank(const FilterBank& bank, const std::string& path);

// Majorizer cache records: magic "CAOLMJ00", a one-byte form tag
// (0 dense, 1 diagonal, 2 scaled identity), uint32 LE dimension, payload
// as float64 LE.
Majorizer load_majorizer(const std::string& path);
void save_majorizer(const Majorizer& m, const std::string& path);

/// Tiles the K filters of a bank into a mosaic image (each tile min-max
/// normalized, one-pixel separators) for visual inspection.
Image filter_mosaic(const FilterBank& bank);

/// Writes a numeric table with a header row.
void write_csv(const std::string& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

}  // namespace caol
