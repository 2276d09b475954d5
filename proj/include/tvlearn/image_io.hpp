#pragma once

#include <string>

#include "tvlearn/grid.hpp"

namespace tvlearn {

/// Reads a grayscale PGM (P2 or P5, maxval up to 65535) or PNG (8 or 16 bit).
/// Intensities are divided by the format maximum, so the result lies in [0,1].
/// Throws IoError on malformed files and on color images.
ImageGrid read_image(const std::string& path);

/// Format follows the extension (.png, otherwise PGM P5). Values are clipped to
/// [0,1] and rounded to the nearest level; bit_depth is 8 or 16.
void write_image(const ImageGrid& img, const std::string& path, int bit_depth = 8);

/// Plain-text P2, mostly for tests and inspection.
void write_pgm_ascii(const ImageGrid& img, const std::string& path, int bit_depth = 8);

/// 10 log10(1 / MSE) for images on [0,1]; unweighted mean over pixels.
double psnr(const ImageGrid& u, const ImageGrid& reference);

}  // namespace tvlearn
