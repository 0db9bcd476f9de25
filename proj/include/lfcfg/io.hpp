#pragma once

#include <filesystem>
#include <string_view>
#include <vector>

#include "lfcfg/field.hpp"

namespace lfcfg {

std::vector<char> read_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it into place, so readers
// never observe a partially written output.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
void write_file_atomic(const std::filesystem::path& path, const std::vector<char>& bytes);

// Binary P6, maxval 255.
std::vector<char> encode_ppm(const ImageU8& img);
void write_ppm(const ImageU8& img, const std::filesystem::path& path);

/// Places images left to right on a black canvas; heights may differ.
ImageU8 hconcat(const std::vector<ImageU8>& panels, std::size_t gap = 2);

/// Grayscale heatmap of a single plane, linearly normalised to [lo, hi].
ImageU8 heatmap(std::span<const double> plane, std::size_t height, std::size_t width, double lo, double hi);

}  // namespace lfcfg
