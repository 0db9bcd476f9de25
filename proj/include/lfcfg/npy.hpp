#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lfcfg/field.hpp"

namespace lfcfg {

enum class NpyDtype { f32, f64 };

const char* to_string(NpyDtype dtype);
NpyDtype parse_dtype(const std::string& name);

// NPY v1.0, little-endian, C order, shape (C, H, W). Header padded with spaces
// to a 64-byte boundary exactly as numpy.save does.
std::vector<char> npy_encode(const Field& f, NpyDtype dtype = NpyDtype::f64);
Field npy_decode(const std::vector<char>& bytes, NpyDtype* stored_dtype = nullptr);

void npy_write(const Field& f, const std::filesystem::path& path, NpyDtype dtype = NpyDtype::f64);
Field npy_read(const std::filesystem::path& path, NpyDtype* stored_dtype = nullptr);

/// Round each value to float32 and back; models what a float32 NPY round-trip does.
Field narrow_to_f32(const Field& f);

}  // namespace lfcfg
