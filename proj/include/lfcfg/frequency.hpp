#pragma once

#include "lfcfg/field.hpp"

namespace lfcfg {

enum class UpsampleKernel { bilinear, nearest };

const char* to_string(UpsampleKernel kernel);
UpsampleKernel parse_upsample_kernel(const std::string& name);

/// Throws ConfigError unless s is one of 1, 2, 4, 8.
void validate_filter_scale(int s);

/// Low-pass via the super-resolution operator: s x s box-average pooling
/// (partial windows at ragged borders average only the cells they cover),
/// then resampling back to H x W with half-pixel (align-corners=false)
/// coordinates clamped at the borders. Linear in `f`. s = 1 is the identity.
Field lowpass(const Field& f, int s, UpsampleKernel kernel = UpsampleKernel::bilinear);

struct FreqSplit {
    Field low;
    Field high;
    int scale;
};

/// high is the residual f - low, so low + high reproduces f.
FreqSplit split(const Field& f, int s, UpsampleKernel kernel = UpsampleKernel::bilinear);

}  // namespace lfcfg
