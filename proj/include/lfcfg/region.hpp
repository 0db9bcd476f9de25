#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lfcfg/field.hpp"

namespace lfcfg {

/// Per-location magnitude of change between two low-frequency fields.
///
/// `planes` is 1 for the default channel-collapsed map (Euclidean distance
/// across channels) and C for the per-channel sensitivity mode. Values are
/// finite and non-negative.
class ChangeMap {
public:
    ChangeMap(std::size_t planes, std::size_t height, std::size_t width, std::vector<double> values);

    std::size_t planes() const noexcept { return planes_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    std::span<const double> values() const noexcept { return values_; }

private:
    std::size_t planes_, height_, width_;
    std::vector<double> values_;
};

/// Binary mask, 1 marks a low-change location. A single-plane mask is
/// broadcast across every channel of the field it is applied to.
class RegionMask {
public:
    RegionMask(std::size_t planes, std::size_t height, std::size_t width, std::vector<std::uint8_t> bits);

    static RegionMask filled(std::size_t planes, std::size_t height, std::size_t width, bool value);

    std::size_t planes() const noexcept { return planes_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t size() const noexcept { return bits_.size(); }
    bool operator[](std::size_t i) const { return bits_[i] != 0; }
    std::span<const std::uint8_t> bits() const noexcept { return bits_; }

    /// Mask value that applies to element (c, h, w) of a field.
    bool covers(std::size_t c, std::size_t h, std::size_t w) const {
        const std::size_t p = planes_ == 1 ? 0 : c;
        return bits_[(p * height_ + h) * width_ + w] != 0;
    }

    /// Throws ShapeMismatchError unless this mask can be applied to `shape`.
    void require_applicable(const Shape& shape, const char* what) const;

    RegionMask logical_and(const RegionMask& other) const;

private:
    std::size_t planes_, height_, width_;
    std::vector<std::uint8_t> bits_;
};

enum class ChangeMode { per_location, per_channel };

/// r(h, w) = sqrt(sum_c (curr - prev)^2). Per-channel mode yields |curr - prev|.
ChangeMap change_map(const Field& prev_low, const Field& curr_low, ChangeMode mode = ChangeMode::per_location);

struct MapStats {
    double mean;
    double stddev;  // population (1/N)
};

MapStats map_stats(std::span<const double> values);

/// mean(r) + k * std(r) with population std.
double threshold(std::span<const double> values, double k);
inline double threshold(const ChangeMap& r, double k) { return threshold(r.values(), k); }

/// m = 1 where r < gamma (strict).
std::vector<std::uint8_t> below_mask_bits(std::span<const double> values, double gamma);
RegionMask low_change_mask(const ChangeMap& r, double gamma);
/// m = 1 where r > gamma (strict); the high-change region for diagnostics.
RegionMask high_change_mask(const ChangeMap& r, double gamma);

double mask_fraction(std::span<const std::uint8_t> bits);
inline double mask_fraction(const RegionMask& m) { return mask_fraction(m.bits()); }

enum class RhoMode { fixed, empirical, manual };

const char* to_string(RhoMode mode);
RhoMode parse_rho_mode(const std::string& name);

struct ThresholdPolicy {
    double k = 1.0;
    RhoMode rho_mode = RhoMode::fixed;
    std::optional<double> rho_manual;

    /// Throws ConfigError on a manual mode without a value in (0, 1].
    void validate() const;
};

inline constexpr double kRhoFloor = 1e-6;

/// Down-weight ratio for one step.
///
/// fixed uses preset low/high proportions for each tail
/// (k=1: 0.333/0.667, k=2: 0.10/0.90, k=3: 0.01/0.99); other k fall back to
/// the empirical rule. empirical is (1 - p) / p with p floored at 1e-6 and the
/// result clamped to [1e-6, 1]. manual returns rho_manual.
double rho_for(const ThresholdPolicy& policy, double observed_fraction);

}  // namespace lfcfg
