#include "lfcfg/region.hpp"

#include <algorithm>
#include <cmath>

#include "lfcfg/error.hpp"

namespace lfcfg {

ChangeMap::ChangeMap(std::size_t planes, std::size_t height, std::size_t width, std::vector<double> values)
    : planes_(planes), height_(height), width_(width), values_(std::move(values)) {
    if (values_.size() != planes_ * height_ * width_ || values_.empty()) {
        throw ShapeMismatchError("change map size does not match its dimensions");
    }
    for (double v : values_) {
        if (!std::isfinite(v) || v < 0.0) throw DegenerateError("change map values must be finite and >= 0");
    }
}

RegionMask::RegionMask(std::size_t planes, std::size_t height, std::size_t width, std::vector<std::uint8_t> bits)
    : planes_(planes), height_(height), width_(width), bits_(std::move(bits)) {
    if (bits_.size() != planes_ * height_ * width_ || bits_.empty()) {
        throw ShapeMismatchError("region mask size does not match its dimensions");
    }
    for (auto& b : bits_) {
        if (b > 1) throw DegenerateError("region mask must be binary");
    }
}

RegionMask RegionMask::filled(std::size_t planes, std::size_t height, std::size_t width, bool value) {
    return RegionMask(planes, height, width, std::vector<std::uint8_t>(planes * height * width, value ? 1 : 0));
}

void RegionMask::require_applicable(const Shape& shape, const char* what) const {
    if (height_ != shape.height || width_ != shape.width || (planes_ != 1 && planes_ != shape.channels)) {
        throw ShapeMismatchError(std::string(what) + ": mask " + std::to_string(planes_) + "x" +
                                 std::to_string(height_) + "x" + std::to_string(width_) +
                                 " cannot be applied to field " + to_string(shape));
    }
}

RegionMask RegionMask::logical_and(const RegionMask& other) const {
    if (planes_ != other.planes_ || height_ != other.height_ || width_ != other.width_) {
        throw ShapeMismatchError("logical_and: mask dimensions differ");
    }
    std::vector<std::uint8_t> out(bits_.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = bits_[i] & other.bits_[i];
    return RegionMask(planes_, height_, width_, std::move(out));
}

ChangeMap change_map(const Field& prev_low, const Field& curr_low, ChangeMode mode) {
    require_same_shape(prev_low, curr_low, "change_map");
    const std::size_t C = curr_low.channels(), P = curr_low.shape().plane();
    if (mode == ChangeMode::per_channel) {
        std::vector<double> r(C * P);
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = std::abs(curr_low[i] - prev_low[i]);
        return ChangeMap(C, curr_low.height(), curr_low.width(), std::move(r));
    }
    std::vector<double> acc(P, 0.0);
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t i = 0; i < P; ++i) {
            const double d = curr_low[c * P + i] - prev_low[c * P + i];
            acc[i] += d * d;
        }
    }
    for (double& v : acc) v = std::sqrt(v);
    return ChangeMap(1, curr_low.height(), curr_low.width(), std::move(acc));
}

MapStats map_stats(std::span<const double> values) {
    if (values.empty()) throw ShapeMismatchError("map_stats: empty map");
    // A summed mean of a constant map can land an ulp above the value, which
    // would flip the strict comparison and fill the mask.
    if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values[0]; })) return {values[0], 0.0};
    const auto n = static_cast<double>(values.size());
    double s = 0.0;
    for (double v : values) s += v;
    const double m = s / n;
    double ss = 0.0;
    for (double v : values) ss += (v - m) * (v - m);
    return {m, std::sqrt(ss / n)};
}

double threshold(std::span<const double> values, double k) {
    const MapStats st = map_stats(values);
    return st.mean + k * st.stddev;
}

std::vector<std::uint8_t> below_mask_bits(std::span<const double> values, double gamma) {
    std::vector<std::uint8_t> bits(values.size());
    for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = values[i] < gamma ? 1 : 0;
    return bits;
}

RegionMask low_change_mask(const ChangeMap& r, double gamma) {
    return RegionMask(r.planes(), r.height(), r.width(), below_mask_bits(r.values(), gamma));
}

RegionMask high_change_mask(const ChangeMap& r, double gamma) {
    std::vector<std::uint8_t> bits(r.size());
    for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = r[i] > gamma ? 1 : 0;
    return RegionMask(r.planes(), r.height(), r.width(), std::move(bits));
}

double mask_fraction(std::span<const std::uint8_t> bits) {
    std::size_t ones = 0;
    for (auto b : bits) ones += b;
    return static_cast<double>(ones) / static_cast<double>(bits.size());
}

const char* to_string(RhoMode mode) {
    switch (mode) {
        case RhoMode::fixed: return "fixed";
        case RhoMode::empirical: return "empirical";
        case RhoMode::manual: return "manual";
    }
    return "unknown";
}

RhoMode parse_rho_mode(const std::string& name) {
    if (name == "fixed") return RhoMode::fixed;
    if (name == "empirical") return RhoMode::empirical;
    if (name == "manual") return RhoMode::manual;
    throw ConfigError("unknown rho_mode '" + name + "' (expected fixed, empirical or manual)");
}

void ThresholdPolicy::validate() const {
    if (!std::isfinite(k)) throw ConfigError("threshold multiplier k must be finite");
    if (rho_mode == RhoMode::manual) {
        if (!rho_manual) throw ConfigError("rho_mode manual requires rho_manual");
        if (!(*rho_manual > 0.0 && *rho_manual <= 1.0)) throw ConfigError("rho_manual must lie in (0, 1]");
    }
}

double rho_for(const ThresholdPolicy& policy, double observed_fraction) {
    switch (policy.rho_mode) {
        case RhoMode::manual:
            policy.validate();
            return *policy.rho_manual;
        case RhoMode::fixed:
            if (policy.k == 1.0) return 0.333 / 0.667;
            if (policy.k == 2.0) return 0.10 / 0.90;
            if (policy.k == 3.0) return 0.01 / 0.99;
            [[fallthrough]];
        case RhoMode::empirical: {
            const double p = std::max(std::clamp(observed_fraction, 0.0, 1.0), kRhoFloor);
            return std::clamp((1.0 - p) / p, kRhoFloor, 1.0);
        }
    }
    return 1.0;
}

}  // namespace lfcfg
