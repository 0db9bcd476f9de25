#include "lfcfg/guidance.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "lfcfg/error.hpp"

namespace lfcfg {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Low part with the mask applied elementwise: m * v (or (1 - m) * v when `complement`).
Field masked(const Field& v, const RegionMask& m, bool complement) {
    m.require_applicable(v.shape(), "masked");
    const Shape& s = v.shape();
    std::vector<double> out(v.size());
    std::size_t i = 0;
    for (std::size_t c = 0; c < s.channels; ++c)
        for (std::size_t h = 0; h < s.height; ++h)
            for (std::size_t w = 0; w < s.width; ++w, ++i) out[i] = (m.covers(c, h, w) != complement) ? v[i] : 0.0;
    return Field(s, std::move(out));
}

Field zero_where(const Field& v, const RegionMask& m) { return masked(v, m, true); }

// v_uc^h + w (v_c^h - v_uc^h)
Field high_cfg(const FreqSplit& uc, const FreqSplit& c, double w) {
    return axpy(uc.high, w, sub(c.high, uc.high));
}

Field combine(int variant, const FreqSplit& uc, const FreqSplit& c, const Field& mod_uc, const Field& mod_c,
              double w) {
    Field low = [&]() {
        switch (variant) {
            case 1: return axpy(mod_uc, w, sub(mod_c, mod_uc));
            case 2: return axpy(uc.low, w, sub(mod_c, uc.low));
            case 3: return axpy(uc.low, w, sub(mod_c, mod_uc));
            case 4: return axpy(mod_uc, w, sub(c.low, mod_uc));
            default: throw ConfigError("unknown combination variant " + std::to_string(variant));
        }
    }();
    return add(low, high_cfg(uc, c, w));
}

void check_combination(int variant) {
    if (variant < 1 || variant > 4) throw ConfigError("combination must be 1..4, got " + std::to_string(variant));
}

}  // namespace

VelocityPair::VelocityPair(Field v_uc, Field v_c, double t) : v_uc_(std::move(v_uc)), v_c_(std::move(v_c)), t_(t) {
    require_same_shape(v_uc_, v_c_, "VelocityPair");
    if (!(t_ >= 0.0 && t_ <= 1.0)) throw ConfigError("velocity pair t must lie in [0, 1], got " + std::to_string(t_));
}

const char* to_string(GuidanceMode mode) {
    switch (mode) {
        case GuidanceMode::cfg: return "cfg";
        case GuidanceMode::lfcfg: return "lfcfg";
        case GuidanceMode::apg: return "apg";
        case GuidanceMode::diag_zero_high: return "diag-zero-high";
        case GuidanceMode::diag_zero_low_change: return "diag-zero-low-change";
        case GuidanceMode::diag_zero_high_change: return "diag-zero-high-change";
    }
    return "unknown";
}

GuidanceMode parse_guidance_mode(const std::string& name) {
    for (auto m : {GuidanceMode::cfg, GuidanceMode::lfcfg, GuidanceMode::apg, GuidanceMode::diag_zero_high,
                   GuidanceMode::diag_zero_low_change, GuidanceMode::diag_zero_high_change}) {
        if (name == to_string(m)) return m;
    }
    throw ConfigError("unknown guidance mode '" + name + "'");
}

bool needs_cache(GuidanceMode mode) {
    return mode == GuidanceMode::lfcfg || mode == GuidanceMode::diag_zero_low_change ||
           mode == GuidanceMode::diag_zero_high_change;
}

void GuidanceConfig::validate() const {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("guidance scale w must be finite and >= 0");
    validate_filter_scale(scale);
    check_combination(combination);
    policy.validate();
    if (!(apg_eta >= 0.0 && apg_eta <= 1.0)) throw ConfigError("apg_eta must lie in [0, 1]");
}

Field cfg_update(const VelocityPair& p, double w) { return axpy(p.v_uc(), w, sub(p.v_c(), p.v_uc())); }

Field downweight(const Field& v_low, const RegionMask& m, double rho) {
    m.require_applicable(v_low.shape(), "downweight");
    const Shape& s = v_low.shape();
    std::vector<double> out(v_low.size());
    std::size_t i = 0;
    for (std::size_t c = 0; c < s.channels; ++c)
        for (std::size_t h = 0; h < s.height; ++h)
            for (std::size_t w = 0; w < s.width; ++w, ++i) {
                const double mv = m.covers(c, h, w) ? 1.0 : 0.0;
                out[i] = rho * v_low[i] * mv + v_low[i] * (1.0 - mv);
            }
    return Field(s, std::move(out));
}

LowFrequencyAnalysis analyze_low_frequency(const VelocityPair& p_t, const VelocityPair& p_prev,
                                           const GuidanceConfig& cfg) {
    if (p_t.shape() != p_prev.shape()) {
        throw ShapeMismatchError("cached pair shape " + to_string(p_prev.shape()) + " differs from current " +
                                 to_string(p_t.shape()));
    }
    FreqSplit uc = split(p_t.v_uc(), cfg.scale, cfg.upsample);
    FreqSplit c = split(p_t.v_c(), cfg.scale, cfg.upsample);
    const Field prev_uc = lowpass(p_prev.v_uc(), cfg.scale, cfg.upsample);
    const Field prev_c = lowpass(p_prev.v_c(), cfg.scale, cfg.upsample);

    ChangeMap r_uc = change_map(prev_uc, uc.low, cfg.change_mode);
    ChangeMap r_c = change_map(prev_c, c.low, cfg.change_mode);
    RegionMask m_uc = low_change_mask(r_uc, threshold(r_uc, cfg.policy.k));
    RegionMask m_c = low_change_mask(r_c, threshold(r_c, cfg.policy.k));
    if (cfg.unify_masks) {
        m_uc = m_uc.logical_and(m_c);
        m_c = m_uc;
    }
    const double p = 0.5 * (mask_fraction(m_uc) + mask_fraction(m_c));
    const double rho = rho_for(cfg.policy, p);
    return LowFrequencyAnalysis{std::move(uc), std::move(c), std::move(r_uc), std::move(r_c),
                                std::move(m_uc), std::move(m_c), rho};
}

Field compose_lfcfg(const LowFrequencyAnalysis& a, double w) {
    const Field& lu = a.uc.low;
    const Field& lc = a.c.low;
    const Field inside = sub(masked(lc, a.m_c, false), masked(lu, a.m_uc, false));
    const Field outside = sub(masked(lc, a.m_c, true), masked(lu, a.m_uc, true));
    Field low = axpy(axpy(lu, a.rho * w, inside), w, outside);
    return add(low, high_cfg(a.uc, a.c, w));
}

Field lfcfg_update(const VelocityPair& p_t, const VelocityPair& p_prev, const GuidanceConfig& cfg) {
    return compose_lfcfg(analyze_low_frequency(p_t, p_prev, cfg), cfg.w);
}

Field combination_update(int variant, const VelocityPair& p_t, const Field& modified_low_uc,
                         const Field& modified_low_c, const GuidanceConfig& cfg) {
    check_combination(variant);
    require_same_shape(p_t.v_uc(), modified_low_uc, "combination_update");
    require_same_shape(p_t.v_c(), modified_low_c, "combination_update");
    const FreqSplit uc = split(p_t.v_uc(), cfg.scale, cfg.upsample);
    const FreqSplit c = split(p_t.v_c(), cfg.scale, cfg.upsample);
    return combine(variant, uc, c, modified_low_uc, modified_low_c, cfg.w);
}

namespace {

// Shared by diag_update and guided_step; the fractions reported are those of
// the zeroed regions.
GuidedStep diag_step(GuidanceMode mode, const VelocityPair& p_t, const VelocityPair& p_prev, const GuidanceConfig& cfg) {
    const double w = cfg.w;
    if (mode == GuidanceMode::diag_zero_high) {
        const Field lu = lowpass(p_t.v_uc(), cfg.scale, cfg.upsample);
        const Field lc = lowpass(p_t.v_c(), cfg.scale, cfg.upsample);
        return {axpy(lu, w, sub(lc, lu)), kNaN, kNaN, kNaN};
    }
    if (mode != GuidanceMode::diag_zero_low_change && mode != GuidanceMode::diag_zero_high_change) {
        throw ConfigError(std::string("diag_update does not handle mode ") + to_string(mode));
    }
    require_same_shape(p_t.v_uc(), p_prev.v_uc(), "diag_update");
    const FreqSplit uc = split(p_t.v_uc(), cfg.scale, cfg.upsample);
    const FreqSplit c = split(p_t.v_c(), cfg.scale, cfg.upsample);
    const ChangeMap r_uc = change_map(lowpass(p_prev.v_uc(), cfg.scale, cfg.upsample), uc.low, cfg.change_mode);
    const ChangeMap r_c = change_map(lowpass(p_prev.v_c(), cfg.scale, cfg.upsample), c.low, cfg.change_mode);

    auto region = [mode](const ChangeMap& r) {
        return mode == GuidanceMode::diag_zero_low_change ? low_change_mask(r, threshold(r, -1.0))
                                                          : high_change_mask(r, threshold(r, 1.0));
    };
    const RegionMask z_uc = region(r_uc), z_c = region(r_c);
    const Field vu = add(zero_where(uc.low, z_uc), uc.high);
    const Field vc = add(zero_where(c.low, z_c), c.high);
    return {axpy(vu, w, sub(vc, vu)), mask_fraction(z_uc), mask_fraction(z_c), kNaN};
}

}  // namespace

Field diag_update(GuidanceMode mode, const VelocityPair& p_t, const VelocityPair& p_prev, const GuidanceConfig& cfg) {
    return diag_step(mode, p_t, p_prev, cfg).velocity;
}

Field apg_update(const VelocityPair& p, double w, double eta) {
    const Field delta = sub(p.v_c(), p.v_uc());
    const double norm2 = dot(p.v_c(), p.v_c());
    if (norm2 < kApgMinNorm2) {
        throw DegenerateError("apg_update: conditional velocity has squared norm " + std::to_string(norm2) +
                              " below 1e-12; the parallel direction is undefined");
    }
    const Field parallel = scale(p.v_c(), dot(delta, p.v_c()) / norm2);
    // eta * par + (delta - par) == delta - (1 - eta) * par; at eta = 1 this is exactly CFG.
    return axpy(p.v_uc(), w, axpy(delta, -(1.0 - eta), parallel));
}

GuidedStep guided_step(const VelocityPair& p_t, const VelocityPair* p_prev, const GuidanceConfig& cfg) {
    if (needs_cache(cfg.mode) && p_prev == nullptr) {
        throw std::logic_error(std::string("guided_step: mode ") + to_string(cfg.mode) +
                               " needs the previous pair; the first step must use CFG");
    }
    switch (cfg.mode) {
        case GuidanceMode::cfg: return {cfg_update(p_t, cfg.w), kNaN, kNaN, kNaN};
        case GuidanceMode::apg: return {apg_update(p_t, cfg.w, cfg.apg_eta), kNaN, kNaN, kNaN};
        case GuidanceMode::diag_zero_high: return diag_step(cfg.mode, p_t, p_t, cfg);
        case GuidanceMode::diag_zero_low_change:
        case GuidanceMode::diag_zero_high_change: return diag_step(cfg.mode, p_t, *p_prev, cfg);
        case GuidanceMode::lfcfg: {
            const LowFrequencyAnalysis a = analyze_low_frequency(p_t, *p_prev, cfg);
            Field v = cfg.combination == 3
                          ? compose_lfcfg(a, cfg.w)
                          : combine(cfg.combination, a.uc, a.c, downweight(a.uc.low, a.m_uc, a.rho),
                                    downweight(a.c.low, a.m_c, a.rho), cfg.w);
            return {std::move(v), mask_fraction(a.m_uc), mask_fraction(a.m_c), a.rho};
        }
    }
    throw std::logic_error("guided_step: unhandled mode");
}

}  // namespace lfcfg
