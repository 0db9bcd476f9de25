#pragma once

#include <string>

#include "lfcfg/field.hpp"
#include "lfcfg/frequency.hpp"
#include "lfcfg/region.hpp"

namespace lfcfg {

/// Unconditional and conditional model outputs at one timestep.
class VelocityPair {
public:
    VelocityPair(Field v_uc, Field v_c, double t);

    const Field& v_uc() const noexcept { return v_uc_; }
    const Field& v_c() const noexcept { return v_c_; }
    double t() const noexcept { return t_; }
    const Shape& shape() const noexcept { return v_uc_.shape(); }

private:
    Field v_uc_;
    Field v_c_;
    double t_;
};

enum class GuidanceMode { cfg, lfcfg, apg, diag_zero_high, diag_zero_low_change, diag_zero_high_change };

const char* to_string(GuidanceMode mode);
GuidanceMode parse_guidance_mode(const std::string& name);

/// True for modes that compare against the previous step's pair.
bool needs_cache(GuidanceMode mode);

struct GuidanceConfig {
    double w = 1.0;
    int scale = 8;
    UpsampleKernel upsample = UpsampleKernel::bilinear;
    ThresholdPolicy policy{};
    int combination = 3;
    GuidanceMode mode = GuidanceMode::lfcfg;
    double apg_eta = 0.0;
    // Off reproduces the low-frequency update term by term, with each term masked by its own map.
    bool unify_masks = false;
    ChangeMode change_mode = ChangeMode::per_location;

    void validate() const;
};

Field cfg_update(const VelocityPair& p, double w);

/// rho * v * m + v * (1 - m), mask broadcast across channels.
Field downweight(const Field& v_low, const RegionMask& m, double rho);

/// Everything the low-frequency update derives from the current and cached pair.
struct LowFrequencyAnalysis {
    FreqSplit uc;
    FreqSplit c;
    ChangeMap r_uc;
    ChangeMap r_c;
    RegionMask m_uc;
    RegionMask m_c;
    double rho;
};

LowFrequencyAnalysis analyze_low_frequency(const VelocityPair& p_t, const VelocityPair& p_prev,
                                           const GuidanceConfig& cfg);

/// v_uc^l + rho w (m_c v_c^l - m_uc v_uc^l) + w ((1 - m_c) v_c^l - (1 - m_uc) v_uc^l)
///   + v_uc^h + w (v_c^h - v_uc^h)
Field compose_lfcfg(const LowFrequencyAnalysis& a, double w);

/// p_prev is the pair cached from the previous (larger t) step.
Field lfcfg_update(const VelocityPair& p_t, const VelocityPair& p_prev, const GuidanceConfig& cfg);

/// The four ways of substituting down-weighted lows into the low-frequency CFG
/// term; all add the unmodified high-frequency CFG term.
///   1: l*_uc + w (l*_c - l*_uc)     2: l_uc + w (l*_c - l_uc)
///   3: l_uc + w (l*_c - l*_uc)      4: l*_uc + w (l_c - l*_uc)
Field combination_update(int variant, const VelocityPair& p_t, const Field& modified_low_uc,
                         const Field& modified_low_c, const GuidanceConfig& cfg);

/// Zeroing diagnostics. diag_zero_high drops both high-frequency terms;
/// diag_zero_low_change / diag_zero_high_change zero the low-frequency signal
/// where r < mean - std / r > mean + std, then apply CFG.
Field diag_update(GuidanceMode mode, const VelocityPair& p_t, const VelocityPair& p_prev, const GuidanceConfig& cfg);

inline constexpr double kApgMinNorm2 = 1e-12;

/// Splits the guidance direction into the component parallel to v_c (one
/// global inner product over the flattened field) and the orthogonal rest, and
/// scales the parallel part by eta.
Field apg_update(const VelocityPair& p, double w, double eta);

/// Velocity plus the per-step quantities recorded in a trajectory. Fractions
/// and rho are NaN when the mode does not compute them; the region-zeroing
/// modes report the fraction of locations they zeroed.
struct GuidedStep {
    Field velocity;
    double mask_fraction_uc;
    double mask_fraction_c;
    double rho;
};

/// Dispatches on cfg.mode. `p_prev` may be null only for modes that do not
/// need the cache; passing null otherwise is a logic error.
GuidedStep guided_step(const VelocityPair& p_t, const VelocityPair* p_prev, const GuidanceConfig& cfg);

}  // namespace lfcfg
