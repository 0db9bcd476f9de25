#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lfcfg/field.hpp"
#include "lfcfg/guidance.hpp"
#include "lfcfg/models.hpp"

namespace lfcfg {

/// Uniform reverse-time grid 1 = t_0 > t_1 > ... > t_T = 0, spacing 1/T.
class Schedule {
public:
    explicit Schedule(int steps);

    int steps() const noexcept { return steps_; }
    double t(int i) const { return 1.0 - static_cast<double>(i) / static_cast<double>(steps_); }
    double dt() const noexcept { return -1.0 / static_cast<double>(steps_); }

private:
    int steps_;
};

/// x_t + v * dt.
Field euler_step(const Field& x_t, const Field& v, double dt);

enum class FirstStep { cfg, uncond };

const char* to_string(FirstStep f);
FirstStep parse_first_step(const std::string& name);

struct StepRecord {
    int index = 0;
    double t = 0.0;
    bool used_cache = false;
    GuidanceMode mode = GuidanceMode::cfg;
    double mask_fraction_uc = 0.0;  // NaN when the step computed no mask
    double mask_fraction_c = 0.0;
    double rho = 0.0;
    double norm_v_uc = 0.0;
    double norm_v_c = 0.0;
    double norm_guided = 0.0;
    double mean_abs_x = 0.0;  // after the step
};

struct Trajectory {
    std::vector<StepRecord> steps;
    std::vector<Field> snapshots;  // x after each step, when requested
    std::optional<Field> x0;
};

/// Called once per step with the current pair and the cached one (null on
/// the first step), before the update is applied.
using StepObserver = std::function<void(int step, const VelocityPair& current, const VelocityPair* cached)>;

struct SamplerConfig {
    int steps = 20;
    FirstStep first_step = FirstStep::cfg;
    int condition = 0;
    bool keep_snapshots = false;
    StepObserver observer;

    void validate() const;
};

/// Standard-normal initial state, element-wise, from a generator seeded only by `seed`.
Field initial_noise(const Shape& shape, std::uint64_t seed);

/// Reverse-process integration with a one-step cache: the first step has no
/// cached pair and applies CFG (or the unconditional velocity), later steps
/// apply the configured guidance against the pair from the previous step.
Trajectory run(const VelocityModel& model, const GuidanceConfig& cfg, const SamplerConfig& sampler,
               std::uint64_t seed);

}  // namespace lfcfg
