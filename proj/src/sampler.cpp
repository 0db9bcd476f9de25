#include "lfcfg/sampler.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "lfcfg/error.hpp"

namespace lfcfg {

Schedule::Schedule(int steps) : steps_(steps) {
    if (steps < 1) throw ConfigError("schedule needs at least one step");
}

Field euler_step(const Field& x_t, const Field& v, double dt) {
    require_same_shape(x_t, v, "euler_step");
    return axpy(x_t, dt, v);
}

const char* to_string(FirstStep f) { return f == FirstStep::cfg ? "cfg" : "uncond"; }

FirstStep parse_first_step(const std::string& name) {
    if (name == "cfg") return FirstStep::cfg;
    if (name == "uncond") return FirstStep::uncond;
    throw ConfigError("unknown first_step '" + name + "' (expected cfg or uncond)");
}

void SamplerConfig::validate() const {
    if (steps < 2) throw ConfigError("sampler needs T >= 2, got " + std::to_string(steps));
    if (condition < 0) throw ConfigError("condition must be >= 0");
}

Field initial_noise(const Shape& shape, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> data(shape.size());
    for (double& v : data) v = normal(rng);
    return Field(shape, std::move(data));
}

Trajectory run(const VelocityModel& model, const GuidanceConfig& cfg, const SamplerConfig& sampler,
               std::uint64_t seed) {
    cfg.validate();
    sampler.validate();
    const Schedule schedule(sampler.steps);

    Trajectory traj;
    traj.steps.reserve(static_cast<std::size_t>(sampler.steps));
    Field x = initial_noise(model.shape(), seed);
    std::optional<VelocityPair> cache;

    for (int i = 0; i < schedule.steps(); ++i) {
        const double t = schedule.t(i);
        std::optional<VelocityPair> current;
        try {
            Field v_uc = model.evaluate(x, t, std::nullopt);
            Field v_c = model.evaluate(x, t, sampler.condition);
            current.emplace(std::move(v_uc), std::move(v_c), t);
        } catch (const ModelError&) {
            throw;
        } catch (const std::exception& e) {
            throw ModelError(i, e.what());
        }
        if (sampler.observer) sampler.observer(i, *current, cache ? &*cache : nullptr);

        StepRecord rec;
        rec.index = i;
        rec.t = t;
        rec.norm_v_uc = l2_norm(current->v_uc());
        rec.norm_v_c = l2_norm(current->v_c());

        GuidedStep step = [&]() -> GuidedStep {
            constexpr double nan = std::numeric_limits<double>::quiet_NaN();
            if (!cache && needs_cache(cfg.mode)) {
                if (sampler.first_step == FirstStep::uncond) return {current->v_uc(), nan, nan, nan};
                return {cfg_update(*current, cfg.w), nan, nan, nan};
            }
            return guided_step(*current, cache ? &*cache : nullptr, cfg);
        }();
        rec.used_cache = cache.has_value() && needs_cache(cfg.mode);
        rec.mode = rec.used_cache || !needs_cache(cfg.mode) ? cfg.mode : GuidanceMode::cfg;
        rec.mask_fraction_uc = step.mask_fraction_uc;
        rec.mask_fraction_c = step.mask_fraction_c;
        rec.rho = step.rho;
        rec.norm_guided = l2_norm(step.velocity);

        cache = std::move(current);
        x = euler_step(x, step.velocity, schedule.dt());

        double abs_sum = 0.0;
        for (double v : x.values()) abs_sum += std::abs(v);
        rec.mean_abs_x = abs_sum / static_cast<double>(x.size());
        traj.steps.push_back(rec);
        if (sampler.keep_snapshots) traj.snapshots.push_back(x);
    }
    traj.x0 = std::move(x);
    return traj;
}

}  // namespace lfcfg
