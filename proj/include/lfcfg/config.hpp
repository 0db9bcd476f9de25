#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lfcfg/guidance.hpp"
#include "lfcfg/metrics.hpp"
#include "lfcfg/models.hpp"
#include "lfcfg/npy.hpp"
#include "lfcfg/sampler.hpp"

namespace lfcfg {

enum class BackendType { analytic, replay };

struct BackendConfig {
    BackendType type = BackendType::analytic;
    TestbedSpec testbed{};
    std::filesystem::path manifest;  // replay only; resolved against the config file location
};

enum class AblateAxis { w, k, s, combination };

const char* to_string(AblateAxis axis);
AblateAxis parse_ablate_axis(const std::string& name);

struct AblateSpec {
    AblateAxis axis = AblateAxis::w;
    std::vector<double> values{1.0, 5.0, 15.0};
};

/// Everything one CLI invocation needs. See README for the JSON schema.
struct RunConfig {
    GuidanceConfig guidance{};
    BackendConfig backend{};
    int steps = 20;
    FirstStep first_step = FirstStep::cfg;
    int condition = 0;
    std::vector<std::uint64_t> seeds{0};
    std::filesystem::path out = "out";
    int jobs = 1;
    SaturationFormula saturation_formula = SaturationFormula::hsv_mean;
    AblateSpec ablate{};
    std::vector<GuidanceMode> diagnose_modes{GuidanceMode::cfg, GuidanceMode::diag_zero_high,
                                              GuidanceMode::diag_zero_low_change,
                                              GuidanceMode::diag_zero_high_change};
    std::optional<NpyDtype> replay_dtype;  // defaults to the manifest dtype

    SamplerConfig sampler() const;
    void validate() const;
};

/// Parses a JSON config document. Unknown keys are rejected. `overrides` are
/// "dotted.key=value" strings applied to the document before validation; the
/// value is read as JSON when it parses, otherwise as a string.
RunConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir = ".",
                       const std::vector<std::string>& overrides = {});
RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Adds LFCFG_SEED_BASE (default 0) to every configured seed.
std::vector<std::uint64_t> effective_seeds(const RunConfig& cfg);

/// Key/value echo of the guidance-relevant fields for reports.
std::vector<std::pair<std::string, std::string>> config_echo(const RunConfig& cfg);

}  // namespace lfcfg
