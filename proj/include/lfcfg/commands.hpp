#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "lfcfg/config.hpp"
#include "lfcfg/metrics.hpp"
#include "lfcfg/models.hpp"
#include "lfcfg/sampler.hpp"

namespace lfcfg {

/// Builds the velocity model named by the backend section.
std::unique_ptr<VelocityModel> make_model(const BackendConfig& backend);

/// Runs one trajectory per seed on `jobs` worker threads. Results are in
/// seed order and do not depend on the number of workers.
std::vector<Trajectory> run_seeds(const VelocityModel& model, const GuidanceConfig& guidance,
                                  const SamplerConfig& sampler, const std::vector<std::uint64_t>& seeds, int jobs);

struct SeedOutcome {
    std::uint64_t seed;
    RunReport report;
};

struct SampleResult {
    std::vector<SeedOutcome> seeds;
    double saturation_mean;
    double saturation_std;
    double clipped_mean;
    double clipped_std;
};

/// Writes seed_<s>.ppm, seed_<s>_trajectory.csv and summary.csv into cfg.out.
SampleResult cmd_sample(const RunConfig& cfg);

struct AblateRow {
    double value;
    std::string mode;
    double saturation_mean;
    double saturation_std;
    double clipped_mean;
    double clipped_std;
    std::size_t n_seeds;
};

struct AblateResult {
    AblateAxis axis;
    std::vector<AblateRow> rows;
};

/// One row per axis value; writes ablate_<axis>.csv into cfg.out.
AblateResult cmd_ablate(const RunConfig& cfg);

struct DiagnoseRow {
    std::string mode;
    double saturation_mean;
    double saturation_std;
    double clipped_mean;
    std::vector<double> per_seed_saturation;
};

/// Runs every mode in cfg.diagnose_modes for every seed; writes one
/// diagnose_seed_<s>.ppm strip per seed (panels in mode order) and diagnose.csv.
std::vector<DiagnoseRow> cmd_diagnose(const RunConfig& cfg);

struct ReplayStepOutput {
    std::size_t step;
    double t;
    double mask_fraction_uc;
    double mask_fraction_c;
    double rho;
    std::filesystem::path path;
};

/// Composes guided velocities from the recorded pairs (open loop) and writes
/// replay_step_<i>.npy plus replay_metrics.csv into cfg.out.
std::vector<ReplayStepOutput> cmd_replay(const RunConfig& cfg);

struct ReportRow {
    std::string metric;
    double mean;
    double std;
    std::size_t n;
};

/// Aggregates the summary rows of seed_<s>_trajectory.csv files found in
/// cfg.out into report.csv.
std::vector<ReportRow> cmd_report(const RunConfig& cfg);

/// Mean and population std.
std::pair<double, double> mean_std(const std::vector<double>& v);

}  // namespace lfcfg
