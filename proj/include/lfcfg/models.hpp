#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lfcfg/error.hpp"
#include "lfcfg/field.hpp"
#include "lfcfg/guidance.hpp"
#include "lfcfg/npy.hpp"

namespace lfcfg {

/// Source of velocities v(x_t, t, condition). `condition` empty means the
/// unconditional term. Implementations must be deterministic and safe to call
/// concurrently.
class VelocityModel {
public:
    virtual ~VelocityModel() = default;

    virtual Shape shape() const = 0;
    virtual Field evaluate(const Field& x_t, double t, std::optional<int> condition) const = 0;
};

struct MixtureComponent {
    Field mean;
    double sigma;
    double log_prior;
};

/// Mixture of isotropic Gaussians x_0 ~ N(mu_c, sigma_c^2 I) under the linear
/// interpolation x_t = (1 - t) x_0 + t x_1 with x_1 ~ N(0, I).
///
/// Priors are held as log-probabilities so very rare classes stay representable;
/// they must normalise (logsumexp = 0 within 1e-9).
class GaussianMixtureModel final : public VelocityModel {
public:
    explicit GaussianMixtureModel(std::vector<MixtureComponent> components);

    /// Convenience constructor from plain priors.
    static GaussianMixtureModel from_priors(std::vector<Field> means, std::vector<double> sigmas,
                                            std::vector<double> priors);

    std::size_t num_classes() const noexcept { return components_.size(); }
    const MixtureComponent& component(std::size_t c) const { return components_.at(c); }

    Shape shape() const override { return components_.front().mean.shape(); }
    Field evaluate(const Field& x_t, double t, std::optional<int> condition) const override;

    /// E[x_1 - x_0 | x_t, class c]:
    /// ((t - (1 - t) sigma^2) / D) (x_t - (1 - t) mu) - mu, D = (1 - t)^2 sigma^2 + t^2.
    Field cond_velocity(const Field& x_t, double t, int c) const;

    /// Posterior class weights given x_t, computed jointly over all elements.
    std::vector<double> posterior(const Field& x_t, double t) const;

    /// Posterior-weighted sum of conditional velocities.
    Field uncond_velocity(const Field& x_t, double t) const;

private:
    void check_inputs(const Field& x_t, double t) const;

    std::vector<MixtureComponent> components_;
};

struct TestbedSpec {
    std::size_t classes = 2;
    std::size_t channels = 3;
    std::size_t height = 64;
    std::size_t width = 64;
    std::uint64_t seed = 1;
    double sigma = 0.3;
    double contrast = 0.6;
    std::size_t blobs = 5;
    // Blob standard deviation as a fraction of min(H, W), jittered by [0.7, 1.3].
    double blob_width = 0.2;
    // Log prior of class 0 (the class the sampler conditions on by default);
    // the remaining mass is split evenly. Empty means uniform priors.
    std::optional<double> target_log_prior = -200.0;

    void validate() const;
};

/// Class means are sums of broad 2-D Gaussian blobs with per-channel
/// amplitudes drawn from [-contrast, contrast].
GaussianMixtureModel gmm_build_testbed(const TestbedSpec& spec);

enum class ManifestErrorCode { invalid_schema, missing_file, shape_mismatch, dtype_mismatch, non_monotone_t };

const char* to_string(ManifestErrorCode code);

class ManifestError : public Error {
public:
    ManifestError(ManifestErrorCode code, const std::string& message, std::optional<std::size_t> step = std::nullopt);

    ManifestErrorCode code() const noexcept { return code_; }
    std::optional<std::size_t> step() const noexcept { return step_; }

private:
    ManifestErrorCode code_;
    std::optional<std::size_t> step_;
};

struct ManifestStep {
    double t;
    std::filesystem::path v_uc;  // resolved against the manifest directory
    std::filesystem::path v_c;
};

struct ReplayManifest {
    int version = 1;
    NpyDtype dtype = NpyDtype::f32;
    Shape shape;
    std::vector<ManifestStep> steps;
    std::string source;
};

/// Parses and validates the manifest document; paths stay relative to `base_dir`.
ReplayManifest parse_manifest(const std::string& json_text, const std::filesystem::path& base_dir);
ReplayManifest load_manifest(const std::filesystem::path& manifest_path);

/// Writes NPY pairs plus manifest.json into `dir` (used by tests and tooling).
void write_replay_session(const std::filesystem::path& dir, const std::vector<VelocityPair>& steps, NpyDtype dtype,
                          const std::string& source);

/// Open-loop replay of recorded velocity pairs: evaluate() ignores x_t and
/// serves the recording whose t matches the request.
class ReplayModel final : public VelocityModel {
public:
    explicit ReplayModel(ReplayManifest manifest);

    const ReplayManifest& manifest() const noexcept { return manifest_; }
    std::size_t num_steps() const noexcept { return pairs_.size(); }
    const VelocityPair& replay_velocity(std::size_t step) const { return pairs_.at(step); }

    Shape shape() const override { return manifest_.shape; }
    Field evaluate(const Field& x_t, double t, std::optional<int> condition) const override;

    static constexpr double kTimeTolerance = 1e-9;

private:
    ReplayManifest manifest_;
    std::vector<VelocityPair> pairs_;
};

ReplayModel replay_load(const std::filesystem::path& manifest_path);

}  // namespace lfcfg
