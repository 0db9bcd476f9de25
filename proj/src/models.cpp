#include "lfcfg/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "json.hpp"
#include "lfcfg/io.hpp"

namespace lfcfg {

// ---------------------------------------------------------------------------
// Gaussian mixture

GaussianMixtureModel::GaussianMixtureModel(std::vector<MixtureComponent> components)
    : components_(std::move(components)) {
    if (components_.empty()) throw ConfigError("mixture needs at least one component");
    const Shape s = components_.front().mean.shape();
    double max_lp = -std::numeric_limits<double>::infinity();
    for (const auto& comp : components_) {
        if (comp.mean.shape() != s) throw ShapeMismatchError("mixture component means must share a shape");
        if (!(comp.sigma > 0.0) || !std::isfinite(comp.sigma)) throw ConfigError("mixture sigma must be > 0");
        if (std::isnan(comp.log_prior) || comp.log_prior > 0.0) throw ConfigError("mixture log prior must be <= 0");
        max_lp = std::max(max_lp, comp.log_prior);
    }
    if (!std::isfinite(max_lp)) throw ConfigError("mixture priors are all zero");
    double z = 0.0;
    for (const auto& comp : components_) z += std::exp(comp.log_prior - max_lp);
    const double lse = max_lp + std::log(z);
    if (std::abs(lse) > 1e-9) throw ConfigError("mixture priors must sum to 1 (logsumexp = " + std::to_string(lse) + ")");
}

GaussianMixtureModel GaussianMixtureModel::from_priors(std::vector<Field> means, std::vector<double> sigmas,
                                                       std::vector<double> priors) {
    if (means.size() != sigmas.size() || means.size() != priors.size()) {
        throw ConfigError("mixture: means, sigmas and priors must have equal length");
    }
    std::vector<MixtureComponent> comps;
    for (std::size_t i = 0; i < means.size(); ++i) {
        if (!(priors[i] >= 0.0)) throw ConfigError("mixture prior must be >= 0");
        comps.push_back({std::move(means[i]), sigmas[i], std::log(priors[i])});
    }
    return GaussianMixtureModel(std::move(comps));
}

void GaussianMixtureModel::check_inputs(const Field& x_t, double t) const {
    if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("gmm: t must lie in [0, 1], got " + std::to_string(t));
    if (x_t.shape() != shape()) {
        throw ShapeMismatchError("gmm: x_t shape " + to_string(x_t.shape()) + " differs from model " +
                                 to_string(shape()));
    }
}

Field GaussianMixtureModel::cond_velocity(const Field& x_t, double t, int c) const {
    check_inputs(x_t, t);
    if (c < 0 || static_cast<std::size_t>(c) >= components_.size()) {
        throw ConfigError("gmm: class " + std::to_string(c) + " out of range");
    }
    const auto& comp = components_[static_cast<std::size_t>(c)];
    const double s2 = comp.sigma * comp.sigma;
    const double u = 1.0 - t;
    const double D = u * u * s2 + t * t;
    const double a = (t - u * s2) / D;
    std::vector<double> out(x_t.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double mu = comp.mean[i];
        out[i] = a * (x_t[i] - u * mu) - mu;
    }
    return Field(x_t.shape(), std::move(out));
}

std::vector<double> GaussianMixtureModel::posterior(const Field& x_t, double t) const {
    check_inputs(x_t, t);
    const double u = 1.0 - t;
    const auto n = static_cast<double>(x_t.size());
    std::vector<double> logw(components_.size());
    for (std::size_t c = 0; c < components_.size(); ++c) {
        const auto& comp = components_[c];
        const double D = u * u * comp.sigma * comp.sigma + t * t;
        double ss = 0.0;
        for (std::size_t i = 0; i < x_t.size(); ++i) {
            const double d = x_t[i] - u * comp.mean[i];
            ss += d * d;
        }
        logw[c] = comp.log_prior - 0.5 * n * std::log(2.0 * std::numbers::pi * D) - ss / (2.0 * D);
    }
    const double mx = *std::max_element(logw.begin(), logw.end());
    if (!std::isfinite(mx)) throw DegenerateError("gmm: every posterior log-weight is -inf or NaN");
    double z = 0.0;
    for (double& v : logw) {
        v = std::exp(v - mx);
        z += v;
    }
    for (double& v : logw) v /= z;
    return logw;
}

Field GaussianMixtureModel::uncond_velocity(const Field& x_t, double t) const {
    const std::vector<double> alpha = posterior(x_t, t);
    std::vector<double> acc(x_t.size(), 0.0);
    for (std::size_t c = 0; c < components_.size(); ++c) {
        if (alpha[c] == 0.0) continue;
        const Field v = cond_velocity(x_t, t, static_cast<int>(c));
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += alpha[c] * v[i];
    }
    return Field(x_t.shape(), std::move(acc));
}

Field GaussianMixtureModel::evaluate(const Field& x_t, double t, std::optional<int> condition) const {
    return condition ? cond_velocity(x_t, t, *condition) : uncond_velocity(x_t, t);
}

// ---------------------------------------------------------------------------
// Testbed

void TestbedSpec::validate() const {
    if (classes < 1) throw ConfigError("testbed: classes must be >= 1");
    if (channels < 1 || height < 1 || width < 1) throw ConfigError("testbed: C, H, W must be >= 1");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("testbed: sigma must be > 0");
    if (!(contrast >= 0.0) || !std::isfinite(contrast)) throw ConfigError("testbed: contrast must be >= 0");
    if (!(blob_width > 0.0)) throw ConfigError("testbed: blob_width must be > 0");
    if (target_log_prior) {
        if (!(*target_log_prior <= 0.0) || !std::isfinite(*target_log_prior)) {
            throw ConfigError("testbed: target_log_prior must be finite and <= 0");
        }
        if (classes == 1 && *target_log_prior != 0.0) throw ConfigError("testbed: a single class has log prior 0");
    }
}

GaussianMixtureModel gmm_build_testbed(const TestbedSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Shape shape{spec.channels, spec.height, spec.width};
    const double base_width = spec.blob_width * static_cast<double>(std::min(spec.height, spec.width));

    std::vector<MixtureComponent> comps;
    for (std::size_t k = 0; k < spec.classes; ++k) {
        std::vector<double> mu(shape.size(), 0.0);
        for (std::size_t b = 0; b < spec.blobs; ++b) {
            const double cy = unit(rng) * static_cast<double>(spec.height);
            const double cx = unit(rng) * static_cast<double>(spec.width);
            const double bw = base_width * (0.7 + 0.6 * unit(rng));
            std::vector<double> amp(spec.channels);
            for (auto& a : amp) a = spec.contrast * (2.0 * unit(rng) - 1.0);
            for (std::size_t h = 0; h < spec.height; ++h) {
                for (std::size_t w = 0; w < spec.width; ++w) {
                    const double dy = static_cast<double>(h) - cy, dx = static_cast<double>(w) - cx;
                    const double g = std::exp(-(dy * dy + dx * dx) / (2.0 * bw * bw));
                    for (std::size_t c = 0; c < spec.channels; ++c) mu[(c * spec.height + h) * spec.width + w] += amp[c] * g;
                }
            }
        }
        comps.push_back({Field(shape, std::move(mu)), spec.sigma, 0.0});
    }

    const auto K = static_cast<double>(spec.classes);
    if (spec.target_log_prior && spec.classes > 1) {
        const double lp0 = *spec.target_log_prior;
        // log((1 - e^lp0) / (K - 1)), stable for lp0 near 0 and for very negative lp0.
        const double rest = std::log(-std::expm1(lp0)) - std::log(K - 1.0);
        comps[0].log_prior = lp0;
        for (std::size_t k = 1; k < comps.size(); ++k) comps[k].log_prior = rest;
    } else {
        for (auto& c : comps) c.log_prior = -std::log(K);
    }
    return GaussianMixtureModel(std::move(comps));
}

// ---------------------------------------------------------------------------
// Replay

const char* to_string(ManifestErrorCode code) {
    switch (code) {
        case ManifestErrorCode::invalid_schema: return "invalid_schema";
        case ManifestErrorCode::missing_file: return "missing_file";
        case ManifestErrorCode::shape_mismatch: return "shape_mismatch";
        case ManifestErrorCode::dtype_mismatch: return "dtype_mismatch";
        case ManifestErrorCode::non_monotone_t: return "non_monotone_t";
    }
    return "unknown";
}

namespace {

std::string manifest_message(ManifestErrorCode code, const std::string& message, std::optional<std::size_t> step) {
    std::string out = std::string("manifest ") + to_string(code);
    if (step) out += " at step " + std::to_string(*step);
    return out + ": " + message;
}

[[noreturn]] void schema_error(const std::string& msg, std::optional<std::size_t> step = std::nullopt) {
    throw ManifestError(ManifestErrorCode::invalid_schema, msg, step);
}

}  // namespace

ManifestError::ManifestError(ManifestErrorCode code, const std::string& message, std::optional<std::size_t> step)
    : Error(ErrorKind::manifest, manifest_message(code, message, step)), code_(code), step_(step) {}

ReplayManifest parse_manifest(const std::string& json_text, const std::filesystem::path& base_dir) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        schema_error(std::string("not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) schema_error("top level must be an object");
    for (const auto& [key, _] : doc.items()) {
        if (key != "version" && key != "dtype" && key != "shape" && key != "steps" && key != "source") {
            schema_error("unknown key '" + key + "'");
        }
    }
    for (const char* key : {"version", "dtype", "shape", "steps"}) {
        if (!doc.contains(key)) schema_error(std::string("missing key '") + key + "'");
    }

    ReplayManifest m;
    if (!doc["version"].is_number_integer() || doc["version"].get<int>() != 1) schema_error("version must be 1");
    if (!doc["dtype"].is_string()) schema_error("dtype must be a string");
    const std::string dtype = doc["dtype"].get<std::string>();
    if (dtype == "float32") {
        m.dtype = NpyDtype::f32;
    } else if (dtype == "float64") {
        m.dtype = NpyDtype::f64;
    } else {
        schema_error("dtype must be float32 or float64, got '" + dtype + "'");
    }
    const auto& shape = doc["shape"];
    if (!shape.is_array() || shape.size() != 3) schema_error("shape must be [C, H, W]");
    for (const auto& d : shape)
        if (!d.is_number_unsigned() || d.get<std::size_t>() == 0) schema_error("shape entries must be positive integers");
    m.shape = Shape{shape[0].get<std::size_t>(), shape[1].get<std::size_t>(), shape[2].get<std::size_t>()};
    if (doc.contains("source")) {
        if (!doc["source"].is_string()) schema_error("source must be a string");
        m.source = doc["source"].get<std::string>();
    }

    const auto& steps = doc["steps"];
    if (!steps.is_array() || steps.empty()) schema_error("steps must be a non-empty array");
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const auto& s = steps[i];
        if (!s.is_object()) schema_error("step must be an object", i);
        for (const auto& [key, _] : s.items())
            if (key != "t" && key != "v_uc" && key != "v_c") schema_error("unknown step key '" + key + "'", i);
        if (!s.contains("t") || !s["t"].is_number()) schema_error("step needs numeric 't'", i);
        if (!s.contains("v_uc") || !s["v_uc"].is_string()) schema_error("step needs string 'v_uc'", i);
        if (!s.contains("v_c") || !s["v_c"].is_string()) schema_error("step needs string 'v_c'", i);
        const double t = s["t"].get<double>();
        if (!(t >= 0.0 && t <= 1.0)) schema_error("t must lie in [0, 1]", i);
        if (!m.steps.empty() && !(t < m.steps.back().t)) {
            throw ManifestError(ManifestErrorCode::non_monotone_t,
                                "t = " + std::to_string(t) + " does not decrease from " +
                                    std::to_string(m.steps.back().t),
                                i);
        }
        m.steps.push_back({t, base_dir / s["v_uc"].get<std::string>(), base_dir / s["v_c"].get<std::string>()});
    }
    return m;
}

ReplayManifest load_manifest(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw ManifestError(ManifestErrorCode::missing_file, "cannot open " + manifest_path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_manifest(ss.str(), manifest_path.parent_path());
}

void write_replay_session(const std::filesystem::path& dir, const std::vector<VelocityPair>& steps, NpyDtype dtype,
                          const std::string& source) {
    if (steps.empty()) throw ConfigError("write_replay_session: no steps");
    nlohmann::json doc;
    doc["version"] = 1;
    doc["dtype"] = to_string(dtype);
    const Shape s = steps.front().shape();
    doc["shape"] = {s.channels, s.height, s.width};
    doc["source"] = source;
    doc["steps"] = nlohmann::json::array();
    char name[64];
    for (std::size_t i = 0; i < steps.size(); ++i) {
        std::snprintf(name, sizeof name, "step_%03zu", i);
        const std::string uc = std::string(name) + "_uc.npy", c = std::string(name) + "_c.npy";
        npy_write(steps[i].v_uc(), dir / uc, dtype);
        npy_write(steps[i].v_c(), dir / c, dtype);
        doc["steps"].push_back({{"t", steps[i].t()}, {"v_uc", uc}, {"v_c", c}});
    }
    write_file_atomic(dir / "manifest.json", doc.dump(2) + "\n");
}

ReplayModel::ReplayModel(ReplayManifest manifest) : manifest_(std::move(manifest)) {
    auto load = [this](const std::filesystem::path& path, std::size_t step) {
        if (!std::filesystem::exists(path)) {
            throw ManifestError(ManifestErrorCode::missing_file, "file " + path.string() + " does not exist", step);
        }
        NpyDtype stored;
        Field f = [&] {
            try {
                return npy_read(path, &stored);
            } catch (const FormatError& e) {
                throw ManifestError(ManifestErrorCode::invalid_schema, path.string() + ": " + e.what(), step);
            }
        }();
        if (stored != manifest_.dtype) {
            throw ManifestError(ManifestErrorCode::dtype_mismatch,
                                path.string() + " stores " + to_string(stored) + ", manifest declares " +
                                    to_string(manifest_.dtype),
                                step);
        }
        if (f.shape() != manifest_.shape) {
            throw ManifestError(ManifestErrorCode::shape_mismatch,
                                path.string() + " has shape " + to_string(f.shape()) + ", manifest declares " +
                                    to_string(manifest_.shape),
                                step);
        }
        return f;
    };
    for (std::size_t i = 0; i < manifest_.steps.size(); ++i) {
        const auto& s = manifest_.steps[i];
        pairs_.emplace_back(load(s.v_uc, i), load(s.v_c, i), s.t);
    }
}

Field ReplayModel::evaluate(const Field& /*x_t*/, double t, std::optional<int> condition) const {
    for (const auto& p : pairs_) {
        if (std::abs(p.t() - t) <= kTimeTolerance) return condition ? p.v_c() : p.v_uc();
    }
    throw ManifestError(ManifestErrorCode::invalid_schema, "no recorded step at t = " + std::to_string(t));
}

ReplayModel replay_load(const std::filesystem::path& manifest_path) {
    return ReplayModel(load_manifest(manifest_path));
}

}  // namespace lfcfg
