#include "lfcfg/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "lfcfg/error.hpp"

namespace lfcfg {
namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, _] : obj.items()) {
        if (!allowed.count(key)) throw ConfigError("unknown config key '" + (where.empty() ? key : where + "." + key) + "'");
    }
}

template <typename T>
T get(const json& obj, const char* key, const std::string& where) {
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key '" + (where.empty() ? std::string(key) : where + "." + key) +
                          "' has the wrong type");
    }
}

void apply_override(json& doc, const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + text + "' must look like key=value");
    const std::string path = text.substr(0, eq), raw = text.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::parse_error&) {
        value = raw;
    }
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw ConfigError("override '" + text + "' has an empty key segment");
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        if (!node->contains(key)) (*node)[key] = json::object();
        node = &(*node)[key];
        start = dot + 1;
    }
}

TestbedSpec parse_testbed(const json& t) {
    reject_unknown(t, {"classes", "channels", "height", "width", "seed", "sigma", "contrast", "blobs", "blob_width",
                       "target_log_prior"},
                   "backend.testbed");
    TestbedSpec s;
    const std::string w = "backend.testbed";
    if (t.contains("classes")) s.classes = get<std::size_t>(t, "classes", w);
    if (t.contains("channels")) s.channels = get<std::size_t>(t, "channels", w);
    if (t.contains("height")) s.height = get<std::size_t>(t, "height", w);
    if (t.contains("width")) s.width = get<std::size_t>(t, "width", w);
    if (t.contains("seed")) s.seed = get<std::uint64_t>(t, "seed", w);
    if (t.contains("sigma")) s.sigma = get<double>(t, "sigma", w);
    if (t.contains("contrast")) s.contrast = get<double>(t, "contrast", w);
    if (t.contains("blobs")) s.blobs = get<std::size_t>(t, "blobs", w);
    if (t.contains("blob_width")) s.blob_width = get<double>(t, "blob_width", w);
    if (t.contains("target_log_prior")) {
        if (t["target_log_prior"].is_null()) {
            s.target_log_prior.reset();
        } else {
            s.target_log_prior = get<double>(t, "target_log_prior", w);
        }
    }
    return s;
}

}  // namespace

const char* to_string(AblateAxis axis) {
    switch (axis) {
        case AblateAxis::w: return "w";
        case AblateAxis::k: return "k";
        case AblateAxis::s: return "s";
        case AblateAxis::combination: return "combination";
    }
    return "unknown";
}

AblateAxis parse_ablate_axis(const std::string& name) {
    if (name == "w") return AblateAxis::w;
    if (name == "k") return AblateAxis::k;
    if (name == "s") return AblateAxis::s;
    if (name == "combination") return AblateAxis::combination;
    throw ConfigError("unknown ablate axis '" + name + "' (expected w, k, s or combination)");
}

SamplerConfig RunConfig::sampler() const {
    SamplerConfig s;
    s.steps = steps;
    s.first_step = first_step;
    s.condition = condition;
    return s;
}

void RunConfig::validate() const {
    guidance.validate();
    sampler().validate();
    if (seeds.empty()) throw ConfigError("seeds list is empty");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    if (backend.type == BackendType::analytic) {
        backend.testbed.validate();
        if (static_cast<std::size_t>(condition) >= backend.testbed.classes) {
            throw ConfigError("condition " + std::to_string(condition) + " exceeds testbed classes");
        }
    } else if (backend.manifest.empty()) {
        throw ConfigError("replay backend needs backend.manifest");
    }
    if (ablate.values.empty()) throw ConfigError("ablate.values is empty");
    if (diagnose_modes.empty()) throw ConfigError("diagnose.modes is empty");
}

RunConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir,
                       const std::vector<std::string>& overrides) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& o : overrides) apply_override(doc, o);

    reject_unknown(doc,
                   {"mode", "w", "scale", "upsample", "k", "rho_mode", "rho_manual", "combination", "apg_eta",
                    "unify_masks", "change_mode", "T", "first_step", "condition", "seeds", "out", "jobs",
                    "saturation_formula", "backend", "ablate", "diagnose", "replay"},
                   "");
    RunConfig c;
    auto& g = c.guidance;
    if (doc.contains("mode")) g.mode = parse_guidance_mode(get<std::string>(doc, "mode", ""));
    if (doc.contains("w")) g.w = get<double>(doc, "w", "");
    if (doc.contains("scale")) g.scale = get<int>(doc, "scale", "");
    if (doc.contains("upsample")) g.upsample = parse_upsample_kernel(get<std::string>(doc, "upsample", ""));
    if (doc.contains("k")) g.policy.k = get<double>(doc, "k", "");
    if (doc.contains("rho_mode")) g.policy.rho_mode = parse_rho_mode(get<std::string>(doc, "rho_mode", ""));
    if (doc.contains("rho_manual") && !doc["rho_manual"].is_null()) g.policy.rho_manual = get<double>(doc, "rho_manual", "");
    if (doc.contains("combination")) g.combination = get<int>(doc, "combination", "");
    if (doc.contains("apg_eta")) g.apg_eta = get<double>(doc, "apg_eta", "");
    if (doc.contains("unify_masks")) g.unify_masks = get<bool>(doc, "unify_masks", "");
    if (doc.contains("change_mode")) {
        const auto m = get<std::string>(doc, "change_mode", "");
        if (m == "per-location") {
            g.change_mode = ChangeMode::per_location;
        } else if (m == "per-channel") {
            g.change_mode = ChangeMode::per_channel;
        } else {
            throw ConfigError("unknown change_mode '" + m + "' (expected per-location or per-channel)");
        }
    }
    if (doc.contains("T")) c.steps = get<int>(doc, "T", "");
    if (doc.contains("first_step")) c.first_step = parse_first_step(get<std::string>(doc, "first_step", ""));
    if (doc.contains("condition")) c.condition = get<int>(doc, "condition", "");
    if (doc.contains("seeds")) c.seeds = get<std::vector<std::uint64_t>>(doc, "seeds", "");
    if (doc.contains("out")) c.out = get<std::string>(doc, "out", "");
    if (doc.contains("jobs")) c.jobs = get<int>(doc, "jobs", "");
    if (doc.contains("saturation_formula"))
        c.saturation_formula = parse_saturation_formula(get<std::string>(doc, "saturation_formula", ""));

    if (doc.contains("backend")) {
        const auto& b = doc["backend"];
        reject_unknown(b, {"type", "testbed", "manifest"}, "backend");
        const std::string type = b.contains("type") ? get<std::string>(b, "type", "backend") : "analytic";
        if (type == "analytic") {
            c.backend.type = BackendType::analytic;
            if (b.contains("manifest")) throw ConfigError("backend.manifest is only valid for the replay backend");
            if (b.contains("testbed")) c.backend.testbed = parse_testbed(b["testbed"]);
        } else if (type == "replay") {
            c.backend.type = BackendType::replay;
            if (b.contains("testbed")) throw ConfigError("backend.testbed is only valid for the analytic backend");
            if (!b.contains("manifest")) throw ConfigError("replay backend needs backend.manifest");
            std::filesystem::path p = get<std::string>(b, "manifest", "backend");
            c.backend.manifest = p.is_absolute() ? p : base_dir / p;
        } else {
            throw ConfigError("unknown backend type '" + type + "' (expected analytic or replay)");
        }
    }
    if (doc.contains("ablate")) {
        const auto& a = doc["ablate"];
        reject_unknown(a, {"axis", "values"}, "ablate");
        if (a.contains("axis")) c.ablate.axis = parse_ablate_axis(get<std::string>(a, "axis", "ablate"));
        if (a.contains("values")) c.ablate.values = get<std::vector<double>>(a, "values", "ablate");
    }
    if (doc.contains("diagnose")) {
        const auto& d = doc["diagnose"];
        reject_unknown(d, {"modes"}, "diagnose");
        if (d.contains("modes")) {
            c.diagnose_modes.clear();
            for (const auto& m : get<std::vector<std::string>>(d, "modes", "diagnose"))
                c.diagnose_modes.push_back(parse_guidance_mode(m));
        }
    }
    if (doc.contains("replay")) {
        const auto& r = doc["replay"];
        reject_unknown(r, {"dtype"}, "replay");
        if (r.contains("dtype")) {
            try {
                c.replay_dtype = parse_dtype(get<std::string>(r, "dtype", "replay"));
            } catch (const FormatError& e) {
                throw ConfigError(std::string("replay.dtype: ") + e.what());
            }
        }
    }
    c.validate();
    return c;
}

RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.parent_path(), overrides);
}

std::vector<std::uint64_t> effective_seeds(const RunConfig& cfg) {
    std::uint64_t base = 0;
    if (const char* env = std::getenv("LFCFG_SEED_BASE"); env && *env) {
        char* end = nullptr;
        base = std::strtoull(env, &end, 10);
        if (end == env || *end != '\0') throw ConfigError(std::string("LFCFG_SEED_BASE is not an integer: ") + env);
    }
    std::vector<std::uint64_t> out;
    for (auto s : cfg.seeds) out.push_back(s + base);
    return out;
}

std::vector<std::pair<std::string, std::string>> config_echo(const RunConfig& cfg) {
    const auto& g = cfg.guidance;
    return {{"mode", to_string(g.mode)},
            {"w", format_number(g.w)},
            {"scale", std::to_string(g.scale)},
            {"k", format_number(g.policy.k)},
            {"rho_mode", to_string(g.policy.rho_mode)},
            {"combination", std::to_string(g.combination)},
            {"T", std::to_string(cfg.steps)}};
}

}  // namespace lfcfg
