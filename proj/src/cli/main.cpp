#include "lfcfg/cli.hpp"

#include <optional>
#include <vector>

#include "CLI11.hpp"
#include "lfcfg/commands.hpp"
#include "lfcfg/error.hpp"

namespace lfcfg {
namespace {

struct Options {
    std::string config;
    std::vector<std::string> overrides;
    std::optional<int> jobs;
    std::optional<std::string> out;
    std::optional<std::string> manifest;
};

void add_common(CLI::App* sub, Options& o) {
    sub->add_option("--config", o.config, "JSON run config (defaults apply when omitted)")->check(CLI::ExistingFile);
    sub->add_option("--set", o.overrides, "override a config key, e.g. --set w=7 --set backend.testbed.sigma=0.2");
    sub->add_option("--jobs", o.jobs, "worker threads over seeds")->check(CLI::PositiveNumber);
    sub->add_option("--out", o.out, "output directory");
}

RunConfig resolve(const Options& o) {
    auto overrides = o.overrides;
    if (o.jobs) overrides.push_back("jobs=" + std::to_string(*o.jobs));
    if (o.manifest) {
        overrides.push_back("backend.type=replay");
        // Quote so the path is never read as a JSON literal.
        overrides.push_back("backend.manifest=\"" + *o.manifest + "\"");
    }
    RunConfig cfg = o.config.empty() ? parse_config("{}", ".", overrides) : load_config(o.config, overrides);
    if (o.out) cfg.out = *o.out;
    return cfg;
}

std::string fmt(double v) {
    auto s = format_number(v);
    return s.empty() ? "nan" : s;
}

}  // namespace

std::string error_line(const std::exception& e) {
    std::string kind = "internal";
    if (const auto* le = dynamic_cast<const Error*>(&e)) kind = to_string(le->kind());
    if (const auto* me = dynamic_cast<const ManifestError*>(&e)) kind += std::string("/") + to_string(me->code());
    std::string msg;
    for (char c : std::string(e.what())) {
        if (c == '"' || c == '\\') msg += '\\';
        msg += c == '\n' ? ' ' : c;
    }
    return "error: kind=" + kind + " message=\"" + msg + "\"";
}

int exit_code_for(const std::exception& e) {
    if (const auto* le = dynamic_cast<const Error*>(&e)) {
        if (le->kind() == ErrorKind::config) return 2;
        if (le->kind() == ErrorKind::manifest) return 3;
    }
    return 1;
}

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Low-frequency guided sampling on an analytic testbed or recorded velocities"};
    app.require_subcommand(1);
    Options o;
    auto* sample = app.add_subcommand("sample", "sample one image per seed");
    auto* ablate = app.add_subcommand("ablate", "sweep one guidance parameter");
    auto* diagnose = app.add_subcommand("diagnose", "compare CFG against the region-zeroing variants");
    auto* replay = app.add_subcommand("replay", "compose guided velocities from a recorded session");
    auto* rep = app.add_subcommand("report", "aggregate trajectory CSVs from a previous sample run");
    for (auto* s : {sample, ablate, diagnose, replay, rep}) add_common(s, o);
    replay->add_option("--manifest", o.manifest, "replay manifest.json")->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        const RunConfig cfg = resolve(o);
        if (sample->parsed()) {
            const auto r = cmd_sample(cfg);
            out << "sampled " << r.seeds.size() << " seeds, saturation " << fmt(r.saturation_mean) << " +- "
                << fmt(r.saturation_std) << ", clipped " << fmt(r.clipped_mean) << "\n";
        } else if (ablate->parsed()) {
            const auto r = cmd_ablate(cfg);
            for (const auto& row : r.rows) {
                out << to_string(r.axis) << "=" << fmt(row.value) << " saturation " << fmt(row.saturation_mean)
                    << " +- " << fmt(row.saturation_std) << " clipped " << fmt(row.clipped_mean) << "\n";
            }
        } else if (diagnose->parsed()) {
            for (const auto& row : cmd_diagnose(cfg)) {
                out << row.mode << " saturation " << fmt(row.saturation_mean) << " +- " << fmt(row.saturation_std)
                    << "\n";
            }
        } else if (replay->parsed()) {
            const auto steps = cmd_replay(cfg);
            out << "composed " << steps.size() << " steps into " << cfg.out.string() << "\n";
        } else {
            for (const auto& row : cmd_report(cfg)) {
                out << row.metric << " " << fmt(row.mean) << " +- " << fmt(row.std) << " (n=" << row.n << ")\n";
            }
        }
    } catch (const std::exception& e) {
        err << error_line(e) << "\n";
        return exit_code_for(e);
    }
    return 0;
}

}  // namespace lfcfg
