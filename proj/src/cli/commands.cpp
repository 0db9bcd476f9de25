#include "lfcfg/commands.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "lfcfg/error.hpp"
#include "lfcfg/io.hpp"
#include "lfcfg/npy.hpp"

namespace lfcfg {
namespace {

std::string seed_stem(std::uint64_t seed) { return "seed_" + std::to_string(seed); }

std::string join(const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) line += ',';
        line += cells[i];
    }
    return line + "\n";
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

GuidanceConfig with_axis(GuidanceConfig g, AblateAxis axis, double value) {
    auto as_int = [&](const char* what) {
        if (value != std::floor(value)) throw ConfigError(std::string("ablate ") + what + " values must be integers");
        return static_cast<int>(value);
    };
    switch (axis) {
        case AblateAxis::w: g.w = value; break;
        case AblateAxis::k: g.policy.k = value; break;
        case AblateAxis::s: g.scale = as_int("s"); break;
        case AblateAxis::combination: g.combination = as_int("combination"); break;
    }
    g.validate();
    return g;
}

std::vector<RunReport> reports_for(const RunConfig& cfg, const GuidanceConfig& g,
                                   const std::vector<std::uint64_t>& seeds, std::vector<Trajectory>* keep = nullptr) {
    const auto model = make_model(cfg.backend);
    auto trajs = run_seeds(*model, g, cfg.sampler(), seeds, cfg.jobs);
    RunConfig echo_cfg = cfg;
    echo_cfg.guidance = g;
    std::vector<RunReport> out;
    for (const auto& t : trajs) out.push_back(report(t, cfg.saturation_formula, config_echo(echo_cfg)));
    if (keep) *keep = std::move(trajs);
    return out;
}

}  // namespace

std::pair<double, double> mean_std(const std::vector<double>& v) {
    if (v.empty()) return {std::nan(""), std::nan("")};
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return {m, std::sqrt(s / static_cast<double>(v.size()))};
}

std::unique_ptr<VelocityModel> make_model(const BackendConfig& backend) {
    if (backend.type == BackendType::analytic) {
        return std::make_unique<GaussianMixtureModel>(gmm_build_testbed(backend.testbed));
    }
    return std::make_unique<ReplayModel>(replay_load(backend.manifest));
}

std::vector<Trajectory> run_seeds(const VelocityModel& model, const GuidanceConfig& guidance,
                                  const SamplerConfig& sampler, const std::vector<std::uint64_t>& seeds, int jobs) {
    std::vector<std::optional<Trajectory>> slots(seeds.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < seeds.size();) {
            try {
                slots[i] = run(model, guidance, sampler, seeds[i]);
            } catch (...) {
                std::lock_guard lock(failure_mu);
                if (!failure) failure = std::current_exception();
                next = seeds.size();
            }
        }
    };
    const auto n = static_cast<std::size_t>(std::max(1, jobs));
    if (n == 1 || seeds.size() == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t i = 0; i < std::min(n, seeds.size()); ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);
    std::vector<Trajectory> out;
    out.reserve(slots.size());
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

SampleResult cmd_sample(const RunConfig& cfg) {
    const auto seeds = effective_seeds(cfg);
    std::vector<Trajectory> trajs;
    const auto reports = reports_for(cfg, cfg.guidance, seeds, &trajs);

    SampleResult res;
    std::vector<double> sats, clips;
    std::string summary = "seed,saturation,clipped_fraction,mean_abs_x\n";
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        const auto& r = reports[i];
        const auto& x0 = *trajs[i].x0;
        if (x0.channels() == 3) write_ppm(to_image(x0), cfg.out / (seed_stem(seeds[i]) + ".ppm"));
        write_file_atomic(cfg.out / (seed_stem(seeds[i]) + "_trajectory.csv"), report_csv(r));
        summary += join({std::to_string(seeds[i]), format_number(r.saturation), format_number(r.clipped_fraction),
                         format_number(trajs[i].steps.back().mean_abs_x)});
        sats.push_back(r.saturation);
        clips.push_back(r.clipped_fraction);
        res.seeds.push_back({seeds[i], r});
    }
    std::tie(res.saturation_mean, res.saturation_std) = mean_std(sats);
    std::tie(res.clipped_mean, res.clipped_std) = mean_std(clips);
    summary += join({"mean", format_number(res.saturation_mean), format_number(res.clipped_mean), ""});
    summary += join({"std", format_number(res.saturation_std), format_number(res.clipped_std), ""});
    write_file_atomic(cfg.out / "summary.csv", summary);
    return res;
}

AblateResult cmd_ablate(const RunConfig& cfg) {
    const auto seeds = effective_seeds(cfg);
    AblateResult res{cfg.ablate.axis, {}};
    std::string csv = "axis,value,mode,saturation_mean,saturation_std,clipped_mean,clipped_std,n_seeds\n";
    for (double value : cfg.ablate.values) {
        const auto g = with_axis(cfg.guidance, cfg.ablate.axis, value);
        std::vector<double> sats, clips;
        for (const auto& r : reports_for(cfg, g, seeds)) {
            sats.push_back(r.saturation);
            clips.push_back(r.clipped_fraction);
        }
        AblateRow row{value, to_string(g.mode), 0, 0, 0, 0, seeds.size()};
        std::tie(row.saturation_mean, row.saturation_std) = mean_std(sats);
        std::tie(row.clipped_mean, row.clipped_std) = mean_std(clips);
        csv += join({to_string(res.axis), format_number(value), row.mode, format_number(row.saturation_mean),
                     format_number(row.saturation_std), format_number(row.clipped_mean),
                     format_number(row.clipped_std), std::to_string(row.n_seeds)});
        res.rows.push_back(std::move(row));
    }
    write_file_atomic(cfg.out / ("ablate_" + std::string(to_string(res.axis)) + ".csv"), csv);
    return res;
}

std::vector<DiagnoseRow> cmd_diagnose(const RunConfig& cfg) {
    const auto seeds = effective_seeds(cfg);
    std::vector<DiagnoseRow> rows;
    std::vector<std::vector<ImageU8>> panels(seeds.size());
    for (const auto mode : cfg.diagnose_modes) {
        auto g = cfg.guidance;
        g.mode = mode;
        std::vector<Trajectory> trajs;
        const auto reports = reports_for(cfg, g, seeds, &trajs);
        DiagnoseRow row{to_string(mode), 0, 0, 0, {}};
        std::vector<double> clips;
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            row.per_seed_saturation.push_back(reports[i].saturation);
            clips.push_back(reports[i].clipped_fraction);
            if (trajs[i].x0->channels() == 3) panels[i].push_back(to_image(*trajs[i].x0));
        }
        std::tie(row.saturation_mean, row.saturation_std) = mean_std(row.per_seed_saturation);
        row.clipped_mean = mean_std(clips).first;
        rows.push_back(std::move(row));
    }
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        if (!panels[i].empty()) write_ppm(hconcat(panels[i]), cfg.out / ("diagnose_" + seed_stem(seeds[i]) + ".ppm"));
    }
    std::string csv = "mode,seed,saturation,saturation_std,clipped_mean\n";
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            csv += join({r.mode, std::to_string(seeds[i]), format_number(r.per_seed_saturation[i]), "", ""});
        }
        csv += join({r.mode, "all", format_number(r.saturation_mean), format_number(r.saturation_std),
                     format_number(r.clipped_mean)});
    }
    write_file_atomic(cfg.out / "diagnose.csv", csv);
    return rows;
}

std::vector<ReplayStepOutput> cmd_replay(const RunConfig& cfg) {
    if (cfg.backend.type != BackendType::replay) throw ConfigError("replay needs backend.type = replay");
    const auto model = replay_load(cfg.backend.manifest);
    const NpyDtype dtype = cfg.replay_dtype.value_or(model.manifest().dtype);
    const auto& g = cfg.guidance;

    std::vector<ReplayStepOutput> out;
    std::string csv = "step,t,mask_fraction_uc,mask_fraction_c,rho,norm_composed\n";
    for (std::size_t i = 0; i < model.num_steps(); ++i) {
        const auto& p = model.replay_velocity(i);
        GuidedStep gs{Field::zeros(p.shape()), std::nan(""), std::nan(""), std::nan("")};
        if (i == 0 && needs_cache(g.mode)) {
            gs.velocity = cfg.first_step == FirstStep::uncond ? p.v_uc() : cfg_update(p, g.w);
        } else {
            gs = guided_step(p, i ? &model.replay_velocity(i - 1) : nullptr, g);
        }
        char name[40];
        std::snprintf(name, sizeof name, "replay_step_%03zu.npy", i);
        const auto path = cfg.out / name;
        npy_write(gs.velocity, path, dtype);
        csv += join({std::to_string(i), format_number(p.t()), format_number(gs.mask_fraction_uc),
                     format_number(gs.mask_fraction_c), format_number(gs.rho), format_number(l2_norm(gs.velocity))});
        out.push_back({i, p.t(), gs.mask_fraction_uc, gs.mask_fraction_c, gs.rho, path});
    }
    write_file_atomic(cfg.out / "replay_metrics.csv", csv);
    return out;
}

std::vector<ReportRow> cmd_report(const RunConfig& cfg) {
    static const char* kMetrics[] = {"mask_fraction_uc", "mask_fraction_c", "rho",
                                     "mean_abs_x",       "saturation",      "clipped_fraction"};
    std::vector<std::vector<double>> values(std::size(kMetrics));
    std::size_t found = 0;
    for (const auto seed : effective_seeds(cfg)) {
        const auto path = cfg.out / (seed_stem(seed) + "_trajectory.csv");
        if (!std::filesystem::exists(path)) continue;
        std::ifstream in(path);
        std::string line;
        std::getline(in, line);
        if (line != kReportColumns) throw FormatError(path.string() + ": unexpected header");
        bool have_summary = false;
        while (std::getline(in, line)) {
            if (line.rfind("summary,", 0) != 0) continue;
            const auto cells = split_csv(line);
            if (cells.size() != 9) throw FormatError(path.string() + ": summary row has " +
                                                     std::to_string(cells.size()) + " cells");
            for (std::size_t m = 0; m < std::size(kMetrics); ++m) {
                if (!cells[m + 3].empty()) values[m].push_back(std::stod(cells[m + 3]));
            }
            have_summary = true;
        }
        if (!have_summary) throw FormatError(path.string() + ": no summary row");
        ++found;
    }
    if (found == 0) throw IoError("no trajectory CSVs for the configured seeds in " + cfg.out.string());
    std::vector<ReportRow> rows;
    std::string csv = "metric,mean,std,n\n";
    for (std::size_t m = 0; m < std::size(kMetrics); ++m) {
        const auto [mu, sd] = mean_std(values[m]);
        rows.push_back({kMetrics[m], mu, sd, values[m].size()});
        csv += join({kMetrics[m], format_number(mu), format_number(sd), std::to_string(values[m].size())});
    }
    write_file_atomic(cfg.out / "report.csv", csv);
    return rows;
}

}  // namespace lfcfg
