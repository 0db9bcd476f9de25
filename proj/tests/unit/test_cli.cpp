#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "lfcfg/cli.hpp"
#include "lfcfg/commands.hpp"
#include "lfcfg/error.hpp"
#include "lfcfg/io.hpp"
#include "lfcfg/npy.hpp"
#include "testing.hpp"

using namespace lfcfg;

namespace {

std::string slurp(const std::filesystem::path& p) {
    const auto bytes = read_file(p);
    return std::string(bytes.begin(), bytes.end());
}

RunConfig quick(const std::filesystem::path& out, const std::vector<std::string>& extra = {}) {
    std::vector<std::string> o{"backend.testbed.height=16", "backend.testbed.width=16", "seeds=[0,1,2]", "T=6"};
    o.insert(o.end(), extra.begin(), extra.end());
    RunConfig c = parse_config("{}", ".", o);
    c.out = out;
    return c;
}

int invoke(std::vector<std::string> args, std::string* err_text = nullptr) {
    args.insert(args.begin(), "lfcfg");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int rc = cli_main(int(argv.size()), argv.data(), out, err);
    if (err_text) *err_text = err.str();
    return rc;
}

}  // namespace

TEST_CASE("config parsing") {
    const RunConfig d = parse_config("{}");
    CHECK(d.guidance.mode == GuidanceMode::lfcfg);
    CHECK(d.guidance.scale == 8);
    CHECK(d.steps == 20);
    CHECK(d.backend.type == BackendType::analytic);

    const RunConfig c = parse_config(R"({"mode": "apg", "w": 7.5, "apg_eta": 0.25, "k": 2, "rho_mode": "empirical",
        "upsample": "nearest", "change_mode": "per-channel", "first_step": "uncond", "seeds": [3, 4],
        "backend": {"type": "analytic", "testbed": {"sigma": 0.2, "target_log_prior": null}},
        "ablate": {"axis": "combination", "values": [1, 2, 3, 4]},
        "diagnose": {"modes": ["cfg", "diag-zero-high"]}, "replay": {"dtype": "float32"}})");
    CHECK(c.guidance.mode == GuidanceMode::apg);
    CHECK(c.guidance.w == 7.5);
    CHECK(c.guidance.policy.k == 2.0);
    CHECK(c.guidance.upsample == UpsampleKernel::nearest);
    CHECK(c.guidance.change_mode == ChangeMode::per_channel);
    CHECK(c.first_step == FirstStep::uncond);
    CHECK(c.backend.testbed.sigma == 0.2);
    CHECK(!c.backend.testbed.target_log_prior);
    CHECK(c.ablate.axis == AblateAxis::combination);
    CHECK(c.diagnose_modes.size() == 2);
    CHECK(c.replay_dtype == NpyDtype::f32);

    CHECK_THROWS_AS(parse_config(R"({"seeds": []})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"wscale": 3})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"backend": {"testbed": {"blob": 3}}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"w": "high"})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"w": -1})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"T": 1})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"backend": {"type": "replay"}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"rho_mode": "manual"})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"condition": 2})"), ConfigError);
    CHECK_THROWS_AS(parse_config("[1, 2]"), ConfigError);
    CHECK_THROWS_AS(parse_config("{"), ConfigError);

    const RunConfig r = parse_config(R"({"backend": {"type": "replay", "manifest": "rec/manifest.json"}})", "/data");
    CHECK(r.backend.manifest == std::filesystem::path("/data/rec/manifest.json"));
}

TEST_CASE("overrides") {
    const RunConfig c = parse_config(R"({"w": 2})", ".", {"w=11", "backend.testbed.sigma=0.4", "out=runs/a", "mode=cfg"});
    CHECK(c.guidance.w == 11.0);
    CHECK(c.backend.testbed.sigma == 0.4);
    CHECK(c.out == std::filesystem::path("runs/a"));
    CHECK(c.guidance.mode == GuidanceMode::cfg);
    CHECK_THROWS_AS(parse_config("{}", ".", {"novalue"}), ConfigError);
    CHECK_THROWS_AS(parse_config("{}", ".", {"bogus=1"}), ConfigError);
}

TEST_CASE("seed base offset") {
    RunConfig c = parse_config(R"({"seeds": [1, 2]})");
    ::setenv("LFCFG_SEED_BASE", "100", 1);
    CHECK(effective_seeds(c) == std::vector<std::uint64_t>{101, 102});
    ::setenv("LFCFG_SEED_BASE", "x", 1);
    CHECK_THROWS_AS(effective_seeds(c), ConfigError);
    ::unsetenv("LFCFG_SEED_BASE");
    CHECK(effective_seeds(c) == std::vector<std::uint64_t>{1, 2});
}

TEST_CASE("sample writes artifacts reproducibly") {
    testing::TempDir a("sample_a"), b("sample_b");
    const RunConfig ca = quick(a.path());
    RunConfig cb = quick(b.path(), {"jobs=3"});
    const SampleResult ra = cmd_sample(ca);
    cmd_sample(cb);
    CHECK(ra.seeds.size() == 3);
    for (const char* f : {"summary.csv", "seed_0_trajectory.csv", "seed_2_trajectory.csv", "seed_1.ppm"}) {
        REQUIRE(std::filesystem::exists(a.path() / f));
        CHECK(slurp(a.path() / f) == slurp(b.path() / f));
    }
    const std::string ppm = slurp(a.path() / "seed_0.ppm");
    CHECK(ppm.rfind("P6\n16 16\n255\n", 0) == 0);
    CHECK(ppm.size() == 13 + 16 * 16 * 3);
    cmd_sample(ca);
    CHECK(slurp(a.path() / "summary.csv") == slurp(b.path() / "summary.csv"));

    const auto rows = cmd_report(ca);
    REQUIRE(rows.size() == 6);
    CHECK(rows[4].metric == "saturation");
    CHECK(std::abs(rows[4].mean - ra.saturation_mean) <= 1e-15);
    CHECK(rows[4].n == 3);
    CHECK(std::filesystem::exists(a.path() / "report.csv"));

    testing::TempDir empty("report_empty");
    CHECK_THROWS_AS(cmd_report(quick(empty.path())), IoError);
}

TEST_CASE("ablate over w gives monotone CFG rows") {
    testing::TempDir dir("ablate");
    RunConfig c = parse_config(R"({"mode": "cfg", "seeds": [0, 1, 2, 3, 4, 5, 6, 7], "ablate": {"axis": "w", "values": [1, 5, 15]}})");
    c.out = dir.path();
    const AblateResult r = cmd_ablate(c);
    REQUIRE(r.rows.size() == 3);
    CHECK(r.rows[0].saturation_mean < r.rows[1].saturation_mean);
    CHECK(r.rows[1].saturation_mean < r.rows[2].saturation_mean);
    CHECK(r.rows[0].n_seeds == 8);
    const std::string csv = slurp(dir.path() / "ablate_w.csv");
    CHECK(csv.rfind("axis,value,mode,saturation_mean,saturation_std,clipped_mean,clipped_std,n_seeds\nw,1,cfg,", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);

    RunConfig bad = quick(dir.path(), {"ablate.axis=s", "ablate.values=[2.5]"});
    CHECK_THROWS_AS(cmd_ablate(bad), ConfigError);
    bad = quick(dir.path(), {"ablate.axis=s", "ablate.values=[3]"});
    CHECK_THROWS_AS(cmd_ablate(bad), ConfigError);
}

TEST_CASE("diagnose writes one strip per seed") {
    testing::TempDir dir("diagnose");
    const RunConfig c = quick(dir.path(), {"w=9"});
    const auto rows = cmd_diagnose(c);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].mode == "cfg");
    CHECK(rows[3].mode == "diag-zero-high-change");
    const std::string ppm = slurp(dir.path() / "diagnose_seed_1.ppm");
    CHECK(ppm.rfind("P6\n70 16\n255\n", 0) == 0);
    CHECK(std::filesystem::exists(dir.path() / "diagnose.csv"));
}

TEST_CASE("replay composes recorded velocities") {
    // Record the pairs of a real analytic run, then replay them open loop.
    testing::TempDir rec("rec"), out("replay_out");
    const auto model = gmm_build_testbed(quick(rec.path()).backend.testbed);
    std::vector<VelocityPair> pairs;
    SamplerConfig sc;
    sc.steps = 6;
    sc.observer = [&](int, const VelocityPair& p, const VelocityPair*) { pairs.push_back(p); };
    GuidanceConfig g;
    g.w = 5.0;
    run(model, g, sc, 1);
    write_replay_session(rec.path(), pairs, NpyDtype::f64, "analytic testbed");

    RunConfig c = quick(out.path(), {"w=5", "mode=cfg"});
    c.backend.manifest = rec.path() / "manifest.json";
    c.backend.type = BackendType::replay;
    const auto steps = cmd_replay(c);
    REQUIRE(steps.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
        NpyDtype dt{};
        const Field v = npy_read(steps[i].path, &dt);
        CHECK(dt == NpyDtype::f64);
        CHECK(max_abs_diff(v, cfg_update(pairs[i], 5.0)) == 0.0);
    }

    // Unit manual rho reproduces CFG per step; default policy reports masks.
    c.guidance.mode = GuidanceMode::lfcfg;
    c.guidance.policy.rho_mode = RhoMode::manual;
    c.guidance.policy.rho_manual = 1.0;
    for (const auto& s : cmd_replay(c)) {
        const Field v = npy_read(s.path);
        CHECK(max_abs_diff(v, cfg_update(pairs[s.step], 5.0)) <= 1e-12);
    }
    c.guidance.policy = ThresholdPolicy{};
    c.replay_dtype = NpyDtype::f32;
    const auto lf = cmd_replay(c);
    CHECK(std::isnan(lf[0].rho));
    CHECK(lf[1].rho == 0.333 / 0.667);
    NpyDtype dt{};
    npy_read(lf[2].path, &dt);
    CHECK(dt == NpyDtype::f32);
    CHECK(std::filesystem::exists(out.path() / "replay_metrics.csv"));

    CHECK_THROWS_AS(cmd_replay(quick(out.path())), ConfigError);
}

TEST_CASE("command line exit codes and error lines") {
    testing::TempDir dir("cli");
    const auto cfg = dir.path() / "run.json";
    write_file_atomic(cfg, std::string(R"({"seeds": [], "out": "x"})"));
    std::string err;
    CHECK(invoke({"sample", "--config", cfg.string()}, &err) == 2);
    CHECK(err.rfind("error: kind=config message=\"seeds list is empty\"", 0) == 0);

    write_file_atomic(cfg, std::string(R"({"seeds": [0], "T": 3, "backend": {"testbed": {"height": 8, "width": 8}}})"));
    CHECK(invoke({"sample", "--config", cfg.string(), "--out", (dir.path() / "o").string(), "--set", "w=4"}) == 0);
    CHECK(std::filesystem::exists(dir.path() / "o" / "seed_0.ppm"));

    const auto missing = dir.path() / "manifest.json";
    write_file_atomic(missing, std::string(R"({"version": 1, "dtype": "float64", "shape": [1, 2, 2],
        "steps": [{"t": 1.0, "v_uc": "nope_uc.npy", "v_c": "nope_c.npy"}], "source": ""})"));
    CHECK(invoke({"replay", "--manifest", missing.string(), "--out", (dir.path() / "r").string()}, &err) == 3);
    CHECK(err.rfind("error: kind=manifest/missing_file message=\"manifest missing_file at step 0", 0) == 0);

    CHECK(invoke({"frobnicate"}) != 0);
    CHECK(invoke({}) != 0);

    const FormatError fe("bad \"quote\"\nline");
    CHECK(error_line(fe) == "error: kind=format message=\"bad \\\"quote\\\" line\"");
    CHECK(exit_code_for(fe) == 1);
    CHECK(error_line(std::runtime_error("x")) == "error: kind=internal message=\"x\"");
}
