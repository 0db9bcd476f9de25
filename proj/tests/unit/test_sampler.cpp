#include <cmath>
#include <cstring>
#include <mutex>

#include "doctest.h"
#include "lfcfg/commands.hpp"
#include "lfcfg/error.hpp"
#include "lfcfg/sampler.hpp"
#include "testing.hpp"

using namespace lfcfg;

namespace {

// Velocity depends on (x, t, condition) in a simple nonlinear way and every
// call is logged so tests can check which pairs the sampler compares.
class RecordingModel final : public VelocityModel {
public:
    struct Call {
        double t;
        std::optional<int> condition;
        Field x;
        Field out;
    };

    explicit RecordingModel(Shape shape, int fail_at_step = -1, int steps = 0)
        : shape_(shape), fail_t_(fail_at_step >= 0 ? 1.0 - double(fail_at_step) / steps : -1.0) {}

    Shape shape() const override { return shape_; }
    Field evaluate(const Field& x, double t, std::optional<int> condition) const override {
        if (t == fail_t_) throw std::runtime_error("synthetic failure");
        const double bias = condition ? 0.3 * (*condition + 1) : 0.0;
        Field out = Field::generate(shape_, [&](auto c, auto h, auto w) {
            const std::size_t i = (c * shape_.height + h) * shape_.width + w;
            return std::sin(x[i] + 3.0 * t + 0.1 * double(h)) + bias * double(w + 1) / double(shape_.width);
        });
        std::lock_guard lock(mu_);
        calls_.push_back({t, condition, x, out});
        return out;
    }
    const std::vector<Call>& calls() const { return calls_; }

private:
    Shape shape_;
    double fail_t_;
    mutable std::mutex mu_;
    mutable std::vector<Call> calls_;
};

TestbedSpec small_testbed() {
    TestbedSpec s;
    s.height = 8;
    s.width = 8;
    s.target_log_prior.reset();
    return s;
}

}  // namespace

TEST_CASE("schedule and Euler step") {
    const Schedule s(20);
    CHECK(s.t(0) == 1.0);
    CHECK(s.t(20) == 0.0);
    CHECK(s.dt() == -0.05);
    for (int i = 0; i < 20; ++i) CHECK(s.t(i) > s.t(i + 1));
    CHECK_THROWS_AS(Schedule(0), ConfigError);

    const Shape sh{1, 2, 2};
    const Field x = Field::constant(sh, 0.4);
    CHECK(max_abs_diff(euler_step(x, Field::zeros(sh), -0.05), x) == 0.0);
    const Field moved = euler_step(Field::zeros(sh), Field::constant(sh, 1.0), -0.05);
    for (double v : moved.values()) CHECK(v == -0.05);
    const Field v = Field::constant(sh, 0.7);
    CHECK(max_abs_diff(euler_step(euler_step(x, v, -0.025), v, -0.025), euler_step(x, v, -0.05)) <= 1e-15);
    CHECK_THROWS_AS(euler_step(x, Field::zeros(Shape{1, 2, 3}), -0.05), ShapeMismatchError);
}

TEST_CASE("runs are deterministic and the initial state ignores guidance") {
    const auto model = gmm_build_testbed(TestbedSpec{});
    GuidanceConfig g;
    g.w = 9.0;
    SamplerConfig sc;
    const Trajectory a = run(model, g, sc, 17), b = run(model, g, sc, 17);
    REQUIRE(a.steps.size() == 20);
    CHECK(std::memcmp(a.x0->values().data(), b.x0->values().data(), a.x0->size() * sizeof(double)) == 0);
    for (std::size_t i = 0; i < a.steps.size(); ++i) {
        CHECK(a.steps[i].mean_abs_x == b.steps[i].mean_abs_x);
        CHECK(std::isnan(a.steps[i].rho) == std::isnan(b.steps[i].rho));
    }

    RecordingModel m1(Shape{1, 4, 4}), m2(Shape{1, 4, 4});
    GuidanceConfig g1, g2;
    g1.w = 1.0;
    g2.w = 12.0;
    run(m1, g1, sc, 5);
    run(m2, g2, sc, 5);
    CHECK(max_abs_diff(m1.calls().front().x, m2.calls().front().x) == 0.0);
    CHECK(max_abs_diff(m1.calls().front().x, initial_noise(Shape{1, 4, 4}, 5)) == 0.0);
}

TEST_CASE("cache discipline") {
    RecordingModel m(Shape{3, 8, 8});
    GuidanceConfig g;
    g.w = 4.0;
    SamplerConfig sc;
    sc.steps = 6;
    std::vector<std::pair<double, double>> seen;  // (current t, cached t)
    std::vector<std::optional<VelocityPair>> history;
    int checks = 0;
    sc.observer = [&](int step, const VelocityPair& cur, const VelocityPair* cached) {
        if (step == 0) {
            CHECK(cached == nullptr);
        } else {
            REQUIRE(cached != nullptr);
            // The cached pair is bit-identical to the pair observed one step earlier.
            CHECK(cached->t() == history.back()->t());
            CHECK(max_abs_diff(cached->v_uc(), history.back()->v_uc()) == 0.0);
            CHECK(max_abs_diff(cached->v_c(), history.back()->v_c()) == 0.0);
            seen.emplace_back(cur.t(), cached->t());
            ++checks;
        }
        history.emplace_back(cur);
    };
    const Trajectory tr = run(m, g, sc, 3);
    CHECK(checks == 5);
    const Schedule s(6);
    for (std::size_t i = 0; i < seen.size(); ++i) {
        CHECK(seen[i].first == s.t(int(i) + 1));
        CHECK(seen[i].second == s.t(int(i)));
    }
    // Two model calls per step, unconditional first, both at the same state.
    REQUIRE(m.calls().size() == 12);
    for (std::size_t i = 0; i < 12; i += 2) {
        CHECK(!m.calls()[i].condition.has_value());
        CHECK(m.calls()[i + 1].condition == 0);
        CHECK(max_abs_diff(m.calls()[i].x, m.calls()[i + 1].x) == 0.0);
    }
    CHECK(!tr.steps[0].used_cache);
    for (std::size_t i = 1; i < tr.steps.size(); ++i) CHECK(tr.steps[i].used_cache);
}

TEST_CASE("T = 2 performs exactly one cached evaluation") {
    RecordingModel m(Shape{3, 8, 8});
    GuidanceConfig g;
    g.w = 3.0;
    SamplerConfig sc;
    sc.steps = 2;
    int cached = 0;
    sc.observer = [&](int, const VelocityPair&, const VelocityPair* prev) { cached += prev != nullptr; };
    const Trajectory tr = run(m, g, sc, 1);
    CHECK(cached == 1);
    REQUIRE(tr.steps.size() == 2);
    CHECK(std::isnan(tr.steps[0].rho));
    CHECK(!std::isnan(tr.steps[1].rho));
    sc.steps = 1;
    CHECK_THROWS_AS(run(m, g, sc, 1), ConfigError);
}

TEST_CASE("first step options") {
    RecordingModel m(Shape{1, 4, 4});
    GuidanceConfig g;
    g.w = 5.0;
    SamplerConfig sc;
    sc.steps = 3;
    sc.keep_snapshots = true;
    const Trajectory a = run(m, g, sc, 2);
    sc.first_step = FirstStep::uncond;
    const Trajectory b = run(m, g, sc, 2);
    const Field x1 = initial_noise(Shape{1, 4, 4}, 2);
    const Field v_uc = m.evaluate(x1, 1.0, std::nullopt), v_c = m.evaluate(x1, 1.0, 0);
    CHECK(max_abs_diff(a.snapshots.front(), euler_step(x1, cfg_update(VelocityPair(v_uc, v_c, 1.0), 5.0), -1.0 / 3)) <=
          1e-15);
    CHECK(max_abs_diff(b.snapshots.front(), euler_step(x1, v_uc, -1.0 / 3)) <= 1e-15);
    CHECK(parse_first_step("uncond") == FirstStep::uncond);
    CHECK_THROWS_AS(parse_first_step("eq1"), ConfigError);
}

TEST_CASE("model failures carry the step index") {
    RecordingModel m(Shape{1, 4, 4}, 3, 20);
    GuidanceConfig g;
    try {
        run(m, g, SamplerConfig{}, 0);
        FAIL("expected a model error");
    } catch (const ModelError& e) {
        CHECK(e.step() == 3);
        CHECK(std::string(e.what()).find("synthetic failure") != std::string::npos);
    }
}

TEST_CASE("unit manual rho through the integrator matches CFG") {
    const auto model = gmm_build_testbed(TestbedSpec{});
    GuidanceConfig cfg;
    cfg.mode = GuidanceMode::cfg;
    cfg.w = 8.0;
    GuidanceConfig lf = cfg;
    lf.mode = GuidanceMode::lfcfg;
    lf.policy.rho_mode = RhoMode::manual;
    lf.policy.rho_manual = 1.0;
    for (std::uint64_t seed : {0u, 1u, 2u}) {
        const Trajectory a = run(model, cfg, SamplerConfig{}, seed), b = run(model, lf, SamplerConfig{}, seed);
        CHECK(max_abs_diff(*a.x0, *b.x0) <= 1e-10);
    }
}

TEST_CASE("w = 1 samples the conditional component") {
    // Under the linear interpolation the mean of x_t is (1 - t) mu exactly, and
    // Euler preserves it, so final means sit within Monte-Carlo error of mu_c.
    const auto model = gmm_build_testbed(small_testbed());
    GuidanceConfig g;
    g.mode = GuidanceMode::cfg;
    g.w = 1.0;
    std::vector<std::uint64_t> seeds(256);
    for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = 1000 + i;
    const auto trajs = run_seeds(model, g, SamplerConfig{}, seeds, 1);
    const Field& mu = model.component(0).mean;
    const std::size_t E = mu.size();
    std::vector<double> sum(E, 0.0), sum2(E, 0.0);
    for (const auto& t : trajs)
        for (std::size_t e = 0; e < E; ++e) {
            const double d = (*t.x0)[e] - mu[e];
            sum[e] += d;
            sum2[e] += d * d;
        }
    const double n = double(seeds.size());
    std::size_t outside = 0;
    double grand = 0.0, grand_var = 0.0;
    for (std::size_t e = 0; e < E; ++e) {
        const double m = sum[e] / n, var = sum2[e] / n - m * m;
        outside += std::abs(m) > 3.0 * std::sqrt(var / n);
        grand += m;
        grand_var += var;
    }
    CHECK(double(outside) / double(E) <= 0.02);
    CHECK(std::abs(grand / double(E)) <= 3.0 * std::sqrt(grand_var / double(E) / n / double(E)));
}

TEST_CASE("clipping grows with w on the analytic testbed") {
    const auto model = gmm_build_testbed(TestbedSpec{});
    std::vector<std::uint64_t> seeds(32);
    for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = i;
    double prev_clip = -1.0, prev_sat = -1.0;
    for (double w : {1.0, 5.0, 15.0}) {
        GuidanceConfig g;
        g.mode = GuidanceMode::cfg;
        g.w = w;
        double clip = 0.0, sat = 0.0;
        for (const auto& t : run_seeds(model, g, SamplerConfig{}, seeds, 2)) {
            clip += clipped_fraction(*t.x0);
            sat += saturation(*t.x0);
        }
        CHECK(clip > prev_clip);
        CHECK(sat > prev_sat);
        prev_clip = clip;
        prev_sat = sat;
    }
}

TEST_CASE("worker count does not change results") {
    const auto model = gmm_build_testbed(TestbedSpec{});
    GuidanceConfig g;
    g.w = 6.0;
    const std::vector<std::uint64_t> seeds{4, 8, 15, 16, 23, 42};
    const auto a = run_seeds(model, g, SamplerConfig{}, seeds, 1);
    const auto b = run_seeds(model, g, SamplerConfig{}, seeds, 4);
    for (std::size_t i = 0; i < seeds.size(); ++i) CHECK(max_abs_diff(*a[i].x0, *b[i].x0) == 0.0);
}
