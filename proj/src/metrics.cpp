#include "lfcfg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>

#include "lfcfg/error.hpp"

namespace lfcfg {

const char* to_string(SaturationFormula f) { return f == SaturationFormula::hsv_mean ? "hsv-mean" : "channel-std"; }

SaturationFormula parse_saturation_formula(const std::string& name) {
    if (name == "hsv-mean") return SaturationFormula::hsv_mean;
    if (name == "channel-std") return SaturationFormula::channel_std;
    throw ConfigError("unknown saturation formula '" + name + "' (expected hsv-mean or channel-std)");
}

double saturation(const Field& img, SaturationFormula formula) {
    if (img.channels() != 3) throw ShapeMismatchError("saturation requires 3 channels, got " + to_string(img.shape()));
    const std::size_t P = img.shape().plane();
    auto unit = [](double x) { return std::clamp((x + 1.0) / 2.0, 0.0, 1.0); };
    double acc = 0.0;
    for (std::size_t i = 0; i < P; ++i) {
        const double r = unit(img[i]), g = unit(img[P + i]), b = unit(img[2 * P + i]);
        if (formula == SaturationFormula::hsv_mean) {
            const double mx = std::max({r, g, b});
            const double mn = std::min({r, g, b});
            acc += mx > 0.0 ? (mx - mn) / mx : 0.0;
        } else {
            const double m = (r + g + b) / 3.0;
            acc += std::sqrt(((r - m) * (r - m) + (g - m) * (g - m) + (b - m) * (b - m)) / 3.0);
        }
    }
    return acc / static_cast<double>(P);
}

double clipped_fraction(const Field& f, double bound) {
    std::size_t n = 0;
    for (double v : f.values()) n += std::abs(v) > bound;
    return static_cast<double>(n) / static_cast<double>(f.size());
}

double toy_accumulation(double w, int T, double r, double x0) { return x0 + w * static_cast<double>(T) * r; }

RunReport report(const Trajectory& traj, SaturationFormula formula,
                 std::vector<std::pair<std::string, std::string>> config) {
    if (traj.steps.empty() || !traj.x0) throw ConfigError("report: empty trajectory");
    RunReport r;
    r.saturation = saturation(*traj.x0, formula);
    r.clipped_fraction = clipped_fraction(*traj.x0);
    for (const auto& s : traj.steps) {
        r.steps.push_back({s.index, s.t, s.mask_fraction_uc, s.mask_fraction_c, s.rho, s.mean_abs_x});
    }
    r.config = std::move(config);
    return r;
}

std::string format_number(double v) {
    if (std::isnan(v)) return "";
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string report_csv(const RunReport& r) {
    std::string out = std::string(kReportColumns) + "\n";
    double sum_fu = 0, sum_fc = 0, sum_rho = 0;
    int n_masked = 0, n_rho = 0;
    for (const auto& s : r.steps) {
        out += "step," + std::to_string(s.index) + "," + format_number(s.t) + "," + format_number(s.mask_fraction_uc) +
               "," + format_number(s.mask_fraction_c) + "," + format_number(s.rho) + "," +
               format_number(s.mean_abs_x) + ",,\n";
        if (!std::isnan(s.mask_fraction_uc)) {
            sum_fu += s.mask_fraction_uc;
            sum_fc += s.mask_fraction_c;
            ++n_masked;
        }
        if (!std::isnan(s.rho)) {
            sum_rho += s.rho;
            ++n_rho;
        }
    }
    const double nan = std::nan("");
    const double k = n_masked ? 1.0 / n_masked : nan;
    const double k_rho = n_rho ? 1.0 / n_rho : nan;
    out += "summary," + std::to_string(r.steps.size()) + ",0," + format_number(sum_fu * k) + "," +
           format_number(sum_fc * k) + "," + format_number(sum_rho * k_rho) + "," +
           format_number(r.steps.empty() ? nan : r.steps.back().mean_abs_x) + "," + format_number(r.saturation) + "," +
           format_number(r.clipped_fraction) + "\n";
    return out;
}

}  // namespace lfcfg
