#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lfcfg/field.hpp"
#include "lfcfg/sampler.hpp"

namespace lfcfg {

enum class SaturationFormula { hsv_mean, channel_std };

const char* to_string(SaturationFormula f);
SaturationFormula parse_saturation_formula(const std::string& name);

/// Values are mapped to [0, 1] by clamp((x + 1) / 2). hsv_mean averages the
/// HSV saturation (max - min) / max per pixel (0 where max = 0); channel_std
/// averages the population std across the three channels.
double saturation(const Field& img, SaturationFormula formula = SaturationFormula::hsv_mean);

/// Fraction of elements with |x| > bound.
double clipped_fraction(const Field& f, double bound = 1.0);

/// x0 + w * T * r: the value reached by adding the same guided increment T times.
double toy_accumulation(double w, int T, double r, double x0 = 0.5);

struct StepSummary {
    int index;
    double t;
    double mask_fraction_uc;
    double mask_fraction_c;
    double rho;
    double mean_abs_x;
};

struct RunReport {
    double saturation = 0.0;
    double clipped_fraction = 0.0;
    std::vector<StepSummary> steps;
    std::vector<std::pair<std::string, std::string>> config;  // echoed key/value pairs
};

RunReport report(const Trajectory& traj, SaturationFormula formula = SaturationFormula::hsv_mean,
                 std::vector<std::pair<std::string, std::string>> config = {});

/// Fixed columns, see kReportColumns. One row per step then a summary row.
inline constexpr const char* kReportColumns =
    "kind,step,t,mask_fraction_uc,mask_fraction_c,rho,mean_abs_x,saturation,clipped_fraction";

std::string report_csv(const RunReport& r);

/// Shortest round-trip decimal for finite values, empty for NaN.
std::string format_number(double v);

}  // namespace lfcfg
