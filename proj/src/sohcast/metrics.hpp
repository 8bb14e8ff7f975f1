#pragma once

#include <string>
#include <vector>

#include "sohcast/ensemble.hpp"

namespace sohcast {

// One forecast/observation pair; Gaussian forecasts wrap as 1-component
// mixtures so every score has a single code path.
struct ForecastPoint {
    MixturePrediction dist;
    double observed = 0.0;
};

using ForecastSeries = std::vector<ForecastPoint>;

struct EvaluationReport {
    double mse = 0.0;
    double r2 = 0.0;
    double nll = 0.0;      // per-observation mean, used for comparisons
    double nll_sum = 0.0;  // raw sum
    double crps = 0.0;
    double miscalibration_area = 0.0;
    double sharpness = 0.0;
    std::size_t n = 0;
};

double mse(const ForecastSeries& series);

// 1 - SS_res / SS_tot; needs non-constant observations.
double r2(const ForecastSeries& series);

struct NllResult {
    double sum = 0.0;
    double mean = 0.0;
};
NllResult nll(const ForecastSeries& series);

// Mean per-observation CRPS via the Gaussian / mixture closed forms.
double crps(const ForecastSeries& series);

// Empirical coverage p_hat(level) over the series; quantiles by bisection.
std::vector<std::pair<double, double>> calibration_curve(
    const ForecastSeries& series, const std::vector<double>& levels);

// Trapezoidal integral of |p_hat - p| over the level grid.
double miscalibration_area(const std::vector<std::pair<double, double>>& curve);

// sqrt of the mean predictive variance.
double sharpness(const ForecastSeries& series);

// Default level grid 0.01 .. 0.99, step 0.01.
std::vector<double> default_calibration_levels();

EvaluationReport evaluate_series(const ForecastSeries& series);

std::string report_to_json(const EvaluationReport& report);
// One CSV row in table order: mse, r2, nll, crps, then the extras.
std::string report_csv_header();
std::string report_to_csv_row(const std::string& battery, const std::string& strategy,
                              const EvaluationReport& report);

}  // namespace sohcast
