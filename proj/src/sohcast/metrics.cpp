#include "sohcast/metrics.hpp"

#include <cmath>

#include <json.hpp>

#include "sohcast/error.hpp"
#include "sohcast/util.hpp"

namespace sohcast {

namespace {

void require_nonempty(const ForecastSeries& series, const char* what) {
    if (series.empty()) throw ContractError(std::string(what) + ": empty forecast series");
}

}  // namespace

double mse(const ForecastSeries& series) {
    require_nonempty(series, "mse");
    double acc = 0.0;
    for (const auto& p : series) {
        const double r = p.observed - mixture_mean(p.dist);
        acc += r * r;
    }
    return acc / static_cast<double>(series.size());
}

double r2(const ForecastSeries& series) {
    require_nonempty(series, "r2");
    double mean_obs = 0.0;
    for (const auto& p : series) mean_obs += p.observed;
    mean_obs /= static_cast<double>(series.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (const auto& p : series) {
        const double r = p.observed - mixture_mean(p.dist);
        ss_res += r * r;
        const double d = p.observed - mean_obs;
        ss_tot += d * d;
    }
    if (!(ss_tot > 0.0)) {
        throw DomainError("r2: observations are constant, variance is degenerate");
    }
    return 1.0 - ss_res / ss_tot;
}

NllResult nll(const ForecastSeries& series) {
    require_nonempty(series, "nll");
    NllResult out;
    for (std::size_t i = 0; i < series.size(); ++i) {
        const double lp = mixture_log_pdf(series[i].dist, series[i].observed);
        if (!std::isfinite(lp)) {
            throw NumericError("nll: non-finite log-density at observation " +
                               std::to_string(i));
        }
        out.sum -= lp;
    }
    out.mean = out.sum / static_cast<double>(series.size());
    return out;
}

double crps(const ForecastSeries& series) {
    require_nonempty(series, "crps");
    double acc = 0.0;
    for (const auto& p : series) acc += mixture_crps(p.dist, p.observed);
    return acc / static_cast<double>(series.size());
}

std::vector<double> default_calibration_levels() {
    std::vector<double> levels;
    for (int i = 1; i <= 99; ++i) levels.push_back(static_cast<double>(i) / 100.0);
    return levels;
}

std::vector<std::pair<double, double>> calibration_curve(
    const ForecastSeries& series, const std::vector<double>& levels) {
    if (series.size() < 20) {
        throw ContractError("calibration_curve: need at least 20 observations, got " +
                            std::to_string(series.size()));
    }
    std::vector<std::pair<double, double>> curve;
    curve.reserve(levels.size());
    for (double p : levels) {
        std::size_t covered = 0;
        for (const auto& pt : series) {
            if (pt.observed <= mixture_quantile(pt.dist, p)) ++covered;
        }
        curve.emplace_back(p, static_cast<double>(covered) /
                                  static_cast<double>(series.size()));
    }
    return curve;
}

double miscalibration_area(const std::vector<std::pair<double, double>>& curve) {
    if (curve.size() < 2) throw ContractError("miscalibration_area: need >= 2 levels");
    double area = 0.0;
    for (std::size_t i = 1; i < curve.size(); ++i) {
        const double dx = curve[i].first - curve[i - 1].first;
        const double f0 = std::abs(curve[i - 1].second - curve[i - 1].first);
        const double f1 = std::abs(curve[i].second - curve[i].first);
        area += 0.5 * (f0 + f1) * dx;
    }
    return area;
}

double sharpness(const ForecastSeries& series) {
    require_nonempty(series, "sharpness");
    double acc = 0.0;
    for (const auto& p : series) acc += mixture_variance(p.dist);
    return std::sqrt(acc / static_cast<double>(series.size()));
}

EvaluationReport evaluate_series(const ForecastSeries& series) {
    EvaluationReport r;
    r.n = series.size();
    r.mse = mse(series);
    r.r2 = r2(series);
    const NllResult ll = nll(series);
    r.nll = ll.mean;
    r.nll_sum = ll.sum;
    r.crps = crps(series);
    r.miscalibration_area =
        miscalibration_area(calibration_curve(series, default_calibration_levels()));
    r.sharpness = sharpness(series);
    return r;
}

std::string report_to_json(const EvaluationReport& report) {
    nlohmann::json j{{"mse", report.mse},
                     {"r2", report.r2},
                     {"nll", report.nll},
                     {"nll_sum", report.nll_sum},
                     {"crps", report.crps},
                     {"miscalibration_area", report.miscalibration_area},
                     {"sharpness", report.sharpness},
                     {"n", report.n}};
    return j.dump(2);
}

std::string report_csv_header() {
    return "battery,strategy,mse,r2,nll,crps,nll_sum,miscalibration_area,sharpness,n";
}

std::string report_to_csv_row(const std::string& battery, const std::string& strategy,
                              const EvaluationReport& r) {
    return battery + ',' + strategy + ',' + fmt_double(r.mse) + ',' + fmt_double(r.r2) +
           ',' + fmt_double(r.nll) + ',' + fmt_double(r.crps) + ',' + fmt_double(r.nll_sum) +
           ',' + fmt_double(r.miscalibration_area) + ',' + fmt_double(r.sharpness) + ',' +
           std::to_string(r.n);
}

}  // namespace sohcast
