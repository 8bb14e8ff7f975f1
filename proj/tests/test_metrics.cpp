#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "sohcast/metrics.hpp"

using namespace sohcast;

namespace {

ForecastPoint gaussian_point(double mu, double sigma, double observed) {
    return ForecastPoint{as_mixture(GaussianPrediction{mu, sigma}), observed};
}

ForecastSeries random_series(std::size_t n, Rng& rng, double sigma_lo = 0.2,
                             double sigma_hi = 1.0) {
    ForecastSeries s;
    for (std::size_t i = 0; i < n; ++i) {
        const double mu = rng.uniform(-2.0, 2.0);
        const double sigma = rng.uniform(sigma_lo, sigma_hi);
        s.push_back(gaussian_point(mu, sigma, mu + sigma * rng.gauss()));
    }
    return s;
}

}  // namespace

TEST_CASE("mse") {
    SUBCASE("perfect predictions score zero") {
        ForecastSeries s = {gaussian_point(1.5, 0.1, 1.5), gaussian_point(2.0, 0.1, 2.0)};
        CHECK(mse(s) == doctest::Approx(0.0));
    }
    SUBCASE("hand arithmetic") {
        ForecastSeries s = {gaussian_point(0.0, 1.0, 1.0), gaussian_point(0.0, 1.0, 3.0)};
        CHECK(mse(s) == doctest::Approx(5.0));
    }
    SUBCASE("matches a scalar loop oracle") {
        Rng rng(1);
        ForecastSeries s = random_series(50, rng);
        double expected = 0.0;
        for (const auto& p : s) {
            const double r = p.observed - p.dist.components[0].mu;
            expected += r * r;
        }
        expected /= 50.0;
        CHECK(std::abs(mse(s) - expected) < 1e-12);
    }
    SUBCASE("empty series is a contract error") {
        CHECK_THROWS_AS(mse(ForecastSeries{}), ContractError);
    }
}

TEST_CASE("r2") {
    SUBCASE("perfect predictions give one") {
        ForecastSeries s = {gaussian_point(1.0, 0.1, 1.0), gaussian_point(2.0, 0.1, 2.0),
                            gaussian_point(3.0, 0.1, 3.0)};
        CHECK(r2(s) == doctest::Approx(1.0));
    }
    SUBCASE("predicting the mean gives zero") {
        ForecastSeries s = {gaussian_point(2.0, 0.1, 1.0), gaussian_point(2.0, 0.1, 2.0),
                            gaussian_point(2.0, 0.1, 3.0)};
        CHECK(r2(s) == doctest::Approx(0.0));
    }
    SUBCASE("matches a loop oracle") {
        Rng rng(2);
        ForecastSeries s = random_series(40, rng);
        double mean = 0.0;
        for (const auto& p : s) mean += p.observed;
        mean /= 40.0;
        double ss_res = 0.0, ss_tot = 0.0;
        for (const auto& p : s) {
            ss_res += std::pow(p.observed - p.dist.components[0].mu, 2);
            ss_tot += std::pow(p.observed - mean, 2);
        }
        CHECK(std::abs(r2(s) - (1.0 - ss_res / ss_tot)) < 1e-12);
    }
    SUBCASE("constant observations are a degenerate-variance error") {
        ForecastSeries s = {gaussian_point(1.0, 0.1, 2.0), gaussian_point(1.1, 0.1, 2.0)};
        CHECK_THROWS_AS(r2(s), DomainError);
    }
}

TEST_CASE("nll") {
    SUBCASE("standard normal at its mode") {
        ForecastSeries s = {gaussian_point(1.0, 1.0, 1.0)};
        CHECK(nll(s).mean == doctest::Approx(0.9189385).epsilon(1e-6));
        CHECK(nll(s).sum == doctest::Approx(0.9189385).epsilon(1e-6));
    }
    SUBCASE("sharper correct prediction scores lower") {
        ForecastSeries tight = {gaussian_point(1.0, 0.1, 1.0)};
        ForecastSeries wide = {gaussian_point(1.0, 1.0, 1.0)};
        CHECK(nll(tight).mean < nll(wide).mean);
    }
    SUBCASE("sum is n times the mean") {
        Rng rng(3);
        ForecastSeries s = random_series(30, rng);
        const NllResult r = nll(s);
        CHECK(r.sum == doctest::Approx(30.0 * r.mean));
    }
    SUBCASE("K=1 mixture equals the Gaussian closed form exactly") {
        GaussianSpec g{1.3, 0.4};
        ForecastSeries s = {gaussian_point(1.3, 0.4, 1.1)};
        CHECK(nll(s).mean == doctest::Approx(-gaussian_log_prob(g, 1.1)).epsilon(1e-15));
    }
    SUBCASE("mixture density matches a quadrature oracle") {
        MixturePrediction mix{
            {GaussianPrediction{0.0, 0.5}, GaussianPrediction{1.0, 0.3}}, {0.4, 0.6}};
        ForecastSeries s = {ForecastPoint{mix, 0.7}};
        // integrate the mixture density against a narrow indicator window
        auto density = [&](double x) { return mixture_pdf(mix, x); };
        const double h = 1e-5;
        const double window =
            oracle::simpson(density, 0.7 - h, 0.7 + h, 64) / (2.0 * h);
        CHECK(std::abs(std::exp(-nll(s).mean) - window) < 1e-8);
    }
}

TEST_CASE("crps") {
    SUBCASE("standard normal at the center") {
        ForecastSeries s = {gaussian_point(0.0, 1.0, 0.0)};
        CHECK(crps(s) == doctest::Approx(0.2336950).epsilon(1e-6));
    }
    SUBCASE("point-mass limit at the observation") {
        ForecastSeries s = {gaussian_point(1.0, 1e-12, 1.0)};
        CHECK(crps(s) < 1e-10);
    }
    SUBCASE("standard normal at 1.96") {
        ForecastSeries s = {gaussian_point(0.0, 1.0, 1.96)};
        CHECK(crps(s) == doctest::Approx(1.4147).epsilon(1e-4));
    }
    SUBCASE("gaussian closed form matches quadrature on random cases") {
        Rng rng(4);
        for (int trial = 0; trial < 20; ++trial) {
            const double mu = rng.uniform(-2.0, 2.0);
            const double sigma = rng.uniform(0.1, 2.0);
            const double y = mu + sigma * rng.uniform(-3.0, 3.0);
            MixturePrediction mix = as_mixture(GaussianPrediction{mu, sigma});
            auto cdf = [&](double x) { return mixture_cdf(mix, x); };
            const double numeric =
                oracle::crps_quadrature(cdf, y, mu - 12.0 * sigma, mu + 12.0 * sigma, 4000);
            CHECK(std::abs(mixture_crps(mix, y) - numeric) < 1e-4);
        }
    }
    SUBCASE("mixture closed form matches quadrature") {
        Rng rng(5);
        for (int trial = 0; trial < 10; ++trial) {
            MixturePrediction mix;
            double wsum = 0.0;
            for (int k = 0; k < 3; ++k) {
                mix.components.push_back(GaussianPrediction{rng.uniform(-1.0, 1.0),
                                                            rng.uniform(0.2, 1.0)});
                const double w = rng.uniform(0.1, 1.0);
                mix.weights.push_back(w);
                wsum += w;
            }
            for (double& w : mix.weights) w /= wsum;
            const double y = rng.uniform(-2.0, 2.0);
            auto cdf = [&](double x) { return mixture_cdf(mix, x); };
            const double numeric = oracle::crps_quadrature(cdf, y, -16.0, 16.0, 8000);
            CHECK(std::abs(mixture_crps(mix, y) - numeric) < 1e-4);
        }
    }
}

TEST_CASE("crps and miscalibration under affine rescaling") {
    Rng rng(6);
    ForecastSeries base = random_series(60, rng);
    const double a = 2.5, c = -1.0;
    ForecastSeries scaled;
    for (const auto& p : base) {
        const auto& g = p.dist.components[0];
        scaled.push_back(gaussian_point(a * g.mu + c, a * g.sigma, a * p.observed + c));
    }
    CHECK(crps(scaled) == doctest::Approx(a * crps(base)).epsilon(1e-9));
    const auto levels = default_calibration_levels();
    const double area_base = miscalibration_area(calibration_curve(base, levels));
    const double area_scaled = miscalibration_area(calibration_curve(scaled, levels));
    CHECK(area_scaled == doctest::Approx(area_base).epsilon(1e-9));
}

TEST_CASE("calibration") {
    SUBCASE("self-consistent forecasts are calibrated") {
        Rng rng(7);
        ForecastSeries s = random_series(1000, rng);  // observations drawn from forecasts
        const double area = miscalibration_area(
            calibration_curve(s, default_calibration_levels()));
        CHECK(area < 0.05);
    }
    SUBCASE("observations below every quantile produce maximal area") {
        ForecastSeries s;
        for (int i = 0; i < 50; ++i) {
            s.push_back(gaussian_point(0.0, 0.1, -10.0));  // far below the 1st percentile
        }
        auto curve = calibration_curve(s, default_calibration_levels());
        for (const auto& [p, phat] : curve) CHECK(phat == doctest::Approx(1.0));
        CHECK(miscalibration_area(curve) == doctest::Approx(0.48).epsilon(0.05));
    }
    SUBCASE("too few observations violate the contract") {
        Rng rng(8);
        ForecastSeries s = random_series(10, rng);
        CHECK_THROWS_AS(calibration_curve(s, default_calibration_levels()), ContractError);
    }
}

TEST_CASE("sharpness") {
    SUBCASE("constant predictive sigma is returned as-is") {
        ForecastSeries s;
        for (int i = 0; i < 5; ++i) s.push_back(gaussian_point(1.0 + i, 0.25, 1.0));
        CHECK(sharpness(s) == doctest::Approx(0.25));
    }
    SUBCASE("single mixture with known variance") {
        MixturePrediction mix{
            {GaussianPrediction{1.0, 1.0}, GaussianPrediction{2.0, 2.0}}, {0.3, 0.7}};
        ForecastSeries s = {ForecastPoint{mix, 1.7}};
        CHECK(sharpness(s) == doctest::Approx(std::sqrt(3.31)).epsilon(1e-12));
    }
}

TEST_CASE("evaluate_series produces finite fields and serializes") {
    Rng rng(9);
    ForecastSeries s = random_series(60, rng);
    EvaluationReport r = evaluate_series(s);
    CHECK(std::isfinite(r.mse));
    CHECK(r.mse >= 0.0);
    CHECK(r.r2 <= 1.0);
    CHECK(std::isfinite(r.nll));
    CHECK(r.crps >= 0.0);
    CHECK(r.miscalibration_area >= 0.0);
    CHECK(r.miscalibration_area <= 0.5);
    CHECK(r.sharpness >= 0.0);
    CHECK(r.n == 60);

    const std::string json_text = report_to_json(r);
    CHECK(json_text.find("miscalibration_area") != std::string::npos);
    const std::string row = report_to_csv_row("B0005", "stack-dist", r);
    CHECK(row.rfind("B0005,stack-dist,", 0) == 0);
    CHECK(report_csv_header().rfind("battery,strategy,mse,r2,nll,crps", 0) == 0);
}
