#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "sohcast/ensemble.hpp"
#include "sohcast/error.hpp"

using namespace sohcast;

namespace {

// Random per-model Gaussian predictive sets over a shared validation set.
PredictionMatrix random_matrix(std::size_t K, std::size_t N, Rng& rng) {
    PredictionMatrix m;
    m.preds.resize(K);
    for (std::size_t i = 0; i < N; ++i) m.observed.push_back(rng.uniform(-1.0, 1.0));
    for (std::size_t k = 0; k < K; ++k) {
        const double bias = rng.uniform(-0.5, 0.5);
        const double spread = rng.uniform(0.2, 1.5);
        for (std::size_t i = 0; i < N; ++i) {
            m.preds[k].push_back(GaussianPrediction{
                m.observed[i] + bias + 0.3 * rng.gauss(), spread});
        }
    }
    return m;
}

void check_simplex(const std::vector<double>& w) {
    double total = 0.0;
    for (double x : w) {
        CHECK(x >= -1e-12);
        total += x;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}

}  // namespace

TEST_CASE("fit_logscore_weights") {
    SUBCASE("K=1 returns the single-point simplex") {
        Rng rng(1);
        PredictionMatrix m = random_matrix(1, 10, rng);
        StackingWeights w = fit_logscore_weights(m, 0.0);
        REQUIRE(w.w.size() == 1);
        CHECK(w.w[0] == doctest::Approx(1.0));
        CHECK(w.method == "log-score");
    }
    SUBCASE("a dominant model takes nearly all the weight") {
        PredictionMatrix m;
        m.preds.resize(2);
        Rng rng(2);
        for (std::size_t i = 0; i < 40; ++i) {
            const double y = rng.uniform(-1.0, 1.0);
            m.observed.push_back(y);
            m.preds[0].push_back(GaussianPrediction{y, 0.1});        // sharp and centered
            m.preds[1].push_back(GaussianPrediction{y + 2.0, 0.1});  // consistently off
        }
        StackingWeights w = fit_logscore_weights(m, 0.0);
        check_simplex(w.w);
        CHECK(w.w[0] >= 0.99);

        // grid search over the 1-simplex at 1e-4 steps agrees
        double best = -1e300, best_w = 0.0;
        for (int i = 0; i <= 10000; ++i) {
            const double wa = static_cast<double>(i) / 10000.0;
            const double obj = logscore_objective(m, {wa, 1.0 - wa}, 0.0);
            if (obj > best) {
                best = obj;
                best_w = wa;
            }
        }
        CHECK(best_w >= 0.99);
        CHECK(logscore_objective(m, w.w, 0.0) >= best - 1e-6);
    }
    SUBCASE("objective reaches the exhaustive K=3 grid optimum") {
        Rng rng(3);
        for (int trial = 0; trial < 5; ++trial) {
            PredictionMatrix m = random_matrix(3, 30, rng);
            const double lambda = trial % 2 == 0 ? 0.0 : 0.01;
            StackingWeights w = fit_logscore_weights(m, lambda);
            check_simplex(w.w);
            const double fitted = logscore_objective(m, w.w, lambda);
            const double grid = oracle::simplex_grid_best(
                3, 0.01, true,
                [&](const std::vector<double>& ww) {
                    return logscore_objective(m, ww, lambda);
                });
            CHECK(fitted >= grid - 1e-6);
        }
    }
    SUBCASE("fitted weights dominate every vertex and the uniform point") {
        Rng rng(4);
        PredictionMatrix m = random_matrix(3, 25, rng);
        StackingWeights w = fit_logscore_weights(m, 0.0);
        const double fitted = logscore_objective(m, w.w, 0.0);
        for (std::size_t k = 0; k < 3; ++k) {
            std::vector<double> vertex(3, 0.0);
            vertex[k] = 1.0;
            CHECK(fitted >= logscore_objective(m, vertex, 0.0) - 1e-6);
        }
        CHECK(fitted >= logscore_objective(m, {1.0 / 3, 1.0 / 3, 1.0 / 3}, 0.0) - 1e-6);
    }
    SUBCASE("stacked NLL never exceeds the best single model") {
        Rng rng(5);
        for (int trial = 0; trial < 10; ++trial) {
            PredictionMatrix m = random_matrix(4, 20, rng);
            StackingWeights w = fit_logscore_weights(m, 0.0);
            // objective is the mean log-likelihood, so NLL = -objective
            const double stacked_nll = -logscore_objective(m, w.w, 0.0);
            double best_single = 1e300;
            for (std::size_t k = 0; k < 4; ++k) {
                std::vector<double> vertex(4, 0.0);
                vertex[k] = 1.0;
                best_single = std::min(best_single, -logscore_objective(m, vertex, 0.0));
            }
            CHECK(stacked_nll <= best_single + 1e-6);
        }
    }
    SUBCASE("empty validation set is rejected") {
        PredictionMatrix m;
        m.preds.resize(2);
        CHECK_THROWS_AS(fit_logscore_weights(m, 0.0), ContractError);
    }
}

TEST_CASE("fit_pointpred_weights") {
    SUBCASE("K=1 short-circuits") {
        Rng rng(1);
        PredictionMatrix m = random_matrix(1, 10, rng);
        StackingWeights w = fit_pointpred_weights(m, 0.0);
        CHECK(w.w == std::vector<double>{1.0});
        CHECK(w.method == "point-mse");
    }
    SUBCASE("an exact model takes nearly all the weight") {
        PredictionMatrix m;
        m.preds.resize(2);
        Rng rng(2);
        for (std::size_t i = 0; i < 30; ++i) {
            const double y = rng.uniform(0.0, 2.0);
            m.observed.push_back(y);
            m.preds[0].push_back(GaussianPrediction{y, 0.2});  // mu equals y exactly
            m.preds[1].push_back(GaussianPrediction{y + 0.5 + 0.2 * rng.gauss(), 0.2});
        }
        StackingWeights w = fit_pointpred_weights(m, 0.0);
        check_simplex(w.w);
        CHECK(w.w[0] >= 0.99);
    }
    SUBCASE("objective reaches the exhaustive K=3 grid optimum") {
        Rng rng(3);
        for (int trial = 0; trial < 5; ++trial) {
            PredictionMatrix m = random_matrix(3, 30, rng);
            const double lambda = trial % 2 == 0 ? 0.0 : 0.01;
            StackingWeights w = fit_pointpred_weights(m, lambda);
            check_simplex(w.w);
            const double fitted = pointpred_objective(m, w.w, lambda);
            const double grid = oracle::simplex_grid_best(
                3, 0.01, false,
                [&](const std::vector<double>& ww) {
                    return pointpred_objective(m, ww, lambda);
                });
            CHECK(fitted <= grid + 1e-6);
        }
    }
}

TEST_CASE("mixture math") {
    // w = [0.3, 0.7], N(1,1) and N(2,4)
    MixturePrediction mix{{GaussianPrediction{1.0, 1.0}, GaussianPrediction{2.0, 2.0}},
                          {0.3, 0.7}};

    SUBCASE("mean and variance from the moment formula") {
        CHECK(mixture_mean(mix) == doctest::Approx(1.7));
        // 0.3*(1+1) + 0.7*(4+4) - 1.7^2
        CHECK(mixture_variance(mix) == doctest::Approx(3.31));
    }
    SUBCASE("moments match a Monte Carlo oracle") {
        Rng rng(9);
        double acc = 0.0, acc2 = 0.0;
        const int n = 1000000;
        for (int i = 0; i < n; ++i) {
            const bool first = rng.uniform() < 0.3;
            const double x = first ? 1.0 + rng.gauss() : 2.0 + 2.0 * rng.gauss();
            acc += x;
            acc2 += x * x;
        }
        const double mc_mean = acc / n;
        const double mc_var = acc2 / n - mc_mean * mc_mean;
        CHECK(std::abs(mc_mean - mixture_mean(mix)) < 0.01);
        CHECK(std::abs(mc_var - mixture_variance(mix)) < 0.02);
    }
    SUBCASE("cdf limits and symmetry") {
        CHECK(mixture_cdf(mix, -1e6) == doctest::Approx(0.0));
        CHECK(mixture_cdf(mix, 1e6) == doctest::Approx(1.0));
        MixturePrediction single{{GaussianPrediction{2.5, 0.7}}, {1.0}};
        CHECK(mixture_cdf(single, 2.5) == doctest::Approx(0.5));
    }
    SUBCASE("cdf is monotone on a grid") {
        double prev = -1.0;
        for (int i = 0; i <= 200; ++i) {
            const double y = -5.0 + 0.07 * i;
            const double F = mixture_cdf(mix, y);
            CHECK(F >= prev);
            prev = F;
        }
    }
    SUBCASE("density integrates to one") {
        auto density = [&](double x) { return mixture_pdf(mix, x); };
        const double integral = oracle::simpson(density, -20.0, 25.0, 4000);
        CHECK(std::abs(integral - 1.0) < 1e-6);
    }
    SUBCASE("quantile inverts the cdf") {
        for (double p : {0.05, 0.25, 0.5, 0.9, 0.99}) {
            const double q = mixture_quantile(mix, p);
            CHECK(mixture_cdf(mix, q) == doctest::Approx(p).epsilon(1e-6));
        }
        CHECK_THROWS_AS(mixture_quantile(mix, 0.0), DomainError);
    }
    SUBCASE("log pdf survives far tails") {
        const double lp = mixture_log_pdf(mix, 80.0);
        CHECK(std::isfinite(lp));
        CHECK(lp < -100.0);
    }
}

TEST_CASE("stack_predict and point_predict") {
    // build a tiny pool of collapsed models so predictions are deterministic
    BcnnConfig cfg;
    cfg.input_length = 6;
    cfg.input_channels = 2;
    cfg.conv1_kernels = 2;
    cfg.conv1_width = 2;
    cfg.conv2_kernels = 2;
    cfg.conv2_width = 2;
    cfg.dense_units = 3;
    cfg.mc_predict_samples = 8;

    ModelPool pool;
    for (int i = 0; i < 2; ++i) {
        Rng rng(100 + i);
        BcnnModel m = BcnnModel::init(cfg, rng);
        for (auto& p : m.params()) p.rho.fill(-40.0);
        pool.members.push_back(PoolMember{std::move(m), "B" + std::to_string(i)});
    }
    Tensor input({6, 2});
    Rng in_rng(3);
    for (std::size_t i = 0; i < input.size(); ++i) input[i] = in_rng.uniform();

    SUBCASE("mixture of one reduces to the single Gaussian") {
        ModelPool single;
        Rng rng(100);
        BcnnModel m = BcnnModel::init(cfg, rng);
        for (auto& p : m.params()) p.rho.fill(-40.0);
        single.members.push_back(PoolMember{std::move(m), "B0"});
        StackingWeights w{{1.0}, "log-score", 0.0};
        Rng r1(5), r2(5);
        MixturePrediction mix = stack_predict(single, w, input, r1);
        GaussianPrediction g = single.members[0].model.predict_distribution(input, r2);
        REQUIRE(mix.components.size() == 1);
        CHECK(mix.components[0].mu == doctest::Approx(g.mu));
        CHECK(mixture_variance(mix) == doctest::Approx(g.sigma * g.sigma));
    }
    SUBCASE("identical components make the weights irrelevant") {
        ModelPool twins;
        for (int i = 0; i < 2; ++i) {
            Rng rng(100);  // same seed twice
            BcnnModel m = BcnnModel::init(cfg, rng);
            for (auto& p : m.params()) p.rho.fill(-40.0);
            twins.members.push_back(PoolMember{std::move(m), "B" + std::to_string(i)});
        }
        StackingWeights w{{0.5, 0.5}, "log-score", 0.0};
        Rng r(5);
        MixturePrediction mix = stack_predict(twins, w, input, r);
        for (double y : {1.0, 1.5, 2.0}) {
            MixturePrediction lone{{mix.components[0]}, {1.0}};
            CHECK(mixture_pdf(mix, y) == doctest::Approx(mixture_pdf(lone, y)));
        }
    }
    SUBCASE("point prediction equals the mixture mean") {
        StackingWeights w{{0.25, 0.75}, "point-mse", 0.0};
        Rng r1(5), r2(5);
        MixturePrediction mix = stack_predict(pool, w, input, r1);
        const double point = point_predict(pool, w, input, r2);
        CHECK(std::abs(point - mixture_mean(mix)) < 1e-12);
    }
    SUBCASE("weight/pool size mismatch is a contract error") {
        StackingWeights w{{1.0}, "log-score", 0.0};
        Rng r(5);
        CHECK_THROWS_AS(stack_predict(pool, w, input, r), ContractError);
        StackingWeights bad{{0.5, 0.6}, "log-score", 0.0};
        CHECK_THROWS_AS(stack_predict(pool, bad, input, r), ContractError);
    }
}

TEST_CASE("build_pool") {
    SyntheticConfig scfg;
    scfg.batteries = 2;
    scfg.cycles_per_battery = 12;
    scfg.base_samples = 8;
    Rng rng(77);
    BatteryDataset ds = generate_synthetic(scfg, rng);

    BcnnConfig cfg;
    cfg.input_length = ds.pad_length;
    cfg.input_channels = ds.normalization.channel_count();
    cfg.conv1_kernels = 2;
    cfg.conv1_width = 3;
    cfg.conv2_kernels = 2;
    cfg.conv2_width = 2;
    cfg.dense_units = 3;
    cfg.epochs = 3;
    cfg.batch_size = 4;
    cfg.mc_predict_samples = 4;

    SUBCASE("one model per battery, tagged with its held-out battery") {
        ModelPool pool = build_pool(ds, cfg, 1234, 1);
        REQUIRE(pool.size() == 2);
        CHECK(pool.members[0].held_out == "S1");
        CHECK(pool.members[1].held_out == "S2");
    }
    SUBCASE("same seed gives an identical pool, any worker count") {
        ModelPool a = build_pool(ds, cfg, 99, 1);
        ModelPool b = build_pool(ds, cfg, 99, 2);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            for (std::size_t j = 0; j < a.members[i].model.params().size(); ++j) {
                CHECK(a.members[i].model.params()[j].mu.values() ==
                      b.members[i].model.params()[j].mu.values());
            }
        }
    }
    SUBCASE("single-battery dataset cannot build a pool") {
        SyntheticConfig one;
        one.batteries = 1;
        one.cycles_per_battery = 5;
        Rng r(1);
        BatteryDataset tiny = generate_synthetic(one, r);
        CHECK_THROWS_AS(build_pool(tiny, cfg, 1, 1), DataError);
    }
}
