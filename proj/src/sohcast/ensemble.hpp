#pragma once

#include <string>
#include <vector>

#include "sohcast/bcnn.hpp"
#include "sohcast/dataset.hpp"

namespace sohcast {

// One trained base model plus the battery its training set excluded.
struct PoolMember {
    BcnnModel model;
    std::string held_out;
};

struct ModelPool {
    std::vector<PoolMember> members;
    std::size_t size() const { return members.size(); }
};

struct StackingWeights {
    std::vector<double> w;  // on the probability simplex
    std::string method;     // "log-score" or "point-mse"
    double lambda_reg = 0.0;
};

// Weighted Gaussian mixture over the base-model predictive distributions.
struct MixturePrediction {
    std::vector<GaussianPrediction> components;
    std::vector<double> weights;
};

// Immutable per-model predictive summaries over one validation set; the
// weight fits run over this instead of touching the models.
struct PredictionMatrix {
    std::vector<std::vector<GaussianPrediction>> preds;  // [K][N]
    std::vector<double> observed;                        // [N]

    std::size_t model_count() const { return preds.size(); }
    std::size_t point_count() const { return observed.size(); }
};

struct SimplexFitOptions {
    double tol = 1e-8;       // objective change over `window` iterations
    int window = 50;
    long max_iters = 200000;
};

// Trains one model per battery, each on every other battery's pairs.
// Worker threads train distinct members; results are seed-deterministic
// regardless of the worker count.
ModelPool build_pool(const BatteryDataset& dataset, const BcnnConfig& config,
                     std::uint64_t seed, std::size_t workers = 0);

// Maximizes (1/N) sum_i log sum_k w_k p_k(y_i) - lambda * sum w_k^2 over the
// simplex via exponentiated-gradient ascent from the simplex center.
StackingWeights fit_logscore_weights(const PredictionMatrix& matrix, double lambda_reg,
                                     const SimplexFitOptions& opts = {});

// Minimizes sum_i (y_i - sum_k w_k mu_k(x_i))^2 + lambda * sum w_k^2 subject
// to the simplex constraints, via projected gradient descent.
StackingWeights fit_pointpred_weights(const PredictionMatrix& matrix, double lambda_reg,
                                      const SimplexFitOptions& opts = {});

// The objectives the fitters optimize, exposed for oracle comparisons.
double logscore_objective(const PredictionMatrix& matrix, const std::vector<double>& w,
                          double lambda_reg);
double pointpred_objective(const PredictionMatrix& matrix, const std::vector<double>& w,
                           double lambda_reg);

struct PredictOptions {
    double input_noise_sigma = 0.0;
};

// Per-model Monte Carlo predictive distributions combined into a mixture.
MixturePrediction stack_predict(const ModelPool& pool, const StackingWeights& weights,
                                const Tensor& input, Rng& rng, const PredictOptions& opts = {});

// Eq.-(7)-style ensemble point prediction; equals the mixture mean of
// stack_predict under the same draws.
double point_predict(const ModelPool& pool, const StackingWeights& weights,
                     const Tensor& input, Rng& rng, const PredictOptions& opts = {});

double mixture_mean(const MixturePrediction& mix);
double mixture_variance(const MixturePrediction& mix);
double mixture_pdf(const MixturePrediction& mix, double y);
double mixture_log_pdf(const MixturePrediction& mix, double y);
double mixture_cdf(const MixturePrediction& mix, double y);
// Inverse CDF by bisection on [mu_min - 10 sigma_max, mu_max + 10 sigma_max].
double mixture_quantile(const MixturePrediction& mix, double p, double tol = 1e-9);
// Closed form via pairwise Gaussian-difference absolute moments.
double mixture_crps(const MixturePrediction& mix, double y);

MixturePrediction as_mixture(const GaussianPrediction& g);

void validate_weights(const StackingWeights& weights, std::size_t pool_size);

}  // namespace sohcast
