#include "sohcast/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include "sohcast/error.hpp"
#include "sohcast/util.hpp"

namespace sohcast {

namespace {

double logsumexp(const std::vector<double>& terms) {
    double m = -std::numeric_limits<double>::infinity();
    for (double t : terms) m = std::max(m, t);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double t : terms) s += std::exp(t - m);
    return m + std::log(s);
}

void check_matrix(const PredictionMatrix& matrix) {
    if (matrix.model_count() == 0) throw ContractError("weight fit: empty model pool");
    if (matrix.point_count() == 0) throw ContractError("weight fit: no validation pairs");
    for (const auto& row : matrix.preds) {
        if (row.size() != matrix.point_count()) {
            throw DimensionError("weight fit: ragged prediction matrix");
        }
    }
}

// Euclidean projection onto the probability simplex (sort-based).
std::vector<double> project_simplex(std::vector<double> v) {
    const std::size_t n = v.size();
    std::vector<double> u = v;
    std::sort(u.begin(), u.end(), std::greater<double>());
    double cssv = 0.0, theta = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        cssv += u[j];
        const double t = (cssv - 1.0) / static_cast<double>(j + 1);
        if (u[j] - t > 0.0) theta = t;
    }
    for (double& x : v) x = std::max(0.0, x - theta);
    return v;
}

std::vector<std::vector<double>> log_density_table(const PredictionMatrix& matrix) {
    std::vector<std::vector<double>> logp(matrix.model_count(),
                                          std::vector<double>(matrix.point_count()));
    for (std::size_t k = 0; k < matrix.model_count(); ++k) {
        for (std::size_t i = 0; i < matrix.point_count(); ++i) {
            const GaussianPrediction& g = matrix.preds[k][i];
            logp[k][i] = gaussian_log_prob(GaussianSpec{g.mu, g.sigma}, matrix.observed[i]);
        }
    }
    return logp;
}

double logscore_from_table(const std::vector<std::vector<double>>& logp,
                           const std::vector<double>& w, double lambda_reg) {
    const std::size_t K = logp.size();
    const std::size_t N = logp[0].size();
    std::vector<double> logw(K);
    for (std::size_t k = 0; k < K; ++k) {
        logw[k] = w[k] > 0.0 ? std::log(w[k]) : -std::numeric_limits<double>::infinity();
    }
    double acc = 0.0;
    std::vector<double> terms(K);
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t k = 0; k < K; ++k) terms[k] = logw[k] + logp[k][i];
        acc += logsumexp(terms);
    }
    double reg = 0.0;
    for (double x : w) reg += x * x;
    return acc / static_cast<double>(N) - lambda_reg * reg;
}

}  // namespace

ModelPool build_pool(const BatteryDataset& dataset, const BcnnConfig& config,
                     std::uint64_t seed, std::size_t workers) {
    const std::size_t K = dataset.battery_ids.size();
    if (K < 2) {
        throw DataError("build_pool: need at least 2 batteries, got " + std::to_string(K));
    }
    ModelPool pool;
    pool.members.resize(K);
    std::vector<std::string> failures(K);

    auto train_one = [&](std::size_t idx) {
        const std::string& held_out = dataset.battery_ids[idx];
        try {
            std::vector<CycleTensor> pairs;
            for (const auto& id : dataset.battery_ids) {
                if (id == held_out) continue;
                auto p = build_pairs(dataset, id);
                pairs.insert(pairs.end(), std::make_move_iterator(p.begin()),
                             std::make_move_iterator(p.end()));
            }
            BcnnConfig cfg = config;
            cfg.seed = mix_seed(seed, "pool-member", idx);
            Rng rng(cfg.seed);
            BcnnModel model = BcnnModel::init(cfg, rng);
            model.train(pairs, rng);
            pool.members[idx] = PoolMember{std::move(model), held_out};
        } catch (const std::exception& e) {
            failures[idx] = e.what();
        }
    };

    std::size_t n_workers = workers == 0 ? K : std::min(workers, K);
    n_workers = std::max<std::size_t>(1, n_workers);
    if (n_workers == 1) {
        for (std::size_t i = 0; i < K; ++i) train_one(i);
    } else {
        std::vector<std::thread> threads;
        for (std::size_t w = 0; w < n_workers; ++w) {
            threads.emplace_back([&, w] {
                for (std::size_t i = w; i < K; i += n_workers) train_one(i);
            });
        }
        for (auto& t : threads) t.join();
    }

    for (std::size_t i = 0; i < K; ++i) {
        if (!failures[i].empty()) {
            throw TrainingError("build_pool: training the model excluding battery '" +
                                dataset.battery_ids[i] + "' failed: " + failures[i]);
        }
    }
    return pool;
}

double logscore_objective(const PredictionMatrix& matrix, const std::vector<double>& w,
                          double lambda_reg) {
    check_matrix(matrix);
    return logscore_from_table(log_density_table(matrix), w, lambda_reg);
}

double pointpred_objective(const PredictionMatrix& matrix, const std::vector<double>& w,
                           double lambda_reg) {
    check_matrix(matrix);
    const std::size_t K = matrix.model_count(), N = matrix.point_count();
    double acc = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        double yhat = 0.0;
        for (std::size_t k = 0; k < K; ++k) yhat += w[k] * matrix.preds[k][i].mu;
        const double r = matrix.observed[i] - yhat;
        acc += r * r;
    }
    double reg = 0.0;
    for (double x : w) reg += x * x;
    return acc + lambda_reg * reg;
}

StackingWeights fit_logscore_weights(const PredictionMatrix& matrix, double lambda_reg,
                                     const SimplexFitOptions& opts) {
    check_matrix(matrix);
    const std::size_t K = matrix.model_count();
    StackingWeights out;
    out.method = "log-score";
    out.lambda_reg = lambda_reg;
    if (K == 1) {
        out.w = {1.0};
        return out;
    }

    const auto logp = log_density_table(matrix);
    const std::size_t N = matrix.point_count();
    std::vector<double> w(K, 1.0 / static_cast<double>(K));
    double obj = logscore_from_table(logp, w, lambda_reg);
    if (!std::isfinite(obj)) {
        throw FittingError("fit_logscore_weights: objective is not finite at the "
                           "simplex center (all densities underflow)");
    }

    // Exponentiated-gradient ascent: w <- normalize(w * exp(eta * grad)).
    std::vector<double> grad(K), trial(K), ratios(K);
    std::vector<double> recent;
    double eta = 1.0;
    for (long iter = 0; iter < opts.max_iters; ++iter) {
        std::fill(grad.begin(), grad.end(), 0.0);
        for (std::size_t i = 0; i < N; ++i) {
            double m = -std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < K; ++k) {
                ratios[k] = (w[k] > 0.0 ? std::log(w[k]) : -1e300) + logp[k][i];
                m = std::max(m, ratios[k]);
            }
            double denom = 0.0;
            for (std::size_t k = 0; k < K; ++k) denom += std::exp(ratios[k] - m);
            // d/dw_k log sum_j w_j p_ij = p_ik / sum_j w_j p_ij
            for (std::size_t k = 0; k < K; ++k) {
                grad[k] += std::exp(logp[k][i] - m) / denom;
            }
        }
        for (std::size_t k = 0; k < K; ++k) {
            grad[k] = grad[k] / static_cast<double>(N) - 2.0 * lambda_reg * w[k];
        }

        // backtracking on the multiplicative step
        bool improved = false;
        for (int half = 0; half < 60; ++half) {
            double gmax = 0.0;
            for (std::size_t k = 0; k < K; ++k) gmax = std::max(gmax, std::abs(grad[k]));
            const double scale = eta / std::max(gmax, 1e-300);
            double z = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                trial[k] = w[k] * std::exp(scale * grad[k]);
                z += trial[k];
            }
            for (std::size_t k = 0; k < K; ++k) trial[k] /= z;
            const double trial_obj = logscore_from_table(logp, trial, lambda_reg);
            if (std::isfinite(trial_obj) && trial_obj >= obj) {
                improved = trial_obj > obj;
                w = trial;
                obj = trial_obj;
                eta = std::min(eta * 1.5, 64.0);
                break;
            }
            eta *= 0.5;
        }

        recent.push_back(obj);
        if (recent.size() > static_cast<std::size_t>(opts.window)) {
            const double gain = obj - recent[recent.size() - 1 - opts.window];
            if (gain < opts.tol) break;
        }
        if (!improved && eta < 1e-14) break;
    }

    out.w = w;
    return out;
}

StackingWeights fit_pointpred_weights(const PredictionMatrix& matrix, double lambda_reg,
                                      const SimplexFitOptions& opts) {
    check_matrix(matrix);
    const std::size_t K = matrix.model_count();
    StackingWeights out;
    out.method = "point-mse";
    out.lambda_reg = lambda_reg;
    if (K == 1) {
        out.w = {1.0};
        return out;
    }

    const std::size_t N = matrix.point_count();
    std::vector<double> w(K, 1.0 / static_cast<double>(K));
    double obj = pointpred_objective(matrix, w, lambda_reg);

    std::vector<double> grad(K);
    std::vector<double> recent;
    double eta = 1.0;
    for (long iter = 0; iter < opts.max_iters; ++iter) {
        std::fill(grad.begin(), grad.end(), 0.0);
        for (std::size_t i = 0; i < N; ++i) {
            double yhat = 0.0;
            for (std::size_t k = 0; k < K; ++k) yhat += w[k] * matrix.preds[k][i].mu;
            const double r = matrix.observed[i] - yhat;
            for (std::size_t k = 0; k < K; ++k) grad[k] -= 2.0 * r * matrix.preds[k][i].mu;
        }
        for (std::size_t k = 0; k < K; ++k) grad[k] += 2.0 * lambda_reg * w[k];

        bool improved = false;
        for (int half = 0; half < 60; ++half) {
            std::vector<double> step(K);
            for (std::size_t k = 0; k < K; ++k) step[k] = w[k] - eta * grad[k];
            std::vector<double> trial = project_simplex(std::move(step));
            const double trial_obj = pointpred_objective(matrix, trial, lambda_reg);
            if (trial_obj <= obj) {
                improved = trial_obj < obj;
                w = std::move(trial);
                obj = trial_obj;
                eta = std::min(eta * 1.5, 1e6);
                break;
            }
            eta *= 0.5;
        }

        recent.push_back(obj);
        if (recent.size() > static_cast<std::size_t>(opts.window)) {
            const double gain = recent[recent.size() - 1 - opts.window] - obj;
            if (gain < opts.tol) break;
        }
        if (!improved && eta < 1e-16) break;
    }

    out.w = w;
    return out;
}

void validate_weights(const StackingWeights& weights, std::size_t pool_size) {
    if (weights.w.size() != pool_size) {
        throw ContractError("stacking weights have " + std::to_string(weights.w.size()) +
                            " entries for a pool of " + std::to_string(pool_size));
    }
    double total = 0.0;
    for (double x : weights.w) {
        if (x < -1e-12) throw ContractError("stacking weight below zero: " + fmt_double(x));
        total += x;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw ContractError("stacking weights sum to " + fmt_double(total) + ", expected 1");
    }
}

MixturePrediction stack_predict(const ModelPool& pool, const StackingWeights& weights,
                                const Tensor& input, Rng& rng, const PredictOptions& opts) {
    validate_weights(weights, pool.size());
    MixturePrediction mix;
    mix.weights = weights.w;
    mix.components.reserve(pool.size());
    for (const auto& member : pool.members) {
        mix.components.push_back(
            member.model.predict_distribution(input, rng, opts.input_noise_sigma));
    }
    return mix;
}

double point_predict(const ModelPool& pool, const StackingWeights& weights,
                     const Tensor& input, Rng& rng, const PredictOptions& opts) {
    return mixture_mean(stack_predict(pool, weights, input, rng, opts));
}

MixturePrediction as_mixture(const GaussianPrediction& g) {
    return MixturePrediction{{g}, {1.0}};
}

double mixture_mean(const MixturePrediction& mix) {
    double m = 0.0;
    for (std::size_t k = 0; k < mix.components.size(); ++k)
        m += mix.weights[k] * mix.components[k].mu;
    return m;
}

double mixture_variance(const MixturePrediction& mix) {
    const double mean = mixture_mean(mix);
    double second = 0.0;
    for (std::size_t k = 0; k < mix.components.size(); ++k) {
        const auto& c = mix.components[k];
        second += mix.weights[k] * (c.sigma * c.sigma + c.mu * c.mu);
    }
    return second - mean * mean;
}

double mixture_log_pdf(const MixturePrediction& mix, double y) {
    std::vector<double> terms;
    terms.reserve(mix.components.size());
    for (std::size_t k = 0; k < mix.components.size(); ++k) {
        if (mix.weights[k] <= 0.0) continue;
        const auto& c = mix.components[k];
        terms.push_back(std::log(mix.weights[k]) +
                        gaussian_log_prob(GaussianSpec{c.mu, c.sigma}, y));
    }
    if (terms.empty()) return -std::numeric_limits<double>::infinity();
    return logsumexp(terms);
}

double mixture_pdf(const MixturePrediction& mix, double y) {
    return std::exp(mixture_log_pdf(mix, y));
}

double mixture_cdf(const MixturePrediction& mix, double y) {
    double acc = 0.0;
    for (std::size_t k = 0; k < mix.components.size(); ++k) {
        const auto& c = mix.components[k];
        acc += mix.weights[k] * norm_cdf((y - c.mu) / c.sigma);
    }
    return acc;
}

double mixture_quantile(const MixturePrediction& mix, double p, double tol) {
    if (!(p > 0.0 && p < 1.0)) {
        throw DomainError("mixture_quantile: p must lie in (0, 1), got " + fmt_double(p));
    }
    double mu_min = std::numeric_limits<double>::infinity();
    double mu_max = -std::numeric_limits<double>::infinity();
    double sigma_max = 0.0;
    for (const auto& c : mix.components) {
        mu_min = std::min(mu_min, c.mu);
        mu_max = std::max(mu_max, c.mu);
        sigma_max = std::max(sigma_max, c.sigma);
    }
    double lo = mu_min - 10.0 * sigma_max;
    double hi = mu_max + 10.0 * sigma_max;
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (mixture_cdf(mix, mid) < p) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

double mixture_crps(const MixturePrediction& mix, double y) {
    // CRPS(F, y) = sum_k w_k A(y - mu_k, s_k^2)
    //            - 1/2 sum_k sum_j w_k w_j A(mu_k - mu_j, s_k^2 + s_j^2)
    // with A(m, s2) = E|X| for X ~ N(m, s2).
    const std::size_t K = mix.components.size();
    double first = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        const auto& c = mix.components[k];
        first += mix.weights[k] * gaussian_abs_moment(y - c.mu, c.sigma * c.sigma);
    }
    double second = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        const auto& ck = mix.components[k];
        for (std::size_t j = 0; j < K; ++j) {
            const auto& cj = mix.components[j];
            second += mix.weights[k] * mix.weights[j] *
                      gaussian_abs_moment(ck.mu - cj.mu,
                                          ck.sigma * ck.sigma + cj.sigma * cj.sigma);
        }
    }
    return first - 0.5 * second;
}

}  // namespace sohcast
