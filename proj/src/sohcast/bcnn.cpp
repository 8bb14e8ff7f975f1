#include "sohcast/bcnn.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "sohcast/adam.hpp"
#include "sohcast/error.hpp"
#include "sohcast/tensor_ops.hpp"

namespace sohcast {

using nlohmann::json;

namespace {

constexpr std::size_t kHeadUnits = 2;  // mean and raw log-variance

// Inverse of softplus, for spread initialization.
double softplus_inverse(double y) { return std::log(std::expm1(y)); }

Tensor normal_tensor(std::vector<std::size_t> shape, double stddev, Rng& rng) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = stddev * rng.gauss();
    return t;
}

// Sum of elementwise Gaussian log densities of w under N(mu, softplus(rho)^2),
// differentiable through all three arguments.
NodePtr gaussian_logpdf_sum(const NodePtr& w, const NodePtr& mu, const NodePtr& rho) {
    NodePtr s = ad::softplus(rho);
    NodePtr z = ad::div(ad::sub(w, mu), s);
    NodePtr quad = ad::mul(ad::sum(ad::square(z)), -0.5);
    NodePtr logs = ad::neg(ad::sum(ad::log(s)));
    const double c = -0.5 * kLog2Pi * static_cast<double>(w->value.size());
    return ad::add(ad::add(quad, logs), c);
}

NodePtr prior_logpdf_sum(const NodePtr& w, const PriorSpec& prior) {
    const double n = static_cast<double>(w->value.size());
    if (prior.family == PriorSpec::Family::laplace) {
        NodePtr dev = ad::sum(ad::abs(ad::add(w, -prior.loc)));
        return ad::add(ad::mul(dev, -1.0 / prior.scale), -n * std::log(2.0 * prior.scale));
    }
    NodePtr z = ad::mul(ad::add(w, -prior.loc), 1.0 / prior.scale);
    NodePtr quad = ad::mul(ad::sum(ad::square(z)), -0.5);
    return ad::add(quad, -n * (0.5 * kLog2Pi + std::log(prior.scale)));
}

}  // namespace

BcnnModel BcnnModel::init(const BcnnConfig& config, Rng& rng) {
    if (config.input_length < config.conv1_width || config.input_channels == 0 ||
        config.conv1_kernels == 0 || config.conv2_kernels == 0 || config.dense_units == 0) {
        throw ConfigError("bcnn: degenerate architecture configuration");
    }
    const std::size_t l1 = config.input_length - config.conv1_width + 1;
    if (l1 < config.conv2_width) {
        throw ConfigError("bcnn: second conv width " + std::to_string(config.conv2_width) +
                          " exceeds intermediate length " + std::to_string(l1));
    }

    BcnnModel m;
    m.config_ = config;

    auto add_param = [&](const std::string& name, std::vector<std::size_t> shape,
                         double mu_std) {
        VarParam p;
        p.name = name;
        p.mu = normal_tensor(shape, mu_std, rng);
        p.rho = Tensor(shape);
        p.rho.fill(softplus_inverse(0.1 * config.prior.scale));
        m.params_.push_back(std::move(p));
    };

    const auto he = [](std::size_t fan_in) { return std::sqrt(1.0 / static_cast<double>(fan_in)); };
    add_param("conv1.kernel",
              {config.conv1_kernels, config.conv1_width, config.input_channels},
              he(config.conv1_width * config.input_channels));
    add_param("conv1.bias", {config.conv1_kernels}, 0.01);
    add_param("conv2.kernel", {config.conv2_kernels, config.conv2_width, config.conv1_kernels},
              he(config.conv2_width * config.conv1_kernels));
    add_param("conv2.bias", {config.conv2_kernels}, 0.01);
    add_param("dense1.weight", {config.conv2_kernels, config.dense_units},
              he(config.conv2_kernels));
    add_param("dense1.bias", {config.dense_units}, 0.01);
    add_param("dense2.weight", {config.dense_units, kHeadUnits}, he(config.dense_units));
    add_param("dense2.bias", {kHeadUnits}, 0.01);

    m.check_architecture();
    return m;
}

void BcnnModel::check_architecture() const {
    if (!config_.strict_shapes) return;
    // Reference stack: (371,4) -> (369,16) -> (368,8) -> (8) -> (8) -> (16) -> (2)
    const bool ok = config_.input_length == 371 && config_.input_channels == 4 &&
                    config_.conv1_kernels == 16 && config_.conv1_width == 3 &&
                    config_.conv2_kernels == 8 && config_.conv2_width == 2 &&
                    config_.dense_units == 16 && param_count() == 1300;
    if (!ok) {
        throw ConfigError("bcnn: strict shape mode requires the reference architecture "
                          "(input 371x4, conv 16@3 then 8@2, dense 16, 1300 parameters)");
    }
}

std::size_t BcnnModel::param_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.mu.size() + p.rho.size();
    return n;
}

std::vector<std::vector<std::size_t>> BcnnModel::layer_output_shapes() const {
    const std::size_t l1 = config_.input_length - config_.conv1_width + 1;
    const std::size_t l2 = l1 - config_.conv2_width + 1;
    return {{l1, config_.conv1_kernels},
            {l2, config_.conv2_kernels},
            {config_.conv2_kernels},
            {config_.conv2_kernels},
            {config_.dense_units},
            {kHeadUnits}};
}

WeightDraw BcnnModel::sample_draw(Rng& rng) const {
    WeightDraw d;
    d.eps.reserve(params_.size());
    for (const auto& p : params_) {
        Tensor e(p.mu.shape());
        for (std::size_t i = 0; i < e.size(); ++i) e[i] = rng.gauss();
        d.eps.push_back(std::move(e));
    }
    return d;
}

WeightDraw BcnnModel::zero_draw() const {
    WeightDraw d;
    for (const auto& p : params_) d.eps.emplace_back(p.mu.shape());
    return d;
}

GaussianSpec BcnnModel::forward_predict(const Tensor& input, const WeightDraw& draw) const {
    if (input.rank() != 2 || input.dim(0) != config_.input_length ||
        input.dim(1) != config_.input_channels) {
        throw DimensionError("bcnn: input " + input.shape_str() + " does not match configured " +
                             std::to_string(config_.input_length) + "x" +
                             std::to_string(config_.input_channels));
    }
    if (draw.eps.size() != params_.size()) {
        throw ContractError("bcnn: weight draw has " + std::to_string(draw.eps.size()) +
                            " tensors, expected " + std::to_string(params_.size()));
    }
    auto sampled = [&](std::size_t i) {
        return reparam_sample(params_[i].mu, params_[i].rho, draw.eps[i]);
    };

    auto relu_inplace = [](Tensor& t) {
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = t[i] > 0.0 ? t[i] : 0.0;
    };
    Tensor h1 = conv1d_forward(input, sampled(0), sampled(1));
    relu_inplace(h1);
    Tensor h2 = conv1d_forward(h1, sampled(2), sampled(3));
    relu_inplace(h2);
    Tensor g = global_avg_pool(h2);
    Tensor d1 = dense_forward(g, sampled(4), sampled(5));
    relu_inplace(d1);
    Tensor out = dense_forward(d1, sampled(6), sampled(7));

    const double mean = out[0];
    const double variance = std::exp(out[1]);
    if (!std::isfinite(mean) || !std::isfinite(variance)) {
        const Tensor* stages[] = {&h1, &h2, &g, &d1, &out};
        const char* names[] = {"conv1 (layer 1)", "conv2 (layer 2)", "pool (layer 3)",
                               "dense1 (layer 5)", "dense2 (layer 6)", "head (layer 7)"};
        std::size_t bad = 5;
        for (std::size_t i = 0; i < 5; ++i) {
            if (!stages[i]->all_finite()) {
                bad = i;
                break;
            }
        }
        throw NumericError(std::string("bcnn: non-finite activation in ") + names[bad]);
    }
    return GaussianSpec{mean, std::sqrt(variance)};
}

PredictiveMoments BcnnModel::predict_moments(const Tensor& input, Rng& rng,
                                             double input_noise_sigma) const {
    const std::size_t S = config_.mc_predict_samples;
    if (S < 2) {
        throw ContractError("bcnn: mc_predict_samples must be >= 2, got " +
                            std::to_string(S));
    }
    std::vector<double> means(S), variances(S);
    Tensor noisy = input;
    for (std::size_t s = 0; s < S; ++s) {
        // The noise tensor is drawn even at sigma 0 so the stream position
        // is identical across noise levels: a sweep over sigma then uses
        // common random numbers and the variance responds to sigma alone.
        for (std::size_t i = 0; i < noisy.size(); ++i) {
            noisy[i] = input[i] + input_noise_sigma * rng.gauss();
        }
        GaussianSpec g = forward_predict(noisy, sample_draw(rng));
        means[s] = g.mu;
        variances[s] = g.sigma * g.sigma;
    }
    PredictiveMoments m;
    for (std::size_t s = 0; s < S; ++s) {
        m.mean += means[s];
        m.aleatoric += variances[s];
    }
    m.mean /= static_cast<double>(S);
    m.aleatoric /= static_cast<double>(S);
    for (std::size_t s = 0; s < S; ++s) {
        const double d = means[s] - m.mean;
        m.epistemic += d * d;
    }
    m.epistemic /= static_cast<double>(S);
    return m;
}

GaussianPrediction BcnnModel::predict_distribution(const Tensor& input, Rng& rng,
                                                   double input_noise_sigma) const {
    PredictiveMoments m = predict_moments(input, rng, input_noise_sigma);
    return GaussianPrediction{m.mean, std::sqrt(m.variance())};
}

double BcnnModel::effective_kl_weight(std::size_t n_pairs) const {
    if (config_.kl_weight) return *config_.kl_weight;
    return n_pairs == 0 ? 1.0 : 1.0 / static_cast<double>(n_pairs);
}

NodePtr BcnnModel::elbo_loss(const std::vector<const CycleTensor*>& batch,
                             const std::vector<WeightDraw>& draws, double kl_weight) const {
    return elbo_loss(batch, draws, kl_weight, nullptr);
}

NodePtr BcnnModel::elbo_loss(const std::vector<const CycleTensor*>& batch,
                             const std::vector<WeightDraw>& draws, double kl_weight,
                             std::vector<std::pair<NodePtr, NodePtr>>* param_nodes) const {
    if (batch.empty()) throw ContractError("bcnn: elbo_loss over an empty batch");
    if (draws.empty()) throw ContractError("bcnn: elbo_loss needs at least one weight draw");

    std::vector<std::pair<NodePtr, NodePtr>> nodes;  // (mu, rho) per param tensor
    nodes.reserve(params_.size());
    for (const auto& p : params_) {
        nodes.emplace_back(ad::parameter(p.mu), ad::parameter(p.rho));
    }
    if (param_nodes) *param_nodes = nodes;

    NodePtr total;
    for (const auto& draw : draws) {
        if (draw.eps.size() != params_.size()) {
            throw ContractError("bcnn: weight draw/parameter count mismatch");
        }
        std::vector<NodePtr> w(params_.size());
        for (std::size_t i = 0; i < params_.size(); ++i) {
            w[i] = ad::reparam(nodes[i].first, nodes[i].second, draw.eps[i]);
        }

        NodePtr nll_sum;
        for (const CycleTensor* pair : batch) {
            NodePtr x = ad::constant(pair->features);
            NodePtr h = ad::relu(ad::conv1d(x, w[0], w[1]));
            h = ad::relu(ad::conv1d(h, w[2], w[3]));
            NodePtr g = ad::global_avg_pool(h);
            NodePtr d1 = ad::relu(ad::dense(g, w[4], w[5]));
            NodePtr out = ad::dense(d1, w[6], w[7]);
            NodePtr mu = ad::index(out, 0);
            NodePtr sraw = ad::index(out, 1);
            // Gaussian NLL with log-variance head: 0.5*(log 2pi + sraw + r^2/exp(sraw))
            NodePtr r2 = ad::square(ad::add(ad::neg(mu), pair->label));
            NodePtr quad = ad::div(r2, ad::exp(sraw));
            NodePtr nll = ad::mul(ad::add(ad::add(sraw, quad), kLog2Pi), 0.5);
            nll_sum = nll_sum ? ad::add(nll_sum, nll) : nll;
        }
        NodePtr data_term = ad::mul(nll_sum, 1.0 / static_cast<double>(batch.size()));

        // Monte Carlo KL estimate at the sampled weights
        NodePtr kl;
        if (kl_weight != 0.0) {
            for (std::size_t i = 0; i < params_.size(); ++i) {
                NodePtr term = ad::sub(gaussian_logpdf_sum(w[i], nodes[i].first, nodes[i].second),
                                       prior_logpdf_sum(w[i], config_.prior));
                kl = kl ? ad::add(kl, term) : term;
            }
        }
        NodePtr loss = kl ? ad::add(data_term, ad::mul(kl, kl_weight)) : data_term;
        total = total ? ad::add(total, loss) : loss;
    }
    return ad::mul(total, 1.0 / static_cast<double>(draws.size()));
}

void BcnnModel::train(const std::vector<CycleTensor>& pairs, Rng& rng) {
    if (config_.epochs == 0) return;
    if (pairs.size() < config_.batch_size) {
        throw TrainingError("bcnn: " + std::to_string(pairs.size()) +
                            " training pairs but batch_size is " +
                            std::to_string(config_.batch_size));
    }
    const double kl_full = effective_kl_weight(pairs.size());
    AdamState adam(config_.learning_rate);

    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < config_.epochs; ++epoch) {
        // Fisher-Yates with the run generator keeps epochs replayable
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[rng.index(i)]);
        }
        double kl_w = kl_full;
        if (config_.kl_anneal_epochs > 0 && epoch < config_.kl_anneal_epochs) {
            kl_w *= static_cast<double>(epoch + 1) /
                    static_cast<double>(config_.kl_anneal_epochs);
        }

        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < pairs.size(); start += config_.batch_size) {
            const std::size_t end = std::min(start + config_.batch_size, pairs.size());
            std::vector<const CycleTensor*> batch;
            batch.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) batch.push_back(&pairs[order[i]]);

            std::vector<WeightDraw> draws;
            draws.reserve(config_.mc_train_samples);
            for (std::size_t s = 0; s < std::max<std::size_t>(1, config_.mc_train_samples); ++s)
                draws.push_back(sample_draw(rng));

            std::vector<std::pair<NodePtr, NodePtr>> nodes;
            NodePtr loss = elbo_loss(batch, draws, kl_w, &nodes);
            if (!std::isfinite(loss->value[0])) {
                throw TrainingError("bcnn: loss diverged (non-finite) at epoch " +
                                    std::to_string(epoch) + ", batch " +
                                    std::to_string(batches));
            }
            backward(loss);

            std::vector<Tensor*> ps;
            std::vector<const Tensor*> gs;
            std::vector<std::string> names;
            for (std::size_t i = 0; i < params_.size(); ++i) {
                ps.push_back(&params_[i].mu);
                gs.push_back(&nodes[i].first->grad);
                names.push_back(params_[i].name + ".mu");
                ps.push_back(&params_[i].rho);
                gs.push_back(&nodes[i].second->grad);
                names.push_back(params_[i].name + ".rho");
            }
            try {
                adam.update(ps, gs, names);
            } catch (const NumericError& e) {
                throw TrainingError("bcnn: epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(batches) + ": " + e.what());
            }
            epoch_loss += loss->value[0];
            ++batches;
        }
        history_.push_back(epoch_loss / static_cast<double>(batches));
    }
}

namespace {

json tensor_to_json(const Tensor& t) {
    return json{{"shape", t.shape()}, {"values", t.values()}};
}

Tensor tensor_from_json(const json& j) {
    return Tensor(j.at("shape").get<std::vector<std::size_t>>(),
                  j.at("values").get<std::vector<double>>());
}

}  // namespace

std::string BcnnModel::to_json() const {
    json cfg{{"input_length", config_.input_length},
             {"input_channels", config_.input_channels},
             {"conv1_kernels", config_.conv1_kernels},
             {"conv1_width", config_.conv1_width},
             {"conv2_kernels", config_.conv2_kernels},
             {"conv2_width", config_.conv2_width},
             {"dense_units", config_.dense_units},
             {"prior_family",
              config_.prior.family == PriorSpec::Family::laplace ? "laplace" : "gaussian"},
             {"prior_loc", config_.prior.loc},
             {"prior_scale", config_.prior.scale},
             {"learning_rate", config_.learning_rate},
             {"epochs", config_.epochs},
             {"batch_size", config_.batch_size},
             {"mc_train_samples", config_.mc_train_samples},
             {"mc_predict_samples", config_.mc_predict_samples},
             {"kl_anneal_epochs", config_.kl_anneal_epochs},
             {"strict_shapes", config_.strict_shapes},
             {"seed", config_.seed}};
    if (config_.kl_weight) cfg["kl_weight"] = *config_.kl_weight;

    json layers = json::array();
    for (const auto& p : params_) {
        layers.push_back(json{{"name", p.name},
                              {"mu", tensor_to_json(p.mu)},
                              {"rho", tensor_to_json(p.rho)}});
    }
    json doc{{"format", "sohcast-bcnn-v1"},
             {"config", cfg},
             {"params", layers},
             {"history", history_},
             {"normalization_ref", normalization_ref_}};
    return doc.dump(2);
}

BcnnModel BcnnModel::from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("bcnn: invalid model JSON: ") + e.what());
    }
    if (doc.value("format", "") != "sohcast-bcnn-v1") {
        throw DataError("bcnn: unsupported model format '" + doc.value("format", "") + "'");
    }
    BcnnModel m;
    const json& cfg = doc.at("config");
    m.config_.input_length = cfg.at("input_length").get<std::size_t>();
    m.config_.input_channels = cfg.at("input_channels").get<std::size_t>();
    m.config_.conv1_kernels = cfg.at("conv1_kernels").get<std::size_t>();
    m.config_.conv1_width = cfg.at("conv1_width").get<std::size_t>();
    m.config_.conv2_kernels = cfg.at("conv2_kernels").get<std::size_t>();
    m.config_.conv2_width = cfg.at("conv2_width").get<std::size_t>();
    m.config_.dense_units = cfg.at("dense_units").get<std::size_t>();
    m.config_.prior.family = cfg.at("prior_family").get<std::string>() == "gaussian"
                                 ? PriorSpec::Family::gaussian
                                 : PriorSpec::Family::laplace;
    m.config_.prior.loc = cfg.at("prior_loc").get<double>();
    m.config_.prior.scale = cfg.at("prior_scale").get<double>();
    m.config_.learning_rate = cfg.at("learning_rate").get<double>();
    m.config_.epochs = cfg.at("epochs").get<std::size_t>();
    m.config_.batch_size = cfg.at("batch_size").get<std::size_t>();
    m.config_.mc_train_samples = cfg.at("mc_train_samples").get<std::size_t>();
    m.config_.mc_predict_samples = cfg.at("mc_predict_samples").get<std::size_t>();
    if (cfg.contains("kl_weight")) m.config_.kl_weight = cfg.at("kl_weight").get<double>();
    m.config_.kl_anneal_epochs = cfg.at("kl_anneal_epochs").get<std::size_t>();
    m.config_.strict_shapes = cfg.at("strict_shapes").get<bool>();
    m.config_.seed = cfg.at("seed").get<std::uint64_t>();

    for (const auto& layer : doc.at("params")) {
        VarParam p;
        p.name = layer.at("name").get<std::string>();
        p.mu = tensor_from_json(layer.at("mu"));
        p.rho = tensor_from_json(layer.at("rho"));
        if (!p.mu.same_shape(p.rho)) {
            throw DataError("bcnn: mu/rho shape mismatch for '" + p.name + "'");
        }
        m.params_.push_back(std::move(p));
    }
    if (m.params_.size() != 8) {
        throw DataError("bcnn: expected 8 parameter tensors, got " +
                        std::to_string(m.params_.size()));
    }
    m.history_ = doc.value("history", std::vector<double>{});
    m.normalization_ref_ = doc.value("normalization_ref", "");
    m.check_architecture();
    return m;
}

}  // namespace sohcast
