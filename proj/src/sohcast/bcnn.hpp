#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sohcast/dataset.hpp"
#include "sohcast/dist.hpp"
#include "sohcast/graph.hpp"
#include "sohcast/rng.hpp"
#include "sohcast/tensor.hpp"

namespace sohcast {

struct PriorSpec {
    enum class Family { laplace, gaussian };
    Family family = Family::laplace;
    double loc = 0.0;
    double scale = 1.0;
};

// Defaults reproduce the reference layer stack exactly: input (371, 4),
// Conv1D(16, w=3) -> Conv1D(8, w=2) -> GlobalAvgPool -> Flatten ->
// Dense(16) -> Dense(2) -> (mean, exp variance), 1300 trainable parameters
// counting both the location and spread of every weight posterior.
struct BcnnConfig {
    std::size_t input_length = 371;
    std::size_t input_channels = 4;
    std::size_t conv1_kernels = 16;
    std::size_t conv1_width = 3;
    std::size_t conv2_kernels = 8;
    std::size_t conv2_width = 2;
    std::size_t dense_units = 16;
    PriorSpec prior;
    double learning_rate = 0.01;
    std::size_t epochs = 500;
    std::size_t batch_size = 16;
    std::size_t mc_train_samples = 1;
    std::size_t mc_predict_samples = 100;
    std::optional<double> kl_weight;  // unset: 1 / number of training pairs
    std::size_t kl_anneal_epochs = 0;  // linear ramp of the KL factor, 0 = constant
    bool strict_shapes = false;
    std::uint64_t seed = 1;
};

// One variational parameter tensor: elementwise Gaussian posterior with
// location mu and spread softplus(rho).
struct VarParam {
    std::string name;
    Tensor mu;
    Tensor rho;
};

// One standard-normal draw per variational tensor, in layer order.
struct WeightDraw {
    std::vector<Tensor> eps;
};

struct GaussianPrediction {
    double mu = 0.0;     // Ah
    double sigma = 1.0;  // Ah, strictly positive
};

// Total-variance decomposition of a Monte Carlo predictive distribution.
struct PredictiveMoments {
    double mean = 0.0;
    double aleatoric = 0.0;  // mean of per-draw head variances
    double epistemic = 0.0;  // variance of per-draw head means
    double variance() const { return aleatoric + epistemic; }
};

class BcnnModel {
  public:
    BcnnModel() = default;

    static BcnnModel init(const BcnnConfig& config, Rng& rng);

    const BcnnConfig& config() const { return config_; }
    const std::vector<VarParam>& params() const { return params_; }
    std::vector<VarParam>& params() { return params_; }
    const std::vector<double>& history() const { return history_; }
    const std::string& normalization_ref() const { return normalization_ref_; }
    void set_normalization_ref(std::string ref) { normalization_ref_ = std::move(ref); }

    // Trainable scalar count: mu and rho of every kernel/bias/weight tensor.
    std::size_t param_count() const;

    // Output shapes of the layer stack, for checks against the reference
    // table: conv1, conv2, pool, flatten, dense1, dense2.
    std::vector<std::vector<std::size_t>> layer_output_shapes() const;

    WeightDraw sample_draw(Rng& rng) const;
    WeightDraw zero_draw() const;

    // Single stochastic forward pass with the given weight draw.
    GaussianSpec forward_predict(const Tensor& input, const WeightDraw& draw) const;

    // Monte Carlo predictive distribution: moment-matched Gaussian with
    // variance = mean aleatoric + epistemic (law of total variance).
    // input_noise_sigma adds a fresh feature perturbation per draw.
    PredictiveMoments predict_moments(const Tensor& input, Rng& rng,
                                      double input_noise_sigma = 0.0) const;
    GaussianPrediction predict_distribution(const Tensor& input, Rng& rng,
                                            double input_noise_sigma = 0.0) const;

    // Differentiable negative ELBO over a batch with fixed weight draws
    // (one WeightDraw per Monte Carlo sample). Exposed for gradient checks.
    NodePtr elbo_loss(const std::vector<const CycleTensor*>& batch,
                      const std::vector<WeightDraw>& draws, double kl_weight) const;
    NodePtr elbo_loss(const std::vector<const CycleTensor*>& batch,
                      const std::vector<WeightDraw>& draws, double kl_weight,
                      std::vector<std::pair<NodePtr, NodePtr>>* param_nodes) const;

    // Runs config().epochs of minibatch Adam on the negative ELBO.
    void train(const std::vector<CycleTensor>& pairs, Rng& rng);

    double effective_kl_weight(std::size_t n_pairs) const;

    std::string to_json() const;
    static BcnnModel from_json(const std::string& text);

  private:
    BcnnConfig config_;
    std::vector<VarParam> params_;  // conv1 k/b, conv2 k/b, dense1 w/b, dense2 w/b
    std::vector<double> history_;   // mean training loss per epoch
    std::string normalization_ref_;

    void check_architecture() const;
};

}  // namespace sohcast
