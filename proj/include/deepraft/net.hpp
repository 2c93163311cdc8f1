#pragma once

// Feed-forward mean function f_w trained on sub-sampled Gehan pairs. Both
// members of a pair go through the same parameter set; their gradients are
// summed into one NetworkParams.

#include "deepraft/core.hpp"
#include "deepraft/gehan.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace deepraft {

enum class Activation { relu, linear };

struct LayerSpec {
    std::size_t width = 1;
    Activation activation = Activation::linear;

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

[[nodiscard]] std::string to_string(Activation a);
[[nodiscard]] Activation parse_activation(const std::string& name);

/// "128:relu,32:relu,16:relu,1:linear"
[[nodiscard]] std::vector<LayerSpec> parse_architecture(const std::string& text);
[[nodiscard]] std::string format_architecture(std::span<const LayerSpec> layers);

/// 128/32/16 relu + linear output; with all_linear every activation is linear.
[[nodiscard]] std::vector<LayerSpec> simulation_architecture(bool all_linear = false);
/// 128 x5, 64 x2, 32 x2 relu + linear output.
[[nodiscard]] std::vector<LayerSpec> real_data_architecture();

/// Throws std::invalid_argument unless the list is non-empty and ends in a
/// width-1 linear layer.
void validate_architecture(std::span<const LayerSpec> layers);

struct DenseLayer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;    // out
    Activation activation = Activation::linear;
};

struct NetworkParams {
    std::size_t input_dim = 0;
    std::vector<DenseLayer> layers;

    [[nodiscard]] std::size_t parameter_count() const;
    [[nodiscard]] std::vector<LayerSpec> specs() const;
    [[nodiscard]] NetworkParams zeros_like() const;
    /// Throws DimensionError if the layer chain is inconsistent.
    void validate() const;
};

/// Weights uniform on +-sqrt(6 / fan_in) (variance 2 / fan_in), biases zero.
[[nodiscard]] NetworkParams init_params(std::span<const LayerSpec> layers, std::size_t input_dim, Rng& rng);

[[nodiscard]] double forward(const NetworkParams& params, std::span<const double> x);
[[nodiscard]] Vector predict(const NetworkParams& params, const Matrix& covariates);

/// Adds c to the output bias, shifting every prediction by c.
void shift_output(NetworkParams& params, double c);

// ---------------------------------------------------------------------------
// Pair loss
// ---------------------------------------------------------------------------

struct PairLossSettings {
    double l2_weight_penalty = 0.0;  // times sum of squared weights (biases excluded)
    double activity_penalty = 0.0;   // times per-pair mean of squared hidden outputs
    bool average_rank_term = false;  // rank term divided by b instead of summed
};

/// Inputs for b pairs laid out column-wise: columns [0, b) are the anchors
/// x_i, columns [b, 2b) the partners x_j.
struct PairBatch {
    Eigen::MatrixXd inputs;
    Eigen::VectorXd log_time;

    [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(inputs.cols() / 2); }
};

void gather_pair_batch(const SurvivalDataset& data, const Vector& log_y, std::span<const ResidualPair> pairs,
                       PairBatch& out);
[[nodiscard]] PairBatch make_pair_batch(const SurvivalDataset& data, std::span<const ResidualPair> pairs);

struct LossBreakdown {
    double total = 0.0;
    double rank = 0.0;
    double weight_penalty = 0.0;
    double activity_penalty = 0.0;
};

/// Scratch buffers reused across batches.
struct PairWorkspace {
    std::vector<Eigen::MatrixXd> pre;
    std::vector<Eigen::MatrixXd> post;
    Eigen::MatrixXd delta;
    Eigen::MatrixXd delta_prev;
};

/// loss = sum_pairs [e_i - e_j]^- + penalties; grad receives the exact
/// reverse-mode derivative (resized to match params).
LossBreakdown pair_loss_and_grad(const NetworkParams& params, const PairBatch& batch,
                                 const PairLossSettings& settings, NetworkParams& grad, PairWorkspace& ws);

struct LossAndGrad {
    LossBreakdown loss;
    NetworkParams grad;
};

[[nodiscard]] LossAndGrad pair_loss_and_grad(const NetworkParams& params, const PairBatch& batch,
                                             const PairLossSettings& settings);

// ---------------------------------------------------------------------------
// Optimisation
// ---------------------------------------------------------------------------

enum class OptimizerKind { sgd, adam };

[[nodiscard]] std::string to_string(OptimizerKind k);
[[nodiscard]] OptimizerKind parse_optimizer(const std::string& name);

struct TrainConfig {
    OptimizerKind optimizer = OptimizerKind::sgd;
    double learning_rate = 3e-4;
    double momentum = 0.9;
    bool nesterov = true;
    double decay = 1e-5;  // lr_t = lr / (1 + decay * t)
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-7;
    std::size_t batch_size = 50;
    std::size_t epochs = 500;
    double l2_weight_penalty = 0.01;
    double activity_penalty = 0.01;
    bool average_rank_term = true;  // batch-mean reduction of the rank term
    std::size_t pairs_per_event = 5;
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument on out-of-range values.
    void validate() const;
    [[nodiscard]] PairLossSettings loss_settings() const {
        return {l2_weight_penalty, activity_penalty, average_rank_term};
    }
};

/// Learning-rate table keyed by training size and error law:
/// 3e-4 / 1e-4 (n <= 3000 / n = 5000) for gaussian, laplace and t3 errors,
/// 3e-3 / 2e-3 for gumbel errors.
[[nodiscard]] double default_learning_rate(std::size_t n_train, bool gumbel_errors);

/// 5 pairs per event at n = 1000, 10 at n = 5000, linear in between (7 at 3000).
[[nodiscard]] std::size_t default_pairs_per_event(std::size_t n_train);

struct OptimizerState {
    NetworkParams first_moment;   // sgd velocity or adam m
    NetworkParams second_moment;  // adam v only
    std::uint64_t step = 0;
};

[[nodiscard]] OptimizerState make_optimizer_state(const NetworkParams& params);

[[nodiscard]] double learning_rate_at(const TrainConfig& config, std::uint64_t step);

/// v <- momentum v - lr_t g; then w <- w + momentum v - lr_t g with nesterov,
/// or w <- w + v without.
void sgd_step(NetworkParams& params, const NetworkParams& grad, OptimizerState& state, const TrainConfig& config);

/// Bias-corrected adam with the same per-step decay schedule.
void adam_step(NetworkParams& params, const NetworkParams& grad, OptimizerState& state, const TrainConfig& config);

void optimizer_step(NetworkParams& params, const NetworkParams& grad, OptimizerState& state,
                    const TrainConfig& config);

/// Called once per epoch with the summed minibatch loss of that epoch.
using EpochObserver = std::function<void(std::size_t epoch, const LossBreakdown& epoch_loss)>;

/// Samples pairs once, then runs epochs of shuffled minibatch updates.
[[nodiscard]] NetworkParams train(const SurvivalDataset& data, std::span<const LayerSpec> layers,
                                  const TrainConfig& config, const EpochObserver& observer = {});

}  // namespace deepraft
