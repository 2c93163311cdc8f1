#include "deepraft/net.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace deepraft {

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "linear"; }

Activation parse_activation(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "linear") return Activation::linear;
    throw std::invalid_argument("unknown activation: " + name);
}

std::vector<LayerSpec> parse_architecture(const std::string& text) {
    std::vector<LayerSpec> layers;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        item.erase(std::remove_if(item.begin(), item.end(), [](unsigned char c) { return std::isspace(c); }),
                   item.end());
        if (item.empty()) continue;
        const auto colon = item.find(':');
        const std::string width = item.substr(0, colon);
        const std::string act = colon == std::string::npos ? "relu" : item.substr(colon + 1);
        std::size_t used = 0;
        const long w = std::stol(width, &used);
        if (used != width.size() || w <= 0) throw std::invalid_argument("bad layer width: " + width);
        layers.push_back({static_cast<std::size_t>(w), parse_activation(act)});
    }
    validate_architecture(layers);
    return layers;
}

std::string format_architecture(std::span<const LayerSpec> layers) {
    std::string out;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (l) out += ',';
        out += std::to_string(layers[l].width) + ':' + to_string(layers[l].activation);
    }
    return out;
}

std::vector<LayerSpec> simulation_architecture(bool all_linear) {
    const Activation hidden = all_linear ? Activation::linear : Activation::relu;
    return {{128, hidden}, {32, hidden}, {16, hidden}, {1, Activation::linear}};
}

std::vector<LayerSpec> real_data_architecture() {
    std::vector<LayerSpec> layers;
    for (int k = 0; k < 5; ++k) layers.push_back({128, Activation::relu});
    for (int k = 0; k < 2; ++k) layers.push_back({64, Activation::relu});
    for (int k = 0; k < 2; ++k) layers.push_back({32, Activation::relu});
    layers.push_back({1, Activation::linear});
    return layers;
}

void validate_architecture(std::span<const LayerSpec> layers) {
    if (layers.empty()) throw std::invalid_argument("architecture: empty layer list");
    for (const auto& l : layers) {
        if (l.width == 0) throw std::invalid_argument("architecture: zero-width layer");
    }
    if (layers.back().width != 1 || layers.back().activation != Activation::linear) {
        throw std::invalid_argument("architecture: final layer must be 1:linear");
    }
}

// ---------------------------------------------------------------------------

std::size_t NetworkParams::parameter_count() const {
    std::size_t count = 0;
    for (const auto& l : layers) count += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return count;
}

std::vector<LayerSpec> NetworkParams::specs() const {
    std::vector<LayerSpec> out;
    out.reserve(layers.size());
    for (const auto& l : layers) out.push_back({static_cast<std::size_t>(l.weight.rows()), l.activation});
    return out;
}

NetworkParams NetworkParams::zeros_like() const {
    NetworkParams z;
    z.input_dim = input_dim;
    z.layers.reserve(layers.size());
    for (const auto& l : layers) {
        z.layers.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                            Eigen::VectorXd::Zero(l.bias.size()), l.activation});
    }
    return z;
}

void NetworkParams::validate() const {
    if (layers.empty()) throw DimensionError("NetworkParams: no layers");
    Eigen::Index in = static_cast<Eigen::Index>(input_dim);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        if (layer.weight.cols() != in || layer.bias.size() != layer.weight.rows()) {
            throw DimensionError("NetworkParams: layer " + std::to_string(l) + " does not chain");
        }
        in = layer.weight.rows();
    }
    if (in != 1) throw DimensionError("NetworkParams: output width must be 1");
}

NetworkParams init_params(std::span<const LayerSpec> layers, std::size_t input_dim, Rng& rng) {
    validate_architecture(layers);
    if (input_dim == 0) throw std::invalid_argument("init_params: input dimension must be positive");
    NetworkParams params;
    params.input_dim = input_dim;
    std::size_t fan_in = input_dim;
    for (const auto& spec : layers) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-limit, limit);
        DenseLayer layer{Eigen::MatrixXd(static_cast<Eigen::Index>(spec.width), static_cast<Eigen::Index>(fan_in)),
                         Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.width)), spec.activation};
        // fill row by row so the draw order matches the row-major file layout
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = dist(rng);
        }
        params.layers.push_back(std::move(layer));
        fan_in = spec.width;
    }
    return params;
}

namespace {

template <class Derived>
void apply_activation(Activation a, Eigen::MatrixBase<Derived>& z) {
    if (a == Activation::relu) z = z.cwiseMax(0.0);
}

}  // namespace

double forward(const NetworkParams& params, std::span<const double> x) {
    if (x.size() != params.input_dim) {
        throw DimensionError("forward: input has " + std::to_string(x.size()) + " entries, network expects " +
                             std::to_string(params.input_dim));
    }
    Eigen::VectorXd h = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    for (const auto& layer : params.layers) {
        Eigen::VectorXd z = layer.weight * h + layer.bias;
        apply_activation(layer.activation, z);
        h = std::move(z);
    }
    return h[0];
}

Vector predict(const NetworkParams& params, const Matrix& covariates) {
    if (static_cast<std::size_t>(covariates.cols()) != params.input_dim) {
        throw DimensionError("predict: covariate matrix has " + std::to_string(covariates.cols()) +
                             " columns, network expects " + std::to_string(params.input_dim));
    }
    const Eigen::Index n = covariates.rows();
    Vector out(n);
    constexpr Eigen::Index chunk = 256;
    const Eigen::Index chunks = (n + chunk - 1) / chunk;
#pragma omp parallel for schedule(static)
    for (Eigen::Index c = 0; c < chunks; ++c) {
        const Eigen::Index start = c * chunk;
        const Eigen::Index len = std::min(chunk, n - start);
        Eigen::MatrixXd h = covariates.middleRows(start, len).transpose();
        for (const auto& layer : params.layers) {
            Eigen::MatrixXd z = layer.weight * h;
            z.colwise() += layer.bias;
            apply_activation(layer.activation, z);
            h = std::move(z);
        }
        out.segment(start, len) = h.row(0).transpose();
    }
    return out;
}

void shift_output(NetworkParams& params, double c) {
    if (params.layers.empty()) throw DimensionError("shift_output: no layers");
    params.layers.back().bias[0] += c;
}

// ---------------------------------------------------------------------------

void gather_pair_batch(const SurvivalDataset& data, const Vector& log_y, std::span<const ResidualPair> pairs,
                       PairBatch& out) {
    const auto b = static_cast<Eigen::Index>(pairs.size());
    const auto p = static_cast<Eigen::Index>(data.p());
    const std::size_t n = data.n();
    out.inputs.resize(p, 2 * b);
    out.log_time.resize(2 * b);
    const Matrix& x = data.covariates();
    for (Eigen::Index k = 0; k < b; ++k) {
        const auto& pr = pairs[static_cast<std::size_t>(k)];
        if (pr.i >= n || pr.j >= n) throw std::out_of_range("gather_pair_batch: pair index out of range");
        out.inputs.col(k) = x.row(pr.i).transpose();
        out.inputs.col(b + k) = x.row(pr.j).transpose();
        out.log_time[k] = log_y[pr.i];
        out.log_time[b + k] = log_y[pr.j];
    }
}

PairBatch make_pair_batch(const SurvivalDataset& data, std::span<const ResidualPair> pairs) {
    PairBatch batch;
    gather_pair_batch(data, log_times(data), pairs, batch);
    return batch;
}

LossBreakdown pair_loss_and_grad(const NetworkParams& params, const PairBatch& batch,
                                 const PairLossSettings& settings, NetworkParams& grad, PairWorkspace& ws) {
    const std::size_t depth = params.layers.size();
    const Eigen::Index b = static_cast<Eigen::Index>(batch.size());
    if (b == 0) throw std::invalid_argument("pair_loss_and_grad: empty batch");
    if (static_cast<std::size_t>(batch.inputs.rows()) != params.input_dim || batch.log_time.size() != 2 * b) {
        throw DimensionError("pair_loss_and_grad: batch does not match network input dimension");
    }
    if (grad.layers.size() != depth) grad = params.zeros_like();

    ws.pre.resize(depth);
    ws.post.resize(depth);
    for (std::size_t l = 0; l < depth; ++l) {
        const auto& layer = params.layers[l];
        const Eigen::MatrixXd& input = l == 0 ? batch.inputs : ws.post[l - 1];
        ws.pre[l].noalias() = layer.weight * input;
        ws.pre[l].colwise() += layer.bias;
        if (layer.activation == Activation::relu) {
            ws.post[l] = ws.pre[l].cwiseMax(0.0);
        } else {
            ws.post[l] = ws.pre[l];
        }
    }

    LossBreakdown loss;
    const double rank_scale = settings.average_rank_term ? 1.0 / static_cast<double>(b) : 1.0;
    const auto& out = ws.post[depth - 1];
    ws.delta.setZero(1, 2 * b);
    for (Eigen::Index k = 0; k < b; ++k) {
        // e_j - e_i with e = log Y - f
        const double a = (batch.log_time[b + k] - out(0, b + k)) - (batch.log_time[k] - out(0, k));
        if (a > 0.0) {
            loss.rank += a;
            ws.delta(0, k) += rank_scale;
            ws.delta(0, b + k) -= rank_scale;
        }
    }
    loss.rank *= rank_scale;

    const double activity_scale = settings.activity_penalty / static_cast<double>(b);
    for (std::size_t l = depth; l-- > 0;) {
        const auto& layer = params.layers[l];
        auto& g = grad.layers[l];
        if (l + 1 < depth && settings.activity_penalty > 0.0) {
            loss.activity_penalty += activity_scale * ws.post[l].squaredNorm();
            ws.delta += (2.0 * activity_scale) * ws.post[l];
        }
        if (layer.activation == Activation::relu) {
            ws.delta = (ws.pre[l].array() > 0.0).select(ws.delta, 0.0);
        }
        const Eigen::MatrixXd& input = l == 0 ? batch.inputs : ws.post[l - 1];
        g.weight.noalias() = ws.delta * input.transpose();
        g.bias = ws.delta.rowwise().sum();
        if (settings.l2_weight_penalty > 0.0) {
            loss.weight_penalty += settings.l2_weight_penalty * layer.weight.squaredNorm();
            g.weight += (2.0 * settings.l2_weight_penalty) * layer.weight;
        }
        if (l > 0) {
            ws.delta_prev.noalias() = layer.weight.transpose() * ws.delta;
            std::swap(ws.delta, ws.delta_prev);
        }
    }
    loss.total = loss.rank + loss.weight_penalty + loss.activity_penalty;
    return loss;
}

LossAndGrad pair_loss_and_grad(const NetworkParams& params, const PairBatch& batch,
                               const PairLossSettings& settings) {
    LossAndGrad result{{}, params.zeros_like()};
    PairWorkspace ws;
    result.loss = pair_loss_and_grad(params, batch, settings, result.grad, ws);
    return result;
}

// ---------------------------------------------------------------------------

std::string to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer(const std::string& name) {
    if (name == "sgd") return OptimizerKind::sgd;
    if (name == "adam") return OptimizerKind::adam;
    throw std::invalid_argument("unknown optimizer: " + name);
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("TrainConfig: momentum must be in [0, 1)");
    if (decay < 0.0) throw std::invalid_argument("TrainConfig: decay must be nonnegative");
    if (batch_size == 0) throw std::invalid_argument("TrainConfig: batch_size must be positive");
    if (l2_weight_penalty < 0.0 || activity_penalty < 0.0) {
        throw std::invalid_argument("TrainConfig: penalties must be nonnegative");
    }
    if (pairs_per_event == 0) throw std::invalid_argument("TrainConfig: pairs_per_event must be positive");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0 && adam_epsilon > 0.0)) {
        throw std::invalid_argument("TrainConfig: invalid adam constants");
    }
}

double default_learning_rate(std::size_t n_train, bool gumbel_errors) {
    const bool large = n_train > 4000;
    if (gumbel_errors) return large ? 2e-3 : 3e-3;
    return large ? 1e-4 : 3e-4;
}

std::size_t default_pairs_per_event(std::size_t n_train) {
    if (n_train <= 1000) return 5;
    if (n_train >= 5000) return 10;
    return 5 + (5 * (n_train - 1000)) / 4000;
}

OptimizerState make_optimizer_state(const NetworkParams& params) {
    return {params.zeros_like(), params.zeros_like(), 0};
}

double learning_rate_at(const TrainConfig& config, std::uint64_t step) {
    return config.learning_rate / (1.0 + config.decay * static_cast<double>(step));
}

namespace {

void check_same_shape(const NetworkParams& a, const NetworkParams& b, const char* what) {
    bool ok = a.layers.size() == b.layers.size();
    for (std::size_t l = 0; ok && l < a.layers.size(); ++l) {
        ok = a.layers[l].weight.rows() == b.layers[l].weight.rows() &&
             a.layers[l].weight.cols() == b.layers[l].weight.cols() &&
             a.layers[l].bias.size() == b.layers[l].bias.size();
    }
    if (!ok) throw DimensionError(std::string(what) + ": parameter shapes differ");
}

}  // namespace

void sgd_step(NetworkParams& params, const NetworkParams& grad, OptimizerState& state, const TrainConfig& config) {
    check_same_shape(params, grad, "sgd_step");
    if (state.first_moment.layers.size() != params.layers.size()) state = make_optimizer_state(params);
    check_same_shape(params, state.first_moment, "sgd_step");
    const double lr = learning_rate_at(config, state.step);
    const double mu = config.momentum;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        auto& w = params.layers[l];
        auto& v = state.first_moment.layers[l];
        const auto& g = grad.layers[l];
        v.weight = mu * v.weight - lr * g.weight;
        v.bias = mu * v.bias - lr * g.bias;
        if (config.nesterov) {
            w.weight += mu * v.weight - lr * g.weight;
            w.bias += mu * v.bias - lr * g.bias;
        } else {
            w.weight += v.weight;
            w.bias += v.bias;
        }
    }
    ++state.step;
}

void adam_step(NetworkParams& params, const NetworkParams& grad, OptimizerState& state, const TrainConfig& config) {
    check_same_shape(params, grad, "adam_step");
    if (state.first_moment.layers.size() != params.layers.size()) state = make_optimizer_state(params);
    const double lr = learning_rate_at(config, state.step);
    ++state.step;
    const double b1 = config.adam_beta1;
    const double b2 = config.adam_beta2;
    const double t = static_cast<double>(state.step);
    const double lr_t = lr * std::sqrt(1.0 - std::pow(b2, t)) / (1.0 - std::pow(b1, t));
    const double eps = config.adam_epsilon;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        auto& w = params.layers[l];
        auto& m = state.first_moment.layers[l];
        auto& v = state.second_moment.layers[l];
        const auto& g = grad.layers[l];
        m.weight = b1 * m.weight + (1.0 - b1) * g.weight;
        m.bias = b1 * m.bias + (1.0 - b1) * g.bias;
        v.weight = b2 * v.weight + (1.0 - b2) * g.weight.cwiseAbs2();
        v.bias = b2 * v.bias + (1.0 - b2) * g.bias.cwiseAbs2();
        w.weight.array() -= lr_t * m.weight.array() / (v.weight.array().sqrt() + eps);
        w.bias.array() -= lr_t * m.bias.array() / (v.bias.array().sqrt() + eps);
    }
}

void optimizer_step(NetworkParams& params, const NetworkParams& grad, OptimizerState& state,
                    const TrainConfig& config) {
    if (config.optimizer == OptimizerKind::sgd) {
        sgd_step(params, grad, state, config);
    } else {
        adam_step(params, grad, state, config);
    }
}

NetworkParams train(const SurvivalDataset& data, std::span<const LayerSpec> layers, const TrainConfig& config,
                    const EpochObserver& observer) {
    config.validate();
    require_events(data, "train");
    Rng init_rng = make_stream(config.seed, 0);
    Rng pair_rng = make_stream(config.seed, 1);
    Rng shuffle_rng = make_stream(config.seed, 2);

    NetworkParams params = init_params(layers, data.p(), init_rng);
    if (config.epochs == 0) return params;

    PairSample sample = subsample_pairs(data, config.pairs_per_event, pair_rng);
    const Vector log_y = log_times(data);
    const PairLossSettings settings = config.loss_settings();

    OptimizerState state = make_optimizer_state(params);
    NetworkParams grad = params.zeros_like();
    PairWorkspace ws;
    PairBatch batch;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        LossBreakdown epoch_loss;
        for (const auto block : shuffle_into_batches(sample.pairs, config.batch_size, shuffle_rng)) {
            gather_pair_batch(data, log_y, block, batch);
            const LossBreakdown l = pair_loss_and_grad(params, batch, settings, grad, ws);
            epoch_loss.total += l.total;
            epoch_loss.rank += l.rank;
            epoch_loss.weight_penalty += l.weight_penalty;
            epoch_loss.activity_penalty += l.activity_penalty;
            optimizer_step(params, grad, state, config);
        }
        if (observer) observer(epoch, epoch_loss);
    }
    return params;
}

}  // namespace deepraft
