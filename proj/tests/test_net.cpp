#include "deepraft/gehan.hpp"
#include "deepraft/metrics.hpp"
#include "deepraft/net.hpp"
#include "helpers.hpp"

#include <doctest.h>

using namespace deepraft;

namespace {

// Test-side forward pass over one input, returning every post-activation.
std::vector<Eigen::VectorXd> trace(const NetworkParams& net, const Eigen::VectorXd& x) {
    std::vector<Eigen::VectorXd> out;
    Eigen::VectorXd h = x;
    for (const auto& layer : net.layers) {
        Eigen::VectorXd z = layer.weight * h + layer.bias;
        if (layer.activation == Activation::relu) z = z.cwiseMax(0.0);
        out.push_back(z);
        h = z;
    }
    return out;
}

// Independent evaluation of the pair loss from its definition.
double oracle_loss(const NetworkParams& net, const PairBatch& batch, const PairLossSettings& s) {
    const auto b = static_cast<Eigen::Index>(batch.size());
    double rank = 0.0, activity = 0.0;
    for (Eigen::Index k = 0; k < b; ++k) {
        const auto ti = trace(net, batch.inputs.col(k));
        const auto tj = trace(net, batch.inputs.col(b + k));
        const double ei = batch.log_time[k] - ti.back()[0];
        const double ej = batch.log_time[b + k] - tj.back()[0];
        rank += std::max(0.0, -(ei - ej));
        for (std::size_t l = 0; l + 1 < ti.size(); ++l) activity += ti[l].squaredNorm() + tj[l].squaredNorm();
    }
    if (s.average_rank_term) rank /= static_cast<double>(b);
    double weights = 0.0;
    for (const auto& layer : net.layers) weights += layer.weight.squaredNorm();
    return rank + s.l2_weight_penalty * weights + s.activity_penalty * activity / static_cast<double>(b);
}

double& param_at(NetworkParams& net, std::size_t flat) {
    for (auto& layer : net.layers) {
        if (flat < static_cast<std::size_t>(layer.weight.size())) {
            return layer.weight(static_cast<Eigen::Index>(flat) / layer.weight.cols(),
                                static_cast<Eigen::Index>(flat) % layer.weight.cols());
        }
        flat -= static_cast<std::size_t>(layer.weight.size());
        if (flat < static_cast<std::size_t>(layer.bias.size())) return layer.bias[static_cast<Eigen::Index>(flat)];
        flat -= static_cast<std::size_t>(layer.bias.size());
    }
    throw std::out_of_range("param_at");
}

PairBatch random_batch(std::size_t p, std::size_t b, Rng& rng) {
    PairBatch batch;
    batch.inputs = Eigen::MatrixXd(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(2 * b));
    std::normal_distribution<double> z(0.0, 1.0);
    for (Eigen::Index i = 0; i < batch.inputs.size(); ++i) batch.inputs.data()[i] = z(rng);
    batch.log_time = testing::random_vector(2 * b, rng, 2.0);
    return batch;
}

NetworkParams single_linear(std::initializer_list<double> w, double bias) {
    NetworkParams net;
    net.input_dim = w.size();
    DenseLayer layer;
    layer.weight = Eigen::MatrixXd(1, static_cast<Eigen::Index>(w.size()));
    Eigen::Index k = 0;
    for (const double v : w) layer.weight(0, k++) = v;
    layer.bias = Eigen::VectorXd::Constant(1, bias);
    layer.activation = Activation::linear;
    net.layers.push_back(layer);
    return net;
}

}  // namespace

TEST_SUITE("net") {

TEST_CASE("architecture parsing and validation") {
    const auto layers = parse_architecture("128:relu, 32:relu,16:relu,1:linear");
    REQUIRE(layers.size() == 4);
    CHECK(layers[0].width == 128);
    CHECK(layers[3].activation == Activation::linear);
    CHECK(format_architecture(layers) == "128:relu,32:relu,16:relu,1:linear");
    CHECK_THROWS(parse_architecture("128:relu,1:relu"));
    CHECK_THROWS(parse_architecture("128:tanh,1:linear"));
    CHECK_THROWS(parse_architecture(""));
    CHECK_THROWS(parse_architecture("0:relu,1:linear"));

    const auto sim = simulation_architecture();
    CHECK(format_architecture(sim) == "128:relu,32:relu,16:relu,1:linear");
    CHECK(format_architecture(simulation_architecture(true)) == "128:linear,32:linear,16:linear,1:linear");
    const auto real = real_data_architecture();
    CHECK(real.size() == 10);
    CHECK(real[4].width == 128);
    CHECK(real[5].width == 64);
    CHECK(real[8].width == 32);
    CHECK(real[9].width == 1);
}

TEST_CASE("init_params shapes, determinism and variance") {
    Rng rng = make_stream(1, 0);
    const std::vector<LayerSpec> one{{1, Activation::linear}};
    const NetworkParams small = init_params(one, 3, rng);
    CHECK(small.layers[0].weight.rows() == 1);
    CHECK(small.layers[0].weight.cols() == 3);
    CHECK(small.layers[0].bias.size() == 1);
    CHECK(small.layers[0].bias[0] == 0.0);
    CHECK_THROWS_AS(init_params(std::vector<LayerSpec>{}, 3, rng), std::invalid_argument);

    Rng a = make_stream(7, 0), b = make_stream(7, 0);
    const auto arch = simulation_architecture();
    const NetworkParams pa = init_params(arch, 5, a), pb = init_params(arch, 5, b);
    for (std::size_t l = 0; l < pa.layers.size(); ++l) {
        CHECK(pa.layers[l].weight == pb.layers[l].weight);
        CHECK(pa.layers[l].bias == pb.layers[l].bias);
    }

    // fan_in 128: 80 x 128 = 10240 draws with variance 2 / 128
    Rng v = make_stream(8, 0);
    const std::vector<LayerSpec> wide{{80, Activation::relu}, {1, Activation::linear}};
    const NetworkParams pw = init_params(wide, 128, v);
    const auto& w = pw.layers[0].weight;
    const double mean = w.mean();
    const double var = (w.array() - mean).square().sum() / static_cast<double>(w.size() - 1);
    CHECK(std::abs(var / (2.0 / 128.0) - 1.0) < 0.2);
}

TEST_CASE("forward examples") {
    Rng rng = make_stream(2, 0);
    NetworkParams zero = init_params(simulation_architecture(), 3, rng).zeros_like();
    const std::vector<double> x{0.3, -1.2, 4.0};
    CHECK(forward(zero, x) == 0.0);

    const NetworkParams lin = single_linear({1.0, 2.0, 2.0}, 0.0);
    const std::vector<double> ones{1.0, 1.0, 1.0};
    CHECK(forward(lin, ones) == 5.0);

    NetworkParams kill;
    kill.input_dim = 1;
    kill.layers.push_back({Eigen::MatrixXd::Constant(1, 1, -1.0), Eigen::VectorXd::Zero(1), Activation::relu});
    kill.layers.push_back({Eigen::MatrixXd::Constant(1, 1, 1.0), Eigen::VectorXd::Zero(1), Activation::linear});
    const std::vector<double> three{3.0};
    CHECK(forward(kill, three) == 0.0);

    const std::vector<double> wrong{1.0, 2.0};
    CHECK_THROWS_AS(forward(lin, wrong), DimensionError);
}

TEST_CASE("predict matches forward row by row") {
    Rng rng = make_stream(3, 0);
    const NetworkParams net = init_params(simulation_architecture(), 4, rng);
    Matrix x(300, 4);
    std::normal_distribution<double> z;
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = z(rng);
    const Vector p = predict(net, x);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        // batched and single-row products may round differently
        CHECK(p[i] == doctest::Approx(forward(net, {x.row(i).data(), 4})).epsilon(1e-12));
    }
    CHECK(predict(net.zeros_like(), x).isZero(0.0));
    CHECK_THROWS_AS(predict(net, Matrix(2, 3)), DimensionError);

    const NetworkParams lin = single_linear({1.0, 2.0, 2.0, 0.0}, 0.0);
    Eigen::Vector4d beta(1.0, 2.0, 2.0, 0.0);
    CHECK((predict(lin, x) - x * beta).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("shift_output moves predictions and leaves the rank term alone") {
    Rng rng = make_stream(4, 0);
    NetworkParams net = init_params(simulation_architecture(), 3, rng);
    const PairBatch batch = random_batch(3, 10, rng);
    const PairLossSettings none{};
    const double rank_before = pair_loss_and_grad(net, batch, none).loss.rank;
    Matrix x = batch.inputs.transpose();
    const Vector before = predict(net, x);
    shift_output(net, 1.75);
    const Vector after = predict(net, x);
    CHECK(((after - before).array() - 1.75).abs().maxCoeff() < 1e-12);
    CHECK(pair_loss_and_grad(net, batch, none).loss.rank == doctest::Approx(rank_before).epsilon(1e-12));
}

TEST_CASE("pair loss agrees with the definitional oracle") {
    Rng rng = make_stream(5, 0);
    for (int rep = 0; rep < 10; ++rep) {
        const NetworkParams net = init_params(parse_architecture("8:relu,4:relu,1:linear"), 3, rng);
        const PairBatch batch = random_batch(3, 7, rng);
        for (const bool avg : {false, true}) {
            const PairLossSettings s{0.01, 0.02, avg};
            const auto r = pair_loss_and_grad(net, batch, s);
            CHECK(r.loss.total == doctest::Approx(oracle_loss(net, batch, s)).epsilon(1e-12));
            CHECK(r.loss.total == doctest::Approx(r.loss.rank + r.loss.weight_penalty + r.loss.activity_penalty));
        }
    }
}

TEST_CASE("pair loss is zero with inactive hinges and no penalties") {
    Rng rng = make_stream(6, 0);
    const NetworkParams net = init_params(parse_architecture("4:relu,1:linear"), 2, rng);
    PairBatch batch = random_batch(2, 6, rng);
    // force e_i >= e_j: anchors get large log times
    for (Eigen::Index k = 0; k < 6; ++k) batch.log_time[k] = 100.0;
    const auto r = pair_loss_and_grad(net, batch, {});
    CHECK(r.loss.total == 0.0);
    for (const auto& g : r.grad.layers) {
        CHECK(g.weight.isZero(0.0));
        CHECK(g.bias.isZero(0.0));
    }
}

TEST_CASE("pair loss gradient matches central differences") {
    Rng rng = make_stream(7, 0);
    const double h = 1e-5;
    for (int rep = 0; rep < 6; ++rep) {
        NetworkParams net = init_params(parse_architecture("6:relu,5:relu,3:relu,1:linear"), 3, rng);
        for (auto& l : net.layers) l.bias = testing::random_vector(static_cast<std::size_t>(l.bias.size()), rng, 0.1);
        const PairBatch batch = random_batch(3, 5, rng);
        const PairLossSettings s{0.01, 0.01, rep % 2 == 0};
        const auto r = pair_loss_and_grad(net, batch, s);
        const std::size_t count = net.parameter_count();
        NetworkParams g = r.grad;
        double worst = 0.0;
        for (std::size_t k = 0; k < count; ++k) {
            NetworkParams up = net, down = net;
            param_at(up, k) += h;
            param_at(down, k) -= h;
            const double fd = (oracle_loss(up, batch, s) - oracle_loss(down, batch, s)) / (2.0 * h);
            worst = std::max(worst, std::abs(fd - param_at(g, k)) / std::max(1.0, std::abs(fd)));
        }
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("single linear layer reduces to the Gehan subgradient") {
    Rng rng = make_stream(8, 0);
    const auto data = testing::random_dataset(25, 3, rng, 0.6);
    const NetworkParams net = single_linear({0.3, -0.2, 0.5}, 0.1);
    const auto pairs = all_event_pairs(data.events());
    const PairBatch batch = make_pair_batch(data, pairs);
    const auto r = pair_loss_and_grad(net, batch, {});

    const Vector pred = predict(net, data.covariates());
    const ResidualVector res = residuals(data, pred);
    const Vector g = gehan_subgradient(res, data.events());
    const Eigen::RowVectorXd expected = g.transpose() * data.covariates();
    CHECK((r.grad.layers[0].weight - expected).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(r.loss.rank == doctest::Approx(full_gehan_loss(res, data.events())).epsilon(1e-12));
    CHECK(std::abs(r.grad.layers[0].bias[0] - g.sum()) < 1e-10);
}

TEST_CASE("sgd step formulations") {
    const NetworkParams start = single_linear({1.0, -2.0}, 0.5);
    NetworkParams grad = single_linear({0.25, 1.0}, -0.5);
    TrainConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.decay = 0.0;

    SUBCASE("vanilla") {
        cfg.momentum = 0.0;
        cfg.nesterov = false;
        NetworkParams p = start;
        OptimizerState st = make_optimizer_state(p);
        sgd_step(p, grad, st, cfg);
        CHECK(p.layers[0].weight(0, 0) == start.layers[0].weight(0, 0) - 0.1 * 0.25);
        CHECK(p.layers[0].weight(0, 1) == start.layers[0].weight(0, 1) - 0.1 * 1.0);
        CHECK(p.layers[0].bias[0] == start.layers[0].bias[0] + 0.1 * 0.5);
    }
    SUBCASE("zero gradient keeps parameters fixed") {
        NetworkParams p = start;
        OptimizerState st = make_optimizer_state(p);
        for (int k = 0; k < 50; ++k) sgd_step(p, start.zeros_like(), st, cfg);
        CHECK(p.layers[0].weight == start.layers[0].weight);
    }
    SUBCASE("momentum and nesterov by hand") {
        cfg.momentum = 0.9;
        for (const bool nesterov : {false, true}) {
            cfg.nesterov = nesterov;
            NetworkParams p = start;
            OptimizerState st = make_optimizer_state(p);
            double w = 1.0, v = 0.0;
            const double g = 0.25;
            for (int k = 0; k < 3; ++k) {
                sgd_step(p, grad, st, cfg);
                v = 0.9 * v - 0.1 * g;
                w += nesterov ? 0.9 * v - 0.1 * g : v;
            }
            CHECK(p.layers[0].weight(0, 0) == doctest::Approx(w).epsilon(1e-15));
        }
    }
    SUBCASE("decayed learning rate") {
        cfg.decay = 0.5;
        CHECK(learning_rate_at(cfg, 0) == 0.1);
        CHECK(learning_rate_at(cfg, 2) == doctest::Approx(0.05));
    }
    SUBCASE("shape mismatch") {
        NetworkParams p = start;
        OptimizerState st = make_optimizer_state(p);
        CHECK_THROWS(sgd_step(p, single_linear({1.0, 2.0, 3.0}, 0.0), st, cfg));
    }
}

TEST_CASE("sgd contracts a strongly convex quadratic geometrically") {
    // f(x) = mu/2 x^2 with alpha * 2 mu < 1: x_{t+1} = (1 - alpha mu) x_t
    const double mu = 1.0, alpha = 0.1;
    TrainConfig cfg;
    cfg.learning_rate = alpha;
    cfg.momentum = 0.0;
    cfg.nesterov = false;
    cfg.decay = 0.0;
    NetworkParams x = single_linear({3.0}, 0.0);
    OptimizerState st = make_optimizer_state(x);
    double prev = 3.0;
    for (int t = 0; t < 60; ++t) {
        NetworkParams g = x.zeros_like();
        g.layers[0].weight(0, 0) = mu * x.layers[0].weight(0, 0);
        sgd_step(x, g, st, cfg);
        const double now = x.layers[0].weight(0, 0);
        CHECK(std::abs(now / prev - (1.0 - alpha * mu)) < 1e-12);
        prev = now;
    }
}

TEST_CASE("adam first step") {
    const NetworkParams start = single_linear({1.0}, 0.0);
    NetworkParams grad = single_linear({0.3}, -2.0);
    TrainConfig cfg;
    cfg.optimizer = OptimizerKind::adam;
    cfg.learning_rate = 0.01;
    cfg.decay = 0.0;
    NetworkParams p = start;
    OptimizerState st = make_optimizer_state(p);
    optimizer_step(p, grad, st, cfg);
    const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2, eps = cfg.adam_epsilon;
    const auto expected = [&](double g) {
        const double lr_t = 0.01 * std::sqrt(1.0 - b2) / (1.0 - b1);
        return lr_t * (1.0 - b1) * g / (std::sqrt((1.0 - b2) * g * g) + eps);
    };
    CHECK(p.layers[0].weight(0, 0) == doctest::Approx(1.0 - expected(0.3)).epsilon(1e-14));
    CHECK(p.layers[0].bias[0] == doctest::Approx(0.0 - expected(-2.0)).epsilon(1e-14));
    CHECK(st.step == 1);
}

TEST_CASE("training defaults and config validation") {
    TrainConfig cfg;
    CHECK(cfg.decay == 1e-5);
    CHECK(cfg.momentum == 0.9);
    CHECK(cfg.nesterov);
    CHECK(cfg.batch_size == 50);
    CHECK(cfg.epochs == 500);
    CHECK(cfg.l2_weight_penalty == 0.01);
    CHECK(cfg.activity_penalty == 0.01);
    CHECK(default_learning_rate(1000, false) == 3e-4);
    CHECK(default_learning_rate(5000, false) == 1e-4);
    CHECK(default_learning_rate(1000, true) == 3e-3);
    CHECK(default_learning_rate(5000, true) == 2e-3);
    CHECK(default_pairs_per_event(1000) == 5);
    CHECK(default_pairs_per_event(3000) == 7);
    CHECK(default_pairs_per_event(5000) == 10);
    cfg.momentum = 1.0;
    CHECK_THROWS(cfg.validate());
    cfg.momentum = 0.9;
    cfg.learning_rate = 0.0;
    CHECK_THROWS(cfg.validate());
}

TEST_CASE("train: zero epochs returns the initialisation and runs are reproducible") {
    Rng rng = make_stream(10, 0);
    const auto data = testing::random_dataset(80, 3, rng);
    TrainConfig cfg;
    cfg.epochs = 0;
    cfg.seed = 5;
    const auto arch = parse_architecture("8:relu,1:linear");
    const NetworkParams p0 = train(data, arch, cfg);
    Rng init = make_stream(5, 0);
    const NetworkParams expected = init_params(arch, 3, init);
    CHECK(p0.layers[0].weight == expected.layers[0].weight);

    cfg.epochs = 5;
    const NetworkParams a = train(data, arch, cfg), b = train(data, arch, cfg);
    for (std::size_t l = 0; l < a.layers.size(); ++l) CHECK(a.layers[l].weight == b.layers[l].weight);
    cfg.seed = 6;
    const NetworkParams c = train(data, arch, cfg);
    CHECK(c.layers[0].weight != a.layers[0].weight);
}

TEST_CASE("train recovers a noiseless linear ordering") {
    Rng rng = make_stream(11, 0);
    const std::size_t n = 500;
    Matrix x(n, 3);
    std::normal_distribution<double> z;
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = z(rng);
    const Eigen::Vector3d beta(1.0, 2.0, 2.0);
    const Vector f = x * beta;
    const SurvivalDataset data(f.array().exp().matrix(), EventVector(n, 1), x);

    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.learning_rate = 3e-4;
    cfg.seed = 1;
    const NetworkParams net = train(data, simulation_architecture(true), cfg);

    Matrix xt(1000, 3);
    for (Eigen::Index i = 0; i < xt.size(); ++i) xt.data()[i] = z(rng);
    const Vector ft = xt * beta;
    const SurvivalDataset test(ft.array().exp().matrix(), EventVector(1000, 1), xt);
    CHECK(c_index(test, predict(net, xt)) > 0.99);
}

TEST_CASE("train lowers the full Gehan loss on a simulation-style problem") {
    Rng rng = make_stream(12, 0);
    const std::size_t n = 300;
    Matrix x(n, 3);
    std::normal_distribution<double> z;
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = z(rng);
    Vector logt(n);
    for (Eigen::Index i = 0; i < logt.size(); ++i) logt[i] = 2.0 * x(i, 0) + x(i, 1) * x(i, 2) + z(rng);
    EventVector d = testing::random_events(n, rng, 0.7);
    const SurvivalDataset data(logt.array().exp().matrix(), d, x);
    TrainConfig cfg;
    cfg.seed = 3;
    const auto arch = simulation_architecture();
    cfg.epochs = 0;
    const NetworkParams start = train(data, arch, cfg);
    cfg.epochs = 60;
    std::size_t calls = 0;
    const NetworkParams end = train(data, arch, cfg, [&](std::size_t, const LossBreakdown&) { ++calls; });
    CHECK(calls == 60);
    const double before = full_gehan_loss(residuals(data, predict(start, x)), data.events());
    const double after = full_gehan_loss(residuals(data, predict(end, x)), data.events());
    CHECK(after < before);
}

}  // TEST_SUITE
