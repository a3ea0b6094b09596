#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

#include "mlp.hpp"
#include "train.hpp"

using namespace etsdm;

namespace {

MlpSpec tiny_spec() {
    MlpSpec spec;
    spec.data_dim = 2;
    spec.hidden = {8, 8};
    spec.embedding_dim = 4;
    return spec;
}

// Flattened view of all parameters, for finite-difference sweeps.
std::vector<double*> param_pointers(Mlp& net) {
    std::vector<double*> out;
    for (auto& layer : net.layers()) {
        for (Eigen::Index i = 0; i < layer.W.size(); ++i) out.push_back(layer.W.data() + i);
        for (Eigen::Index i = 0; i < layer.b.size(); ++i) out.push_back(layer.b.data() + i);
    }
    return out;
}

std::vector<double> grad_values(const std::vector<Mlp::Layer>& grads) {
    std::vector<double> out;
    for (const auto& g : grads) {
        for (Eigen::Index i = 0; i < g.W.size(); ++i) out.push_back(*(g.W.data() + i));
        for (Eigen::Index i = 0; i < g.b.size(); ++i) out.push_back(*(g.b.data() + i));
    }
    return out;
}

}  // namespace

TEST_CASE("zero weights give zero output; identical inputs give identical outputs") {
    Mlp net(tiny_spec(), 1);
    for (auto& layer : net.layers()) {
        layer.W.setZero();
        layer.b.setZero();
    }
    Mat X(2, 2);
    X << 0.5, -0.3, 1.0, 2.0;
    Vec conds(2);
    conds << 0.1, 0.9;
    CHECK(net.forward(X, conds).cwiseAbs().maxCoeff() == 0.0);

    Mlp net2(tiny_spec(), 2);
    const Mat y1 = net2.forward(X, conds);
    const Mat y2 = net2.forward(X, conds);
    CHECK((y1 - y2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single linear layer gradient equals the closed form") {
    MlpSpec spec;
    spec.data_dim = 2;
    spec.hidden = {};
    spec.embedding_dim = 2;
    Mlp net(spec, 3);
    Mat X(1, 2);
    X << 0.7, -0.4;
    Vec conds = Vec::Constant(1, 0.5);
    Mat target(1, 2);
    target << 0.1, 0.2;

    Mlp::Cache cache;
    const Mat pred = net.forward_cached(X, conds, cache);
    const Mat resid = pred - target;
    auto grads = net.zero_like();
    net.backward(cache, 2.0 * resid, grads);  // d/dW of ||Wz+b-y||^2 = 2 r z^T
    const Mat expected_w = 2.0 * resid.transpose() * cache.input;
    CHECK((grads[0].W - expected_w).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((grads[0].b - 2.0 * resid.transpose()).cwiseAbs().maxCoeff() < 1e-14);

    // Zero residual, zero gradient.
    auto zero_grads = net.zero_like();
    net.backward(cache, Mat::Zero(1, 2), zero_grads);
    CHECK(grad_values(zero_grads) == std::vector<double>(grad_values(zero_grads).size(), 0.0));
}

TEST_CASE("backward matches finite differences on the composite losses") {
    const Schedule sched = Schedule(ScheduleSpec{});
    const auto gm = GaussianMixture::ring(8, 1.0, 0.05);
    Rng rng(7);
    const int n = 5;
    const Mat X0 = gm.sample(n, rng);
    Vec times(n), conds(n);
    Mat eps(n, 2);
    for (int i = 0; i < n; ++i) {
        times[i] = 0.05 + 0.9 * rng.uniform();
        conds[i] = times[i];
        for (int j = 0; j < 2; ++j) eps(i, j) = rng.normal();
    }
    Vec alphas(n), sigmas(n);
    for (int i = 0; i < n; ++i) {
        alphas[i] = sched.alpha(times[i]);
        sigmas[i] = sched.sigma(times[i]);
    }
    const Mat Xt = alphas.asDiagonal() * X0 + sigmas.asDiagonal() * eps;
    const Mat eps_target = eps;
    const Mat v_target = alphas.asDiagonal() * eps - sigmas.asDiagonal() * X0;
    const double reg_dt = 1e-3;
    Vec conds_p = conds.array() + reg_dt;
    const Vec dts = Vec::Constant(n, reg_dt);

    for (int variant = 0; variant < 3; ++variant) {
        Mlp net(tiny_spec(), 11 + static_cast<uint64_t>(variant));
        const Mat target = (variant == 1) ? v_target : eps_target;
        const double reg_weight = (variant == 2) ? 0.05 : 0.0;

        const auto loss_fn = [&](Mlp& m) {
            const Mat pred = m.forward(Xt, conds);
            double loss = (pred - target).squaredNorm() / n;
            if (reg_weight > 0.0)
                loss += reg_weight * ddpm_r_penalty(m, Xt, conds, conds_p, dts, 0.0, nullptr);
            return loss;
        };

        Mlp::Cache cache;
        const Mat pred = net.forward_cached(Xt, conds, cache);
        auto grads = net.zero_like();
        net.backward(cache, (2.0 / n) * (pred - target), grads);
        if (reg_weight > 0.0) ddpm_r_penalty(net, Xt, conds, conds_p, dts, reg_weight, &grads);

        auto params = param_pointers(net);
        const auto gvals = grad_values(grads);
        REQUIRE(params.size() == gvals.size());
        Rng pick(100 + static_cast<uint64_t>(variant));
        int checked = 0;
        for (int trial = 0; trial < 200; ++trial) {
            const size_t idx = static_cast<size_t>(pick.below(params.size()));
            const double h = 1e-5;
            const double orig = *params[idx];
            *params[idx] = orig + h;
            const double lp = loss_fn(net);
            *params[idx] = orig - h;
            const double lm = loss_fn(net);
            *params[idx] = orig;
            const double fd = (lp - lm) / (2.0 * h);
            const double scale = std::max({std::abs(fd), std::abs(gvals[idx]), 1e-6});
            CHECK(std::abs(gvals[idx] - fd) <= 1e-4 * scale);
            ++checked;
        }
        CHECK(checked == 200);
    }
}

TEST_CASE("ddpm-r penalty: zero for time-constant nets, |slope| for linear-in-t nets") {
    // Constant in t: zero out every weight column that touches the embedding.
    MlpSpec spec;
    spec.data_dim = 1;
    spec.hidden = {};
    spec.embedding_dim = 2;
    Mlp net(spec, 5);
    Mat X(3, 1);
    X << 0.1, 0.5, -0.2;
    Vec c1(3), c2(3);
    c1 << 0.1, 0.2, 0.3;
    c2 << 0.101, 0.201, 0.301;
    const Vec dts = Vec::Constant(3, 1e-3);
    net.layers()[0].W(0, 1) = 0.0;
    net.layers()[0].W(0, 2) = 0.0;
    CHECK(ddpm_r_penalty(net, X, c1, c2, dts, 0.0, nullptr) == doctest::Approx(0.0));

    // Hand-built net that is exactly s * cond: embed with cond_scale so small
    // that sin(x) ~ x, then weight 1/inv_freq... simpler: drive the sin lane.
    MlpSpec lin_spec;
    lin_spec.data_dim = 1;
    lin_spec.hidden = {};
    lin_spec.embedding_dim = 2;
    lin_spec.cond_scale = 1e-6;  // sin(1e-6 c) = 1e-6 c to machine precision
    Mlp lin(lin_spec, 6);
    lin.layers()[0].W.setZero();
    lin.layers()[0].b.setZero();
    const double s = 3.5;
    lin.layers()[0].W(0, 1) = s / 1e-6;  // output = s * cond
    const double penalty = ddpm_r_penalty(lin, X, c1, c2, dts, 0.0, nullptr);
    CHECK(penalty == doctest::Approx(std::abs(s)).epsilon(1e-6));

    // Degenerate time pairs are rejected.
    CHECK_THROWS_AS(ddpm_r_penalty(net, X, c1, c1, Vec::Zero(3), 0.0, nullptr),
                    std::invalid_argument);
}

TEST_CASE("remap conditions and inverses") {
    CHECK(remap_condition(RemapKind::InverseT, 0.5, 1000.0) == doctest::Approx(2.0));
    CHECK(remap_condition(RemapKind::InverseSigmoid, 0.5, 1000.0) == doctest::Approx(0.0));
    CHECK(remap_condition(RemapKind::InverseT, 1e-6, 1000.0) == 1000.0);  // capped
    for (double t = 0.001; t <= 0.999; t += 0.0713) {
        CHECK(remap_inverse(RemapKind::InverseT,
                            remap_condition(RemapKind::InverseT, t, 1e9), 1000) ==
              doctest::Approx(t).epsilon(1e-12));
        CHECK(remap_inverse(RemapKind::InverseSigmoid,
                            remap_condition(RemapKind::InverseSigmoid, t, 1e9), 1000) ==
              doctest::Approx(t).epsilon(1e-12));
    }
}

TEST_CASE("shared condition map gives identical network inputs inside a sub-interval") {
    TrainConfig cfg;
    cfg.condition_map = ConditionMapKind::Shared;
    cfg.partition = PartitionSchedule(0.1, 5);
    CHECK(map_condition(cfg, 0.001) == map_condition(cfg, 0.0199));
    CHECK(map_condition(cfg, 0.021) == map_condition(cfg, 0.039));
    CHECK(map_condition(cfg, 0.5) == 0.5);

    Mlp net(tiny_spec(), 8);
    Mat X(1, 2);
    X << 0.3, 0.4;
    const Mat y1 = net.forward(X, Vec::Constant(1, map_condition(cfg, 0.005)));
    const Mat y2 = net.forward(X, Vec::Constant(1, map_condition(cfg, 0.015)));
    CHECK((y1 - y2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("uniform-lambda time sampling concentrates near zero") {
    TrainConfig cfg;
    cfg.condition_map = ConditionMapKind::Remap;
    cfg.time_sampling = TimeSampling::UniformLambda;
    cfg.remap_kind = RemapKind::InverseT;
    cfg.lambda_cap = 1000.0;
    auto ts = sample_training_times(cfg, 20001, 3);
    std::nth_element(ts.begin(), ts.begin() + 10000, ts.end());
    CHECK(ts[10000] < 0.01);
    // 1/lambda with lambda ~ U(0, K): median is 2/K.
    CHECK(ts[10000] == doctest::Approx(2.0 / 1000.0).epsilon(0.1));

    TrainConfig bad;
    bad.time_sampling = TimeSampling::UniformLambda;
    CHECK_THROWS_AS(sample_training_times(bad, 10, 3), std::invalid_argument);
}

TEST_CASE("short training on standard-normal data learns eps ~ sigma * x") {
    const auto sched = Schedule(ScheduleSpec{});
    const auto gm = GaussianMixture::standard_normal(2);
    TrainConfig cfg;
    cfg.steps = 1500;
    cfg.batch_size = 128;
    cfg.seed = 12;
    cfg.mlp.hidden = {32, 32};
    cfg.mlp.embedding_dim = 16;
    const auto res = train(gm, sched, cfg);
    REQUIRE(static_cast<int>(res.loss_curve.size()) == cfg.steps);

    // Loss dropped materially.
    double head = 0.0, tail = 0.0;
    for (int i = 0; i < 100; ++i) {
        head += res.loss_curve[static_cast<size_t>(i)];
        tail += res.loss_curve[res.loss_curve.size() - 100 + static_cast<size_t>(i)];
    }
    CHECK(tail < head);

    // Held-out audit: cosine similarity of the learned eps with sigma * x.
    TrainedPredictor pred(std::shared_ptr<const Mlp>(res.ema.get(), [](const Mlp*) {}), cfg);
    Rng rng(99);
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int i = 0; i < 200; ++i) {
        const double t = 0.1 + 0.8 * rng.uniform();
        const auto q = gm.marginal_at(sched, t);
        const Vec x = q.sample(rng);
        const Vec got = pred.eval(x, t);
        const Vec want = sched.sigma(t) * x;
        dot += got.dot(want);
        na += got.squaredNorm();
        nb += want.squaredNorm();
    }
    CHECK(dot / std::sqrt(na * nb) > 0.9);
}

TEST_CASE("v-prediction target construction audit") {
    // With objective VPrediction the optimum on one batch is alpha*eps - sigma*x0.
    const auto sched = Schedule(ScheduleSpec{});
    const double t = 0.37;
    const double a = sched.alpha(t), s = sched.sigma(t);
    Vec x0(2), eps(2);
    x0 << 0.5, -1.0;
    eps << 0.3, 0.8;
    const Vec v = a * eps - s * x0;
    // Consistency with the x_t decomposition: alpha*x_t - x0 = sigma * v... no:
    // v = alpha*eps - sigma*x0 and x_t = alpha*x0 + sigma*eps imply
    // alpha*v + sigma*x_t = eps * (alpha^2 + sigma^2) = eps.
    const Vec xt = a * x0 + s * eps;
    CHECK(((a * v + s * xt) - eps).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("ema with decay 0 tracks the raw weights exactly") {
    const auto sched = Schedule(ScheduleSpec{});
    const auto gm = GaussianMixture::standard_normal(2);
    TrainConfig cfg;
    cfg.steps = 20;
    cfg.batch_size = 16;
    cfg.ema_decay = 0.0;
    cfg.mlp.hidden = {8};
    cfg.mlp.embedding_dim = 4;
    const auto res = train(gm, sched, cfg);
    for (size_t l = 0; l < res.raw->layers().size(); ++l) {
        CHECK((res.raw->layers()[l].W - res.ema->layers()[l].W).cwiseAbs().maxCoeff() == 0.0);
        CHECK((res.raw->layers()[l].b - res.ema->layers()[l].b).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("checkpoint resume reproduces an uninterrupted run bit-exactly") {
    const auto sched = Schedule(ScheduleSpec{});
    const auto gm = GaussianMixture::standard_normal(2);
    TrainConfig cfg;
    cfg.steps = 60;
    cfg.batch_size = 16;
    cfg.seed = 77;
    cfg.mlp.hidden = {8};
    cfg.mlp.embedding_dim = 4;
    const auto direct = train_resumable(gm, sched, cfg, nullptr, false);

    TrainConfig half = cfg;
    half.steps = 30;
    auto part1 = train_resumable(gm, sched, half, nullptr, true);
    REQUIRE(part1.checkpoint != nullptr);

    // Serialize through the binary container.
    std::stringstream buf;
    save_checkpoint(buf, *part1.checkpoint);
    const Checkpoint restored = load_checkpoint(buf);
    const auto resumed = train_resumable(gm, sched, cfg, &restored, false);

    for (size_t l = 0; l < direct.raw->layers().size(); ++l) {
        CHECK((direct.raw->layers()[l].W - resumed.raw->layers()[l].W).cwiseAbs().maxCoeff() ==
              0.0);
        CHECK((direct.ema->layers()[l].W - resumed.ema->layers()[l].W).cwiseAbs().maxCoeff() ==
              0.0);
    }
    CHECK(resumed.steps_run == 30);
}

TEST_CASE("mlp serialization roundtrip") {
    Mlp net(tiny_spec(), 21);
    std::stringstream buf;
    net.save(buf);
    const Mlp loaded = Mlp::load(buf);
    Mat X(2, 2);
    X << 0.1, 0.2, -0.3, 0.4;
    Vec conds(2);
    conds << 0.25, 0.75;
    CHECK((net.forward(X, conds) - loaded.forward(X, conds)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("config validation") {
    const auto sched = Schedule(ScheduleSpec{});
    const auto gm = GaussianMixture::standard_normal(2);
    TrainConfig cfg;
    cfg.steps = 1;
    cfg.condition_map = ConditionMapKind::Shared;  // no partition supplied
    CHECK_THROWS_AS(train(gm, sched, cfg), std::invalid_argument);
    TrainConfig cfg2;
    cfg2.steps = 1;
    cfg2.time_sampling = TimeSampling::UniformLambda;  // needs Remap
    CHECK_THROWS_AS(train(gm, sched, cfg2), std::invalid_argument);
    TrainConfig cfg3;
    cfg3.lr = -1.0;
    CHECK_THROWS_AS(train(gm, sched, cfg3), std::invalid_argument);
    MlpSpec odd;
    odd.embedding_dim = 3;
    CHECK_THROWS_AS(Mlp(odd, 1), std::invalid_argument);
}
