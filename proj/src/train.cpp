#include "train.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace etsdm {

namespace {

constexpr char kCkptMagic[4] = {'E', 'T', 'S', 'M'};
constexpr int32_t kCkptVersion = 1;

void write_mat(std::ostream& os, const Mat& m) {
    const int64_t r = m.rows(), c = m.cols();
    os.write(reinterpret_cast<const char*>(&r), sizeof(r));
    os.write(reinterpret_cast<const char*>(&c), sizeof(c));
    os.write(reinterpret_cast<const char*>(m.data()), sizeof(double) * r * c);
}

Mat read_mat(std::istream& is) {
    int64_t r = 0, c = 0;
    is.read(reinterpret_cast<char*>(&r), sizeof(r));
    is.read(reinterpret_cast<char*>(&c), sizeof(c));
    if (!is || r < 0 || c < 0 || r * c > (int64_t(1) << 32))
        throw std::runtime_error("checkpoint: corrupt matrix header");
    Mat m(r, c);
    is.read(reinterpret_cast<char*>(m.data()), sizeof(double) * r * c);
    if (!is) throw std::runtime_error("checkpoint: truncated matrix");
    return m;
}

void write_layers(std::ostream& os, const std::vector<Mlp::Layer>& layers) {
    const int32_t n = static_cast<int32_t>(layers.size());
    os.write(reinterpret_cast<const char*>(&n), sizeof(n));
    for (const auto& l : layers) {
        write_mat(os, l.W);
        write_mat(os, l.b);
    }
}

std::vector<Mlp::Layer> read_layers(std::istream& is) {
    int32_t n = 0;
    is.read(reinterpret_cast<char*>(&n), sizeof(n));
    if (!is || n < 0) throw std::runtime_error("checkpoint: corrupt layer count");
    std::vector<Mlp::Layer> out;
    out.reserve(static_cast<size_t>(n));
    for (int32_t i = 0; i < n; ++i) {
        Mlp::Layer l;
        l.W = read_mat(is);
        Mat b = read_mat(is);
        l.b = b.col(0);
        out.push_back(std::move(l));
    }
    return out;
}

double logit(double p) { return std::log(p / (1.0 - p)); }
double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

double draw_time(const TrainConfig& cfg, Rng& rng, int T) {
    if (cfg.time_sampling == TimeSampling::UniformT) return rng.uniform();  // (0, 1]
    // UniformLambda over the remapped axis: U[0,K] for 1/t, U[-K,K] for logit.
    double lambda;
    if (cfg.remap_kind == RemapKind::InverseT)
        lambda = cfg.lambda_cap * rng.uniform();
    else
        lambda = cfg.lambda_cap * (2.0 * rng.uniform() - 1.0);
    return remap_inverse(cfg.remap_kind, lambda, T);
}

}  // namespace

Objective objective_from_string(const std::string& s) {
    if (s == "eps") return Objective::EpsPrediction;
    if (s == "v") return Objective::VPrediction;
    throw std::invalid_argument("unknown objective: " + s);
}
ConditionMapKind condition_map_from_string(const std::string& s) {
    if (s == "identity") return ConditionMapKind::Identity;
    if (s == "shared") return ConditionMapKind::Shared;
    if (s == "remap") return ConditionMapKind::Remap;
    throw std::invalid_argument("unknown condition_map: " + s);
}
RemapKind remap_kind_from_string(const std::string& s) {
    if (s == "inverse_t") return RemapKind::InverseT;
    if (s == "inverse_sigmoid") return RemapKind::InverseSigmoid;
    throw std::invalid_argument("unknown remap kind: " + s);
}
TimeSampling time_sampling_from_string(const std::string& s) {
    if (s == "uniform_t") return TimeSampling::UniformT;
    if (s == "uniform_lambda") return TimeSampling::UniformLambda;
    throw std::invalid_argument("unknown time_sampling: " + s);
}
std::string to_string(Objective o) { return o == Objective::EpsPrediction ? "eps" : "v"; }
std::string to_string(ConditionMapKind c) {
    switch (c) {
        case ConditionMapKind::Identity: return "identity";
        case ConditionMapKind::Shared: return "shared";
        default: return "remap";
    }
}
std::string to_string(RemapKind r) {
    return r == RemapKind::InverseT ? "inverse_t" : "inverse_sigmoid";
}
std::string to_string(TimeSampling t) {
    return t == TimeSampling::UniformT ? "uniform_t" : "uniform_lambda";
}

double remap_condition(RemapKind kind, double t, double cap) {
    if (cap <= 0.0) throw std::invalid_argument("remap_condition: cap must be positive");
    double lambda;
    if (kind == RemapKind::InverseT) {
        if (t <= 0.0) return cap;  // endpoint clamp
        lambda = 1.0 / t;
    } else {
        if (t <= 0.0) return -cap;
        if (t >= 1.0) return cap;
        lambda = logit(t);
    }
    return std::clamp(lambda, -cap, cap);
}

double remap_inverse(RemapKind kind, double lambda, int T) {
    if (T < 1) throw std::invalid_argument("remap_inverse: T must be >= 1");
    const double floor_t = 1.0 / T;
    double t;
    if (kind == RemapKind::InverseT)
        t = lambda > 0.0 ? 1.0 / lambda : 1.0;
    else
        t = sigmoid(lambda);
    return std::clamp(t, floor_t, 1.0);
}

double map_condition(const TrainConfig& cfg, double t) {
    switch (cfg.condition_map) {
        case ConditionMapKind::Identity:
            return t;
        case ConditionMapKind::Shared:
            if (!cfg.partition) throw std::invalid_argument("Shared condition map needs partition");
            return cfg.partition->map(t);
        case ConditionMapKind::Remap:
        default:
            return remap_condition(cfg.remap_kind, t, cfg.lambda_cap);
    }
}

double ddpm_r_penalty(const Mlp& net, const Mat& X, const Vec& cond, const Vec& cond_prime,
                      const Vec& dts, double weight, std::vector<Mlp::Layer>* grads) {
    const Eigen::Index n = X.rows();
    if (cond.size() != n || cond_prime.size() != n || dts.size() != n)
        throw std::invalid_argument("ddpm_r_penalty: batch size mismatch");
    for (Eigen::Index i = 0; i < n; ++i)
        if (!(dts[i] > 0.0))
            throw std::invalid_argument("ddpm_r_penalty: t and t' must differ");
    Mlp::Cache c1, c2;
    const Mat y1 = net.forward_cached(X, cond, c1);
    const Mat y2 = net.forward_cached(X, cond_prime, c2);
    double penalty = 0.0;
    Mat d1 = Mat::Zero(y1.rows(), y1.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        const double norm = (y1.row(i) - y2.row(i)).norm();
        penalty += norm / dts[i];
        if (grads && norm > 0.0)
            d1.row(i) = (y1.row(i) - y2.row(i)) * (weight / (norm * dts[i] * n));
    }
    penalty /= static_cast<double>(n);
    if (grads) {
        net.backward(c1, d1, *grads);
        net.backward(c2, -d1, *grads);
    }
    return penalty;
}

std::vector<double> sample_training_times(const TrainConfig& cfg, int n, uint64_t seed, int T) {
    if (cfg.time_sampling == TimeSampling::UniformLambda &&
        cfg.condition_map != ConditionMapKind::Remap)
        throw std::invalid_argument("UniformLambda time sampling requires the Remap map");
    Rng rng(seed);
    std::vector<double> out(static_cast<size_t>(n));
    for (auto& t : out) t = draw_time(cfg, rng, T);
    return out;
}

Vec TrainedPredictor::eval(const Vec& x, double t) const {
    Mat X(1, x.size());
    X.row(0) = x.transpose();
    const Vec conds = Vec::Constant(1, map_condition(cfg_, t));
    return net_->forward(X, conds).row(0).transpose();
}

Mat TrainedPredictor::eval_batch(const Mat& X, double t) const {
    const Vec conds = Vec::Constant(X.rows(), map_condition(cfg_, t));
    return net_->forward(X, conds);
}

void save_checkpoint(std::ostream& os, const Checkpoint& ck) {
    os.write(kCkptMagic, 4);
    os.write(reinterpret_cast<const char*>(&kCkptVersion), sizeof(kCkptVersion));
    const int32_t step = ck.step;
    os.write(reinterpret_cast<const char*>(&step), sizeof(step));
    os.write(reinterpret_cast<const char*>(ck.rng_state), sizeof(ck.rng_state));
    ck.raw.save(os);
    ck.ema.save(os);
    write_layers(os, ck.adam_m);
    write_layers(os, ck.adam_v);
    if (!os) throw std::runtime_error("checkpoint: write failed");
}

Checkpoint load_checkpoint(std::istream& is) {
    char magic[4] = {};
    int32_t version = 0;
    is.read(magic, 4);
    is.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (!is || std::string(magic, 4) != std::string(kCkptMagic, 4))
        throw std::runtime_error("checkpoint: bad magic");
    if (version != kCkptVersion) throw std::runtime_error("checkpoint: unsupported version");
    int32_t step = 0;
    uint64_t rng_state[4] = {};
    is.read(reinterpret_cast<char*>(&step), sizeof(step));
    is.read(reinterpret_cast<char*>(rng_state), sizeof(rng_state));
    Mlp raw = Mlp::load(is);
    Mlp ema = Mlp::load(is);
    Checkpoint ck{std::move(raw), std::move(ema), read_layers(is), read_layers(is), step, {}};
    for (int i = 0; i < 4; ++i) ck.rng_state[i] = rng_state[i];
    return ck;
}

TrainResult train(const GaussianMixture& gm, const Schedule& sched, const TrainConfig& cfg) {
    return train_resumable(gm, sched, cfg, nullptr, false);
}

TrainResult train_resumable(const GaussianMixture& gm, const Schedule& sched,
                            const TrainConfig& cfg, const Checkpoint* resume,
                            bool emit_checkpoint) {
    if (cfg.batch_size < 1 || cfg.steps < 0 || cfg.lr <= 0.0)
        throw std::invalid_argument("train: bad optimizer config");
    if (cfg.ema_decay < 0.0 || cfg.ema_decay >= 1.0)
        throw std::invalid_argument("train: ema_decay must be in [0, 1)");
    if (cfg.reg_weight < 0.0 || cfg.reg_dt <= 0.0)
        throw std::invalid_argument("train: bad regularization config");
    if (cfg.condition_map == ConditionMapKind::Shared && !cfg.partition)
        throw std::invalid_argument("train: Shared condition map needs partition");
    if (cfg.time_sampling == TimeSampling::UniformLambda &&
        cfg.condition_map != ConditionMapKind::Remap)
        throw std::invalid_argument("train: UniformLambda requires the Remap map");

    MlpSpec spec = cfg.mlp;
    spec.data_dim = gm.dim();
    // Remapped conditions are already on a stretched axis; embed them raw.
    if (cfg.condition_map == ConditionMapKind::Remap) spec.cond_scale = 1.0;

    const int T = sched.spec().T;
    const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;

    Mlp net = resume ? resume->raw : Mlp(spec, mix64(cfg.seed ^ 0x6d6c70ull));
    Mlp ema = resume ? resume->ema : net;
    std::vector<Mlp::Layer> m = resume ? resume->adam_m : net.zero_like();
    std::vector<Mlp::Layer> v = resume ? resume->adam_v : net.zero_like();
    int step0 = resume ? resume->step : 0;
    Rng rng(cfg.seed);
    if (resume) rng.set_state(resume->rng_state);

    TrainResult res;
    res.loss_curve.reserve(static_cast<size_t>(std::max(0, cfg.steps - step0)));

    double initial_loss = 0.0;
    int divergence_run = 0;
    const int n = cfg.batch_size;
    const int d = gm.dim();

    for (int step = step0; step < cfg.steps; ++step) {
        const Mat X0 = gm.sample(n, rng);
        Vec times(n), conds(n), alphas(n), sigmas(n);
        for (int i = 0; i < n; ++i) {
            const double t = draw_time(cfg, rng, T);
            times[i] = t;
            conds[i] = map_condition(cfg, t);
            alphas[i] = sched.alpha(t);
            sigmas[i] = sched.sigma(t);
        }
        Mat eps(n, d);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) eps(i, j) = rng.normal();
        const Mat Xt = alphas.asDiagonal() * X0 + sigmas.asDiagonal() * eps;
        Mat target;
        if (cfg.objective == Objective::EpsPrediction)
            target = eps;
        else
            target = alphas.asDiagonal() * eps - sigmas.asDiagonal() * X0;

        Mlp::Cache cache;
        const Mat pred = net.forward_cached(Xt, conds, cache);
        const Mat resid = pred - target;
        double loss = resid.squaredNorm() / n;
        std::vector<Mlp::Layer> grads = net.zero_like();
        net.backward(cache, (2.0 / n) * resid, grads);

        if (cfg.reg_weight > 0.0) {
            Vec dts(n), conds_p(n);
            for (int i = 0; i < n; ++i) {
                double dt = cfg.reg_dt;
                if (cfg.reg_random_offset) dt *= rng.uniform();
                double tp = times[i] + dt;
                if (tp > 1.0) tp = times[i] - dt;
                dts[i] = std::abs(tp - times[i]);
                conds_p[i] = map_condition(cfg, tp);
            }
            loss += cfg.reg_weight *
                    ddpm_r_penalty(net, Xt, conds, conds_p, dts, cfg.reg_weight, &grads);
        }

        if (!std::isfinite(loss)) throw std::runtime_error("train: non-finite loss");
        if (res.loss_curve.empty() && !resume) initial_loss = loss;
        if (step == step0 && resume) initial_loss = loss;
        res.loss_curve.push_back(loss);
        if (loss > 10.0 * initial_loss) {
            if (++divergence_run >= 1000) throw std::runtime_error("train: diverged");
        } else {
            divergence_run = 0;
        }

        const int k = step + 1;
        const double bc1 = 1.0 - std::pow(beta1, k);
        const double bc2 = 1.0 - std::pow(beta2, k);
        auto& layers = net.layers();
        for (size_t l = 0; l < layers.size(); ++l) {
            m[l].W = beta1 * m[l].W + (1.0 - beta1) * grads[l].W;
            m[l].b = beta1 * m[l].b + (1.0 - beta1) * grads[l].b;
            v[l].W = beta2 * v[l].W + (1.0 - beta2) * grads[l].W.cwiseAbs2();
            v[l].b = beta2 * v[l].b + (1.0 - beta2) * grads[l].b.cwiseAbs2();
            layers[l].W -=
                (cfg.lr / bc1) *
                (m[l].W.array() / ((v[l].W.array() / bc2).sqrt() + adam_eps)).matrix();
            layers[l].b -=
                (cfg.lr / bc1) *
                (m[l].b.array() / ((v[l].b.array() / bc2).sqrt() + adam_eps)).matrix();
        }
        auto& ema_layers = ema.layers();
        for (size_t l = 0; l < layers.size(); ++l) {
            ema_layers[l].W = cfg.ema_decay * ema_layers[l].W + (1.0 - cfg.ema_decay) * layers[l].W;
            ema_layers[l].b = cfg.ema_decay * ema_layers[l].b + (1.0 - cfg.ema_decay) * layers[l].b;
        }
    }

    if (emit_checkpoint) {
        res.checkpoint = std::make_unique<Checkpoint>(Checkpoint{net, ema, m, v, cfg.steps, {}});
        rng.get_state(res.checkpoint->rng_state);
    }
    res.steps_run = cfg.steps - step0;
    res.raw = std::make_unique<Mlp>(std::move(net));
    res.ema = std::make_unique<Mlp>(std::move(ema));
    return res;
}

}  // namespace etsdm
