#ifndef ETSDM_TRAIN_HPP
#define ETSDM_TRAIN_HPP

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mlp.hpp"
#include "partition.hpp"
#include "predictor.hpp"

namespace etsdm {

enum class Objective { EpsPrediction, VPrediction };
enum class ConditionMapKind { Identity, Shared, Remap };
enum class RemapKind { InverseT, InverseSigmoid };
enum class TimeSampling { UniformT, UniformLambda };

Objective objective_from_string(const std::string& s);
ConditionMapKind condition_map_from_string(const std::string& s);
RemapKind remap_kind_from_string(const std::string& s);
TimeSampling time_sampling_from_string(const std::string& s);
std::string to_string(Objective o);
std::string to_string(ConditionMapKind c);
std::string to_string(RemapKind r);
std::string to_string(TimeSampling t);

struct TrainConfig {
    Objective objective = Objective::EpsPrediction;
    ConditionMapKind condition_map = ConditionMapKind::Identity;
    std::optional<PartitionSchedule> partition;  // required for Shared
    RemapKind remap_kind = RemapKind::InverseT;  // used by Remap
    TimeSampling time_sampling = TimeSampling::UniformT;
    double lambda_cap = 1000.0;  // K: remapped conditions capped to |lambda| <= K

    double reg_weight = 0.0;  // DDPM-r penalty weight; 0 disables
    double reg_dt = 1e-3;     // fixed offset t' = t + reg_dt
    bool reg_random_offset = false;  // t' = t + U(0,1]*reg_dt instead

    double lr = 1e-3;
    int batch_size = 256;
    int steps = 20000;
    uint64_t seed = 0;
    double ema_decay = 0.999;

    MlpSpec mlp;
};

// lambda = f(t); InverseT: 1/t, InverseSigmoid: logit(t). Capped to [-cap, cap].
double remap_condition(RemapKind kind, double t, double cap);
// t = f^{-1}(lambda), clamped to [1/T, 1].
double remap_inverse(RemapKind kind, double lambda, int T);

// Condition value the network sees for nominal time t under cfg.
double map_condition(const TrainConfig& cfg, double t);

// DDPM-r penalty: mean_i ||f(x_i, c_i) - f(x_i, c'_i)|| / dt_i. dts holds the
// per-sample |t - t'| (all entries must be > 0; equal times are forbidden).
// Accumulates weight * d(penalty)/d(theta) into grads when grads != nullptr.
double ddpm_r_penalty(const Mlp& net, const Mat& X, const Vec& cond, const Vec& cond_prime,
                      const Vec& dts, double weight, std::vector<Mlp::Layer>* grads);

// Realized nominal times t for n draws under cfg's time_sampling; the stream
// the training loop itself would see. T supplies the grid floor 1/T.
std::vector<double> sample_training_times(const TrainConfig& cfg, int n, uint64_t seed,
                                          int T = 1000);

struct Checkpoint;

struct TrainResult {
    std::unique_ptr<Mlp> ema;  // EMA weights, used for inference
    std::unique_ptr<Mlp> raw;
    std::vector<double> loss_curve;  // per-step total loss
    int steps_run = 0;
    std::unique_ptr<Checkpoint> checkpoint;  // set when emit_checkpoint
};

// Algorithm: sample x0 ~ gm, t per time_sampling, eps ~ N(0,I); regress the
// network at condition map_condition(t) onto eps (or alpha*eps - sigma*x0).
// Adam + EMA; throws on divergence (loss > 10x initial for 1000 consecutive
// steps).
TrainResult train(const GaussianMixture& gm, const Schedule& sched, const TrainConfig& cfg);

// Predictor facade over a trained network: applies the condition map, then
// the forward pass.
class TrainedPredictor : public Predictor {
  public:
    TrainedPredictor(std::shared_ptr<const Mlp> net, TrainConfig cfg)
        : net_(std::move(net)), cfg_(std::move(cfg)) {}
    Vec eval(const Vec& x, double t) const override;
    Mat eval_batch(const Mat& X, double t) const override;
    Tag tag() const override {
        return cfg_.condition_map == ConditionMapKind::Remap ? Tag::RemappedMlp : Tag::TrainedMlp;
    }
    int dim() const override { return net_->spec().data_dim; }
    const Mlp& net() const { return *net_; }

  private:
    std::shared_ptr<const Mlp> net_;
    TrainConfig cfg_;
};

// Versioned binary checkpoint: raw weights, EMA weights, Adam moments, step
// counter and RNG state, so training resumes mid-run bit-exactly.
struct Checkpoint {
    Mlp raw;
    Mlp ema;
    std::vector<Mlp::Layer> adam_m;
    std::vector<Mlp::Layer> adam_v;
    int step = 0;
    uint64_t rng_state[4] = {0, 0, 0, 0};
};

void save_checkpoint(std::ostream& os, const Checkpoint& ck);
Checkpoint load_checkpoint(std::istream& is);

// As train(), but optionally resuming from a checkpoint and/or emitting one.
TrainResult train_resumable(const GaussianMixture& gm, const Schedule& sched,
                            const TrainConfig& cfg, const Checkpoint* resume,
                            bool emit_checkpoint);

}  // namespace etsdm

#endif
