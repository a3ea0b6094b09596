#ifndef ETSDM_PREDICTOR_HPP
#define ETSDM_PREDICTOR_HPP

#include <memory>
#include <vector>

#include "mixture.hpp"
#include "partition.hpp"
#include "schedule.hpp"

namespace etsdm {

// Uniform interface over analytic predictors, shared-condition wrappers and
// trained networks. eval is deterministic in (x, t).
class Predictor {
  public:
    enum class Tag { AnalyticEps, AnalyticV, SharedAnalytic, TrainedMlp, RemappedMlp };

    virtual ~Predictor() = default;
    virtual Vec eval(const Vec& x, double t) const = 0;
    // Rows of X are samples; default loops over rows.
    virtual Mat eval_batch(const Mat& X, double t) const;
    virtual Tag tag() const = 0;
    virtual int dim() const = 0;
};

class AnalyticEpsPredictor : public Predictor {
  public:
    AnalyticEpsPredictor(std::shared_ptr<const GaussianMixture> gm,
                         std::shared_ptr<const Schedule> sched)
        : gm_(std::move(gm)), sched_(std::move(sched)) {}
    Vec eval(const Vec& x, double t) const override;
    Mat eval_batch(const Mat& X, double t) const override;
    Tag tag() const override { return Tag::AnalyticEps; }
    int dim() const override { return gm_->dim(); }

  private:
    std::shared_ptr<const GaussianMixture> gm_;
    std::shared_ptr<const Schedule> sched_;
};

class AnalyticVPredictor : public Predictor {
  public:
    AnalyticVPredictor(std::shared_ptr<const GaussianMixture> gm,
                       std::shared_ptr<const Schedule> sched)
        : gm_(std::move(gm)), sched_(std::move(sched)) {}
    Vec eval(const Vec& x, double t) const override;
    Tag tag() const override { return Tag::AnalyticV; }
    int dim() const override { return gm_->dim(); }

  private:
    std::shared_ptr<const GaussianMixture> gm_;
    std::shared_ptr<const Schedule> sched_;
};

// Optimal predictor under condition sharing: constant (bit-exact) inside
// every sub-interval of the partition.
class SharedAnalyticPredictor : public Predictor {
  public:
    SharedAnalyticPredictor(std::shared_ptr<const GaussianMixture> gm,
                            std::shared_ptr<const Schedule> sched, PartitionSchedule part)
        : gm_(std::move(gm)), sched_(std::move(sched)), part_(std::move(part)) {}
    Vec eval(const Vec& x, double t) const override;
    Tag tag() const override { return Tag::SharedAnalytic; }
    int dim() const override { return gm_->dim(); }
    const PartitionSchedule& partition() const { return part_; }

  private:
    std::shared_ptr<const GaussianMixture> gm_;
    std::shared_ptr<const Schedule> sched_;
    PartitionSchedule part_;
};

// Decorator recording every condition value passed through; test aid for the
// partition-plumbing contract.
class CapturePredictor : public Predictor {
  public:
    explicit CapturePredictor(std::shared_ptr<const Predictor> inner) : inner_(std::move(inner)) {}
    Vec eval(const Vec& x, double t) const override {
        conditions_.push_back(t);
        return inner_->eval(x, t);
    }
    Mat eval_batch(const Mat& X, double t) const override {
        conditions_.push_back(t);
        return inner_->eval_batch(X, t);
    }
    Tag tag() const override { return inner_->tag(); }
    int dim() const override { return inner_->dim(); }
    const std::vector<double>& conditions() const { return conditions_; }
    void clear() { conditions_.clear(); }

  private:
    std::shared_ptr<const Predictor> inner_;
    mutable std::vector<double> conditions_;
};

struct LipschitzEstimate {
    double k = 0.0;
    double std_error = 0.0;
    int n = 0;
};

// Monte-Carlo estimate of K(t, t') = E_x~q_t ||pred(x,t) - pred(x,t')|| / |t - t'|.
LipschitzEstimate lipschitz_K(const Predictor& pred, const GaussianMixture& q_t, double t,
                              double t_prime, int n, Rng& rng);

struct CurvePoint {
    double t = 0.0;
    double value = 0.0;
    double std_error = 0.0;
};

// K(t, t + dt) along a sorted grid; x drawn from the exact marginal at each t.
std::vector<CurvePoint> singularity_scan(const Predictor& pred, const GaussianMixture& data,
                                         const Schedule& sched, const std::vector<double>& t_grid,
                                         double dt, int n, uint64_t seed);

// Mean L2 change of the one-step x0 prediction under input noise of growing
// scale, at fixed conditioning time t_tilde.
std::vector<CurvePoint> perturbation_probe(const Predictor& pred, const Schedule& sched,
                                           double t_tilde, const std::vector<double>& scales,
                                           const GaussianMixture& data, int n, uint64_t seed);

}  // namespace etsdm

#endif
