#ifndef ETSDM_SCHEDULE_HPP
#define ETSDM_SCHEDULE_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace etsdm {

enum class ScheduleKind {
    Linear,
    Quadratic,
    Cosine,
    CosineShift,
    ZeroTerminalSnr,
};

ScheduleKind schedule_kind_from_string(const std::string& name);
std::string to_string(ScheduleKind kind);

struct ScheduleSpec {
    ScheduleKind kind = ScheduleKind::Linear;
    double beta_min_bar = 0.1;
    double beta_max_bar = 20.0;
    double cosine_offset = 0.008;
    double shift_factor = 0.25;
    bool modified_ns = false;
    int T = 1000;
};

// dsigma/dtau can genuinely diverge at tau=0; callers must be able to tell
// a singular schedule from a regular one.
struct DsigmaResult {
    bool diverges = false;
    double value = 0.0;
};

struct SdeCoeffs {
    double drift_coeff = 0.0;   // f(tau) = d log(alpha)/dtau
    double diffusion_sq = 0.0;  // g^2(tau) = 2 sigma^2 d log(sigma/alpha)/dtau
};

// Repairs a schedule so that dalpha/dtau|0 = 0. Linear/Quadratic set
// beta(0)=0 (Quadratic additionally rescales beta_max_bar so the terminal
// SNR stays within 1% of the original); Cosine sets the offset to zero.
ScheduleSpec apply_modified_ns(const ScheduleSpec& spec);

// Continuous-time noise schedule on tau in [0,1] with alpha^2 + sigma^2 = 1.
class Schedule {
  public:
    explicit Schedule(ScheduleSpec spec);

    const ScheduleSpec& spec() const { return spec_; }

    double alpha(double tau) const;
    double sigma(double tau) const;
    double dalpha_dt(double tau) const;
    DsigmaResult dsigma_dt(double tau) const;
    double snr(double tau) const;  // +inf where sigma = 0
    SdeCoeffs sde_coeffs(double tau) const;

    // Discrete beta_t sequence, t = 1..T. Linear/Quadratic only.
    std::vector<double> discrete_betas() const;

    // Half log-SNR, lambda(tau) = log(alpha/sigma). Monotone decreasing.
    double log_snr_half(double tau) const;
    // Inverse of log_snr_half by bisection on [lo, 1].
    double tau_from_log_snr_half(double lambda, double lo = 1e-9) const;

    bool singular_at_zero() const;  // dalpha/dtau|0 != 0

  private:
    void check_tau(double tau) const;
    double beta_integral(double tau) const;  // Linear/Quadratic only
    double beta_continuous(double tau) const;

    ScheduleSpec spec_;
    // Resolved Linear/Quadratic parameters (after the Modified-NS repair).
    double bmin_ = 0.0;
    double bmax_ = 0.0;
    double cos_s_ = 0.0;
    double cos_norm_ = 1.0;   // cos(s/(1+s) * pi/2)
    double zts_alpha1_ = 0.0; // terminal alpha of the underlying linear schedule
};

}  // namespace etsdm

#endif
