#include "schedule.hpp"

#include <cmath>
#include <limits>

namespace etsdm {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kInf = std::numeric_limits<double>::infinity();
}  // namespace

ScheduleKind schedule_kind_from_string(const std::string& name) {
    if (name == "linear") return ScheduleKind::Linear;
    if (name == "quadratic") return ScheduleKind::Quadratic;
    if (name == "cosine") return ScheduleKind::Cosine;
    if (name == "cosine_shift") return ScheduleKind::CosineShift;
    if (name == "zero_terminal_snr") return ScheduleKind::ZeroTerminalSnr;
    throw std::invalid_argument("unknown schedule kind: " + name);
}

std::string to_string(ScheduleKind kind) {
    switch (kind) {
        case ScheduleKind::Linear: return "linear";
        case ScheduleKind::Quadratic: return "quadratic";
        case ScheduleKind::Cosine: return "cosine";
        case ScheduleKind::CosineShift: return "cosine_shift";
        case ScheduleKind::ZeroTerminalSnr: return "zero_terminal_snr";
    }
    return "?";
}

ScheduleSpec apply_modified_ns(const ScheduleSpec& spec) {
    ScheduleSpec out = spec;
    out.modified_ns = true;
    switch (spec.kind) {
        case ScheduleKind::Linear:
            out.beta_min_bar = 0.0;
            break;
        case ScheduleKind::Quadratic: {
            // beta(tau) = (sqrt(bmin) + (sqrt(bmax)-sqrt(bmin)) tau)^2.
            // Setting beta(0)=0 and matching the original terminal SNR needs
            // int_0^1 beta to be preserved; with bmin=0 the integral is
            // bmax'/3, so bmax' has a closed form.
            const double a = std::sqrt(spec.beta_min_bar);
            const double b = std::sqrt(spec.beta_max_bar) - a;
            double integral;
            if (b == 0.0) {
                integral = a * a;
            } else {
                const double ab = a + b;
                integral = (ab * ab * ab - a * a * a) / (3.0 * b);
            }
            out.beta_min_bar = 0.0;
            out.beta_max_bar = 3.0 * integral;
            break;
        }
        case ScheduleKind::Cosine:
            out.cosine_offset = 0.0;
            break;
        default:
            throw std::invalid_argument(
                "modified-ns repair is only defined for linear, quadratic and "
                "cosine schedules");
    }
    return out;
}

Schedule::Schedule(ScheduleSpec spec) : spec_(spec) {
    if (spec_.T < 1) throw std::invalid_argument("schedule: T must be positive");
    if (spec_.modified_ns) {
        // Idempotent for already-repaired parameters.
        spec_ = apply_modified_ns(spec_);
    }
    switch (spec_.kind) {
        case ScheduleKind::Linear:
        case ScheduleKind::Quadratic:
            bmin_ = spec_.beta_min_bar;
            bmax_ = spec_.beta_max_bar;
            if (!(bmax_ > 0.0)) throw std::invalid_argument("schedule: beta_max_bar must be positive");
            if (!spec_.modified_ns && !(bmin_ > 0.0 && bmin_ <= bmax_))
                throw std::invalid_argument("schedule: need 0 < beta_min_bar <= beta_max_bar");
            if (bmin_ < 0.0) throw std::invalid_argument("schedule: beta_min_bar must be nonnegative");
            break;
        case ScheduleKind::Cosine:
        case ScheduleKind::CosineShift:
            cos_s_ = spec_.cosine_offset;
            if (cos_s_ < 0.0) throw std::invalid_argument("schedule: cosine_offset must be nonnegative");
            cos_norm_ = std::cos(cos_s_ / (1.0 + cos_s_) * kPi / 2.0);
            if (spec_.kind == ScheduleKind::CosineShift && !(spec_.shift_factor > 0.0))
                throw std::invalid_argument("schedule: shift_factor must be positive");
            break;
        case ScheduleKind::ZeroTerminalSnr: {
            bmin_ = spec_.beta_min_bar;
            bmax_ = spec_.beta_max_bar;
            if (!(bmin_ > 0.0 && bmin_ <= bmax_))
                throw std::invalid_argument("schedule: need 0 < beta_min_bar <= beta_max_bar");
            const double integral = bmin_ + 0.5 * (bmax_ - bmin_);
            zts_alpha1_ = std::exp(-0.5 * integral);
            break;
        }
    }
}

void Schedule::check_tau(double tau) const {
    if (!(tau >= 0.0 && tau <= 1.0))
        throw std::domain_error("schedule: tau must lie in [0,1]");
}

double Schedule::beta_continuous(double tau) const {
    if (spec_.kind == ScheduleKind::Quadratic) {
        const double a = std::sqrt(bmin_);
        const double b = std::sqrt(bmax_) - a;
        const double r = a + b * tau;
        return r * r;
    }
    // Linear (also the base of ZeroTerminalSnr).
    return bmin_ + (bmax_ - bmin_) * tau;
}

double Schedule::beta_integral(double tau) const {
    if (spec_.kind == ScheduleKind::Quadratic) {
        const double a = std::sqrt(bmin_);
        const double b = std::sqrt(bmax_) - a;
        if (b == 0.0) return a * a * tau;
        const double r = a + b * tau;
        return (r * r * r - a * a * a) / (3.0 * b);
    }
    return bmin_ * tau + 0.5 * (bmax_ - bmin_) * tau * tau;
}

double Schedule::alpha(double tau) const {
    check_tau(tau);
    switch (spec_.kind) {
        case ScheduleKind::Linear:
        case ScheduleKind::Quadratic:
            return std::exp(-0.5 * beta_integral(tau));
        case ScheduleKind::Cosine:
            return std::cos((tau + cos_s_) / (1.0 + cos_s_) * kPi / 2.0) / cos_norm_;
        case ScheduleKind::CosineShift: {
            const double ac = std::cos((tau + cos_s_) / (1.0 + cos_s_) * kPi / 2.0) / cos_norm_;
            const double c = spec_.shift_factor;
            const double u = ac * ac;
            const double big_d = c * c * u + (1.0 - u);
            return c * ac / std::sqrt(big_d);
        }
        case ScheduleKind::ZeroTerminalSnr: {
            const double al = std::exp(-0.5 * beta_integral(tau));
            return (al - zts_alpha1_) / (1.0 - zts_alpha1_);
        }
    }
    return 0.0;
}

double Schedule::sigma(double tau) const {
    check_tau(tau);
    // sigma^2 = 1 - alpha^2 in cancellation-free forms.
    switch (spec_.kind) {
        case ScheduleKind::Linear:
        case ScheduleKind::Quadratic:
            return std::sqrt(-std::expm1(-beta_integral(tau)));
        case ScheduleKind::Cosine: {
            const double th0 = cos_s_ / (1.0 + cos_s_) * kPi / 2.0;
            const double th = (tau + cos_s_) / (1.0 + cos_s_) * kPi / 2.0;
            const double s2 = std::sin(th + th0) * std::sin(th - th0) / (cos_norm_ * cos_norm_);
            return std::sqrt(std::max(0.0, s2));
        }
        case ScheduleKind::CosineShift: {
            const double th0 = cos_s_ / (1.0 + cos_s_) * kPi / 2.0;
            const double th = (tau + cos_s_) / (1.0 + cos_s_) * kPi / 2.0;
            const double sc2 = std::max(0.0, std::sin(th + th0) * std::sin(th - th0) / (cos_norm_ * cos_norm_));
            const double c = spec_.shift_factor;
            const double u = 1.0 - sc2;
            const double big_d = c * c * u + sc2;
            return std::sqrt(sc2 / big_d);
        }
        case ScheduleKind::ZeroTerminalSnr: {
            const double one_minus_al = -std::expm1(-0.5 * beta_integral(tau));
            const double one_minus_az = one_minus_al / (1.0 - zts_alpha1_);
            const double az = 1.0 - one_minus_az;
            return std::sqrt(std::max(0.0, one_minus_az * (1.0 + az)));
        }
    }
    return 0.0;
}

double Schedule::dalpha_dt(double tau) const {
    check_tau(tau);
    switch (spec_.kind) {
        case ScheduleKind::Linear:
        case ScheduleKind::Quadratic:
            return -0.5 * beta_continuous(tau) * alpha(tau);
        case ScheduleKind::Cosine:
            return -kPi / (2.0 * (1.0 + cos_s_)) *
                   std::sin((tau + cos_s_) / (1.0 + cos_s_) * kPi / 2.0) / cos_norm_;
        case ScheduleKind::CosineShift: {
            const double ac = std::cos((tau + cos_s_) / (1.0 + cos_s_) * kPi / 2.0) / cos_norm_;
            const double dac = -kPi / (2.0 * (1.0 + cos_s_)) *
                               std::sin((tau + cos_s_) / (1.0 + cos_s_) * kPi / 2.0) / cos_norm_;
            const double c = spec_.shift_factor;
            const double u = ac * ac;
            const double big_d = c * c * u + (1.0 - u);
            return c * dac / (big_d * std::sqrt(big_d));
        }
        case ScheduleKind::ZeroTerminalSnr:
            return -0.5 * beta_continuous(tau) * std::exp(-0.5 * beta_integral(tau)) /
                   (1.0 - zts_alpha1_);
    }
    return 0.0;
}

bool Schedule::singular_at_zero() const {
    return dalpha_dt(0.0) != 0.0;
}

DsigmaResult Schedule::dsigma_dt(double tau) const {
    check_tau(tau);
    if (tau > 0.0) {
        const double s = sigma(tau);
        return {false, -alpha(tau) / s * dalpha_dt(tau)};
    }
    if (singular_at_zero()) return {true, kInf};
    // dalpha/dtau|0 = 0: the limit is sqrt(-alpha''(0)).
    double add0 = 0.0;
    switch (spec_.kind) {
        case ScheduleKind::Linear:
        case ScheduleKind::Quadratic: {
            // alpha'' = -1/2 beta' alpha + 1/4 beta^2 alpha; beta(0)=0 here.
            const double a = std::sqrt(bmin_);
            const double b = std::sqrt(bmax_) - a;
            const double beta_prime0 =
                spec_.kind == ScheduleKind::Quadratic ? 2.0 * a * b : (bmax_ - bmin_);
            add0 = -0.5 * beta_prime0;
            break;
        }
        case ScheduleKind::Cosine: {
            const double w = kPi / (2.0 * (1.0 + cos_s_));
            add0 = -w * w;  // alpha'' = -w^2 alpha, alpha(0)=1
            break;
        }
        case ScheduleKind::CosineShift: {
            const double w = kPi / (2.0 * (1.0 + cos_s_));
            const double c = spec_.shift_factor;
            add0 = -w * w / (c * c);
            break;
        }
        case ScheduleKind::ZeroTerminalSnr: {
            const double beta_prime0 = bmax_ - bmin_;
            add0 = (-0.5 * beta_prime0 + 0.25 * bmin_ * bmin_) / (1.0 - zts_alpha1_);
            break;
        }
    }
    return {false, std::sqrt(std::max(0.0, -add0))};
}

double Schedule::snr(double tau) const {
    check_tau(tau);
    const double s = sigma(tau);
    if (s == 0.0) return kInf;
    const double a = alpha(tau);
    return a * a / (s * s);
}

SdeCoeffs Schedule::sde_coeffs(double tau) const {
    check_tau(tau);
    const double a = alpha(tau);
    if (a <= 0.0) throw std::domain_error("schedule: sde coefficients need alpha > 0");
    const double da = dalpha_dt(tau);
    // g^2 = 2 sigma^2 dlog(sigma/alpha)/dtau; with alpha^2 + sigma^2 = 1
    // this reduces to -2 dlog(alpha)/dtau.
    return {da / a, -2.0 * da / a};
}

std::vector<double> Schedule::discrete_betas() const {
    if (spec_.kind != ScheduleKind::Linear && spec_.kind != ScheduleKind::Quadratic)
        throw std::invalid_argument("discrete betas are only defined for linear/quadratic schedules");
    const int T = spec_.T;
    if (T < 2) throw std::invalid_argument("discrete betas need T >= 2");
    std::vector<double> betas(static_cast<size_t>(T));
    const double lo = bmin_ / T;
    const double hi = bmax_ / T;
    for (int t = 1; t <= T; ++t) {
        const double frac = static_cast<double>(t - 1) / (T - 1);
        if (spec_.kind == ScheduleKind::Linear) {
            betas[t - 1] = lo + (hi - lo) * frac;
        } else {
            const double r = std::sqrt(lo) + (std::sqrt(hi) - std::sqrt(lo)) * frac;
            betas[t - 1] = r * r;
        }
    }
    return betas;
}

double Schedule::log_snr_half(double tau) const {
    check_tau(tau);
    const double s = sigma(tau);
    if (s == 0.0) return kInf;
    return std::log(alpha(tau) / s);
}

double Schedule::tau_from_log_snr_half(double lambda, double lo) const {
    double hi = 1.0;
    // lambda is decreasing in tau.
    if (lambda >= log_snr_half(lo)) return lo;
    if (lambda <= log_snr_half(hi)) return hi;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (log_snr_half(mid) > lambda)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace etsdm
