#pragma once

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "fracpoisson/errors.hpp"
#include "fracpoisson/quadrature.hpp"

namespace fracpoisson {

/// Fractional order beta in (0, 1].  beta = 1 is the degenerate Poisson
/// limit: it is representable, but every series evaluator rejects it because
/// M_1 vanishes identically and the expansions below carry no information
/// there.
class OrderParam {
 public:
  explicit OrderParam(double beta) : beta_(beta) {
    if (!(beta > 0.0) || !(beta <= 1.0) || !std::isfinite(beta))
      throw DomainError("OrderParam: beta must lie in (0, 1], got " +
                        std::to_string(beta));
  }

  double value() const noexcept { return beta_; }
  bool degenerate() const noexcept { return beta_ == 1.0; }

  void require_series(const char* who) const {
    if (degenerate())
      throw DomainError(std::string(who) +
                        ": beta = 1 is degenerate (M_1 vanishes); series "
                        "evaluation needs beta < 1");
  }

 private:
  double beta_;
};

/// Knobs for the alternating-series evaluators.
struct SeriesEvalConfig {
  int max_terms = 600;
  double abs_tol = 1e-14;
  /// Largest allowed ratio of the biggest |term| to |sum| before the result
  /// is declared meaningless.
  double cancellation_guard = 1e12;

  void validate() const {
    if (max_terms < 1)
      throw DomainError("SeriesEvalConfig: max_terms must be >= 1");
    if (!(abs_tol > 0.0))
      throw DomainError("SeriesEvalConfig: abs_tol must be > 0");
    if (!(cancellation_guard >= 1.0))
      throw DomainError("SeriesEvalConfig: cancellation_guard must be >= 1");
  }
};

/// Value of a truncated series together with an absolute error bound
/// (truncation tail plus a summation rounding floor).
struct SeriesValue {
  double value = 0.0;
  double abs_err = 0.0;
  int terms = 0;
  bool converged = false;
  double max_term_bound = 0.0;  // largest term envelope seen
};

namespace detail {

inline constexpr long double kPiL = 3.141592653589793238462643383279502884L;

// Rounding-floor estimate for a compensated alternating sum: Kahan keeps the
// summation error near eps * sum |term|; per-term evaluation error grows
// roughly with the term count, folded in via the sqrt factor.
inline long double series_rounding_floor(long double abs_sum, int terms) {
  return abs_sum * LDBL_EPSILON *
         (1.0L + sqrtl(static_cast<long double>(terms)));
}

// sin(pi x) with x reduced mod 2 first; x = beta*j is exactly representable,
// so the reduction is exact and the angle error stays O(eps) for all j.
inline long double sin_pi(long double x) {
  return sinl(kPiL * fmodl(x, 2.0L));
}

// tgammal overflows just above 1755.
inline constexpr double kGammaArgMax = 1750.0;

inline std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

struct KahanAccumulator {
  long double sum = 0.0L;
  long double comp = 0.0L;
  void add(long double x) {
    const long double y = x - comp;
    const long double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
};

}  // namespace detail

/// Series evaluator for the M-Wright (Mainardi) function
///
///   M_beta(z) = (1/pi) sum_{j>=1} (-z)^{j-1}/(j-1)! Gamma(beta j)
///               sin(pi beta j),        0 < beta < 1, z >= 0.
///
/// Coefficients Gamma(beta j) sin(pi beta j)/pi do not depend on z, so one
/// evaluator instance amortises them over many evaluations (quadrature
/// nodes).  Instances are cheap, hold no shared state, and are meant for
/// single-threaded use; the free function mwright() wraps one per call.
class MwrightSeries {
 public:
  explicit MwrightSeries(OrderParam beta, SeriesEvalConfig cfg = {})
      : beta_(beta.value()), cfg_(cfg) {
    cfg_.validate();
    beta.require_series("MwrightSeries");
    coeff_.reserve(64);
  }

  double beta() const noexcept { return static_cast<double>(beta_); }
  const SeriesEvalConfig& config() const noexcept { return cfg_; }

  /// Truncated series value at z >= 0 with its error bound.  Never throws
  /// on numerical grounds; callers inspect `converged` and `abs_err`.
  SeriesValue evaluate(double z) {
    if (!(z >= 0.0) || !std::isfinite(z))
      throw DomainError("MwrightSeries: z must be finite and >= 0, got " +
                        detail::fmt_double(z));

    detail::KahanAccumulator acc;
    const long double zl = z;
    long double u = 1.0L;  // z^{j-1}/(j-1)!, signed via (-z)
    long double max_env = 0.0L;
    long double prev_env = std::numeric_limits<long double>::max();
    SeriesValue out;

    for (int j = 1; j <= cfg_.max_terms; ++j) {
      if (!ensure_terms(j + 1)) break;  // gamma overflow: cannot continue
      acc.add(coeff_[static_cast<std::size_t>(j - 1)] * u);
      const long double env_j = env_[static_cast<std::size_t>(j - 1)] *
                                (u < 0.0L ? -u : u);
      if (env_j > max_env) max_env = env_j;
      out.terms = j;

      const long double u_next = u * (-zl) / static_cast<long double>(j);
      const long double env_next = env_[static_cast<std::size_t>(j)] *
                                   (u_next < 0.0L ? -u_next : u_next);
      if (env_next < cfg_.abs_tol && env_next <= env_j &&
          env_j <= prev_env) {
        out.converged = true;
        out.abs_err = static_cast<double>(2.0L * env_next);
        break;
      }
      prev_env = env_j;
      u = u_next;
    }

    const long double floor =
        max_env * (static_cast<long double>(out.terms) * LDBL_EPSILON +
                   detail::kTermRelErr);
    out.value = static_cast<double>(acc.sum);
    out.abs_err += static_cast<double>(floor);
    out.max_term_bound = static_cast<double>(max_env);
    if (!out.converged) out.abs_err = std::max(out.abs_err, out.max_term_bound);
    return out;
  }

 private:
  // Grows coefficient tables to cover term index j (1-based).
  bool ensure_terms(int j) {
    while (static_cast<int>(coeff_.size()) < j) {
      const int jj = static_cast<int>(coeff_.size()) + 1;
      const long double bj = beta_ * static_cast<long double>(jj);
      if (bj > detail::kGammaArgMax) return false;
      const long double g = std::tgamma(bj);
      const long double s = std::sin(detail::kPiL * bj);
      coeff_.push_back(g * s / detail::kPiL);
      env_.push_back(g / detail::kPiL);
    }
    return true;
  }

  long double beta_;
  SeriesEvalConfig cfg_;
  std::vector<long double> coeff_;  // Gamma(beta j) sin(pi beta j)/pi
  std::vector<long double> env_;    // Gamma(beta j)/pi  (|sin| <= 1 envelope)
};

namespace detail {

inline void check_series_policy(const SeriesValue& v,
                                const SeriesEvalConfig& cfg, const char* who,
                                double arg) {
  if (!v.converged)
    throw NonConvergenceError(std::string(who) + "(" + fmt_double(arg) +
                              "): series did not meet the term bound within " +
                              std::to_string(cfg.max_terms) + " terms");
  const double scale = std::max(std::abs(v.value), 1e-300);
  if (v.max_term_bound / scale > cfg.cancellation_guard)
    throw PrecisionLossError(
        std::string(who) + "(" + fmt_double(arg) +
        "): cancellation ratio " + fmt_double(v.max_term_bound / scale) +
        " exceeds guard " + fmt_double(cfg.cancellation_guard));
  if (v.value < -(4.0 * v.abs_err + cfg.abs_tol))
    throw PrecisionLossError(std::string(who) + "(" + fmt_double(arg) +
                             "): negative density value " +
                             fmt_double(v.value) + " beyond tolerance");
}

}  // namespace detail

/// M-Wright function M_beta(z) for beta in (0,1), z >= 0.
inline double mwright(OrderParam beta, double z, SeriesEvalConfig cfg = {}) {
  MwrightSeries series(beta, cfg);
  SeriesValue v = series.evaluate(z);
  detail::check_series_policy(v, cfg, "mwright", z);
  return v.value;
}

/// Series evaluator for the one-sided stable density
///
///   g_beta(u) = (1/pi) sum_{j>=1} (-1)^{j+1} Gamma(beta j + 1)/Gamma(j+1)
///               u^{-beta j - 1} sin(beta pi j),      u > 0,
///
/// and the inverse-stable-subordinator density
///
///   h_beta(t, x) = t/(beta x^{1+1/beta}) g_beta(t x^{-1/beta}).
///
/// The raw series is used for u >= 1 where its envelope decays from the
/// first term.  Below that the evaluation is routed through
/// g_beta(u) = beta u^{-beta-1} M_beta(u^{-beta}), which maps small u to a
/// moderate M-Wright argument.
class SubordinatorDensity {
 public:
  explicit SubordinatorDensity(OrderParam beta, SeriesEvalConfig cfg = {})
      : beta_(beta.value()), cfg_(cfg), mwright_(beta, cfg) {
    cfg_.validate();
    beta.require_series("SubordinatorDensity");
  }

  double beta() const noexcept { return static_cast<double>(beta_); }

  SeriesValue g(double u) {
    if (!(u > 0.0) || !std::isfinite(u))
      throw DomainError("g_beta: u must be finite and > 0, got " +
                        detail::fmt_double(u));
    if (u < 1.0) return g_via_identity(u);
    return g_series(u);
  }

  SeriesValue h(double t, double x) {
    if (!(t > 0.0) || !std::isfinite(t))
      throw DomainError("h_beta: t must be finite and > 0, got " +
                        detail::fmt_double(t));
    if (!(x > 0.0) || !std::isfinite(x))
      throw DomainError("h_beta: x must be finite and > 0, got " +
                        detail::fmt_double(x));
    const long double xl = x, tl = t;
    const long double u_arg = tl * std::pow(xl, -1.0L / beta_);
    SeriesValue gv = g(static_cast<double>(u_arg));
    const long double pref = tl / (beta_ * std::pow(xl, 1.0L + 1.0L / beta_));
    gv.value = static_cast<double>(pref * gv.value);
    gv.abs_err = static_cast<double>(pref * gv.abs_err);
    gv.max_term_bound = static_cast<double>(pref * gv.max_term_bound);
    return gv;
  }

 private:
  SeriesValue g_series(double u) {
    detail::KahanAccumulator acc;
    const long double ul = u;
    const long double ratio = std::pow(ul, -beta_);  // u^{-beta}
    long double p = std::pow(ul, -beta_ - 1.0L);     // u^{-beta j - 1}
    long double max_env = 0.0L;
    long double threshold = 0.0L;
    SeriesValue out;

    for (int j = 1; j <= cfg_.max_terms; ++j) {
      if (!ensure_terms(j + 1)) break;
      const std::size_t idx = static_cast<std::size_t>(j - 1);
      const long double sign = (j % 2 == 1) ? 1.0L : -1.0L;
      acc.add(sign * coeff_[idx] * p);
      const long double env_j = env_[idx] * p;
      if (env_j > max_env) max_env = env_j;
      if (j == 1) {
        // Tiny leading envelopes (large u, or small u via the identity's big
        // prefactor) make the tolerance effectively relative.
        threshold = cfg_.abs_tol * std::min(1.0L, env_j);
      }
      out.terms = j;

      const long double p_next = p * ratio;
      const long double env_next = env_[static_cast<std::size_t>(j)] * p_next;
      if (env_next < threshold && env_next <= env_j) {
        out.converged = true;
        out.abs_err = static_cast<double>(2.0L * env_next);
        break;
      }
      p = p_next;
    }

    const long double floor =
        max_env * (static_cast<long double>(out.terms) * LDBL_EPSILON +
                   detail::kTermRelErr);
    out.value = static_cast<double>(acc.sum);
    out.abs_err += static_cast<double>(floor);
    out.max_term_bound = static_cast<double>(max_env);
    if (!out.converged) out.abs_err = std::max(out.abs_err, out.max_term_bound);
    return out;
  }

  SeriesValue g_via_identity(double u) {
    const long double ul = u;
    const long double z = std::pow(ul, -beta_);
    SeriesValue mv = mwright_.evaluate(static_cast<double>(z));
    const long double pref = beta_ * std::pow(ul, -beta_ - 1.0L);
    mv.value = static_cast<double>(pref * mv.value);
    mv.abs_err = static_cast<double>(pref * mv.abs_err);
    mv.max_term_bound = static_cast<double>(pref * mv.max_term_bound);
    return mv;
  }

  bool ensure_terms(int j) {
    while (static_cast<int>(coeff_.size()) < j) {
      const int jj = static_cast<int>(coeff_.size()) + 1;
      const long double bj = beta_ * static_cast<long double>(jj);
      if (bj + 1.0L > detail::kGammaArgMax) return false;
      // Gamma(beta j + 1)/Gamma(j + 1) via log-gamma: overflow-safe for any
      // term budget.
      const long double lratio =
          std::lgamma(bj + 1.0L) - std::lgamma(static_cast<long double>(jj) + 1.0L);
      const long double r = std::exp(lratio);
      const long double s = std::sin(detail::kPiL * bj);
      coeff_.push_back(r * s / detail::kPiL);
      env_.push_back(r / detail::kPiL);
    }
    return true;
  }

  long double beta_;
  SeriesEvalConfig cfg_;
  MwrightSeries mwright_;
  std::vector<long double> coeff_;  // Gamma(beta j+1)/Gamma(j+1) sin(..)/pi
  std::vector<long double> env_;
};

/// One-sided stable density g_beta(u), u > 0, beta in (0,1).
inline double g_beta(OrderParam beta, double u, SeriesEvalConfig cfg = {}) {
  SubordinatorDensity d(beta, cfg);
  SeriesValue v = d.g(u);
  detail::check_series_policy(v, cfg, "g_beta", u);
  return v.value;
}

/// Inverse-stable-subordinator density h_beta(t, x), t > 0, x > 0.
inline double h_beta(OrderParam beta, double t, double x,
                     SeriesEvalConfig cfg = {}) {
  SubordinatorDensity d(beta, cfg);
  SeriesValue v = d.h(t, x);
  detail::check_series_policy(v, cfg, "h_beta", x);
  return v.value;
}

namespace detail {

// Series settings used inside quadratures: tight truncation, no guard (the
// integration code does its own absolute error accounting).
inline SeriesEvalConfig quadrature_series_config() {
  SeriesEvalConfig cfg;
  cfg.max_terms = 1600;
  cfg.abs_tol = 1e-19;
  cfg.cancellation_guard = 1e300;
  return cfg;
}

/// Upper cutoff for integrals of z^k M_beta(z): smallest Z past the density
/// hump where a local log-slope bound certifies the remaining tail below
/// tail_tol.  Relies on the eventually log-concave decay of M_beta; a 4x
/// safety factor is applied.  If the series floor wall is reached first the
/// best available point is returned with the (possibly unmet) bound.
struct MomentCutoff {
  double z_max = 0.0;
  double tail_bound = 0.0;
};

inline MomentCutoff mwright_power_cutoff(MwrightSeries& series, int k,
                                         double tail_tol) {
  MomentCutoff out;
  double z = 2.0;
  double last_bound = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 400; ++iter) {
    SeriesValue a = series.evaluate(z);
    SeriesValue b = series.evaluate(z * 1.05);
    const bool usable = a.value > 4.0 * a.abs_err + 1e-300 &&
                        b.value > 4.0 * b.abs_err + 1e-300 &&
                        b.value < a.value;
    if (usable) {
      const double slope = std::log(a.value / b.value) / (0.05 * z);
      const double net = slope - static_cast<double>(k) / z;
      if (net > 0.0) {
        const double bound = 4.0 * std::pow(z, k) * a.value / net;
        last_bound = bound;
        if (bound <= tail_tol) {
          out.z_max = z;
          out.tail_bound = bound;
          return out;
        }
      }
    } else if (a.value <= 4.0 * a.abs_err + 1e-300) {
      // Precision wall: M is drowned in the series floor here.
      out.z_max = z;
      out.tail_bound = std::min(last_bound,
                                std::pow(z, k) * (a.value + a.abs_err) * z);
      return out;
    }
    z *= 1.12;
  }
  out.z_max = z;
  out.tail_bound = last_bound;
  return out;
}

}  // namespace detail

/// Quadrature of z^k M_beta(z) over [0, inf), truncated by the tail rule
/// above.  Exact value is k! / Gamma(beta k + 1).
inline QuadratureReport mwright_moment(OrderParam beta, int k, double abs_tol) {
  beta.require_series("mwright_moment");
  if (k < 0) throw DomainError("mwright_moment: k must be >= 0");
  if (!(abs_tol > 0.0))
    throw DomainError("mwright_moment: abs_tol must be > 0");

  MwrightSeries series(beta, detail::quadrature_series_config());
  const auto cutoff = detail::mwright_power_cutoff(series, k, abs_tol / 10.0);

  long n_evals = 0;
  auto f = [&](double z) {
    ++n_evals;
    SeriesValue v = series.evaluate(z);
    const double p = std::pow(z, k);
    return std::pair<double, double>(p * v.value, p * v.abs_err);
  };

  const double zm = cutoff.z_max;
  const std::vector<double> brk = {0.0, zm / 8.0, zm / 2.0, zm};
  quadrature::AdaptiveOptions opt;
  opt.abs_tol = abs_tol / 2.0;
  auto r = quadrature::integrate_adaptive(f, brk, opt);
  if (!r.converged)
    throw ToleranceNotMetError("mwright_moment: quadrature did not reach " +
                               detail::fmt_double(abs_tol));

  QuadratureReport rep;
  rep.value = r.value;
  rep.quad_err_est = r.err;
  rep.series_err_est = r.noise;
  rep.tail_bound = cutoff.tail_bound;
  rep.abs_err_est = r.err + r.noise + cutoff.tail_bound;
  rep.z_max = zm;
  rep.n_evals = n_evals;
  rep.panels = r.panels;
  return rep;
}

}  // namespace fracpoisson
