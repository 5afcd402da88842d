#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "fracpoisson/errors.hpp"
#include "fracpoisson/intensity.hpp"
#include "fracpoisson/quadrature.hpp"
#include "fracpoisson/special.hpp"

namespace fracpoisson {

/// Inputs of one marginal probability P_beta(n, t).
struct MarginalQuery {
  long n = 0;
  double t = 0.0;
  OrderParam beta;
  IntensityModel model;
};

namespace detail {

inline double log_factorial(long n) {
  return std::lgamma(static_cast<double>(n) + 1.0);
}

inline void check_marginal_tol(double tol) {
  if (!(tol > 1e-14) || !(tol < 1e-2))
    throw DomainError("marginal: tol must lie in (1e-14, 1e-2), got " +
                      fmt_double(tol));
}

/// Crude upper bound for sup_z M_beta(z), from a coarse grid.
inline double mwright_sup_bound(MwrightSeries& series) {
  double sup = 0.05;
  for (int i = 0; i <= 24; ++i) {
    const double z = 3.0 * i / 24.0;
    const SeriesValue v = series.evaluate(z);
    sup = std::max(sup, v.value + v.abs_err);
  }
  return 1.3 * sup;
}

/// Smallest Y >= y_lo with log_pref - Y + s log Y <= log_tol
/// (monotone decreasing region Y > s).
inline double solve_poisson_tail_y(double s, double log_pref, double log_tol,
                                   double y_lo) {
  auto f = [&](double y) { return log_pref - y + s * std::log(y); };
  double y = std::max({y_lo, 2.0 * (s + 1.0), 4.0});
  int guard = 0;
  while (f(y) > log_tol && guard++ < 80) y *= 2.0;
  double lo = y / 2.0, hi = y;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > log_tol ? lo : hi) = mid;
  }
  return hi;
}

struct TailCutoff {
  double z_max = 0.0;
  double tail_bound = 0.0;
};

/// Upper truncation point for the backbone integrand
/// g(z) = pois_n(Lambda(z t^beta)) * M_beta(z).
///
/// log g is concave in z for the shipped models, so past its unique peak the
/// tail obeys  int_Z^inf g <= g(Z) / (-d log g/dz)(Z).  The scan marches z
/// up in multiplicative steps, evaluating M through the series, and stops at
/// the first point where that bound (with a 4x safety factor) is below
/// tail_tol.  A rigorous incomplete-gamma bound on the Poisson cofactor
/// (with sup M as majorant) caps the scan; if the M series drowns in its
/// rounding floor first, the scan stops at the wall and reports a cruder
/// bound built from the last resolvable M value.
inline TailCutoff choose_z_max(const IntensityModel& model, double beta,
                               double t, long n, MwrightSeries& series,
                               double tail_tol) {
  const double tb = std::pow(t, beta);
  const double m_sup = mwright_sup_bound(series);
  const double c = model.scaling_constant();
  const double a = model.scale();
  const double s = static_cast<double>(n) - 1.0 + 1.0 / c;
  const double lg_n = log_factorial(n);
  const double log_pref = std::log(2.0) + std::log(m_sup) -
                          std::log(a) / c - std::log(c) - beta * std::log(t) -
                          lg_n;
  const double log_tol = std::log(tail_tol);

  const double y_cof = solve_poisson_tail_y(s, log_pref, log_tol, 4.0);
  const double z_cof = model.invert(y_cof) / tb;

  auto log_cofactor = [&](double z) {
    const double big_l = model.cumulative(z * tb);
    if (n == 0) return -big_l;
    return static_cast<double>(n) * model.log_cumulative(z * tb) - big_l -
           lg_n;
  };
  auto cof_decay_rate = [&](double z) {
    const double big_l = model.cumulative(z * tb);
    return model.intensity(z * tb) * tb *
           (1.0 - static_cast<double>(n) / big_l);
  };

  double z = 0.25;
  double m_last_resolved = m_sup;
  double best_z = -1.0, best_bound = std::numeric_limits<double>::infinity();
  bool wall = false;
  while (z < z_cof) {
    const SeriesValue m0 = series.evaluate(z);
    const SeriesValue m1 = series.evaluate(z * 1.05);
    if (m0.value <= 4.0 * m0.abs_err + 1e-300) {
      wall = true;
      break;
    }
    m_last_resolved = m0.value + m0.abs_err;
    if (m1.value > 4.0 * m1.abs_err + 1e-300 && m1.value < m0.value) {
      const double slope_m = std::log(m0.value / m1.value) / (0.05 * z);
      const double net = slope_m + cof_decay_rate(z);
      if (net > 0.0) {
        const double log_bound =
            log_cofactor(z) + std::log(m0.value) + std::log(4.0 / net);
        const double bound = std::exp(std::max(log_bound, -700.0));
        if (bound < best_bound) {
          best_bound = bound;
          best_z = z;
        }
        if (log_bound <= log_tol) return {z, bound};
      }
    }
    z *= 1.08;
  }
  if (!wall) return {z_cof, tail_tol};
  // Series floor wall before the slope bound reached tail_tol: keep the best
  // certified slope bound if any, else majorise M by its last resolvable
  // value times the full cofactor integral
  // int_0^inf pois_n dz = Gamma(n + 1/c) a^{-1/c} / (c t^beta n!).
  if (best_z > 0.0) return {best_z, best_bound};
  const double log_cof_full = std::lgamma(static_cast<double>(n) + 1.0 / c) -
                              std::log(a) / c - std::log(c) -
                              beta * std::log(t) - lg_n;
  const double log_b = std::log(m_last_resolved) + log_cof_full;
  return {z, std::exp(std::clamp(log_b, -700.0, 700.0))};
}

inline std::vector<double> marginal_breakpoints(long n, double z_peak,
                                                double z_max) {
  std::vector<double> brk = {0.0};
  if (n >= 1 && z_peak > 0.0 && z_peak < z_max) {
    const double delta =
        std::min(0.5, 8.0 / std::sqrt(static_cast<double>(std::max(n, 16L))));
    for (double zb : {0.5 * z_peak, (1.0 - delta) * z_peak, z_peak,
                      (1.0 + delta) * z_peak, 2.0 * z_peak})
      if (zb > 0.0 && zb < z_max) brk.push_back(zb);
  } else {
    if (0.5 < z_max) brk.push_back(0.5);
    if (1.5 < z_max) brk.push_back(1.5);
  }
  brk.push_back(z_max);
  std::sort(brk.begin(), brk.end());
  brk.erase(std::unique(brk.begin(), brk.end()), brk.end());
  return brk;
}

inline QuadratureReport trivial_time_zero_report(long n) {
  QuadratureReport rep;
  rep.value = (n == 0) ? 1.0 : 0.0;
  return rep;
}

template <class LogCofactor>
QuadratureReport integrate_marginal(MwrightSeries& series,
                                    LogCofactor&& log_cof,
                                    const std::vector<double>& brk,
                                    const TailCutoff& cutoff, double tol,
                                    int max_panels, const char* who) {
  long n_evals = 0;
  auto f = [&](double z) {
    ++n_evals;
    const double lc = log_cof(z);
    const double cof = std::exp(lc);
    const SeriesValue v = series.evaluate(z);
    return std::pair<double, double>(cof * v.value, cof * v.abs_err);
  };
  quadrature::AdaptiveOptions opt;
  opt.abs_tol = tol / 2.0;
  opt.max_panels = max_panels;
  const auto r = quadrature::integrate_adaptive(f, brk, opt);

  QuadratureReport rep;
  rep.value = r.value;
  rep.quad_err_est = r.err;
  rep.series_err_est = r.noise;
  rep.tail_bound = cutoff.tail_bound;
  rep.abs_err_est = r.err + r.noise + cutoff.tail_bound;
  rep.z_max = cutoff.z_max;
  rep.n_evals = n_evals;
  rep.panels = r.panels;

  if (!r.converged || rep.abs_err_est > tol)
    throw ToleranceNotMetError(
        std::string(who) + ": error estimate " + fmt_double(rep.abs_err_est) +
        " (quad " + fmt_double(rep.quad_err_est) + ", series " +
        fmt_double(rep.series_err_est) + ", tail " +
        fmt_double(rep.tail_bound) + ") did not reach tol " + fmt_double(tol) +
        " within the panel budget");
  if (rep.value < -rep.abs_err_est || rep.value > 1.0 + rep.abs_err_est)
    throw PrecisionLossError(std::string(who) + ": probability value " +
                             fmt_double(rep.value) +
                             " outside [0,1] beyond the error estimate");
  return rep;
}

}  // namespace detail

/// Marginal probability P_beta(n, t) of the fractional non-homogeneous
/// Poisson process, via adaptive Gauss-Kronrod quadrature of
///
///   P_beta(n,t) = int_0^inf exp(-Lambda(z t^beta)) Lambda(z t^beta)^n / n!
///                 M_beta(z) dz.
///
/// The Poisson factor is evaluated in log space; panels are seeded at the
/// saddle point z0 = Lambda^{-1}(n)/t^beta.
inline QuadratureReport marginal(const MarginalQuery& q, double tol,
                                 int max_panels = 20000) {
  if (q.n < 0) throw DomainError("marginal: n must be >= 0");
  detail::check_marginal_tol(tol);
  if (!(q.t >= 0.0) || !std::isfinite(q.t))
    throw DomainError("marginal: t must be finite and >= 0");
  if (q.t == 0.0) return detail::trivial_time_zero_report(q.n);
  q.beta.require_series("marginal");

  const double beta = q.beta.value();
  const double tb = std::pow(q.t, beta);
  MwrightSeries series(q.beta, detail::quadrature_series_config());
  const auto cutoff =
      detail::choose_z_max(q.model, beta, q.t, q.n, series, tol / 10.0);
  const double z_peak =
      q.n > 0 ? q.model.invert(static_cast<double>(q.n)) / tb : 0.0;
  const auto brk = detail::marginal_breakpoints(q.n, z_peak, cutoff.z_max);

  const double lg_n = detail::log_factorial(q.n);
  auto log_cof = [&](double z) {
    const double big_l = q.model.cumulative(z * tb);
    if (q.n == 0) return -big_l;
    return static_cast<double>(q.n) * q.model.log_cumulative(z * tb) - big_l -
           lg_n;
  };
  return detail::integrate_marginal(series, log_cof, brk, cutoff, tol,
                                    max_panels, "marginal");
}

/// Closed-form series solution of the fractional Kolmogorov-Feller system
/// with unit rate, used as an independent cross-check of the quadrature
/// path:
///
///   P_beta(n,t) = (t^beta)^n / n! *
///     sum_{k>=0} (n+k)!/k! (-t^beta)^k / Gamma(beta (k+n) + 1).
///
/// Keeps no dependence on the M-Wright integral representation.
inline double fpp_series_oracle(long n, double t, OrderParam beta) {
  if (n < 0 || n > 50)
    throw DomainError("fpp_series_oracle: n must lie in [0, 50], got " +
                      std::to_string(n));
  if (!(t >= 0.0) || !std::isfinite(t))
    throw DomainError("fpp_series_oracle: t must be finite and >= 0");
  beta.require_series("fpp_series_oracle");
  if (t == 0.0) return (n == 0) ? 1.0 : 0.0;

  const long double b = beta.value();
  const long double x = std::pow(static_cast<long double>(t), b);

  // P = x^n * sum_k binom(n+k, k) (-x)^k / Gamma(beta(k+n)+1)
  detail::KahanAccumulator acc;
  long double binom_x = 1.0L;  // binom(n+k,k) x^k
  long double max_env = 0.0L;
  int terms = 0;
  bool converged = false;
  constexpr int kMaxTerms = 700;
  for (int k = 0; k < kMaxTerms; ++k) {
    const long double garg = b * static_cast<long double>(k + n) + 1.0L;
    if (garg > detail::kGammaArgMax) break;
    const long double env = binom_x / std::tgamma(garg);
    const long double term = (k % 2 == 0) ? env : -env;
    acc.add(term);
    if (env > max_env) max_env = env;
    ++terms;

    const long double binom_x_next =
        binom_x * x * static_cast<long double>(n + k + 1) /
        static_cast<long double>(k + 1);
    const long double env_next =
        binom_x_next / std::tgamma(std::min(garg + b, 1749.0L));
    if (env_next < 1e-17L * std::max(1.0L, fabsl(acc.sum)) && env_next < env) {
      converged = true;
      break;
    }
    binom_x = binom_x_next;
  }
  if (!converged)
    throw NonConvergenceError(
        "fpp_series_oracle: series did not converge within " +
        std::to_string(kMaxTerms) + " terms (t too large)");
  const long double scale = std::max(fabsl(acc.sum), 1e-300L);
  if (max_env / scale > 1e10L)
    throw PrecisionLossError(
        "fpp_series_oracle: alternating cancellation too severe at t = " +
        detail::fmt_double(t) + "; shrink t");

  const long double p = std::pow(x, static_cast<long double>(n)) * acc.sum;
  if (p < -1e-12L || p > 1.0L + 1e-12L)
    throw PrecisionLossError("fpp_series_oracle: value " +
                             detail::fmt_double(static_cast<double>(p)) +
                             " outside [0,1]");
  return static_cast<double>(p);
}

/// Homogeneous (unit-rate) marginal via the subordination integral
///
///   P_beta(n,t) = t^{n beta}/n! int_0^inf z^n e^{-z t^beta} M_beta(z) dz.
///
/// Algebraically the same integral as marginal() with a linear unit-rate
/// intensity; kept as a distinct computational route.
inline QuadratureReport marginal_subordination(long n, double t,
                                               OrderParam beta, double tol,
                                               int max_panels = 20000) {
  if (n < 0) throw DomainError("marginal_subordination: n must be >= 0");
  detail::check_marginal_tol(tol);
  if (!(t >= 0.0) || !std::isfinite(t))
    throw DomainError("marginal_subordination: t must be finite and >= 0");
  if (t == 0.0) return detail::trivial_time_zero_report(n);
  beta.require_series("marginal_subordination");

  const double b = beta.value();
  const double tb = std::pow(t, b);
  const IntensityModel unit = IntensityModel::linear(1.0);
  MwrightSeries series(beta, detail::quadrature_series_config());
  const auto cutoff = detail::choose_z_max(unit, b, t, n, series, tol / 10.0);
  const double z_peak = static_cast<double>(n) / tb;
  const auto brk = detail::marginal_breakpoints(n, z_peak, cutoff.z_max);

  const double lg_n = detail::log_factorial(n);
  const double nb_logt = static_cast<double>(n) * b * std::log(t);
  auto log_cof = [&](double z) {
    if (n == 0) return -z * tb;
    return static_cast<double>(n) * std::log(z) - z * tb + nb_logt - lg_n;
  };
  return detail::integrate_marginal(series, log_cof, brk, cutoff, tol,
                                    max_panels, "marginal_subordination");
}

/// P_beta(n, t) for n = 0..n_max in one pass.  All n share one adaptive
/// panel set (refined on the Poisson-envelope integrand
/// M_beta(z) max_n pois_n), so the M-Wright series is evaluated once per
/// node; per-n Gauss-Kronrod error estimates are still accumulated and
/// checked individually.
inline std::vector<QuadratureReport> distribution(double t, OrderParam beta,
                                                  const IntensityModel& model,
                                                  long n_max, double tol,
                                                  int max_panels = 40000) {
  if (n_max < 0) throw DomainError("distribution: n_max must be >= 0");
  detail::check_marginal_tol(tol);
  if (!(t >= 0.0) || !std::isfinite(t))
    throw DomainError("distribution: t must be finite and >= 0");
  if (t == 0.0) {
    std::vector<QuadratureReport> out(static_cast<std::size_t>(n_max) + 1);
    for (long n = 0; n <= n_max; ++n)
      out[static_cast<std::size_t>(n)] = detail::trivial_time_zero_report(n);
    return out;
  }
  beta.require_series("distribution");

  const double b = beta.value();
  const double tb = std::pow(t, b);
  MwrightSeries series(beta, detail::quadrature_series_config());
  const auto cutoff =
      detail::choose_z_max(model, b, t, n_max, series, tol / 10.0);

  std::vector<double> brk = {0.0};
  for (long n = 1; n <= n_max; n *= 2) {
    const double zp = model.invert(static_cast<double>(n)) / tb;
    if (zp > 0.0 && zp < cutoff.z_max) brk.push_back(zp);
  }
  brk.push_back(cutoff.z_max);
  std::sort(brk.begin(), brk.end());
  brk.erase(std::unique(brk.begin(), brk.end()), brk.end());

  const std::size_t count = static_cast<std::size_t>(n_max) + 1;
  long n_evals = 0;
  auto envelope = [&](double z) {
    ++n_evals;
    const double big_l = model.cumulative(z * tb);
    const long nstar = std::clamp(static_cast<long>(big_l), 0L, n_max);
    const double lc = nstar == 0 ? -big_l
                                 : static_cast<double>(nstar) *
                                           model.log_cumulative(z * tb) -
                                       big_l - detail::log_factorial(nstar);
    const double cof = std::exp(lc);
    const SeriesValue v = series.evaluate(z);
    return std::pair<double, double>(cof * v.value, cof * v.abs_err);
  };

  std::vector<double> value(count), err(count), noise(count);
  std::vector<double> resk(count), resg(count), resn(count);
  double env_tol = tol / 4.0;
  int total_panels = 0;

  for (int attempt = 0;; ++attempt) {
    std::vector<std::pair<double, double>> panels;
    quadrature::AdaptiveOptions opt;
    opt.abs_tol = env_tol;
    opt.max_panels = max_panels;
    opt.collect_panels = &panels;
    const auto env_run = quadrature::integrate_adaptive(envelope, brk, opt);
    if (!env_run.converged)
      throw ToleranceNotMetError(
          "distribution: envelope refinement exhausted the panel budget");
    total_panels = env_run.panels;

    std::fill(value.begin(), value.end(), 0.0);
    std::fill(err.begin(), err.end(), 0.0);
    std::fill(noise.begin(), noise.end(), 0.0);

    for (const auto& [pa, pb] : panels) {
      std::fill(resk.begin(), resk.end(), 0.0);
      std::fill(resg.begin(), resg.end(), 0.0);
      std::fill(resn.begin(), resn.end(), 0.0);
      const double c = 0.5 * (pa + pb);
      const double h = 0.5 * (pb - pa);

      auto accumulate_node = [&](double z, double wk, double wg) {
        ++n_evals;
        const SeriesValue v = series.evaluate(z);
        const double big_l = model.cumulative(z * tb);
        const long nstar = std::clamp(static_cast<long>(big_l), 0L, n_max);
        const double log_p0 =
            nstar == 0 ? -big_l
                       : static_cast<double>(nstar) *
                                 model.log_cumulative(z * tb) -
                             big_l - detail::log_factorial(nstar);
        const double p0 = std::exp(log_p0);
        auto deposit = [&](long n, double pois) {
          const std::size_t i = static_cast<std::size_t>(n);
          const double f = pois * v.value;
          resk[i] += wk * f;
          resg[i] += wg * f;
          resn[i] += wk * pois * v.abs_err;
        };
        double p = p0;
        for (long n = nstar; n >= 0; --n) {  // downward recurrence
          deposit(n, p);
          if (p < 1e-320) break;
          p *= static_cast<double>(n) / big_l;
        }
        p = p0;
        for (long n = nstar + 1; n <= n_max; ++n) {  // upward recurrence
          p *= big_l / static_cast<double>(n);
          if (p < 1e-320) break;
          deposit(n, p);
        }
      };

      accumulate_node(c, quadrature::kKronrodW[7], quadrature::kGaussW[3]);
      for (int i = 0; i < 7; ++i) {
        const double dx = h * quadrature::kKronrodX[i];
        const double wg = (i % 2 == 1) ? quadrature::kGaussW[(i - 1) / 2] : 0.0;
        accumulate_node(c - dx, quadrature::kKronrodW[i], wg);
        accumulate_node(c + dx, quadrature::kKronrodW[i], wg);
      }
      for (std::size_t i = 0; i < count; ++i) {
        value[i] += resk[i] * h;
        err[i] += std::abs(resk[i] - resg[i]) * h;
        noise[i] += resn[i] * h;
      }
    }

    bool ok = true;
    for (std::size_t i = 0; i < count; ++i)
      if (err[i] + noise[i] + cutoff.tail_bound > tol) ok = false;
    if (ok) break;
    if (attempt >= 3)
      throw ToleranceNotMetError(
          "distribution: per-n error estimates did not reach tol " +
          detail::fmt_double(tol));
    env_tol /= 4.0;
  }

  std::vector<QuadratureReport> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    QuadratureReport& rep = out[i];
    rep.value = value[i];
    rep.quad_err_est = err[i];
    rep.series_err_est = noise[i];
    rep.tail_bound = cutoff.tail_bound;
    rep.abs_err_est = err[i] + noise[i] + cutoff.tail_bound;
    rep.z_max = cutoff.z_max;
    rep.n_evals = n_evals;
    rep.panels = total_panels;
    if (rep.value < -rep.abs_err_est || rep.value > 1.0 + rep.abs_err_est)
      throw PrecisionLossError("distribution: P(" + std::to_string(i) +
                               ") outside [0,1] beyond the error estimate");
  }
  return out;
}

}  // namespace fracpoisson
