#pragma once

#include <array>
#include <cmath>
#include <algorithm>
#include <cstdint>
#include <queue>
#include <span>
#include <utility>
#include <vector>

#include "fracpoisson/errors.hpp"

namespace fracpoisson {

/// Result of one adaptive integration, plus the bookkeeping the rest of the
/// library reports to callers.  `abs_err_est` is the sum of the quadrature
/// estimate, the integrand noise estimate and the truncation-tail bound.
struct QuadratureReport {
  double value = 0.0;
  double abs_err_est = 0.0;
  double z_max = 0.0;   // upper truncation point of the integration domain
  long n_evals = 0;     // integrand evaluations

  // Components of abs_err_est, kept separate for diagnostics.
  double quad_err_est = 0.0;    // Gauss-Kronrod |K15 - G7| sum
  double series_err_est = 0.0;  // propagated integrand noise (series floors)
  double tail_bound = 0.0;      // bound on the truncated tail
  int panels = 0;
};

namespace quadrature {

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK dqk15
// abscissae/weights).  xk[1], xk[3], xk[5] and the centre are the Gauss
// points.
inline constexpr std::array<double, 7> kKronrodX = {
    .991455371120812639206854697526329, .949107912342758524526189684047851,
    .864864423359769072789712788640926, .741531185599394439863864773280788,
    .58608723546769113029414483825873,  .405845151377397166906606412076961,
    .207784955007898467600689403773245};

inline constexpr std::array<double, 8> kKronrodW = {
    .02293532201052922496373200805897,  .063092092629978553290700663189204,
    .104790010322250183839876322541518, .140653259715525918745189590510238,
    .16900472663926790282658342659855,  .190350578064785409913256402421014,
    .204432940075298892414161999234649, .209482141084727828012999174891714};

inline constexpr std::array<double, 4> kGaussW = {
    .129484966168869693270611432679082, .27970539148927666790146777142378,
    .381830050505118944950369775488975, .417959183673469387755102040816327};

struct PanelResult {
  double integral = 0.0;
  double err = 0.0;    // |K15 - G7|
  double noise = 0.0;  // Kronrod-weighted integral of the integrand noise
};

/// One G7/K15 panel on [a, b].  `f(x)` must return {value, abs_noise}.
template <class F>
PanelResult gk15(F&& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);

  auto [fc, nc] = f(c);
  double resk = kKronrodW[7] * fc;
  double resg = kGaussW[3] * fc;
  double resn = kKronrodW[7] * nc;
  for (int i = 0; i < 7; ++i) {
    const double dx = h * kKronrodX[i];
    auto [f1, n1] = f(c - dx);
    auto [f2, n2] = f(c + dx);
    resk += kKronrodW[i] * (f1 + f2);
    resn += kKronrodW[i] * (n1 + n2);
    if (i % 2 == 1) resg += kGaussW[(i - 1) / 2] * (f1 + f2);
  }
  return {resk * h, std::abs(resk - resg) * std::abs(h), resn * std::abs(h)};
}

struct AdaptiveOptions {
  double abs_tol = 1e-10;
  int max_panels = 20000;
  /// When set, receives the final panel boundaries (sorted by left edge).
  std::vector<std::pair<double, double>>* collect_panels = nullptr;
};

struct AdaptiveResult {
  double value = 0.0;
  double err = 0.0;
  double noise = 0.0;
  long n_evals = 0;
  int panels = 0;
  bool converged = false;
};

/// Adaptive bisection over the panels defined by `breakpoints` (sorted,
/// at least two entries).  The worst panel by |K15 - G7| is split until the
/// summed estimate is below abs_tol or the panel budget runs out.
template <class F>
AdaptiveResult integrate_adaptive(F&& f, std::span<const double> breakpoints,
                                  const AdaptiveOptions& opt) {
  struct Panel {
    double a, b;
    PanelResult r;
    bool operator<(const Panel& o) const { return r.err < o.r.err; }
  };

  AdaptiveResult out;
  std::priority_queue<Panel> queue;
  double err_sum = 0.0;
  auto push = [&](double a, double b) {
    if (!(b > a)) return;
    Panel p{a, b, gk15(f, a, b)};
    out.n_evals += 15;
    err_sum += p.r.err;
    queue.push(std::move(p));
  };

  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i)
    push(breakpoints[i], breakpoints[i + 1]);

  while (err_sum > opt.abs_tol &&
         static_cast<int>(queue.size()) < opt.max_panels) {
    Panel worst = queue.top();
    queue.pop();
    err_sum -= worst.r.err;
    const double mid = 0.5 * (worst.a + worst.b);
    if (mid <= worst.a || mid >= worst.b) {
      // Interval at floating-point resolution; keep as is.
      err_sum += worst.r.err;
      queue.push(std::move(worst));
      break;
    }
    push(worst.a, mid);
    push(mid, worst.b);
  }

  out.panels = static_cast<int>(queue.size());
  // Accumulate from smallest panels for a stable deterministic sum.
  std::vector<Panel> panels;
  panels.reserve(queue.size());
  while (!queue.empty()) {
    panels.push_back(queue.top());
    queue.pop();
  }
  long double value = 0.0L, err = 0.0L, noise = 0.0L;
  for (auto it = panels.rbegin(); it != panels.rend(); ++it) {
    value += it->r.integral;
    err += it->r.err;
    noise += it->r.noise;
  }
  if (opt.collect_panels) {
    opt.collect_panels->clear();
    opt.collect_panels->reserve(panels.size());
    for (const Panel& p : panels) opt.collect_panels->emplace_back(p.a, p.b);
    std::sort(opt.collect_panels->begin(), opt.collect_panels->end());
  }
  out.value = static_cast<double>(value);
  out.err = static_cast<double>(err);
  out.noise = static_cast<double>(noise);
  out.converged = out.err <= opt.abs_tol;
  return out;
}

/// Adapter for integrands without a noise channel.
template <class F>
auto with_zero_noise(F&& f) {
  return [g = std::forward<F>(f)](double x) {
    return std::pair<double, double>(g(x), 0.0);
  };
}

}  // namespace quadrature
}  // namespace fracpoisson
