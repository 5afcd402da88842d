#pragma once

#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fracpoisson/errors.hpp"

namespace fracpoisson {

enum class IntensityKind { power_law, linear };

/// Cumulative intensity Lambda with the structure the scaling limit needs:
/// Lambda(0) = 0, strictly increasing, unbounded, and x Lambda'(x)/Lambda(x)
/// equal to a constant c.  Only closed-form-invertible models ship: the
/// scaling harness solves n = Lambda(z0 t^beta) for t exactly, so the
/// constraint error stays at rounding level.
class IntensityModel {
 public:
  static IntensityModel power_law(double exponent, double scale) {
    if (!(exponent > 0.0) || !std::isfinite(exponent))
      throw DomainError("IntensityModel: power-law exponent r must be > 0");
    if (!(scale > 0.0) || !std::isfinite(scale))
      throw DomainError("IntensityModel: power-law scale must be > 0");
    return IntensityModel(IntensityKind::power_law, exponent, scale);
  }

  static IntensityModel linear(double lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda))
      throw DomainError("IntensityModel: linear rate lambda must be > 0");
    return IntensityModel(IntensityKind::linear, 1.0, lambda);
  }

  /// Parses "powerlaw:r=<real>,scale=<real>" or "linear:lambda=<real>".
  static IntensityModel parse(std::string_view spec);

  IntensityKind kind() const noexcept { return kind_; }

  /// Lambda(x), x >= 0.
  double cumulative(double x) const {
    require_nonneg(x, "cumulative");
    if (kind_ == IntensityKind::linear) return scale_ * x;
    return scale_ * std::pow(x, exponent_);
  }

  /// log Lambda(x), x > 0.  Exact in the exponent, for log-space Poisson
  /// factors at extreme arguments.
  double log_cumulative(double x) const {
    if (!(x > 0.0))
      throw DomainError("IntensityModel::log_cumulative: x must be > 0");
    return std::log(scale_) + exponent_ * std::log(x);
  }

  /// lambda(x) = Lambda'(x), analytic (never finite-differenced).
  double intensity(double x) const {
    require_nonneg(x, "intensity");
    if (kind_ == IntensityKind::linear) return scale_;
    return scale_ * exponent_ * std::pow(x, exponent_ - 1.0);
  }

  /// Lambda^{-1}(y), y > 0.
  double invert(double y) const {
    if (!(y > 0.0) || !std::isfinite(y))
      throw DomainError("IntensityModel::invert: y must be > 0, got " +
                        std::to_string(y));
    if (kind_ == IntensityKind::linear) return y / scale_;
    return std::pow(y / scale_, 1.0 / exponent_);
  }

  /// The constant c in x Lambda'(x)/Lambda(x) = c.
  double scaling_constant() const noexcept { return exponent_; }

  /// Scale prefactor a in Lambda(x) = a x^c.
  double scale() const noexcept { return scale_; }

  /// Canonical spec string, re-parseable by parse().
  std::string spec_string() const;

 private:
  IntensityModel(IntensityKind kind, double exponent, double scale)
      : kind_(kind), exponent_(exponent), scale_(scale) {}

  void require_nonneg(double x, const char* who) const {
    if (!(x >= 0.0) || !std::isfinite(x))
      throw DomainError(std::string("IntensityModel::") + who +
                        ": x must be finite and >= 0");
  }

  IntensityKind kind_;
  double exponent_;  // c; 1 for linear
  double scale_;     // a for power law, lambda for linear
};

/// Residual of the scaling condition at one grid point.
struct ConditionIiSample {
  double x = 0.0;
  double residual = 0.0;  // x Lambda'(x)/Lambda(x) - c
};

/// Evaluates x Lambda'(x)/Lambda(x) - c on a grid of positive points.  For
/// the built-in models this is zero to rounding.
inline std::vector<ConditionIiSample> check_condition_ii(
    const IntensityModel& model, std::span<const double> x_grid) {
  if (x_grid.empty())
    throw DomainError("check_condition_ii: grid must be nonempty");
  std::vector<ConditionIiSample> out;
  out.reserve(x_grid.size());
  for (double x : x_grid) {
    if (!(x > 0.0))
      throw DomainError("check_condition_ii: grid points must be > 0");
    const double r =
        x * model.intensity(x) / model.cumulative(x) - model.scaling_constant();
    out.push_back({x, r});
  }
  return out;
}

namespace detail {

inline double parse_real_field(std::string_view text, std::string_view key,
                               std::string_view spec) {
  const std::string prefix = std::string(key) + "=";
  if (text.substr(0, prefix.size()) != prefix)
    throw DomainError("IntensityModel: expected '" + prefix +
                      "<real>' in spec '" + std::string(spec) + "'");
  const std::string value(text.substr(prefix.size()));
  std::size_t used = 0;
  double parsed = 0.0;
  try {
    parsed = std::stod(value, &used);
  } catch (const std::exception&) {
    throw DomainError("IntensityModel: bad number for '" + std::string(key) +
                      "' in spec '" + std::string(spec) + "'");
  }
  if (used != value.size())
    throw DomainError("IntensityModel: trailing characters after '" +
                      std::string(key) + "' in spec '" + std::string(spec) +
                      "'");
  return parsed;
}

}  // namespace detail

inline IntensityModel IntensityModel::parse(std::string_view spec) {
  const auto colon = spec.find(':');
  if (colon == std::string_view::npos)
    throw DomainError("IntensityModel: spec '" + std::string(spec) +
                      "' must look like 'powerlaw:r=2,scale=1' or "
                      "'linear:lambda=1'");
  const std::string_view head = spec.substr(0, colon);
  const std::string_view body = spec.substr(colon + 1);
  if (head == "linear") {
    return linear(detail::parse_real_field(body, "lambda", spec));
  }
  if (head == "powerlaw") {
    const auto comma = body.find(',');
    if (comma == std::string_view::npos)
      throw DomainError("IntensityModel: power-law spec needs 'r=..,scale=..'"
                        ", got '" + std::string(spec) + "'");
    const double r = detail::parse_real_field(body.substr(0, comma), "r", spec);
    const double a =
        detail::parse_real_field(body.substr(comma + 1), "scale", spec);
    return power_law(r, a);
  }
  throw DomainError("IntensityModel: unknown kind '" + std::string(head) +
                    "' (expected 'powerlaw' or 'linear')");
}

inline std::string IntensityModel::spec_string() const {
  auto fmt = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.15g", v);
    return std::string(buf);
  };
  if (kind_ == IntensityKind::linear) return "linear:lambda=" + fmt(scale_);
  return "powerlaw:r=" + fmt(exponent_) + ",scale=" + fmt(scale_);
}

}  // namespace fracpoisson
