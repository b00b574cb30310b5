#pragma once

// Cox arrival model: a periodic piecewise-constant daily pattern inflated by a
// unit-mean autoregressive busyness factor built from i.i.d. draws W.

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "coxstaff/errors.hpp"
#include "coxstaff/rng.hpp"

namespace coxstaff {

/// Periodic deterministic rate, constant on slots of width `delta`.
/// Rates are arrivals per time unit; slot indices wrap modulo n_slots().
struct DailyPattern {
  double delta = 1.0;
  Eigen::VectorXd rates;

  Eigen::Index n_slots() const { return rates.size(); }

  double rate(long j) const {
    const long n = static_cast<long>(rates.size());
    return rates[((j % n) + n) % n];
  }

  /// Expected arrival count per slot, rates * delta.
  Eigen::VectorXd slot_means() const { return rates * delta; }

  void validate() const;
};

enum class WDistribution { gamma, lognormal, deterministic };

std::string_view to_string(WDistribution d);
WDistribution parse_w_distribution(std::string_view name);

struct BusynessParams {
  double alpha = 1.0;
  int lag = 0;
  double var_w = 0.0;
  WDistribution w_dist = WDistribution::gamma;

  void validate() const;
};

/// Largest lag whose covariance band still fits a cycle of n_slots slots.
inline int max_admissible_lag(Eigen::Index n_slots) {
  return static_cast<int>((n_slots - 1) / 2);
}

/// Throws ConstraintError if params.lag does not fit the pattern's cycle.
void check_lag_fits(const DailyPattern& pattern, const BusynessParams& params);

/// One realisation of the stochastic rate.
/// w_values holds `lag` pre-history draws followed by one draw per slot, so
/// W_j lives at w_values[j + lag]. lambda_values[j] is the rate on slot j.
struct RatePath {
  int lag = 0;
  Eigen::VectorXd w_values;
  Eigen::VectorXd lambda_values;

  Eigen::Index n_slots() const { return lambda_values.size(); }
  double w(long j) const { return w_values[j + lag]; }
};

namespace detail {

// Sum forms below stay exact at alpha = 1 and accept alpha = 0 (0^0 = 1),
// which the estimation grid relies on.
template <typename Scalar>
Scalar geometric_sum(Scalar ratio, int terms) {
  Scalar total(0);
  Scalar power(1);
  for (int i = 0; i < terms; ++i) {
    total += power;
    power *= ratio;
  }
  return total;
}

template <typename Scalar>
Scalar normalizing_constant_unchecked(Scalar alpha, int lag) {
  return Scalar(1) / geometric_sum(alpha, lag + 1);
}

template <typename Scalar>
Scalar lag_coefficient_unchecked(Scalar alpha, int lag, int k) {
  if (k < 0 || k > lag) return Scalar(0);
  const Scalar c = normalizing_constant_unchecked(alpha, lag);
  Scalar alpha_k(1);
  for (int i = 0; i < k; ++i) alpha_k *= alpha;
  return c * c * alpha_k * geometric_sum(alpha * alpha, lag - k + 1);
}

inline void check_alpha_lag(double alpha, int lag) {
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw DomainError("alpha must lie in (0, 1], got " + std::to_string(alpha));
  if (lag < 0) throw DomainError("lag must be nonnegative, got " + std::to_string(lag));
}

}  // namespace detail

/// c_alpha = (1 - alpha) / (1 - alpha^(lag+1)); 1/(lag+1) at alpha = 1.
template <typename Scalar = double>
Scalar normalizing_constant(Scalar alpha, int lag) {
  detail::check_alpha_lag(static_cast<double>(alpha), lag);
  return detail::normalizing_constant_unchecked(alpha, lag);
}

/// Lag-k covariance coefficient C_k(alpha, lag) of the busyness factor:
/// Cov(B_j, B_{j+k}) = C_k * Var W. Zero for k > lag. Accepts alpha in [0, 1].
template <typename Scalar = double>
Scalar lag_covariance_coefficient(Scalar alpha, int lag, int k) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw DomainError("alpha must lie in [0, 1], got " + std::to_string(static_cast<double>(alpha)));
  if (lag < 0) throw DomainError("lag must be nonnegative");
  return detail::lag_coefficient_unchecked(alpha, lag, k);
}

/// Variance of the busyness factor per unit Var W,
/// (1-alpha)/(1+alpha) * (1+alpha^(lag+1))/(1-alpha^(lag+1)).
/// Strictly decreasing in alpha for lag >= 1 and non-increasing in lag.
template <typename Scalar = double>
Scalar variance_factor(Scalar alpha, int lag) {
  detail::check_alpha_lag(static_cast<double>(alpha), lag);
  return detail::lag_coefficient_unchecked(alpha, lag, 0);
}

/// Variance of the mixed Poisson count with mean lambda_j:
/// lambda_j + lambda_j^2 * variance_factor * Var W.
double slot_count_variance(double lambda_j, const BusynessParams& params);

/// Draws the W sequence (with fresh pre-history) over n_days cycles and
/// assembles the stochastic rate slot by slot.
RatePath sample_rate_path(const DailyPattern& pattern, const BusynessParams& params, int n_days,
                          Rng& rng);

/// Conditionally on the path: Poisson(Lambda_j * delta) arrivals per slot,
/// placed uniformly inside the slot. Timestamps are ascending, measured from
/// the start of slot 0.
std::vector<double> sample_arrivals(const RatePath& path, const DailyPattern& pattern, Rng& rng);

/// Covariance of the per-slot arrival counts over one cycle, in count units:
/// Sigma(j, j+k) = m_j * (1{k=0} + m_{j+k} * C_k * Var W) with m = rates * delta,
/// circular band of half-width lag, zero elsewhere.
Eigen::MatrixXd theoretical_covariance(const DailyPattern& pattern, const BusynessParams& params);

}  // namespace coxstaff
