#pragma once

// Covariance least-squares fit of (alpha, Var W) for a sweep of lags.

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <vector>

#include "coxstaff/arrival_model.hpp"

namespace coxstaff {

/// Observed arrival counts: one row per day, one column per slot.
struct ArrivalCounts {
  Eigen::MatrixXd counts;
  double delta = 1.0;

  void validate() const;
};

struct EmpiricalMoments {
  Eigen::VectorXd rates;       ///< column means / delta
  Eigen::MatrixXd covariance;  ///< unbiased, count units
  double delta = 1.0;

  Eigen::VectorXd slot_means() const { return rates * delta; }
};

/// One row of a lag sweep. The Poisson baseline row has no lag, alpha or
/// mse_star; lag-0 rows have no alpha (the model does not depend on it).
struct FitResult {
  std::optional<int> lag;
  std::optional<double> alpha;
  double var_w = 0.0;
  std::optional<double> mse_star;
  double mse = 0.0;
  double gain = 0.0;

  bool is_poisson_baseline() const { return !lag.has_value(); }
};

EmpiricalMoments empirical_moments(const ArrivalCounts& counts);

/// Mean squared error of the Poisson covariance diag(rates * delta) against
/// the empirical covariance, over all N^2 entries.
double poisson_baseline_mse(const EmpiricalMoments& moments);

/// Minimises the mean squared error over the N(2 lag + 1) band entries.
/// Var W is solved in closed form for each alpha (clipped at zero); alpha is
/// searched on {0, 0.001, ..., 1} and refined by golden section.
/// Throws ConstraintError if lag > floor((N-1)/2).
FitResult fit_given_lag(const EmpiricalMoments& moments, int lag);

/// Poisson baseline row followed by one fit per lag 0..max_lag.
std::vector<FitResult> fit_sweep(const EmpiricalMoments& moments, int max_lag);
std::vector<FitResult> fit_sweep(const ArrivalCounts& counts, int max_lag);

/// Largest lag whose MSE improves on lag - 1 by a relative margin above
/// `threshold`; 0 if none does. Baseline rows are skipped.
int select_lag(std::span<const FitResult> sweep, double threshold = 0.02);

}  // namespace coxstaff
