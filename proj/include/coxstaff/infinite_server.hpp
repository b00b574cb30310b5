#pragma once

// Mean and variance of the occupancy of the infinite-server system fed by the
// Cox arrival model, evaluated at slot ends in periodic steady state.

#include <Eigen/Dense>

#include <string_view>

#include "coxstaff/arrival_model.hpp"
#include "coxstaff/rng.hpp"

namespace coxstaff {

enum class ServiceKind { exponential, tabulated };

/// Service-time law. Exponential with rate `mu`, or a tabulated survival
/// function P(S > t) on an increasing grid starting at t = 0, linearly
/// interpolated and taken as zero past the last grid point.
struct ServiceSpec {
  ServiceKind kind = ServiceKind::exponential;
  double mu = 1.0;
  Eigen::VectorXd grid;
  Eigen::VectorXd survival;
  /// Patience rate theta used by the simulator when no abandonment ratio is
  /// configured.
  double abandonment_rate = 0.0;

  static ServiceSpec exponential(double mu, double abandonment_rate = 0.0);
  static ServiceSpec tabulated(Eigen::VectorXd grid, Eigen::VectorXd survival,
                               double abandonment_rate = 0.0);

  void validate() const;

  double survival_at(double t) const;
  double mean() const;
  /// Integral of P(S > u) over [a, b]; exact for exponential service,
  /// trapezoid with the given step otherwise.
  double integral(double a, double b, double step) const;
  double sample(Rng& rng) const;
};

enum class MomentMethod { closed_form, truncated_series };

std::string_view to_string(MomentMethod m);

/// m_inf[n], v_inf[n]: infinite-server occupancy mean and variance at the
/// epoch n * delta (end of slot n - 1, where slot n begins), in periodic
/// steady state.
struct MomentCurve {
  Eigen::VectorXd m_inf;
  Eigen::VectorXd v_inf;
  MomentMethod method = MomentMethod::closed_form;

  Eigen::Index n_slots() const { return m_inf.size(); }
};

/// Closed form for exponential service. Folds the periodic tail of the
/// backward slot sums into geometric factors, valid for every alpha in (0, 1].
MomentCurve moments_exponential(const DailyPattern& pattern, const BusynessParams& params, double mu);

/// Backward slot sums truncated once a conservative tail bound drops below
/// rel_tol relative to the partial sums. Throws ConvergenceError after 10^6 terms.
MomentCurve moments_numeric(const DailyPattern& pattern, const BusynessParams& params,
                            const ServiceSpec& service, double rel_tol = 1e-12);

/// Dispatches to the closed form for exponential service.
MomentCurve compute_moments(const DailyPattern& pattern, const BusynessParams& params,
                            const ServiceSpec& service);

/// lambda * E[S].
double stationary_offered_load(double lambda_const, const ServiceSpec& service);

}  // namespace coxstaff
