#pragma once

// Square-root staffing schedules driven by infinite-server moment curves.

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "coxstaff/infinite_server.hpp"

namespace coxstaff {

enum class StaffingRule { classical, base, slope };

std::string_view to_string(StaffingRule r);
StaffingRule parse_staffing_rule(std::string_view name);

/// Server count per slot; levels[n] applies on slot n.
struct StaffingSchedule {
  std::vector<int> levels;
  std::optional<double> epsilon;
  double beta = 0.0;
  StaffingRule rule = StaffingRule::base;
  std::optional<double> gamma;

  long total() const;
};

/// beta with 1 - Phi(beta) = epsilon, for epsilon in (0, 0.5].
double beta_for_epsilon(double epsilon);

/// ceil(R + beta * sqrt(R)).
int classical_srs(double offered_load, double beta);

/// levels[n] = max(1, ceil(m + beta * sqrt(m))), ignoring the variance curve.
StaffingSchedule staff_classical(const MomentCurve& moments, double beta);

/// levels[n] = max(1, ceil(m_inf[n] + beta * sqrt(v_inf[n]))).
StaffingSchedule staff_base(const MomentCurve& moments, double beta);

/// Slope-adapted rule. Hedge of slot n is scaled by (v_inf[n+1] / v_inf[n])^gamma
/// (cyclically), all hedges are then rescaled to keep the daily hedge total, and
/// the result is rounded by largest-remainder apportionment to the integer
/// total of staff_base. A constant variance curve reproduces staff_base exactly.
StaffingSchedule staff_slope_adapted(const MomentCurve& moments, double beta, double gamma);

StaffingSchedule make_schedule(const MomentCurve& moments, StaffingRule rule, double beta,
                               double gamma = 1.0);

/// Integer apportionment of `values` (each >= 1) to `target`, keeping every
/// entry >= 1. Floors first, then hands out the remaining units by largest
/// fractional part, lowest index first on ties.
std::vector<int> apportion(std::span<const double> values, long target);

/// Maps a schedule to per-slot delay probabilities (NaN for slots without data).
using DelayEvaluator = std::function<Eigen::VectorXd(const StaffingSchedule&)>;

/// Sample variance of the finite entries.
double delay_dispersion(const Eigen::VectorXd& delay);

/// Grid value of gamma whose slope-adapted schedule gives the smallest sample
/// variance of per-slot delay probabilities; ties go to the smaller gamma.
double tune_gamma(const MomentCurve& moments, double beta, const DelayEvaluator& evaluate,
                  std::span<const double> grid);

/// gamma grid {k / 24 : k = 1..24}.
std::vector<double> default_gamma_grid();

struct BetaTuning {
  double beta = 0.0;
  double max_delay = 0.0;
  int evaluations = 0;
};

/// Bisection for the smallest beta in [beta_for_epsilon(eps), beta_for_epsilon(eps) + 3]
/// (resolution 0.01) whose schedule keeps every per-slot delay probability <= eps.
/// Throws ConvergenceError if the upper end of the bracket still violates eps.
BetaTuning tune_beta(const MomentCurve& moments, StaffingRule rule, double gamma, double epsilon,
                     const DelayEvaluator& evaluate);

}  // namespace coxstaff
