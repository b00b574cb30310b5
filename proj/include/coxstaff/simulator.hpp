#pragma once

// Discrete-event simulation of the finite-server FCFS queue under a periodic
// staffing schedule, with exponential patience and a coupled infinite-server
// tracker that reuses every customer's service draw.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>

#include "coxstaff/arrival_model.hpp"
#include "coxstaff/infinite_server.hpp"
#include "coxstaff/staffing.hpp"

namespace coxstaff {

struct SimulationConfig {
  long n_replications = 10'000;
  int warmup_days = 3;
  int horizon_days = 1;
  std::uint64_t seed = 20180101;
  /// theta = ratio / E[S] (theta = a * mu for exponential service). When
  /// unset, ServiceSpec::abandonment_rate is used.
  std::optional<double> abandonment_ratio;
  /// 0 picks std::thread::hardware_concurrency().
  unsigned threads = 0;

  void validate() const;
};

/// Per-slot statistics over all replications and horizon days. Occupancy and
/// exceedance for slot n are snapshots at epoch n * delta, where slot n
/// begins, matching the indexing of MomentCurve.
struct SimulationResult {
  /// Fraction of arrivals in slot n that could not start service on arrival;
  /// NaN when no arrival fell in slot n.
  Eigen::VectorXd delay_prob;
  /// Ratio-estimator standard error across replications.
  Eigen::VectorXd delay_prob_se;
  /// Fraction of observations with infinite-server occupancy above levels[n].
  Eigen::VectorXd exceedance_prob;
  Eigen::VectorXd occupancy_mean;
  Eigen::VectorXd occupancy_var;
  Eigen::VectorXd occupancy_mean_se;
  Eigen::VectorXd occupancy_var_se;
  /// Same moments for the number in the finite system (served + waiting).
  Eigen::VectorXd system_mean;
  Eigen::VectorXd system_var;
  Eigen::VectorXd system_mean_se;
  Eigen::VectorXd system_var_se;
  Eigen::VectorXd arrivals;

  double overall_delay_prob = 0.0;
  double overall_delay_prob_se = 0.0;
  /// Abandoned fraction of horizon arrivals.
  double abandon_frac = 0.0;

  /// Whole-run accounting (warmup included), summed over replications.
  std::int64_t total_arrivals = 0;
  std::int64_t total_served = 0;
  std::int64_t total_abandoned = 0;
  std::int64_t total_in_system = 0;

  std::uint64_t seed = 0;
  long n_replications = 0;
  int horizon_days = 0;
};

SimulationResult simulate(const DailyPattern& pattern, const BusynessParams& params,
                          const ServiceSpec& service, std::span<const int> levels,
                          const SimulationConfig& config);

inline SimulationResult simulate(const DailyPattern& pattern, const BusynessParams& params,
                                 const ServiceSpec& service, const StaffingSchedule& schedule,
                                 const SimulationConfig& config) {
  return simulate(pattern, params, service, std::span<const int>(schedule.levels), config);
}

struct DelaySummary {
  double max_delay = 0.0;
  double mean_delay = 0.0;
  double std_delay = 0.0;
  int slots_violating = 0;
};

/// Max, mean and sample standard deviation of the per-slot delay
/// probabilities, and the number of slots above epsilon.
DelaySummary summarize_delay(const Eigen::VectorXd& delay_prob, double epsilon);

DelaySummary evaluate_schedule(const DailyPattern& pattern, const BusynessParams& params,
                               const ServiceSpec& service, const StaffingSchedule& schedule,
                               const SimulationConfig& config, double epsilon);

/// DelayEvaluator that runs `simulate` with a fixed configuration.
DelayEvaluator make_delay_evaluator(const DailyPattern& pattern, const BusynessParams& params,
                                    const ServiceSpec& service, const SimulationConfig& config);

}  // namespace coxstaff
