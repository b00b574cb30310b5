#pragma once

// Stylised experiments: a sinusoidal daily pattern, three model variants
// (no overdispersion, full model, correlation ignored) and a grid over
// service levels, abandonment ratios and staffing rules.

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "coxstaff/io.hpp"

namespace coxstaff {

/// lambda_j = size * (1 + p * sin(2 pi (j + 13.5) / 24)), j = 0..23, delta = 1:
/// trough around 4:30, peak around 16:30.
DailyPattern sine_pattern(double system_size, double nonstationarity);

struct ExperimentConfig {
  double system_size = 17.5;
  double nonstationarity = 0.8;
  double mu = 0.5;
  BusynessParams busyness{1.0, 5, 0.1, WDistribution::gamma};
  std::vector<double> epsilons{0.1, 0.05, 0.01};
  std::vector<double> abandonment_ratios{0.0, 0.5, 1.0};
  std::vector<StaffingRule> rules{StaffingRule::base};
  /// Abandonment ratios at which the slope rule is tuned and run.
  std::vector<double> slope_abandonment_ratios{0.0};

  static ExperimentConfig base_case();
};

struct ModelVariant {
  std::string name;
  BusynessParams params;
};

/// "standard" (Var W = 0), "correlated" (as configured), "uncorrelated" (lag 0).
std::vector<ModelVariant> model_variants(const BusynessParams& busyness);

struct ExperimentOptions {
  long replications = 10'000;
  long tuning_replications = 2'000;
  std::uint64_t seed = 20180101;
  unsigned threads = 0;
  std::function<void(const std::string&)> progress;
};

/// Runs every cell of the grid, writes one simulation CSV per cell into
/// out_dir and returns the consolidated summary (also written as summary.json
/// and summary.csv).
json run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                    const ExperimentOptions& options, const std::string& label);

/// Stationary grid (p = 0) and the nonstationary p = 0.8 grid with the
/// slope-adapted rule, both from the base-case parameters.
json run_base_case_experiment(const std::filesystem::path& out_dir, const ExperimentOptions& options);

}  // namespace coxstaff
