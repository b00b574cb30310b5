#include "coxstaff/experiments.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace coxstaff {

DailyPattern sine_pattern(double system_size, double nonstationarity) {
  if (!(system_size > 0.0)) throw DomainError("system size must be positive");
  if (!(nonstationarity >= 0.0 && nonstationarity <= 1.0))
    throw DomainError("nonstationarity p must lie in [0, 1]");
  DailyPattern pattern;
  pattern.delta = 1.0;
  pattern.rates.resize(24);
  for (int j = 0; j < 24; ++j)
    pattern.rates[j] =
        system_size * (1.0 + nonstationarity * std::sin(2.0 * std::numbers::pi * (j + 13.5) / 24.0));
  return pattern;
}

ExperimentConfig ExperimentConfig::base_case() { return ExperimentConfig{}; }

std::vector<ModelVariant> model_variants(const BusynessParams& busyness) {
  BusynessParams standard = busyness;
  standard.var_w = 0.0;
  standard.w_dist = WDistribution::deterministic;
  BusynessParams uncorrelated = busyness;
  uncorrelated.lag = 0;
  return {{"standard", standard}, {"correlated", busyness}, {"uncorrelated", uncorrelated}};
}

namespace {

std::string tag(double x) {
  std::string s = format_double(x);
  for (char& c : s)
    if (c == '.') c = 'p';
  return s;
}

}  // namespace

json run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                    const ExperimentOptions& options, const std::string& label) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  const DailyPattern pattern = sine_pattern(config.system_size, config.nonstationarity);
  const ServiceSpec service = ServiceSpec::exponential(config.mu);
  json cells = json::array();
  std::ostringstream table;
  table << "label,variant,rule,epsilon,abandonment_ratio,beta,gamma,total_servers,max_delay,mean_delay,"
           "std_delay,overall_delay,mean_sqrt_v_inf\n";

  for (const auto& variant : model_variants(config.busyness)) {
    const MomentCurve curve = moments_exponential(pattern, variant.params, config.mu);
    const double mean_sd = curve.v_inf.array().sqrt().mean();
    for (double eps : config.epsilons) {
      const double beta = beta_for_epsilon(eps);
      for (StaffingRule rule : config.rules) {
        const auto& ratios = rule == StaffingRule::slope ? config.slope_abandonment_ratios
                                                         : config.abandonment_ratios;
        for (double a : ratios) {
          SimulationConfig sim;
          sim.n_replications = options.replications;
          sim.seed = options.seed;
          sim.abandonment_ratio = a;
          sim.threads = options.threads;

          StaffingSchedule schedule;
          if (rule == StaffingRule::slope) {
            SimulationConfig tuning = sim;
            tuning.n_replications = options.tuning_replications;
            const auto grid = default_gamma_grid();
            const double gamma =
                tune_gamma(curve, beta, make_delay_evaluator(pattern, variant.params, service, tuning), grid);
            schedule = staff_slope_adapted(curve, beta, gamma);
          } else {
            schedule = make_schedule(curve, rule, beta);
          }
          schedule.epsilon = eps;

          const SimulationResult result = simulate(pattern, variant.params, service, schedule, sim);
          const DelaySummary summary = summarize_delay(result.delay_prob, eps);
          const std::string stem = label + "_" + variant.name + "_" + std::string(to_string(rule)) + "_eps" +
                                   tag(eps) + "_a" + tag(a);
          std::ostringstream csv;
          write_simulation_csv(csv, result);
          write_text_file(out_dir / (stem + ".csv"), csv.str());

          json cell = {{"label", label},
                       {"variant", variant.name},
                       {"rule", std::string(to_string(rule))},
                       {"epsilon", eps},
                       {"abandonment_ratio", a},
                       {"beta", beta},
                       {"gamma", schedule.gamma ? json(*schedule.gamma) : json(nullptr)},
                       {"levels", schedule.levels},
                       {"total_servers", schedule.total()},
                       {"summary", delay_summary_json(summary)},
                       {"overall_delay", result.overall_delay_prob},
                       {"mean_sqrt_v_inf", mean_sd},
                       {"file", stem + ".csv"}};
          cells.push_back(cell);
          table << label << ',' << variant.name << ',' << to_string(rule) << ',' << format_double(eps) << ','
                << format_double(a) << ',' << format_double(beta) << ','
                << (schedule.gamma ? format_double(*schedule.gamma) : "") << ',' << schedule.total() << ','
                << format_double(summary.max_delay) << ',' << format_double(summary.mean_delay) << ','
                << format_double(summary.std_delay) << ',' << format_double(result.overall_delay_prob) << ','
                << format_double(mean_sd) << '\n';
          if (options.progress) options.progress(stem);
        }
      }
    }
  }
  json summary = {{"label", label},
                  {"system_size", config.system_size},
                  {"nonstationarity", config.nonstationarity},
                  {"mu", config.mu},
                  {"alpha", config.busyness.alpha},
                  {"lag", config.busyness.lag},
                  {"var_w", config.busyness.var_w},
                  {"replications", options.replications},
                  {"seed", options.seed},
                  {"cells", cells}};
  write_text_file(out_dir / (label + "_summary.csv"), table.str());
  return summary;
}

json run_base_case_experiment(const std::filesystem::path& out_dir, const ExperimentOptions& options) {
  ExperimentConfig stationary = ExperimentConfig::base_case();
  stationary.nonstationarity = 0.0;
  stationary.rules = {StaffingRule::base};

  ExperimentConfig nonstationary = ExperimentConfig::base_case();
  nonstationary.rules = {StaffingRule::base, StaffingRule::slope};

  json summary;
  summary["stationary"] = run_experiment(stationary, out_dir, options, "stationary");
  summary["nonstationary"] = run_experiment(nonstationary, out_dir, options, "nonstationary");
  write_text_file(out_dir / "summary.json", summary.dump(2) + "\n");
  return summary;
}

}  // namespace coxstaff
