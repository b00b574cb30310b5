#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "coxstaff/coxstaff.hpp"

namespace fs = std::filesystem;
using namespace coxstaff;

namespace {

enum Exit { kOk = 0, kFailure = 1, kValidation = 2, kNumerical = 3, kIo = 4 };

struct Options {
  std::string model;
  std::string counts;
  std::string schedule;
  std::string service;
  std::string out;
  double mu = 0.5;
  double delta = 1.0;
  double epsilon = 0.05;
  std::string rule = "base";
  std::optional<double> gamma;
  std::optional<double> beta;
  double abandonment_ratio = 0.0;
  long reps = 10'000;
  long tuning_reps = 2'000;
  std::uint64_t seed = 20180101;
  int warmup_days = 3;
  int horizon_days = 1;
  unsigned threads = 0;
  int max_lag = -1;
  double threshold = 0.02;
  std::string method = "auto";
  bool tune_beta = false;
};

// Name of the module currently running, used to tag error messages.
std::string stage = "cli";

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return in;
}

void require(const std::string& value, const std::string& flag) {
  if (value.empty()) throw DomainError(flag + " is required");
}

fs::path with_extension(const fs::path& path, const std::string& ext) {
  fs::path p = path;
  p.replace_extension(ext);
  return p;
}

void ensure_parent(const fs::path& path) {
  if (!path.has_parent_path()) return;
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
}

void write_output(const fs::path& path, const std::string& content) {
  ensure_parent(path);
  write_text_file(path, content);
}

ModelSpec load_model(const Options& o) {
  stage = "arrival-model";
  require(o.model, "--model");
  return read_model(o.model);
}

ServiceSpec load_service(const Options& o) {
  stage = "infinite-server";
  if (o.service.empty()) return ServiceSpec::exponential(o.mu);
  auto in = open_input(o.service);
  return read_survival_csv(in);
}

MomentCurve moments_for(const ModelSpec& model, const ServiceSpec& service, const std::string& method) {
  stage = "infinite-server";
  if (method == "closed") {
    if (service.kind != ServiceKind::exponential)
      throw DomainError("--method closed needs exponential service");
    return moments_exponential(model.pattern, model.params, service.mu);
  }
  if (method == "numeric") return moments_numeric(model.pattern, model.params, service);
  return compute_moments(model.pattern, model.params, service);
}

double resolve_beta(const Options& o) {
  stage = "staffing";
  return o.beta ? *o.beta : beta_for_epsilon(o.epsilon);
}

StaffingSchedule build_schedule(const Options& o, const MomentCurve& curve) {
  stage = "staffing";
  const StaffingRule rule = parse_staffing_rule(o.rule);
  if (o.gamma && !(*o.gamma > 0.0 && *o.gamma <= 1.0))
    throw DomainError("--gamma must lie in (0, 1]");
  StaffingSchedule s = make_schedule(curve, rule, resolve_beta(o), o.gamma.value_or(1.0));
  s.epsilon = o.epsilon;
  return s;
}

SimulationConfig sim_config(const Options& o, long reps) {
  SimulationConfig c;
  c.n_replications = reps;
  c.warmup_days = o.warmup_days;
  c.horizon_days = o.horizon_days;
  c.seed = o.seed;
  c.abandonment_ratio = o.abandonment_ratio;
  c.threads = o.threads;
  c.validate();
  return c;
}

void save_schedule(const fs::path& csv_path, const StaffingSchedule& s) {
  std::ostringstream csv;
  write_schedule_csv(csv, s);
  write_output(csv_path, csv.str());
  write_output(with_extension(csv_path, ".json"), schedule_metadata(s).dump(2) + "\n");
}

StaffingSchedule load_schedule(const Options& o) {
  stage = "staffing";
  require(o.schedule, "--schedule");
  auto in = open_input(o.schedule);
  return read_schedule_csv(in);
}

void save_simulation(const fs::path& json_path, const SimulationResult& r) {
  write_output(json_path, simulation_to_json(r).dump(2) + "\n");
  std::ostringstream csv;
  write_simulation_csv(csv, r);
  write_output(with_extension(json_path, ".csv"), csv.str());
}

void print_summary(const DelaySummary& s, double epsilon) {
  std::printf("max delay %.4f  mean %.4f  std %.4f  slots above %.3g: %d\n", s.max_delay, s.mean_delay,
              s.std_delay, epsilon, s.slots_violating);
}

int cmd_fit(const Options& o) {
  stage = "estimation";
  require(o.counts, "--counts");
  auto in = open_input(o.counts);
  const ArrivalCounts counts = read_counts_csv(in, o.delta);
  const int n = static_cast<int>(counts.counts.cols());
  const int max_lag = o.max_lag >= 0 ? o.max_lag : std::min(11, max_admissible_lag(n));
  const auto sweep = fit_sweep(counts, max_lag);
  const int chosen = select_lag(sweep, o.threshold);

  std::printf("%5s %8s %10s %12s %12s %8s\n", "I", "alpha", "Var W", "MSE*", "MSE", "gain");
  for (const auto& r : sweep) {
    const std::string lag = r.lag ? std::to_string(*r.lag) : "-";
    const std::string mark = r.lag && *r.lag == chosen ? " *" : "";
    std::printf("%5s %8s %10.4f %12s %12.6g %7.1f%%%s\n", lag.c_str(),
                r.alpha ? format_double(std::round(*r.alpha * 1e4) / 1e4).c_str() : "-", r.var_w,
                r.mse_star ? std::to_string(*r.mse_star).c_str() : "-", r.mse, 100.0 * r.gain, mark.c_str());
  }
  std::printf("selected lag %d\n", chosen);

  if (!o.out.empty()) {
    const fs::path out(o.out);
    write_output(out, fit_results_json(sweep).dump(2) + "\n");
    const json selection = {{"selected_lag", chosen}, {"threshold", o.threshold}, {"max_lag", max_lag}};
    write_output(with_extension(out, ".selection.json"), selection.dump(2) + "\n");
  }
  return kOk;
}

int cmd_moments(const Options& o) {
  const ModelSpec model = load_model(o);
  const ServiceSpec service = load_service(o);
  const MomentCurve curve = moments_for(model, service, o.method);
  std::ostringstream csv;
  write_moments_csv(csv, curve);
  if (o.out.empty())
    std::cout << csv.str();
  else
    write_output(o.out, csv.str());
  return kOk;
}

int cmd_staff(const Options& o) {
  const ModelSpec model = load_model(o);
  const ServiceSpec service = load_service(o);
  const MomentCurve curve = moments_for(model, service, o.method);
  const StaffingSchedule s = build_schedule(o, curve);
  if (o.out.empty()) {
    std::ostringstream csv;
    write_schedule_csv(csv, s);
    std::cout << csv.str();
  } else {
    save_schedule(o.out, s);
  }
  std::fprintf(stderr, "total servers %ld (beta %.6f)\n", s.total(), s.beta);
  return kOk;
}

int cmd_simulate(const Options& o, bool evaluate) {
  const ModelSpec model = load_model(o);
  const ServiceSpec service = load_service(o);
  const StaffingSchedule s = load_schedule(o);
  stage = "des-simulator";
  const SimulationResult r = simulate(model.pattern, model.params, service, s, sim_config(o, o.reps));
  const DelaySummary summary = summarize_delay(r.delay_prob, o.epsilon);
  if (!o.out.empty()) {
    save_simulation(o.out, r);
    if (evaluate) {
      json doc = delay_summary_json(summary);
      doc["epsilon"] = o.epsilon;
      doc["overall_delay_prob"] = r.overall_delay_prob;
      doc["abandon_frac"] = r.abandon_frac;
      write_output(with_extension(o.out, ".summary.json"), doc.dump(2) + "\n");
    }
  }
  print_summary(summary, o.epsilon);
  return kOk;
}

int cmd_tune(const Options& o) {
  const ModelSpec model = load_model(o);
  const ServiceSpec service = load_service(o);
  const MomentCurve curve = moments_for(model, service, o.method);
  stage = "staffing";
  const StaffingRule rule = parse_staffing_rule(o.rule);
  const DelayEvaluator evaluator =
      make_delay_evaluator(model.pattern, model.params, service, sim_config(o, o.tuning_reps));

  double beta = resolve_beta(o);
  double gamma = o.gamma.value_or(1.0);
  if (rule == StaffingRule::slope && !o.gamma) {
    const auto grid = default_gamma_grid();
    gamma = tune_gamma(curve, beta, evaluator, grid);
  }
  std::optional<BetaTuning> tuned;
  if (o.tune_beta) {
    tuned = tune_beta(curve, rule, gamma, o.epsilon, evaluator);
    beta = tuned->beta;
  }
  StaffingSchedule s = make_schedule(curve, rule, beta, gamma);
  s.epsilon = o.epsilon;
  if (!o.out.empty()) save_schedule(o.out, s);
  std::printf("rule %s  beta %.4f", std::string(to_string(rule)).c_str(), s.beta);
  if (s.gamma) std::printf("  gamma %.6f", *s.gamma);
  std::printf("  total %ld\n", s.total());
  if (tuned) std::printf("max delay %.4f after %d evaluations\n", tuned->max_delay, tuned->evaluations);
  return kOk;
}

int cmd_experiment(const Options& o) {
  stage = "experiments";
  require(o.out, "--out");
  ExperimentOptions opts;
  opts.replications = o.reps;
  opts.tuning_replications = o.tuning_reps;
  opts.seed = o.seed;
  opts.threads = o.threads;
  opts.progress = [](const std::string& cell) { std::fprintf(stderr, "done %s\n", cell.c_str()); };
  run_base_case_experiment(o.out, opts);
  return kOk;
}

int cmd_pipeline(const Options& o) {
  require(o.out, "--out");
  const fs::path dir(o.out);
  const ModelSpec model = load_model(o);
  const ServiceSpec service = load_service(o);
  const MomentCurve curve = moments_for(model, service, o.method);
  std::ostringstream moments_csv;
  write_moments_csv(moments_csv, curve);
  write_output(dir / "moments.csv", moments_csv.str());

  const StaffingSchedule s = build_schedule(o, curve);
  save_schedule(dir / "schedule.csv", s);

  stage = "des-simulator";
  const SimulationResult r = simulate(model.pattern, model.params, service, s, sim_config(o, o.reps));
  save_simulation(dir / "simulation.json", r);
  const DelaySummary summary = summarize_delay(r.delay_prob, o.epsilon);
  json doc = delay_summary_json(summary);
  doc["epsilon"] = o.epsilon;
  doc["overall_delay_prob"] = r.overall_delay_prob;
  doc["abandon_frac"] = r.abandon_frac;
  doc["total_servers"] = s.total();
  write_output(dir / "evaluation.json", doc.dump(2) + "\n");
  print_summary(summary, o.epsilon);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Staffing under overdispersed, correlated arrivals"};
  app.require_subcommand(1);
  Options o;

  auto add_model = [&](CLI::App* c) {
    c->add_option("--model", o.model, "model JSON {delta, rates, alpha, lag, var_w, w_dist}");
    c->add_option("--mu", o.mu, "exponential service rate")->capture_default_str();
    c->add_option("--service", o.service, "tabulated service survival CSV (t,survival)");
    c->add_option("--method", o.method, "moment method")
        ->check(CLI::IsMember({"auto", "closed", "numeric"}))
        ->capture_default_str();
  };
  auto add_staffing = [&](CLI::App* c) {
    c->add_option("--epsilon", o.epsilon, "target delay / exceedance probability")->capture_default_str();
    c->add_option("--rule", o.rule, "classical, base or slope")->capture_default_str();
    c->add_option("--gamma", o.gamma, "slope exponent in (0, 1]");
    c->add_option("--beta", o.beta, "override the safety factor");
  };
  auto add_sim = [&](CLI::App* c) {
    c->add_option("--abandonment-ratio", o.abandonment_ratio, "theta * E[S]")->capture_default_str();
    c->add_option("--reps", o.reps, "replications")->capture_default_str();
    c->add_option("--seed", o.seed, "base seed")->capture_default_str();
    c->add_option("--warmup-days", o.warmup_days, "discarded cycles")->capture_default_str();
    c->add_option("--horizon-days", o.horizon_days, "recorded cycles per replication")->capture_default_str();
    c->add_option("--threads", o.threads, "worker threads (0 = all cores)")->capture_default_str();
  };

  auto* fit = app.add_subcommand("fit", "fit (alpha, Var W) over a sweep of lags");
  fit->add_option("--counts", o.counts, "counts CSV (slot_0,...,slot_{N-1})");
  fit->add_option("--delta", o.delta, "slot width")->capture_default_str();
  fit->add_option("--max-lag", o.max_lag, "largest lag in the sweep");
  fit->add_option("--threshold", o.threshold, "relative MSE gain needed per extra lag")->capture_default_str();
  fit->add_option("--out", o.out, "fit sweep JSON");

  auto* moments = app.add_subcommand("moments", "infinite-server mean and variance per slot");
  add_model(moments);
  moments->add_option("--out", o.out, "moments CSV (stdout when omitted)");

  auto* staff = app.add_subcommand("staff", "staffing schedule from the moment curves");
  add_model(staff);
  add_staffing(staff);
  staff->add_option("--out", o.out, "schedule CSV; metadata goes to the .json sidecar");

  auto* sim = app.add_subcommand("simulate", "simulate a schedule");
  add_model(sim);
  add_sim(sim);
  sim->add_option("--schedule", o.schedule, "schedule CSV");
  sim->add_option("--epsilon", o.epsilon, "target used in the printed summary")->capture_default_str();
  sim->add_option("--out", o.out, "result JSON; per-slot CSV goes next to it");

  auto* eval = app.add_subcommand("evaluate", "simulate a schedule and summarise its delays");
  add_model(eval);
  add_sim(eval);
  eval->add_option("--schedule", o.schedule, "schedule CSV");
  eval->add_option("--epsilon", o.epsilon, "delay target")->capture_default_str();
  eval->add_option("--out", o.out, "result JSON; summary goes to the .summary.json sidecar");

  auto* tune = app.add_subcommand("tune", "tune gamma (slope rule) and optionally beta by simulation");
  add_model(tune);
  add_staffing(tune);
  add_sim(tune);
  tune->add_option("--tuning-reps", o.tuning_reps, "replications per evaluation")->capture_default_str();
  tune->add_flag("--tune-beta", o.tune_beta, "bisect beta until every slot meets epsilon");
  tune->add_option("--out", o.out, "schedule CSV");

  auto* exp = app.add_subcommand("experiment", "base-case experiment grid");
  exp->add_option("--out", o.out, "output directory");
  exp->add_option("--reps", o.reps, "replications per cell")->capture_default_str();
  exp->add_option("--tuning-reps", o.tuning_reps, "replications per gamma evaluation")->capture_default_str();
  exp->add_option("--seed", o.seed, "base seed")->capture_default_str();
  exp->add_option("--threads", o.threads, "worker threads (0 = all cores)")->capture_default_str();

  auto* pipe = app.add_subcommand("pipeline", "moments, staffing, simulation and evaluation in one run");
  add_model(pipe);
  add_staffing(pipe);
  add_sim(pipe);
  pipe->add_option("--out", o.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*fit) return cmd_fit(o);
    if (*moments) return cmd_moments(o);
    if (*staff) return cmd_staff(o);
    if (*sim) return cmd_simulate(o, false);
    if (*eval) return cmd_simulate(o, true);
    if (*tune) return cmd_tune(o);
    if (*exp) return cmd_experiment(o);
    if (*pipe) return cmd_pipeline(o);
  } catch (const DomainError& e) {
    std::fprintf(stderr, "error [%s]: %s\n", stage.c_str(), e.what());
    return kValidation;
  } catch (const ConvergenceError& e) {
    std::fprintf(stderr, "error [%s]: %s\n", stage.c_str(), e.what());
    return kNumerical;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error [%s]: %s\n", stage.c_str(), e.what());
    return kIo;
  } catch (const std::logic_error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", stage.c_str(), e.what());
    return kNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error [%s]: %s\n", stage.c_str(), e.what());
    return kFailure;
  }
  return kFailure;
}
