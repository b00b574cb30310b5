#include "coxstaff/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <queue>
#include <random>
#include <stdexcept>
#include <thread>
#include <vector>

namespace coxstaff {

void SimulationConfig::validate() const {
  if (n_replications < 1) throw DomainError("n_replications must be at least 1");
  if (warmup_days < 0) throw DomainError("warmup_days must be nonnegative");
  if (horizon_days < 1) throw DomainError("horizon_days must be at least 1");
  if (abandonment_ratio && !(*abandonment_ratio >= 0.0 && std::isfinite(*abandonment_ratio)))
    throw DomainError("abandonment ratio must be finite and nonnegative");
}

namespace {

// Power sums of integer observations; int64 keeps them exact, so merging
// partial sums gives the same totals in any order.
struct PowerSums {
  std::int64_t s1 = 0, s2 = 0, s3 = 0, s4 = 0;

  void add(std::int64_t x) {
    const std::int64_t x2 = x * x;
    s1 += x;
    s2 += x2;
    s3 += x2 * x;
    s4 += x2 * x2;
  }
  void merge(const PowerSums& o) {
    s1 += o.s1;
    s2 += o.s2;
    s3 += o.s3;
    s4 += o.s4;
  }
};

// Sums for the ratio estimator sum(d) / sum(a) over replications.
struct RatioSums {
  std::int64_t a = 0, d = 0, aa = 0, dd = 0, ad = 0;

  void add(std::int64_t arrivals, std::int64_t delayed) {
    a += arrivals;
    d += delayed;
    aa += arrivals * arrivals;
    dd += delayed * delayed;
    ad += arrivals * delayed;
  }
  void merge(const RatioSums& o) {
    a += o.a;
    d += o.d;
    aa += o.aa;
    dd += o.dd;
    ad += o.ad;
  }
};

struct Accumulator {
  std::vector<RatioSums> delay;
  RatioSums overall;
  std::vector<std::int64_t> exceed;
  std::vector<PowerSums> infinite;
  std::vector<PowerSums> system;
  std::int64_t horizon_arrivals = 0;
  std::int64_t horizon_abandoned = 0;
  std::int64_t arrivals = 0, served = 0, abandoned = 0, in_system = 0;

  explicit Accumulator(std::size_t n) : delay(n), exceed(n, 0), infinite(n), system(n) {}

  void merge(const Accumulator& o) {
    for (std::size_t i = 0; i < delay.size(); ++i) {
      delay[i].merge(o.delay[i]);
      exceed[i] += o.exceed[i];
      infinite[i].merge(o.infinite[i]);
      system[i].merge(o.system[i]);
    }
    overall.merge(o.overall);
    horizon_arrivals += o.horizon_arrivals;
    horizon_abandoned += o.horizon_abandoned;
    arrivals += o.arrivals;
    served += o.served;
    abandoned += o.abandoned;
    in_system += o.in_system;
  }
};

enum Status : unsigned char { kWaiting = 0, kStarted = 1, kAbandoned = 2 };

template <typename T>
using MinHeap = std::priority_queue<T, std::vector<T>, std::greater<T>>;

struct Model {
  const DailyPattern& pattern;
  const BusynessParams& params;
  const ServiceSpec& service;
  std::span<const int> levels;
  const SimulationConfig& config;
  double theta;
};

// Scratch buffers reused across the replications of one worker.
class Replicator {
 public:
  explicit Replicator(const Model& model)
      : model_(model), n_(static_cast<std::size_t>(model.pattern.n_slots())),
        rep_arrivals_(n_), rep_delayed_(n_) {}

  void run(long rep, Accumulator& acc) {
    const auto& pattern = model_.pattern;
    const auto& config = model_.config;
    const double delta = pattern.delta;
    const long n = static_cast<long>(n_);
    const long total_slots = n * (config.warmup_days + config.horizon_days);
    const long horizon_start = n * config.warmup_days;

    Rng rng = make_stream(config.seed, static_cast<std::uint64_t>(rep));
    const RatePath path = sample_rate_path(pattern, model_.params, config.warmup_days + config.horizon_days, rng);
    const std::vector<double> times = sample_arrivals(path, pattern, rng);

    const std::size_t count = times.size();
    service_.assign(count, 0.0);
    status_.assign(count, kWaiting);
    queue_.clear();
    std::size_t queue_head = 0;
    long queue_live = 0;
    completions_ = {};
    departures_ = {};
    patience_ = {};
    std::fill(rep_arrivals_.begin(), rep_arrivals_.end(), 0);
    std::fill(rep_delayed_.begin(), rep_delayed_.end(), 0);
    std::exponential_distribution<double> unit_exp(1.0);

    long busy = 0;
    long level = model_.levels[0];
    std::int64_t served = 0, abandoned = 0, horizon_abandoned = 0;
    std::size_t next = 0;
    std::size_t first_horizon_customer = count;

    auto admit = [&](double now) {
      while (busy < level && queue_live > 0) {
        const int id = queue_[queue_head++];
        if (status_[id] != kWaiting) continue;
        status_[id] = kStarted;
        --queue_live;
        ++busy;
        completions_.push(now + service_[id]);
      }
    };

    // occupancy snapshot at epoch n * delta, where slot n begins
    auto observe = [&](std::size_t epoch) {
      const auto occupancy = static_cast<std::int64_t>(departures_.size());
      acc.infinite[epoch].add(occupancy);
      acc.system[epoch].add(busy + queue_live);
      if (occupancy > model_.levels[epoch]) ++acc.exceed[epoch];
    };
    if (horizon_start == 0) observe(0);

    for (long k = 0; k < total_slots; ++k) {
      const double slot_end = static_cast<double>(k + 1) * delta;
      const bool in_horizon = k >= horizon_start;
      const auto slot = static_cast<std::size_t>(k % n);
      if (in_horizon && first_horizon_customer == count) first_horizon_customer = next;

      for (;;) {
        const double t_done = completions_.empty() ? kInf : completions_.top();
        const double t_leave = patience_.empty() ? kInf : patience_.top().first;
        const double t_arrive = next < count ? times[next] : kInf;
        if (std::min({t_done, t_leave, t_arrive}) >= slot_end) break;

        if (t_done <= t_leave && t_done <= t_arrive) {
          completions_.pop();
          --busy;
          ++served;
          admit(t_done);
        } else if (t_leave <= t_arrive) {
          const int id = patience_.top().second;
          patience_.pop();
          if (status_[id] != kWaiting) continue;
          status_[id] = kAbandoned;
          --queue_live;
          ++abandoned;
          if (static_cast<std::size_t>(id) >= first_horizon_customer) ++horizon_abandoned;
        } else {
          const int id = static_cast<int>(next++);
          const double s = model_.service.sample(rng);
          const double patience = unit_exp(rng);
          service_[id] = s;
          departures_.push(t_arrive + s);
          const bool delayed = !(busy < level && queue_live == 0);
          if (!delayed) {
            status_[id] = kStarted;
            ++busy;
            completions_.push(t_arrive + s);
          } else {
            queue_.push_back(id);
            ++queue_live;
            if (model_.theta > 0.0) patience_.emplace(t_arrive + patience / model_.theta, id);
          }
          if (in_horizon) {
            ++rep_arrivals_[slot];
            if (delayed) ++rep_delayed_[slot];
          }
        }
      }

      while (!departures_.empty() && departures_.top() <= slot_end) departures_.pop();
      if (k + 1 >= horizon_start && k + 1 < total_slots) observe(static_cast<std::size_t>((k + 1) % n));
      level = model_.levels[static_cast<std::size_t>((k + 1) % n)];
      admit(slot_end);
    }

    const auto arrived = static_cast<std::int64_t>(next);
    const std::int64_t present = busy + queue_live;
    if (arrived != served + abandoned + present)
      throw std::logic_error("customer accounting broken in replication " + std::to_string(rep));

    std::int64_t rep_a = 0, rep_d = 0;
    for (std::size_t i = 0; i < n_; ++i) {
      acc.delay[i].add(rep_arrivals_[i], rep_delayed_[i]);
      rep_a += rep_arrivals_[i];
      rep_d += rep_delayed_[i];
    }
    acc.overall.add(rep_a, rep_d);
    acc.horizon_arrivals += rep_a;
    acc.horizon_abandoned += horizon_abandoned;
    acc.arrivals += arrived;
    acc.served += served;
    acc.abandoned += abandoned;
    acc.in_system += present;
  }

 private:
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  const Model& model_;
  std::size_t n_;
  std::vector<double> service_;
  std::vector<unsigned char> status_;
  std::vector<int> queue_;
  MinHeap<double> completions_;
  MinHeap<double> departures_;
  MinHeap<std::pair<double, int>> patience_;
  std::vector<std::int64_t> rep_arrivals_;
  std::vector<std::int64_t> rep_delayed_;
};

struct Moments {
  double mean, var, mean_se, var_se;
};

Moments moments_from(const PowerSums& p, double count) {
  const long double n = count;
  const long double m = static_cast<long double>(p.s1) / n;
  const long double s2 = p.s2, s3 = p.s3, s4 = p.s4, s1 = p.s1;
  const long double central2 = s2 / n - m * m;
  const long double central4 = (s4 - 4 * m * s3 + 6 * m * m * s2 - 4 * m * m * m * s1) / n + m * m * m * m;
  const long double var = count > 1 ? central2 * n / (n - 1) : 0.0L;
  Moments out;
  out.mean = static_cast<double>(m);
  out.var = static_cast<double>(std::max(var, 0.0L));
  out.mean_se = std::sqrt(out.var / count);
  out.var_se = static_cast<double>(std::sqrt(std::max(central4 - central2 * central2, 0.0L) / n));
  return out;
}

std::pair<double, double> ratio_from(const RatioSums& r, double reps) {
  if (r.a == 0) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  const long double p = static_cast<long double>(r.d) / r.a;
  if (reps < 2) return {static_cast<double>(p), 0.0};
  const long double abar = static_cast<long double>(r.a) / reps;
  const long double ss = r.dd - 2 * p * r.ad + p * p * r.aa;
  const long double se = std::sqrt(std::max(ss, 0.0L) / (reps * (reps - 1))) / abar;
  return {static_cast<double>(p), static_cast<double>(se)};
}

}  // namespace

SimulationResult simulate(const DailyPattern& pattern, const BusynessParams& params,
                          const ServiceSpec& service, std::span<const int> levels,
                          const SimulationConfig& config) {
  pattern.validate();
  params.validate();
  check_lag_fits(pattern, params);
  service.validate();
  config.validate();
  const auto n = static_cast<std::size_t>(pattern.n_slots());
  if (levels.size() != n)
    throw DomainError("schedule has " + std::to_string(levels.size()) + " levels but the pattern has " +
                      std::to_string(n) + " slots");
  for (int s : levels)
    if (s < 0) throw DomainError("server levels must be nonnegative");

  const double theta = config.abandonment_ratio ? *config.abandonment_ratio / service.mean()
                                                : service.abandonment_rate;
  const Model model{pattern, params, service, levels, config, theta};

  unsigned workers = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<long>(workers, config.n_replications));

  std::vector<Accumulator> partial(workers, Accumulator(n));
  std::atomic<long> next_rep{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&](unsigned w) {
    try {
      Replicator replicator(model);
      for (long rep = next_rep++; rep < config.n_replications; rep = next_rep++) replicator.run(rep, partial[w]);
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next_rep = config.n_replications;
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  Accumulator acc(n);
  for (const auto& p : partial) acc.merge(p);

  const auto reps = static_cast<double>(config.n_replications);
  const double observations = reps * config.horizon_days;
  const auto size = static_cast<Eigen::Index>(n);
  SimulationResult r;
  for (Eigen::VectorXd* v : {&r.delay_prob, &r.delay_prob_se, &r.exceedance_prob, &r.occupancy_mean,
                             &r.occupancy_var, &r.occupancy_mean_se, &r.occupancy_var_se, &r.system_mean,
                             &r.system_var, &r.system_mean_se, &r.system_var_se, &r.arrivals})
    v->resize(size);
  for (std::size_t i = 0; i < n; ++i) {
    const auto slot = static_cast<Eigen::Index>(i);
    const auto [p, se] = ratio_from(acc.delay[i], reps);
    r.delay_prob[slot] = p;
    r.delay_prob_se[slot] = se;
    r.exceedance_prob[slot] = static_cast<double>(acc.exceed[i]) / observations;
    const Moments inf = moments_from(acc.infinite[i], observations);
    r.occupancy_mean[slot] = inf.mean;
    r.occupancy_var[slot] = inf.var;
    r.occupancy_mean_se[slot] = inf.mean_se;
    r.occupancy_var_se[slot] = inf.var_se;
    const Moments sys = moments_from(acc.system[i], observations);
    r.system_mean[slot] = sys.mean;
    r.system_var[slot] = sys.var;
    r.system_mean_se[slot] = sys.mean_se;
    r.system_var_se[slot] = sys.var_se;
    r.arrivals[slot] = static_cast<double>(acc.delay[i].a);
  }
  const auto [p, se] = ratio_from(acc.overall, reps);
  r.overall_delay_prob = p;
  r.overall_delay_prob_se = se;
  r.abandon_frac = acc.horizon_arrivals > 0
                       ? static_cast<double>(acc.horizon_abandoned) / static_cast<double>(acc.horizon_arrivals)
                       : 0.0;
  r.total_arrivals = acc.arrivals;
  r.total_served = acc.served;
  r.total_abandoned = acc.abandoned;
  r.total_in_system = acc.in_system;
  r.seed = config.seed;
  r.n_replications = config.n_replications;
  r.horizon_days = config.horizon_days;
  return r;
}

DelaySummary summarize_delay(const Eigen::VectorXd& delay_prob, double epsilon) {
  DelaySummary s;
  double sum = 0.0;
  long count = 0;
  for (Eigen::Index i = 0; i < delay_prob.size(); ++i) {
    const double d = delay_prob[i];
    if (!std::isfinite(d)) continue;
    s.max_delay = std::max(s.max_delay, d);
    sum += d;
    ++count;
    if (d > epsilon) ++s.slots_violating;
  }
  s.mean_delay = count ? sum / static_cast<double>(count) : 0.0;
  s.std_delay = std::sqrt(delay_dispersion(delay_prob));
  return s;
}

DelaySummary evaluate_schedule(const DailyPattern& pattern, const BusynessParams& params,
                               const ServiceSpec& service, const StaffingSchedule& schedule,
                               const SimulationConfig& config, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw DomainError("epsilon must lie in (0, 1)");
  return summarize_delay(simulate(pattern, params, service, schedule, config).delay_prob, epsilon);
}

DelayEvaluator make_delay_evaluator(const DailyPattern& pattern, const BusynessParams& params,
                                    const ServiceSpec& service, const SimulationConfig& config) {
  return [pattern, params, service, config](const StaffingSchedule& schedule) {
    return simulate(pattern, params, service, schedule, config).delay_prob;
  };
}

}  // namespace coxstaff
