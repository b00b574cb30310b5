#include "coxstaff/infinite_server.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace coxstaff {

ServiceSpec ServiceSpec::exponential(double mu, double abandonment_rate) {
  ServiceSpec s;
  s.kind = ServiceKind::exponential;
  s.mu = mu;
  s.abandonment_rate = abandonment_rate;
  s.validate();
  return s;
}

ServiceSpec ServiceSpec::tabulated(Eigen::VectorXd grid, Eigen::VectorXd survival,
                                   double abandonment_rate) {
  ServiceSpec s;
  s.kind = ServiceKind::tabulated;
  s.grid = std::move(grid);
  s.survival = std::move(survival);
  s.abandonment_rate = abandonment_rate;
  s.validate();
  s.mu = 1.0 / s.mean();
  return s;
}

void ServiceSpec::validate() const {
  if (!(abandonment_rate >= 0.0) || !std::isfinite(abandonment_rate))
    throw DomainError("abandonment rate must be finite and nonnegative");
  if (kind == ServiceKind::exponential) {
    if (!(mu > 0.0) || !std::isfinite(mu)) throw DomainError("service rate mu must be positive");
    return;
  }
  if (grid.size() < 2 || grid.size() != survival.size())
    throw DomainError("tabulated survival needs at least two (t, P(S>t)) points");
  if (grid[0] != 0.0 || survival[0] != 1.0)
    throw DomainError("tabulated survival must start at t = 0 with P(S>0) = 1");
  for (Eigen::Index i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw DomainError("survival grid must be strictly increasing");
    if (!(survival[i] <= survival[i - 1]) || survival[i] < 0.0)
      throw DomainError("survival values must be nonincreasing and nonnegative");
  }
  if (survival[survival.size() - 1] > 1e-6)
    throw DomainError("tabulated survival must decay to at most 1e-6 at the last grid point");
}

double ServiceSpec::survival_at(double t) const {
  if (t <= 0.0) return 1.0;
  if (kind == ServiceKind::exponential) return std::exp(-mu * t);
  const Eigen::Index last = grid.size() - 1;
  if (t >= grid[last]) return 0.0;
  const auto* begin = grid.data();
  const auto* it = std::upper_bound(begin, begin + grid.size(), t);
  const Eigen::Index i = (it - begin) - 1;
  const double w = (t - grid[i]) / (grid[i + 1] - grid[i]);
  return survival[i] + w * (survival[i + 1] - survival[i]);
}

double ServiceSpec::mean() const {
  if (kind == ServiceKind::exponential) return 1.0 / mu;
  double total = 0.0;
  for (Eigen::Index i = 1; i < grid.size(); ++i)
    total += 0.5 * (survival[i] + survival[i - 1]) * (grid[i] - grid[i - 1]);
  return total;
}

double ServiceSpec::integral(double a, double b, double step) const {
  if (b <= a) return 0.0;
  if (kind == ServiceKind::exponential) {
    // e^{-mu a} (1 - e^{-mu (b - a)}) / mu
    return std::exp(-mu * a) * -std::expm1(-mu * (b - a)) / mu;
  }
  const double end = grid[grid.size() - 1];
  if (a >= end) return 0.0;
  const auto steps = std::max<long>(1, std::lround(std::ceil((b - a) / step - 1e-9)));
  const double h = (b - a) / static_cast<double>(steps);
  double total = 0.5 * (survival_at(a) + survival_at(b));
  for (long i = 1; i < steps; ++i) total += survival_at(a + h * static_cast<double>(i));
  return total * h;
}

double ServiceSpec::sample(Rng& rng) const {
  if (kind == ServiceKind::exponential) return std::exponential_distribution<double>(mu)(rng);
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const Eigen::Index last = grid.size() - 1;
  if (u <= survival[last]) return grid[last];
  // first knot with survival < u; survival is nonincreasing
  Eigen::Index hi = 1;
  while (survival[hi] >= u) ++hi;
  const Eigen::Index lo = hi - 1;
  const double w = (survival[lo] - u) / (survival[lo] - survival[hi]);
  return grid[lo] + w * (grid[hi] - grid[lo]);
}

std::string_view to_string(MomentMethod m) {
  return m == MomentMethod::closed_form ? "closed_form" : "truncated_series";
}

namespace {

void validate_model(const DailyPattern& pattern, const BusynessParams& params) {
  pattern.validate();
  params.validate();
  check_lag_fits(pattern, params);
}

// Integral of P(S > u) over [t, infinity).
double tail_integral(const ServiceSpec& service, double t) {
  if (service.kind == ServiceKind::exponential) return std::exp(-service.mu * std::max(t, 0.0)) / service.mu;
  const auto& g = service.grid;
  const auto& s = service.survival;
  double total = 0.0;
  for (Eigen::Index i = 1; i < g.size(); ++i) {
    if (g[i] <= t) continue;
    const double a = std::max(t, g[i - 1]);
    total += 0.5 * (service.survival_at(a) + s[i]) * (g[i] - a);
  }
  return total;
}

}  // namespace

MomentCurve moments_exponential(const DailyPattern& pattern, const BusynessParams& params, double mu) {
  validate_model(pattern, params);
  if (!(mu > 0.0) || !std::isfinite(mu)) throw DomainError("service rate mu must be positive");

  const Eigen::Index n_slots = pattern.n_slots();
  const long n = static_cast<long>(n_slots);
  const int lag = params.lag;
  const double md = mu * pattern.delta;
  const double q = std::exp(-md);
  // occupancy contribution of one unit of rate on the slot ending i slots back
  // is g1 * q^(i-1)
  const double g1 = -std::expm1(-md) / mu;
  const double cycle = -std::expm1(-md * static_cast<double>(n));
  const double cycle2 = -std::expm1(-2.0 * md * static_cast<double>(n));
  const double c = normalizing_constant(params.alpha, lag);

  std::vector<double> q_pow(static_cast<std::size_t>(2 * n + 1));
  q_pow[0] = 1.0;
  for (std::size_t i = 1; i < q_pow.size(); ++i) q_pow[i] = q_pow[i - 1] * q;
  std::vector<double> alpha_pow(static_cast<std::size_t>(lag + 1));
  alpha_pow[0] = 1.0;
  for (int l = 1; l <= lag; ++l) alpha_pow[l] = alpha_pow[l - 1] * params.alpha;

  MomentCurve curve;
  curve.method = MomentMethod::closed_form;
  curve.m_inf.resize(n_slots);
  curve.v_inf.resize(n_slots);
  for (long slot = 0; slot < n; ++slot) {
    const long now = slot;

    double mean = 0.0;
    for (long j = 1; j <= n; ++j) mean += pattern.rate(now - j) * q_pow[j - 1];
    mean *= g1 / cycle;

    double first_cycle = 0.0;
    double later_cycles = 0.0;
    for (long j = 1; j <= n; ++j) {
      // coefficient of W_{now-j}: sum over the slots it inflates
      double partial = 0.0;
      double full = 0.0;
      for (int l = 0; l <= lag; ++l) {
        const double rate = pattern.rate(now - j + l);
        if (l <= j - 1) partial += alpha_pow[l] * rate * q_pow[j - l - 1];
        full += alpha_pow[l] * rate * q_pow[j + n - l - 1];
      }
      first_cycle += partial * partial;
      later_cycles += full * full;
    }
    const double extra = params.var_w * c * c * g1 * g1 * (first_cycle + later_cycles / cycle2);

    curve.m_inf[slot] = mean;
    curve.v_inf[slot] = mean + extra;
  }
  return curve;
}

MomentCurve moments_numeric(const DailyPattern& pattern, const BusynessParams& params,
                            const ServiceSpec& service, double rel_tol) {
  validate_model(pattern, params);
  service.validate();
  if (!(rel_tol > 0.0)) throw DomainError("rel_tol must be positive");

  constexpr long kMaxTerms = 1'000'000;
  const long n = static_cast<long>(pattern.n_slots());
  const int lag = params.lag;
  const double delta = pattern.delta;
  const double step = delta / 100.0;
  const double c = normalizing_constant(params.alpha, lag);
  const double rate_max = pattern.rates.maxCoeff();

  std::vector<double> alpha_pow(static_cast<std::size_t>(lag + 1));
  alpha_pow[0] = 1.0;
  for (int l = 1; l <= lag; ++l) alpha_pow[l] = alpha_pow[l - 1] * params.alpha;

  // slot_integral[i] = integral of P(S > u) over [(i-1) delta, i delta], i >= 1
  std::vector<double> slot_integral{0.0};
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd spread = Eigen::VectorXd::Zero(n);

  for (long j = 1;; ++j) {
    if (j > kMaxTerms)
      throw ConvergenceError("infinite-server series did not reach rel_tol within 10^6 slot terms");
    slot_integral.push_back(service.integral(static_cast<double>(j - 1) * delta,
                                             static_cast<double>(j) * delta, step));
    for (long slot = 0; slot < n; ++slot) {
      const long now = slot;
      mean[slot] += pattern.rate(now - j) * slot_integral[j];
      double coef = 0.0;
      const long top = std::min<long>(lag, j - 1);
      for (long l = 0; l <= top; ++l)
        coef += alpha_pow[l] * pattern.rate(now - j + l) * c * slot_integral[j - l];
      spread[slot] += coef * coef;
    }

    const double mean_tail = rate_max * tail_integral(service, static_cast<double>(j) * delta);
    const double coef_tail = rate_max * c * (lag + 1) *
                             tail_integral(service, static_cast<double>(std::max<long>(j - lag, 0)) * delta);
    const double spread_tail = params.var_w * coef_tail * coef_tail;
    const double mean_floor = mean.minCoeff();
    const double var_floor = (mean + params.var_w * spread).minCoeff();
    const bool mean_done = mean_tail == 0.0 || mean_tail <= rel_tol * mean_floor;
    const bool spread_done = spread_tail == 0.0 || spread_tail <= rel_tol * var_floor;
    if (mean_done && spread_done) break;
  }

  MomentCurve curve;
  curve.method = MomentMethod::truncated_series;
  curve.m_inf = mean;
  curve.v_inf = mean + params.var_w * spread;
  return curve;
}

MomentCurve compute_moments(const DailyPattern& pattern, const BusynessParams& params,
                            const ServiceSpec& service) {
  service.validate();
  if (service.kind == ServiceKind::exponential) return moments_exponential(pattern, params, service.mu);
  return moments_numeric(pattern, params, service);
}

double stationary_offered_load(double lambda_const, const ServiceSpec& service) {
  if (!(lambda_const >= 0.0)) throw DomainError("arrival rate must be nonnegative");
  service.validate();
  return lambda_const * service.mean();
}

}  // namespace coxstaff
