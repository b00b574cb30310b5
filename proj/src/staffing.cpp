#include "coxstaff/staffing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace coxstaff {

std::string_view to_string(StaffingRule r) {
  switch (r) {
    case StaffingRule::classical:
      return "classical";
    case StaffingRule::base:
      return "base";
    case StaffingRule::slope:
      return "slope";
  }
  return "base";
}

StaffingRule parse_staffing_rule(std::string_view name) {
  if (name == "classical") return StaffingRule::classical;
  if (name == "base") return StaffingRule::base;
  if (name == "slope") return StaffingRule::slope;
  throw DomainError("unknown staffing rule '" + std::string(name) + "' (expected classical, base or slope)");
}

long StaffingSchedule::total() const { return std::accumulate(levels.begin(), levels.end(), 0L); }

namespace {

// Acklam's rational approximation of the standard normal quantile.
double normal_quantile_rational(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double low = 0.02425;
  if (p < low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - low) return -normal_quantile_rational(1.0 - p);
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

// Standard normal quantile; one Halley step on the rational seed brings the
// error down to rounding level.
double normal_quantile(double p) {
  const double x = normal_quantile_rational(p);
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

void check_curve(const MomentCurve& moments) {
  if (moments.m_inf.size() < 1 || moments.m_inf.size() != moments.v_inf.size())
    throw DomainError("moment curve must have matching, nonempty m_inf and v_inf");
  for (Eigen::Index n = 0; n < moments.m_inf.size(); ++n) {
    if (!(moments.m_inf[n] >= 0.0) || !(moments.v_inf[n] >= 0.0) || !std::isfinite(moments.v_inf[n]))
      throw DomainError("moment curve entries must be finite and nonnegative");
  }
}

int ceil_level(double raw) { return std::max(1, static_cast<int>(std::ceil(raw))); }

}  // namespace

double beta_for_epsilon(double epsilon) {
  if (!(epsilon > 0.0 && epsilon <= 0.5))
    throw DomainError("epsilon must lie in (0, 0.5], got " + std::to_string(epsilon));
  if (epsilon == 0.5) return 0.0;
  return -normal_quantile(epsilon);
}

int classical_srs(double offered_load, double beta) {
  if (!(offered_load >= 0.0)) throw DomainError("offered load must be nonnegative");
  return static_cast<int>(std::ceil(offered_load + beta * std::sqrt(offered_load)));
}

StaffingSchedule staff_classical(const MomentCurve& moments, double beta) {
  check_curve(moments);
  StaffingSchedule s;
  s.rule = StaffingRule::classical;
  s.beta = beta;
  for (Eigen::Index n = 0; n < moments.n_slots(); ++n)
    s.levels.push_back(std::max(1, classical_srs(moments.m_inf[n], beta)));
  return s;
}

StaffingSchedule staff_base(const MomentCurve& moments, double beta) {
  check_curve(moments);
  StaffingSchedule s;
  s.rule = StaffingRule::base;
  s.beta = beta;
  for (Eigen::Index n = 0; n < moments.n_slots(); ++n)
    s.levels.push_back(ceil_level(moments.m_inf[n] + beta * std::sqrt(moments.v_inf[n])));
  return s;
}

std::vector<int> apportion(std::span<const double> values, long target) {
  const auto n = values.size();
  if (target < static_cast<long>(n))
    throw DomainError("apportionment target " + std::to_string(target) + " leaves a slot without servers");
  std::vector<int> out(n);
  std::vector<double> remainder(n);
  long assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = std::max(1.0, values[i]);
    out[i] = static_cast<int>(std::floor(v));
    remainder[i] = v - std::floor(v);
    assigned += out[i];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  long missing = target - assigned;
  while (missing > 0) {
    for (std::size_t k = 0; k < n && missing > 0; ++k, --missing) ++out[order[k]];
  }
  // Surplus: take back from the smallest remainders, never below one server.
  while (missing < 0) {
    bool moved = false;
    for (std::size_t k = n; k-- > 0 && missing < 0;) {
      if (out[order[k]] > 1) {
        --out[order[k]];
        ++missing;
        moved = true;
      }
    }
    if (!moved) break;
  }
  return out;
}

StaffingSchedule staff_slope_adapted(const MomentCurve& moments, double beta, double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw DomainError("slope exponent gamma must lie in (0, 1], got " + std::to_string(gamma));
  check_curve(moments);
  const Eigen::Index n = moments.n_slots();
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(moments.v_inf[i] > 0.0)) throw DomainError("slope rule needs a strictly positive variance curve");

  const StaffingSchedule base = staff_base(moments, beta);
  const Eigen::ArrayXd sd = moments.v_inf.array().sqrt();
  Eigen::ArrayXd weight(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double ratio = moments.v_inf[(i + 1) % n] / moments.v_inf[i];
    weight[i] = std::pow(ratio, gamma) * sd[i];
  }
  // rho keeps the total hedge equal to the base rule's
  const double rho = sd.sum() / weight.sum();
  std::vector<double> raw(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) raw[i] = moments.m_inf[i] + rho * beta * weight[i];

  StaffingSchedule s;
  s.rule = StaffingRule::slope;
  s.beta = beta;
  s.gamma = gamma;
  s.levels = apportion(raw, base.total());
  return s;
}

StaffingSchedule make_schedule(const MomentCurve& moments, StaffingRule rule, double beta, double gamma) {
  switch (rule) {
    case StaffingRule::classical:
      return staff_classical(moments, beta);
    case StaffingRule::base:
      return staff_base(moments, beta);
    case StaffingRule::slope:
      return staff_slope_adapted(moments, beta, gamma);
  }
  return staff_base(moments, beta);
}

double delay_dispersion(const Eigen::VectorXd& delay) {
  double sum = 0.0;
  double sum2 = 0.0;
  long count = 0;
  for (Eigen::Index i = 0; i < delay.size(); ++i) {
    if (!std::isfinite(delay[i])) continue;
    sum += delay[i];
    ++count;
  }
  if (count < 2) return 0.0;
  const double mean = sum / static_cast<double>(count);
  for (Eigen::Index i = 0; i < delay.size(); ++i)
    if (std::isfinite(delay[i])) sum2 += (delay[i] - mean) * (delay[i] - mean);
  return sum2 / static_cast<double>(count - 1);
}

std::vector<double> default_gamma_grid() {
  std::vector<double> grid;
  for (int k = 1; k <= 24; ++k) grid.push_back(k / 24.0);
  return grid;
}

double tune_gamma(const MomentCurve& moments, double beta, const DelayEvaluator& evaluate,
                  std::span<const double> grid) {
  if (grid.empty()) throw DomainError("gamma grid must be nonempty");
  std::vector<double> sorted(grid.begin(), grid.end());
  std::sort(sorted.begin(), sorted.end());
  for (double g : sorted)
    if (!(g > 0.0 && g <= 1.0)) throw DomainError("gamma grid values must lie in (0, 1]");

  double best_gamma = sorted.front();
  double best_score = std::numeric_limits<double>::infinity();
  for (double g : sorted) {
    const double score = delay_dispersion(evaluate(staff_slope_adapted(moments, beta, g)));
    if (score < best_score) {
      best_score = score;
      best_gamma = g;
    }
  }
  return best_gamma;
}

BetaTuning tune_beta(const MomentCurve& moments, StaffingRule rule, double gamma, double epsilon,
                     const DelayEvaluator& evaluate) {
  const double start = beta_for_epsilon(epsilon);
  BetaTuning result;
  auto max_delay = [&](double beta) {
    ++result.evaluations;
    StaffingSchedule s = make_schedule(moments, rule, beta, gamma);
    s.epsilon = epsilon;
    const Eigen::VectorXd d = evaluate(s);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < d.size(); ++i)
      if (std::isfinite(d[i])) worst = std::max(worst, d[i]);
    return worst;
  };

  double lo = start;
  double worst_lo = max_delay(lo);
  if (worst_lo <= epsilon) return {lo, worst_lo, result.evaluations};

  double hi = start + 3.0;
  double worst_hi = max_delay(hi);
  if (worst_hi > epsilon)
    throw ConvergenceError("beta bracket [" + std::to_string(lo) + ", " + std::to_string(hi) +
                           "] cannot bring the maximum delay probability below epsilon");
  while (hi - lo > 0.01) {
    const double mid = 0.5 * (lo + hi);
    const double worst = max_delay(mid);
    if (worst <= epsilon) {
      hi = mid;
      worst_hi = worst;
    } else {
      lo = mid;
    }
  }
  result.beta = hi;
  result.max_delay = worst_hi;
  return result;
}

}  // namespace coxstaff
