#include "coxstaff/arrival_model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace coxstaff {

void DailyPattern::validate() const {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw DomainError("slot width delta must be positive");
  if (rates.size() < 1) throw DomainError("daily pattern needs at least one slot");
  for (Eigen::Index j = 0; j < rates.size(); ++j) {
    if (!(rates[j] >= 0.0) || !std::isfinite(rates[j]))
      throw DomainError("rate for slot " + std::to_string(j) + " must be finite and nonnegative");
  }
}

std::string_view to_string(WDistribution d) {
  switch (d) {
    case WDistribution::gamma:
      return "gamma";
    case WDistribution::lognormal:
      return "lognormal";
    case WDistribution::deterministic:
      return "deterministic";
  }
  return "gamma";
}

WDistribution parse_w_distribution(std::string_view name) {
  if (name == "gamma") return WDistribution::gamma;
  if (name == "lognormal") return WDistribution::lognormal;
  if (name == "deterministic") return WDistribution::deterministic;
  throw DomainError("unknown w_dist '" + std::string(name) + "' (expected gamma, lognormal or deterministic)");
}

void BusynessParams::validate() const {
  detail::check_alpha_lag(alpha, lag);
  if (!(var_w >= 0.0) || !std::isfinite(var_w)) throw DomainError("var_w must be finite and nonnegative");
  if (w_dist == WDistribution::deterministic && var_w != 0.0)
    throw DomainError("deterministic w_dist requires var_w = 0");
}

void check_lag_fits(const DailyPattern& pattern, const BusynessParams& params) {
  const int max_lag = max_admissible_lag(pattern.n_slots());
  if (params.lag > max_lag) {
    throw ConstraintError("lag " + std::to_string(params.lag) + " exceeds floor((N-1)/2) = " +
                          std::to_string(max_lag) + " for N = " + std::to_string(pattern.n_slots()) +
                          " slots; the lag band would wrap onto itself");
  }
}

double slot_count_variance(double lambda_j, const BusynessParams& params) {
  if (!(lambda_j >= 0.0)) throw DomainError("slot mean must be nonnegative");
  params.validate();
  return lambda_j + lambda_j * lambda_j * variance_factor(params.alpha, params.lag) * params.var_w;
}

namespace {

class WSampler {
 public:
  explicit WSampler(const BusynessParams& params) : kind_(params.w_dist) {
    if (params.var_w == 0.0) kind_ = WDistribution::deterministic;
    if (kind_ == WDistribution::gamma) {
      gamma_ = std::gamma_distribution<double>(1.0 / params.var_w, params.var_w);
    } else if (kind_ == WDistribution::lognormal) {
      const double sigma2 = std::log1p(params.var_w);
      lognormal_ = std::lognormal_distribution<double>(-0.5 * sigma2, std::sqrt(sigma2));
    }
  }

  double operator()(Rng& rng) {
    switch (kind_) {
      case WDistribution::gamma:
        return gamma_(rng);
      case WDistribution::lognormal:
        return lognormal_(rng);
      case WDistribution::deterministic:
        break;
    }
    return 1.0;
  }

 private:
  WDistribution kind_;
  std::gamma_distribution<double> gamma_;
  std::lognormal_distribution<double> lognormal_;
};

}  // namespace

RatePath sample_rate_path(const DailyPattern& pattern, const BusynessParams& params, int n_days,
                          Rng& rng) {
  pattern.validate();
  params.validate();
  if (n_days < 1) throw DomainError("n_days must be at least 1");

  const Eigen::Index n = pattern.n_slots();
  const Eigen::Index slots = n * n_days;
  const int lag = params.lag;

  RatePath path;
  path.lag = lag;
  path.w_values.resize(slots + lag);
  WSampler draw(params);
  for (Eigen::Index i = 0; i < path.w_values.size(); ++i) path.w_values[i] = draw(rng);

  const double c = normalizing_constant(params.alpha, lag);
  path.lambda_values.resize(slots);
  for (Eigen::Index j = 0; j < slots; ++j) {
    double busy = 0.0;
    double weight = 1.0;
    for (int l = 0; l <= lag; ++l) {
      busy += weight * path.w_values[j + lag - l];
      weight *= params.alpha;
    }
    path.lambda_values[j] = pattern.rate(static_cast<long>(j)) * c * busy;
  }
  return path;
}

std::vector<double> sample_arrivals(const RatePath& path, const DailyPattern& pattern, Rng& rng) {
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(path.lambda_values.sum() * pattern.delta * 1.1) + 16);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Eigen::Index j = 0; j < path.n_slots(); ++j) {
    const double mean = path.lambda_values[j] * pattern.delta;
    if (mean <= 0.0) continue;
    std::poisson_distribution<long> count_dist(mean);
    const long count = count_dist(rng);
    const double start = static_cast<double>(j) * pattern.delta;
    const auto first = times.size();
    for (long i = 0; i < count; ++i) times.push_back(start + unit(rng) * pattern.delta);
    std::sort(times.begin() + static_cast<std::ptrdiff_t>(first), times.end());
  }
  return times;
}

Eigen::MatrixXd theoretical_covariance(const DailyPattern& pattern, const BusynessParams& params) {
  pattern.validate();
  params.validate();
  check_lag_fits(pattern, params);

  const Eigen::Index n = pattern.n_slots();
  const Eigen::VectorXd m = pattern.slot_means();
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k <= params.lag; ++k) {
    const double ck = detail::lag_coefficient_unchecked(params.alpha, params.lag, k);
    for (Eigen::Index j = 0; j < n; ++j) {
      const Eigen::Index jk = (j + k) % n;
      const double value = m[j] * ((k == 0 ? 1.0 : 0.0) + m[jk] * ck * params.var_w);
      sigma(j, jk) = value;
      sigma(jk, j) = value;
    }
  }
  return sigma;
}

}  // namespace coxstaff
