#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "coxstaff/arrival_model.hpp"
#include "oracles.hpp"

using namespace coxstaff;

namespace {

DailyPattern constant_pattern(double rate, int n = 24, double delta = 1.0) {
  DailyPattern p;
  p.delta = delta;
  p.rates = Eigen::VectorXd::Constant(n, rate);
  return p;
}

struct MeanVar {
  double mean = 0.0;
  double var = 0.0;
  long n = 0;
};

template <typename F>
MeanVar moments_of(long n, F&& draw) {
  MeanVar m;
  double s1 = 0.0, s2 = 0.0;
  for (long i = 0; i < n; ++i) {
    const double x = draw(i);
    s1 += x;
    s2 += x * x;
  }
  m.n = n;
  m.mean = s1 / n;
  m.var = (s2 - n * m.mean * m.mean) / (n - 1);
  return m;
}

}  // namespace

TEST_CASE("normalizing constant examples") {
  CHECK(normalizing_constant(0.5, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(normalizing_constant(1.0, 5) == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
  CHECK(normalizing_constant(0.9, 0) == 1.0);
  CHECK_THROWS_AS(normalizing_constant(0.0, 1), DomainError);
  CHECK_THROWS_AS(normalizing_constant(1.1, 1), DomainError);
  CHECK_THROWS_AS(normalizing_constant(0.5, -1), DomainError);
}

TEST_CASE("normalization holds on the alpha and lag grid") {
  for (int a = 1; a <= 100; ++a) {
    const double alpha = a / 100.0;
    for (int lag = 0; lag <= 11; ++lag) {
      double sum = 0.0;
      for (int l = 0; l <= lag; ++l) sum += std::pow(alpha, l);
      CHECK(std::abs(normalizing_constant(alpha, lag) * sum - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("normalizing constant matches the closed ratio away from one") {
  for (double alpha : {0.1, 0.5, 0.9, 0.999})
    for (int lag : {0, 1, 5, 11})
      CHECK(normalizing_constant(alpha, lag) ==
            doctest::Approx((1 - alpha) / (1 - std::pow(alpha, lag + 1))).epsilon(1e-12));
}

TEST_CASE("lag covariance coefficient matches direct index matching") {
  for (double alpha : {0.2, 0.5, 0.87, 1.0})
    for (int lag : {0, 1, 3, 5, 11})
      for (int k = 0; k <= lag + 2; ++k)
        CHECK(lag_covariance_coefficient(alpha, lag, k) ==
              doctest::Approx(oracle::busyness_cov(alpha, lag, k)).epsilon(1e-12));
  CHECK(lag_covariance_coefficient(1.0, 5, 2) == doctest::Approx(4.0 / 36.0).epsilon(1e-14));
  for (int k = 0; k <= 5; ++k)
    CHECK(lag_covariance_coefficient(1.0, 5, k) == doctest::Approx((5.0 - k + 1) / 36.0).epsilon(1e-14));
}

TEST_CASE("variance factor examples") {
  for (double alpha : {0.1, 0.5, 1.0}) CHECK(variance_factor(alpha, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(variance_factor(1.0, 5) == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
  CHECK(variance_factor(1.0 - 1e-8, 5) == doctest::Approx(1.0 / 6.0).epsilon(1e-7));
  CHECK(variance_factor(0.9, 5) < variance_factor(0.5, 5));
  for (double alpha : {0.3, 0.7})
    for (int lag : {1, 4, 9}) {
      const double closed = (1 - alpha) / (1 + alpha) * (1 + std::pow(alpha, lag + 1)) / (1 - std::pow(alpha, lag + 1));
      CHECK(variance_factor(alpha, lag) == doctest::Approx(closed).epsilon(1e-12));
    }
  CHECK_THROWS_AS(variance_factor(0.0, 2), DomainError);
}

TEST_CASE("variance factor templated on scalar") {
  const long double v = variance_factor<long double>(0.5L, 3);
  CHECK(static_cast<double>(v) == doctest::Approx(variance_factor(0.5, 3)).epsilon(1e-15));
  const float f = normalizing_constant<float>(1.0f, 3);
  CHECK(f == doctest::Approx(0.25));
}

TEST_CASE("variance factor monotonicity") {
  for (int lag = 1; lag <= 11; ++lag)
    for (int a = 1; a < 20; ++a)
      CHECK(variance_factor(a * 0.05, lag) > variance_factor((a + 1) * 0.05, lag));
  for (int a = 1; a <= 20; ++a)
    for (int lag = 0; lag < 11; ++lag)
      CHECK(variance_factor(a * 0.05, lag) >= variance_factor(a * 0.05, lag + 1));
}

TEST_CASE("slot count variance examples") {
  CHECK(slot_count_variance(10.0, {1.0, 5, 0.0, WDistribution::deterministic}) == 10.0);
  CHECK(slot_count_variance(10.0, {0.5, 0, 0.25, WDistribution::gamma}) == doctest::Approx(35.0));
  CHECK(slot_count_variance(10.0, {1.0, 5, 0.1, WDistribution::gamma}) == doctest::Approx(10.0 + 10.0 / 6.0));
  double last = slot_count_variance(7.0, {0.8, 3, 0.0, WDistribution::gamma});
  for (int i = 1; i <= 20; ++i) {
    const double v = slot_count_variance(7.0, {0.8, 3, 0.05 * i, WDistribution::gamma});
    CHECK(v > last);
    CHECK(v >= 7.0);
    last = v;
  }
}

TEST_CASE("lag guard") {
  for (int n : {4, 23, 24, 48}) {
    const DailyPattern p = constant_pattern(5.0, n);
    BusynessParams ok{0.5, max_admissible_lag(n), 0.1, WDistribution::gamma};
    CHECK_NOTHROW(check_lag_fits(p, ok));
    BusynessParams bad = ok;
    bad.lag += 1;
    CHECK_THROWS_AS(check_lag_fits(p, bad), ConstraintError);
    CHECK_THROWS_AS(theoretical_covariance(p, bad), ConstraintError);
  }
  CHECK(max_admissible_lag(24) == 11);
}

TEST_CASE("parameter validation") {
  DailyPattern p = constant_pattern(1.0);
  p.rates[3] = -1.0;
  CHECK_THROWS_AS(p.validate(), DomainError);
  p = constant_pattern(1.0);
  p.delta = 0.0;
  CHECK_THROWS_AS(p.validate(), DomainError);
  CHECK_THROWS_AS((BusynessParams{0.5, 1, -0.1, WDistribution::gamma}.validate()), DomainError);
  CHECK_THROWS_AS((BusynessParams{0.5, 1, 0.2, WDistribution::deterministic}.validate()), DomainError);
  CHECK_THROWS_AS(parse_w_distribution("weibull"), DomainError);
  CHECK(parse_w_distribution("lognormal") == WDistribution::lognormal);
}

TEST_CASE("rate path reproduces the busyness construction") {
  DailyPattern p;
  p.delta = 0.5;
  p.rates.resize(6);
  p.rates << 1, 4, 9, 2, 0, 3;
  const BusynessParams params{0.6, 2, 0.3, WDistribution::gamma};
  Rng rng = make_stream(7, 0);
  const RatePath path = sample_rate_path(p, params, 3, rng);
  REQUIRE(path.n_slots() == 18);
  REQUIRE(path.w_values.size() == 18 + 2);
  const auto w = oracle::busyness_weights(0.6, 2);
  for (long j = 0; j < 18; ++j) {
    double b = 0.0;
    for (int l = 0; l <= 2; ++l) b += w[l] * path.w(j - l);
    CHECK(path.lambda_values[j] == doctest::Approx(p.rate(j) * b).epsilon(1e-13));
    CHECK(path.lambda_values[j] >= 0.0);
  }
}

TEST_CASE("deterministic W reproduces the pattern") {
  DailyPattern p;
  p.rates.resize(4);
  p.rates << 3, 1, 4, 1;
  Rng rng = make_stream(1, 1);
  const RatePath path = sample_rate_path(p, {0.4, 1, 0.0, WDistribution::deterministic}, 2, rng);
  for (long j = 0; j < 8; ++j) CHECK(path.lambda_values[j] == doctest::Approx(p.rate(j)).epsilon(1e-15));
  Rng rng2 = make_stream(1, 1);
  const RatePath collapsed = sample_rate_path(p, {0.4, 1, 0.0, WDistribution::gamma}, 2, rng2);
  for (long j = 0; j < 8; ++j) CHECK(collapsed.lambda_values[j] == doctest::Approx(p.rate(j)).epsilon(1e-15));
}

TEST_CASE("rate path mean and variance by Monte Carlo") {
  const DailyPattern p = constant_pattern(10.0);
  SUBCASE("mean preserved, alpha 1, lag 5") {
    Rng rng = make_stream(11, 0);
    const RatePath path = sample_rate_path(p, {1.0, 5, 0.1, WDistribution::gamma}, 1'000'000 / 24, rng);
    const auto m = moments_of(path.n_slots(), [&](long j) { return path.lambda_values[j]; });
    // successive rates share W draws; the standard error uses the exact
    // long-run variance sum over the lag band
    double lr = 0.0;
    for (int k = -5; k <= 5; ++k) lr += 100.0 * 0.1 * lag_covariance_coefficient(1.0, 5, std::abs(k));
    CHECK(std::abs(m.mean - 10.0) < 3.0 * std::sqrt(lr / m.n));
  }
  SUBCASE("variance at lag 0") {
    Rng rng = make_stream(12, 0);
    const RatePath path = sample_rate_path(p, {0.5, 0, 0.25, WDistribution::gamma}, 1'000'000 / 24, rng);
    const auto m = moments_of(path.n_slots(), [&](long j) { return path.lambda_values[j]; });
    CHECK(m.var == doctest::Approx(25.0).epsilon(0.02));
  }
  SUBCASE("lognormal W keeps unit mean and variance") {
    Rng rng = make_stream(13, 0);
    const RatePath path = sample_rate_path(p, {0.5, 0, 0.25, WDistribution::lognormal}, 1'000'000 / 24, rng);
    const auto m = moments_of(path.n_slots(), [&](long j) { return path.lambda_values[j]; });
    CHECK(std::abs(m.mean - 10.0) < 3.0 * std::sqrt(25.0 / m.n));
    CHECK(m.var == doctest::Approx(25.0).epsilon(0.03));
  }
}

TEST_CASE("arrivals: empty, Poisson moments, reproducible") {
  SUBCASE("zero rate") {
    const DailyPattern p = constant_pattern(0.0);
    Rng rng = make_stream(3, 0);
    const RatePath path = sample_rate_path(p, {1.0, 0, 0.0, WDistribution::deterministic}, 5, rng);
    CHECK(sample_arrivals(path, p, rng).empty());
  }
  SUBCASE("poisson counts") {
    const DailyPattern p = constant_pattern(12.0);
    Rng rng = make_stream(4, 0);
    const int days = 100'000 / 24 + 1;
    const RatePath path = sample_rate_path(p, {1.0, 0, 0.0, WDistribution::deterministic}, days, rng);
    const auto times = sample_arrivals(path, p, rng);
    std::vector<double> counts(static_cast<std::size_t>(path.n_slots()), 0.0);
    for (std::size_t i = 0; i < times.size(); ++i) {
      if (i > 0) CHECK_FALSE(times[i] < times[i - 1]);
      counts[static_cast<std::size_t>(std::floor(times[i]))] += 1.0;
    }
    const auto m = moments_of(static_cast<long>(counts.size()), [&](long j) { return counts[j]; });
    CHECK(std::abs(m.mean - 12.0) < 3.0 * std::sqrt(12.0 / m.n));
    // variance of the sample variance for Poisson(12): (mu4 - s^4)/n with mu4 = 3*12^2 + 12
    CHECK(std::abs(m.var - 12.0) < 3.0 * std::sqrt((3 * 144.0 + 12.0 - 144.0) / m.n));
  }
  SUBCASE("same stream, same timestamps") {
    DailyPattern p = constant_pattern(5.0, 24, 0.5);
    const BusynessParams params{0.7, 3, 0.2, WDistribution::gamma};
    Rng a = make_stream(99, 5), b = make_stream(99, 5);
    const auto pa = sample_rate_path(p, params, 2, a);
    const auto pb = sample_rate_path(p, params, 2, b);
    CHECK(sample_arrivals(pa, p, a) == sample_arrivals(pb, p, b));
  }
}

TEST_CASE("theoretical covariance structure") {
  SUBCASE("poisson diagonal") {
    const auto sigma = theoretical_covariance(constant_pattern(10.0), {1.0, 3, 0.0, WDistribution::deterministic});
    CHECK(sigma.isApprox(10.0 * Eigen::MatrixXd::Identity(24, 24)));
  }
  SUBCASE("band count and entries") {
    DailyPattern p;
    p.delta = 0.5;
    p.rates = Eigen::VectorXd::LinSpaced(24, 2.0, 25.0);
    for (int lag : {0, 1, 5, 11}) {
      const BusynessParams params{0.8, lag, 0.3, WDistribution::gamma};
      const auto sigma = theoretical_covariance(p, params);
      CHECK(sigma.isApprox(sigma.transpose()));
      CHECK((sigma.array() != 0.0).count() == 24 * (2 * lag + 1));
      const Eigen::VectorXd m = p.slot_means();
      for (int j = 0; j < 24; ++j)
        for (int k = 0; k <= lag; ++k) {
          const int i = (j + k) % 24;
          const double expect = m[j] * ((k == 0 ? 1.0 : 0.0) + m[i] * oracle::busyness_cov(0.8, lag, k) * 0.3);
          CHECK(sigma(j, i) == doctest::Approx(expect).epsilon(1e-12));
        }
    }
  }
}

TEST_CASE("var_w = 0 gives an inhomogeneous Poisson process") {
  DailyPattern p;
  p.rates.resize(3);
  p.rates << 2.0, 8.0, 5.0;
  Rng rng = make_stream(21, 0);
  const int days = 40'000;
  const RatePath path = sample_rate_path(p, {1.0, 1, 0.0, WDistribution::deterministic}, days, rng);
  const auto times = sample_arrivals(path, p, rng);
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(days, 3);
  for (double t : times) {
    const long slot = static_cast<long>(std::floor(t));
    counts(slot / 3, slot % 3) += 1.0;
  }
  for (int j = 0; j < 3; ++j) {
    const Eigen::VectorXd col = counts.col(j);
    const double mean = col.mean();
    const double var = (col.array() - mean).square().sum() / (days - 1);
    CHECK(std::abs(mean - p.rates[j]) < 3.0 * std::sqrt(p.rates[j] / days));
    CHECK(var == doctest::Approx(mean).epsilon(0.05));
  }
}
