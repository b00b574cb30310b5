#include "coxstaff/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace coxstaff {

void ArrivalCounts::validate() const {
  if (!(delta > 0.0)) throw DomainError("slot width delta must be positive");
  if (counts.rows() < 2) throw DomainError("need ≥ 2 days of counts to estimate a covariance");
  if (counts.cols() < 1) throw DomainError("counts need at least one slot column");
  for (Eigen::Index i = 0; i < counts.rows(); ++i)
    for (Eigen::Index j = 0; j < counts.cols(); ++j) {
      const double v = counts(i, j);
      if (!(v >= 0.0) || v != std::floor(v))
        throw DomainError("counts must be nonnegative integers (row " + std::to_string(i) + ", slot " +
                          std::to_string(j) + ")");
    }
}

EmpiricalMoments empirical_moments(const ArrivalCounts& counts) {
  counts.validate();
  const auto days = static_cast<double>(counts.counts.rows());
  const Eigen::RowVectorXd mean = counts.counts.colwise().mean();
  const Eigen::MatrixXd centered = counts.counts.rowwise() - mean;
  EmpiricalMoments m;
  m.delta = counts.delta;
  m.rates = mean.transpose() / counts.delta;
  m.covariance = (centered.transpose() * centered) / (days - 1.0);
  return m;
}

double poisson_baseline_mse(const EmpiricalMoments& moments) {
  const Eigen::Index n = moments.rates.size();
  Eigen::MatrixXd diff = moments.covariance;
  diff.diagonal() -= moments.slot_means();
  return diff.squaredNorm() / static_cast<double>(n * n);
}

namespace {

// Sufficient statistics of the band objective for one lag. With
// b_e = m_j m_{j+k} C_k(alpha) the band SSE is
//   sum r^2 - 2 v sum_k C_k P_k + v^2 sum_k C_k^2 Q_k.
struct BandStats {
  int lag = 0;
  Eigen::VectorXd cross;   // P_k
  Eigen::VectorXd weight;  // Q_k
  double residual_sq = 0.0;
  double off_band_sq = 0.0;
  double band_entries = 0.0;
  double all_entries = 0.0;
};

BandStats band_stats(const EmpiricalMoments& moments, int lag) {
  const Eigen::Index n = moments.rates.size();
  const Eigen::VectorXd m = moments.slot_means();
  const Eigen::MatrixXd& emp = moments.covariance;
  BandStats s;
  s.lag = lag;
  s.cross = Eigen::VectorXd::Zero(lag + 1);
  s.weight = Eigen::VectorXd::Zero(lag + 1);
  double band_sq = 0.0;
  for (int k = 0; k <= lag; ++k) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const Eigen::Index jk = (j + k) % n;
      const double b = m[j] * m[jk];
      if (k == 0) {
        const double r = emp(j, j) - m[j];
        s.cross[0] += b * r;
        s.weight[0] += b * b;
        s.residual_sq += r * r;
        band_sq += emp(j, j) * emp(j, j);
      } else {
        for (double e : {emp(j, jk), emp(jk, j)}) {
          s.cross[k] += b * e;
          s.weight[k] += b * b;
          s.residual_sq += e * e;
          band_sq += e * e;
        }
      }
    }
  }
  s.off_band_sq = std::max(0.0, emp.squaredNorm() - band_sq);
  s.band_entries = static_cast<double>(n * (2 * lag + 1));
  s.all_entries = static_cast<double>(n * n);
  return s;
}

struct InnerFit {
  double var_w = 0.0;
  double sse = 0.0;
};

InnerFit solve_var_w(const BandStats& s, double alpha) {
  double num = 0.0;
  double den = 0.0;
  for (int k = 0; k <= s.lag; ++k) {
    const double ck = detail::lag_coefficient_unchecked(alpha, s.lag, k);
    num += ck * s.cross[k];
    den += ck * ck * s.weight[k];
  }
  InnerFit fit;
  fit.var_w = den > 0.0 ? std::max(0.0, num / den) : 0.0;
  fit.sse = std::max(0.0, s.residual_sq - 2.0 * fit.var_w * num + fit.var_w * fit.var_w * den);
  return fit;
}

}  // namespace

FitResult fit_given_lag(const EmpiricalMoments& moments, int lag) {
  const Eigen::Index n = moments.rates.size();
  if (n < 1 || moments.covariance.rows() != n || moments.covariance.cols() != n)
    throw DomainError("empirical covariance must be N x N with N = number of rates");
  if (lag < 0) throw DomainError("lag must be nonnegative");
  if (lag > max_admissible_lag(n)) {
    throw ConstraintError("lag " + std::to_string(lag) + " exceeds floor((N-1)/2) = " +
                          std::to_string(max_admissible_lag(n)) + " for N = " + std::to_string(n) +
                          " slots; the covariance band would overlap itself");
  }

  const BandStats stats = band_stats(moments, lag);
  double best_alpha = 0.0;
  InnerFit best = solve_var_w(stats, 0.0);

  if (lag > 0) {
    constexpr int kGrid = 1000;
    int best_index = 0;
    for (int i = 1; i <= kGrid; ++i) {
      const double alpha = static_cast<double>(i) / kGrid;
      const InnerFit f = solve_var_w(stats, alpha);
      if (f.sse < best.sse) {
        best = f;
        best_alpha = alpha;
        best_index = i;
      }
    }

    // golden-section refinement on the neighbouring grid cells
    double a = static_cast<double>(std::max(best_index - 1, 0)) / kGrid;
    double b = static_cast<double>(std::min(best_index + 1, kGrid)) / kGrid;
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = solve_var_w(stats, x1).sse;
    double f2 = solve_var_w(stats, x2).sse;
    while (b - a > 1e-10) {
      if (f1 <= f2) {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - inv_phi * (b - a);
        f1 = solve_var_w(stats, x1).sse;
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + inv_phi * (b - a);
        f2 = solve_var_w(stats, x2).sse;
      }
    }
    const double refined = 0.5 * (a + b);
    const InnerFit f = solve_var_w(stats, refined);
    if (f.sse < best.sse) {
      best = f;
      best_alpha = refined;
    }
  }

  FitResult result;
  result.lag = lag;
  if (lag > 0) result.alpha = best_alpha;
  result.var_w = best.var_w;
  result.mse_star = best.sse / stats.band_entries;
  result.mse = (best.sse + stats.off_band_sq) / stats.all_entries;
  const double baseline = poisson_baseline_mse(moments);
  result.gain = baseline > 0.0 ? 1.0 - result.mse / baseline : 0.0;
  return result;
}

std::vector<FitResult> fit_sweep(const EmpiricalMoments& moments, int max_lag) {
  if (max_lag < 0) throw DomainError("max_lag must be nonnegative");
  std::vector<FitResult> rows;
  FitResult baseline;
  baseline.mse = poisson_baseline_mse(moments);
  baseline.gain = 0.0;
  rows.push_back(baseline);
  for (int lag = 0; lag <= max_lag; ++lag) rows.push_back(fit_given_lag(moments, lag));
  return rows;
}

std::vector<FitResult> fit_sweep(const ArrivalCounts& counts, int max_lag) {
  return fit_sweep(empirical_moments(counts), max_lag);
}

int select_lag(std::span<const FitResult> sweep, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw DomainError("threshold must lie in (0, 1)");
  std::vector<const FitResult*> rows;
  for (const auto& r : sweep)
    if (!r.is_poisson_baseline()) rows.push_back(&r);
  std::sort(rows.begin(), rows.end(), [](const FitResult* a, const FitResult* b) { return *a->lag < *b->lag; });

  int selected = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (*rows[i]->lag != *rows[i - 1]->lag + 1) continue;
    const double previous = rows[i - 1]->mse;
    if (previous <= 0.0) continue;
    const double improvement = (previous - rows[i]->mse) / previous;
    if (improvement > threshold) selected = *rows[i]->lag;
  }
  return selected;
}

}  // namespace coxstaff
