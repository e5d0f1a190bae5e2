#include "mmfuse/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mmfuse/error.hpp"
#include "mmfuse/special_functions.hpp"

namespace mmfuse {

FriedmanResult friedman_iman_davenport(const RankMatrix& ranks, double alpha) {
  const auto N = static_cast<double>(ranks.rows());
  const auto M = static_cast<double>(ranks.cols());
  if (ranks.rows() < 2 || ranks.cols() < 3) {
    throw DataError("Friedman test needs N >= 2 rows and M >= 3 columns");
  }
  FriedmanResult r;
  r.alpha = alpha;
  r.mean_ranks = ranks.mean_ranks();
  double sum_sq = 0.0;
  for (double rj : r.mean_ranks) {
    sum_sq += rj * rj;
  }
  r.chi_square = 12.0 * N / (M * (M + 1.0)) * (sum_sq - M * (M + 1.0) * (M + 1.0) / 4.0);
  // the bracket is a difference of nearly equal terms for tied inputs
  if (std::abs(r.chi_square) < 1e-12) {
    r.chi_square = 0.0;
  }
  const double denom = N * (M - 1.0) - r.chi_square;
  if (std::abs(denom) < 1e-12) {
    std::ostringstream msg;
    msg << "Iman-Davenport statistic undefined: N(M-1) = chi^2_F = " << r.chi_square
        << " (every setting ranks the flows identically without ties)";
    throw DataError(msg.str());
  }
  r.statistic = (N - 1.0) * r.chi_square / denom;
  r.df1 = M - 1.0;
  r.df2 = (M - 1.0) * (N - 1.0);
  r.p_value = std::clamp(1.0 - f_cdf(r.statistic, r.df1, r.df2), 0.0, 1.0);
  r.significant = r.p_value < alpha;
  return r;
}

double bonferroni_dunn_z(double best_mean_rank, double other_mean_rank, std::size_t flows,
                         std::size_t settings) {
  const auto M = static_cast<double>(flows);
  const auto N = static_cast<double>(settings);
  return (best_mean_rank - other_mean_rank) / std::sqrt(M * (M + 1.0) / (6.0 * N));
}

std::vector<PostHocResult> bonferroni_dunn(const RankMatrix& ranks, std::size_t best_index,
                                           double alpha) {
  if (best_index >= ranks.cols()) {
    throw DataError("best flow index out of range");
  }
  if (ranks.cols() < 2 || ranks.rows() < 1) {
    throw DataError("Bonferroni-Dunn needs at least two flows");
  }
  const auto mean = ranks.mean_ranks();
  const double per_comparison = alpha / static_cast<double>(ranks.cols() - 1);
  std::vector<PostHocResult> out;
  for (std::size_t j = 0; j < ranks.cols(); ++j) {
    if (j == best_index) {
      continue;
    }
    PostHocResult r;
    r.column = j;
    r.alpha = alpha;
    r.z = bonferroni_dunn_z(mean[best_index], mean[j], ranks.cols(), ranks.rows());
    r.statistic = std::abs(r.z);
    r.p_value = std::clamp(2.0 * (1.0 - normal_cdf(r.statistic)), 0.0, 1.0);
    r.significant = r.p_value < per_comparison;
    out.push_back(r);
  }
  return out;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const std::pair<double, double>> pairs, double alpha,
                                    Alternative alternative) {
  const auto n = pairs.size();
  if (n < 5) {
    throw DataError("Wilcoxon normal approximation needs at least 5 pairs (got " +
                    std::to_string(n) + "); exact tables are not provided");
  }
  std::vector<double> d(n);
  std::vector<double> mag(n);
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = pairs[i].first - pairs[i].second;
    mag[i] = std::abs(d[i]);
  }
  // ascending shared ranks of |d|: smallest gets 1
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return mag[a] < mag[b]; });
  std::vector<double> rank(n);
  for (std::size_t k = 0; k < n;) {
    std::size_t end = k + 1;
    while (end < n && mag[order[end]] == mag[order[k]]) {
      ++end;
    }
    const double shared = (static_cast<double>(k + 1) + static_cast<double>(end)) / 2.0;
    for (std::size_t t = k; t < end; ++t) {
      rank[order[t]] = shared;
    }
    k = end;
  }
  WilcoxonResult r;
  r.alpha = alpha;
  for (std::size_t i = 0; i < n; ++i) {
    if (d[i] > 0.0) {
      r.r_plus += rank[i];
    } else if (d[i] < 0.0) {
      r.r_minus += rank[i];
    } else {
      r.r_plus += rank[i] / 2.0;
      r.r_minus += rank[i] / 2.0;
    }
  }
  const auto N = static_cast<double>(n);
  const double mu = N * (N + 1.0) / 4.0;
  const double sigma = std::sqrt(N * (N + 1.0) * (2.0 * N + 1.0) / 24.0);
  r.t = std::min(r.r_plus, r.r_minus);
  r.statistic = (r.t - mu) / sigma;
  switch (alternative) {
    case Alternative::TwoSided:
      r.p_value = std::min(1.0, 2.0 * normal_cdf(r.statistic));
      break;
    case Alternative::Greater:
      r.p_value = normal_cdf((r.r_minus - mu) / sigma);
      break;
    case Alternative::Less:
      r.p_value = normal_cdf((r.r_plus - mu) / sigma);
      break;
  }
  r.p_value = std::clamp(r.p_value, 0.0, 1.0);
  r.significant = r.p_value < alpha;
  return r;
}

SignTestResult sign_test(int wins, int ties, int losses) {
  if (wins < 0 || ties < 0 || losses < 0 || wins + ties + losses < 1) {
    throw DataError("sign test needs non-negative counts with N >= 1");
  }
  SignTestResult r;
  r.wins = wins;
  r.ties = ties;
  r.losses = losses;
  r.alpha = 0.05;
  const double half = static_cast<double>(wins + ties + losses) / 2.0;
  r.threshold = half + 1.96 * std::sqrt(half);
  r.statistic = wins;
  r.p_value = std::clamp(1.0 - normal_cdf((wins - half) / std::sqrt(half)), 0.0, 1.0);
  r.significant = static_cast<double>(wins) > r.threshold;
  return r;
}

WinTieLoss count_win_tie_loss(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DataError("win/tie/loss inputs differ in length");
  }
  WinTieLoss w;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) {
      ++w.wins;
    } else if (a[i] < b[i]) {
      ++w.losses;
    } else {
      ++w.ties;
    }
  }
  return w;
}

}  // namespace mmfuse
