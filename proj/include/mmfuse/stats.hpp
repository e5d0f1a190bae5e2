#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "mmfuse/ranking.hpp"

namespace mmfuse {

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  bool significant = false;
  double alpha = 0.05;
};

struct FriedmanResult : TestResult {
  double chi_square = 0.0;  // Friedman chi^2_F; `statistic` holds F_F
  double df1 = 0.0;         // M - 1
  double df2 = 0.0;         // (M - 1)(N - 1)
  std::vector<double> mean_ranks;
};

// Friedman test with the Iman-Davenport F correction over an N x M rank
// matrix (N >= 2 settings, M >= 3 flows). Significant when p < alpha.
FriedmanResult friedman_iman_davenport(const RankMatrix& ranks, double alpha);

struct PostHocResult : TestResult {
  std::size_t column = 0;
  double z = 0.0;  // signed; `statistic` holds |z|
};

double bonferroni_dunn_z(double best_mean_rank, double other_mean_rank, std::size_t flows,
                         std::size_t settings);

// Two-sided normal p-value per non-best column, compared against alpha/(M-1).
std::vector<PostHocResult> bonferroni_dunn(const RankMatrix& ranks, std::size_t best_index,
                                           double alpha);

enum class Alternative {
  TwoSided,
  Greater,  // first member of each pair tends to be larger
  Less,
};

struct WilcoxonResult : TestResult {
  double r_plus = 0.0;
  double r_minus = 0.0;
  double t = 0.0;  // min(R+, R-); `statistic` holds the z of T
};

// Signed-rank test with the normal approximation. Zero differences are ranked
// and their ranks split evenly between R+ and R-. Needs N >= 5 pairs.
WilcoxonResult wilcoxon_signed_rank(std::span<const std::pair<double, double>> pairs, double alpha,
                                    Alternative alternative = Alternative::Greater);

struct SignTestResult : TestResult {
  int wins = 0;
  int ties = 0;
  int losses = 0;
  double threshold = 0.0;  // N/2 + 1.96 sqrt(N/2)
};

// Win/tie/loss counting test at the 0.05 level: significant iff
// wins > N/2 + 1.96 * sqrt(N/2), where N counts ties too. The p-value is the
// matching one-sided normal tail of (wins - N/2) / sqrt(N/2).
SignTestResult sign_test(int wins, int ties, int losses);

struct WinTieLoss {
  int wins = 0;
  int ties = 0;
  int losses = 0;
};

WinTieLoss count_win_tie_loss(std::span<const double> a, std::span<const double> b);

}  // namespace mmfuse
