#pragma once

#include <span>
#include <string>
#include <vector>

namespace mmfuse {

// Ranks one row of scores: the highest score gets rank M, the lowest 1, and
// equal scores share the mean of the ranks they span.
std::vector<double> rank_best_high(std::span<const double> scores);

// Rows are settings (rule combinations), columns are the compared flows.
class RankMatrix {
public:
  RankMatrix() = default;
  RankMatrix(std::size_t rows, std::size_t cols, std::vector<double> ranks);

  // Ranks every row of a rectangular score table with rank_best_high.
  static RankMatrix from_scores(const std::vector<std::vector<double>>& table);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t i, std::size_t j) const { return ranks_[i * cols_ + j]; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(ranks_).subspan(i * cols_, cols_);
  }

  // R_j = (1/N) sum_i r_i^j
  std::vector<double> mean_ranks() const;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> ranks_;
};

struct FlowRanking {
  RankMatrix ranks;
  std::vector<double> normalized;  // sum of a flow's ranks / (rows * M)
};

FlowRanking rank_flows(const std::vector<std::vector<double>>& auc_table);

struct ModalityContribution {
  std::vector<double> accumulated;  // per modality
  std::vector<double> maximum;      // best accumulation the modality could reach
  std::vector<double> normalized;   // accumulated / maximum
};

// Ranks the multimodal flows of every row; each modality accumulates the rank
// of every flow that contains it. `flow_members[f]` lists the modality indices
// of flow f.
ModalityContribution rank_unimodal_contribution(
    const std::vector<std::vector<double>>& multimodal_auc_table,
    const std::vector<std::vector<std::size_t>>& flow_members, std::size_t modality_count);

}  // namespace mmfuse
