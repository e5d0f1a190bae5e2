#include "mmfuse/ranking.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "mmfuse/error.hpp"

namespace mmfuse {

std::vector<double> rank_best_high(std::span<const double> scores) {
  const auto m = scores.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<double> ranks(m);
  std::size_t k = 0;
  while (k < m) {
    std::size_t end = k + 1;
    while (end < m && scores[order[end]] == scores[order[k]]) {
      ++end;
    }
    // positions k..end-1 hold ranks k+1..end
    const double shared = (static_cast<double>(k + 1) + static_cast<double>(end)) / 2.0;
    for (std::size_t t = k; t < end; ++t) {
      ranks[order[t]] = shared;
    }
    k = end;
  }
  return ranks;
}

RankMatrix::RankMatrix(std::size_t rows, std::size_t cols, std::vector<double> ranks)
    : rows_(rows), cols_(cols), ranks_(std::move(ranks)) {
  if (ranks_.size() != rows_ * cols_) {
    throw DataError("rank matrix shape mismatch");
  }
}

RankMatrix RankMatrix::from_scores(const std::vector<std::vector<double>>& table) {
  if (table.empty() || table.front().empty()) {
    throw DataError("cannot rank an empty table");
  }
  const auto cols = table.front().size();
  std::vector<double> ranks;
  ranks.reserve(table.size() * cols);
  for (const auto& row : table) {
    if (row.size() != cols) {
      throw DataError("score table is not rectangular");
    }
    const auto r = rank_best_high(row);
    ranks.insert(ranks.end(), r.begin(), r.end());
  }
  return RankMatrix(table.size(), cols, std::move(ranks));
}

std::vector<double> RankMatrix::mean_ranks() const {
  std::vector<double> mean(cols_, 0.0);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) {
      mean[j] += (*this)(i, j);
    }
  }
  for (auto& v : mean) {
    v /= static_cast<double>(rows_);
  }
  return mean;
}

FlowRanking rank_flows(const std::vector<std::vector<double>>& auc_table) {
  FlowRanking out{RankMatrix::from_scores(auc_table), {}};
  const auto& r = out.ranks;
  out.normalized.assign(r.cols(), 0.0);
  for (std::size_t i = 0; i < r.rows(); ++i) {
    for (std::size_t j = 0; j < r.cols(); ++j) {
      out.normalized[j] += r(i, j);
    }
  }
  const double denom = static_cast<double>(r.rows() * r.cols());
  for (auto& v : out.normalized) {
    v /= denom;
  }
  return out;
}

ModalityContribution rank_unimodal_contribution(
    const std::vector<std::vector<double>>& multimodal_auc_table,
    const std::vector<std::vector<std::size_t>>& flow_members, std::size_t modality_count) {
  const auto ranks = RankMatrix::from_scores(multimodal_auc_table);
  if (flow_members.size() != ranks.cols()) {
    throw DataError("flow membership does not match the table's columns");
  }
  ModalityContribution out;
  out.accumulated.assign(modality_count, 0.0);
  out.maximum.assign(modality_count, 0.0);
  std::vector<std::size_t> flows_with(modality_count, 0);
  for (const auto& members : flow_members) {
    for (auto m : members) {
      if (m >= modality_count) {
        throw DataError("flow references an unknown modality");
      }
      ++flows_with[m];
    }
  }
  for (std::size_t i = 0; i < ranks.rows(); ++i) {
    for (std::size_t f = 0; f < flow_members.size(); ++f) {
      for (auto m : flow_members[f]) {
        out.accumulated[m] += ranks(i, f);
      }
    }
  }
  // Best case per row: the modality's flows occupy the top ranks.
  const auto F = ranks.cols();
  for (std::size_t m = 0; m < modality_count; ++m) {
    double best_row = 0.0;
    for (std::size_t t = 0; t < flows_with[m]; ++t) {
      best_row += static_cast<double>(F - t);
    }
    out.maximum[m] = best_row * static_cast<double>(ranks.rows());
  }
  out.normalized.resize(modality_count);
  for (std::size_t m = 0; m < modality_count; ++m) {
    out.normalized[m] = out.maximum[m] > 0.0 ? out.accumulated[m] / out.maximum[m] : 0.0;
  }
  return out;
}

}  // namespace mmfuse
