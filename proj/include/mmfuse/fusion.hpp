#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mmfuse/feature_vector.hpp"
#include "mmfuse/forest.hpp"

namespace mmfuse {

// ---------------------------------------------------------------------------
// Patient-wise aggregation
// ---------------------------------------------------------------------------

enum class Aggregation { FeatureMean, ScoreMean };  // A1, A2

std::string_view to_string(Aggregation a);
Aggregation parse_aggregation(std::string_view id);

// A1: component-wise mean of a patient's feature vectors.
FeatureVector aggregate_a1(const std::vector<FeatureVector>& vectors);

// A2: component-wise mean of a patient's soft labels.
ClassSupport aggregate_a2(const std::vector<ClassSupport>& supports);

// ---------------------------------------------------------------------------
// Decision profiles
// ---------------------------------------------------------------------------

// L x C matrix; row i holds modality i's class supports.
class DecisionProfile {
public:
  DecisionProfile() = default;
  DecisionProfile(std::size_t modalities, std::size_t classes, std::vector<double> mu,
                  std::vector<std::string> modality_ids = {});

  std::size_t modalities() const { return rows_; }
  std::size_t classes() const { return cols_; }
  double operator()(std::size_t i, std::size_t j) const { return mu_[i * cols_ + j]; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(mu_).subspan(i * cols_, cols_);
  }
  const std::vector<double>& entries() const { return mu_; }
  const std::vector<std::string>& modality_ids() const { return ids_; }

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> mu_;
  std::vector<std::string> ids_;
};

DecisionProfile build_profile(const std::vector<ClassSupport>& per_modality,
                              std::vector<std::string> modality_ids = {});

// One centroid profile per class, fitted on training patients.
struct DecisionTemplateSet {
  std::vector<DecisionProfile> templates;
  std::vector<std::size_t> class_counts;
};

DecisionTemplateSet fit_decision_templates(
    const std::vector<std::pair<DecisionProfile, int>>& training);

// ---------------------------------------------------------------------------
// Fusion rules
// ---------------------------------------------------------------------------

enum class FusionRule { Product, Max, Min, Mean, DecisionTemplate, DempsterShafer, Vote, Confidence };

inline constexpr FusionRule kFusionRules[] = {
    FusionRule::Product,          FusionRule::Max,            FusionRule::Min,
    FusionRule::Mean,             FusionRule::DecisionTemplate, FusionRule::DempsterShafer,
    FusionRule::Vote,             FusionRule::Confidence};

std::string_view to_string(FusionRule r);
FusionRule parse_fusion_rule(std::string_view id);
bool needs_templates(FusionRule r);
bool is_crisp(FusionRule r);

struct FusionOutcome {
  std::optional<std::vector<double>> supports;  // absent for crisp rules
  std::size_t chosen_class = 0;
};

FusionOutcome fuse_product(const DecisionProfile& dp);
FusionOutcome fuse_max(const DecisionProfile& dp);
FusionOutcome fuse_min(const DecisionProfile& dp);
FusionOutcome fuse_mean(const DecisionProfile& dp);
FusionOutcome fuse_decision_template(const DecisionProfile& dp, const DecisionTemplateSet& dts);

// Class beliefs are rescaled to sum to 1.
FusionOutcome fuse_dempster_shafer(const DecisionProfile& dp, const DecisionTemplateSet& dts);

FusionOutcome fuse_majority_vote(const DecisionProfile& dp);
FusionOutcome fuse_confidence(const DecisionProfile& dp);

// Dispatch; `dts` is required for the template-based rules.
FusionOutcome fuse(FusionRule rule, const DecisionProfile& dp,
                   const DecisionTemplateSet* dts = nullptr);

// ---------------------------------------------------------------------------
// Early fusion
// ---------------------------------------------------------------------------

enum class EarlyFusion { Concat, Kronecker };

std::string_view to_string(EarlyFusion e);
EarlyFusion parse_early_fusion(std::string_view id);

using NamedVectors = std::vector<std::pair<std::string, FeatureVector>>;

// Concatenation in modality order; names become "modality:feature".
FeatureVector early_concat(const NamedVectors& vectors);

// Iterated Kronecker product in modality order. With `augment`, each vector
// gets a trailing constant 1 first so that unimodal and lower-order terms
// appear in the product.
FeatureVector early_kronecker(const NamedVectors& vectors, bool augment = true);

FeatureVector early_fuse(EarlyFusion mode, const NamedVectors& vectors, bool augment = true);

}  // namespace mmfuse
