#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmfuse/dataset.hpp"
#include "mmfuse/forest.hpp"
#include "mmfuse/fusion.hpp"

namespace mmfuse {

// ---------------------------------------------------------------------------
// Leave-one-patient-out folds
// ---------------------------------------------------------------------------

struct Fold {
  std::size_t test = 0;             // patient index
  std::vector<std::size_t> train;   // every other patient, ascending
};

// One fold per patient. Needs >= 2 patients and both classes overall.
std::vector<Fold> lopo_folds(std::span<const int> labels);
std::vector<Fold> lopo_folds(const FeatureDataset& data);

// ---------------------------------------------------------------------------
// Configurations and results
// ---------------------------------------------------------------------------

// A flow is either late fusion (rule set), early fusion (mode set) or a
// unimodal flow (single modality, neither set).
struct ExperimentConfig {
  std::vector<std::string> modalities;
  Aggregation aggregation = Aggregation::FeatureMean;
  std::optional<FusionRule> rule;
  std::optional<EarlyFusion> early;
  bool kronecker_augment = true;
  ForestParams forest;
  std::uint64_t seed = 0;

  // Stable identifier such as "A1_dt_pathomics+radiomics" or "A1_early-concat_...".
  std::string id() const;

  // Throws ConfigError for an empty subset, duplicate modalities, A2 with
  // early fusion, both a rule and an early mode, or a multimodal flow with
  // neither.
  void validate() const;
};

struct PatientOutcome {
  std::string patient_id;
  int label = kNegativeClass;
  double score = 0.0;  // positive-class support, or a crisp decision in {0, 1}
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<PatientOutcome> per_patient;  // dataset patient order
  double auc = 0.5;
};

// Mann-Whitney AUC: concordant (positive, negative) pairs plus half the ties,
// over n_pos * n_neg. Throws DataError unless both labels occur.
double auc(std::span<const double> scores, std::span<const int> labels);
double auc(const std::vector<PatientOutcome>& outcomes);

// ---------------------------------------------------------------------------
// Per-modality classifier scores
// ---------------------------------------------------------------------------

struct TrainingSet {
  std::vector<LabeledSample> samples;
  std::vector<std::string> sample_ids;       // patient id under A1
  std::vector<std::size_t> source_patient;   // patient index per sample
};

// Training data of one modality for one fold: one mean vector per training
// patient under A1, every raw sample under A2.
TrainingSet build_training_set(const FeatureDataset& data, const Fold& fold, std::size_t modality,
                               Aggregation aggregation);

// Supports of one modality's classifier in every fold: the held-out patient
// plus resubstitution supports of the fold's training patients (used to fit
// decision templates).
struct ModalityScores {
  std::vector<ClassSupport> test;                 // per fold
  std::vector<std::vector<ClassSupport>> train;   // per fold, aligned to Fold::train
};

// Forest seed per fold: derived from (seed, modality index, aggregation, fold).
ModalityScores score_modality(const FeatureDataset& data, const std::vector<Fold>& folds,
                              std::size_t modality, Aggregation aggregation,
                              const ForestParams& forest, std::uint64_t seed, int workers = 1);

// ---------------------------------------------------------------------------
// Runners
// ---------------------------------------------------------------------------

ExperimentResult run_experiment(const FeatureDataset& data, const ExperimentConfig& config,
                                int workers = 1);

struct GridSpec {
  std::vector<std::vector<std::string>> subsets;  // multimodal flows
  std::vector<Aggregation> aggregations = {Aggregation::FeatureMean, Aggregation::ScoreMean};
  std::vector<FusionRule> rules{std::begin(kFusionRules), std::end(kFusionRules)};
  std::vector<EarlyFusion> early = {EarlyFusion::Concat, EarlyFusion::Kronecker};
  bool kronecker_augment = true;
  bool unimodal = true;  // also run each modality alone under every aggregation
  ForestParams forest;
  std::uint64_t seed = 0;
};

// Every subset of size >= 2 in dataset order, smaller subsets first.
std::vector<std::vector<std::string>> default_subsets(const std::vector<std::string>& modalities);

struct GridResult {
  // Late fusion, row-major over (aggregation, rule) rows x subset columns.
  std::vector<ExperimentResult> late;
  // Early fusion under A1, row-major over early modes x subsets.
  std::vector<ExperimentResult> early;
  // Unimodal flows, row-major over aggregations x dataset modalities.
  std::vector<ExperimentResult> unimodal;
};

// Validates every cell before any training, then shares per-modality scores
// across cells. Output does not depend on `workers`.
GridResult run_grid(const FeatureDataset& data, const GridSpec& spec, int workers = 1);

}  // namespace mmfuse
