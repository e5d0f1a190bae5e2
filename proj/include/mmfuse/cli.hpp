#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mmfuse/dataset.hpp"
#include "mmfuse/evaluate.hpp"
#include "mmfuse/stats.hpp"

namespace mmfuse {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitInternal = 4;

struct CompareParams {
  double friedman_alpha = 0.1;
  double wilcoxon_alpha = 0.1;
  Alternative wilcoxon_alternative = Alternative::Greater;
};

// JSON run configuration. Every field has a default; relative paths resolve
// against the directory holding the config file.
struct RunConfig {
  std::filesystem::path manifest;
  std::filesystem::path output_dir = "mmfuse-out";
  std::uint64_t seed = 0;
  int workers = 1;

  std::vector<std::vector<std::string>> subsets;  // empty: every subset of size >= 2
  std::vector<Aggregation> aggregations = {Aggregation::FeatureMean, Aggregation::ScoreMean};
  std::vector<FusionRule> rules{std::begin(kFusionRules), std::end(kFusionRules)};
  std::vector<EarlyFusion> early = {EarlyFusion::Concat, EarlyFusion::Kronecker};
  std::vector<Aggregation> early_aggregations = {Aggregation::FeatureMean};  // A2 is rejected
  bool kronecker_augment = true;
  bool unimodal_flows = true;

  ForestParams forest;
  FeatureParams features;
  PreprocessParams preprocess;
  CompareParams compare;
  SyntheticSpec synthetic;

  // Throws ConfigError on unknown keys, bad values or an empty grid.
  static RunConfig from_json(const std::string& text, const std::filesystem::path& base_dir = {});
  std::string to_json() const;
};

// Reads the config; also checks that the manifest exists.
RunConfig load_run_config(const std::filesystem::path& path);

// -- results document -----------------------------------------------------------

struct CellRecord {
  std::string id;
  std::string flow;         // "late", "early" or "unimodal"
  std::string aggregation;  // "A1" / "A2"
  std::string method;       // rule id, early mode id, or "single"
  std::vector<std::string> modalities;
  double auc = 0.0;
  std::vector<PatientOutcome> patients;
};

// Everything `compare` needs, as written by `run` to results.json.
struct ResultsDoc {
  std::uint64_t seed = 0;
  std::vector<std::string> modalities;
  std::vector<std::string> aggregations;
  std::vector<std::string> rules;
  std::vector<std::string> early_modes;
  std::vector<std::vector<std::string>> subsets;
  std::vector<CellRecord> cells;

  static ResultsDoc from_grid(const GridResult& grid, const FeatureDataset& data,
                              const RunConfig& config);
  static ResultsDoc from_json(const std::string& text);
  std::string to_json() const;

  // nullptr when absent.
  const CellRecord* find(const std::string& flow, const std::string& aggregation,
                         const std::string& method,
                         const std::vector<std::string>& modalities) const;
};

// -- comparison report ------------------------------------------------------------

struct RuleWilcoxon {
  std::string rule;  // "A2+dt" style
  double auc = 0.0;
  std::optional<WilcoxonResult> test;  // empty for the best rule or when N < 5
};

struct SubsetRuleComparison {
  std::vector<std::string> subset;
  std::size_t best_row = 0;
  std::vector<RuleWilcoxon> rows;
};

struct SignTestCell {
  std::vector<std::string> subset;
  std::string early_mode;
  SignTestResult result;
};

struct ComparisonReport {
  std::vector<std::string> rows;   // rule combinations, "A1+product" style
  std::vector<std::string> flows;  // unimodal flows first, then subsets
  std::vector<std::vector<double>> auc_table;
  FlowRanking ranking;
  std::optional<FriedmanResult> friedman;  // needs >= 3 flows and >= 2 rows
  std::size_t best_flow = 0;
  std::vector<PostHocResult> posthoc;
  std::optional<ModalityContribution> contribution;
  std::vector<SubsetRuleComparison> rule_comparisons;
  std::vector<SignTestCell> sign_tests;  // A1 late rules vs each early mode
  std::vector<std::string> notes;        // tests that could not be run, and why
};

ComparisonReport compare_results(const ResultsDoc& doc, const CompareParams& params);

// -- commands ------------------------------------------------------------------------

// Writes features/<modality>.csv and features_manifest.json under `out_dir`.
void cmd_extract(const RunConfig& config, const std::filesystem::path& out_dir, int workers);

// Writes results.json, the AUC grids (.csv + .txt) and cells/<id>.csv.
ResultsDoc cmd_run(const RunConfig& config, const std::filesystem::path& out_dir, int workers);

// Reads results.json and writes compare/ tables (.csv + .txt) and report.json.
ComparisonReport cmd_compare(const std::filesystem::path& results_json,
                             const std::filesystem::path& out_dir, const CompareParams& params);

// Writes manifest.json and a config.json that points at it.
void cmd_synth(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

// Entry point of the tool; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace mmfuse
