#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmfuse/feature_vector.hpp"

namespace mmfuse {

// Soft labels for C classes: entries in [0, 1] summing to 1 within 1e-9.
class ClassSupport {
public:
  ClassSupport() = default;
  explicit ClassSupport(std::vector<double> values);

  const std::vector<double>& values() const { return values_; }
  std::size_t classes() const { return values_.size(); }
  double operator[](std::size_t j) const { return values_[j]; }

  bool operator==(const ClassSupport&) const = default;

private:
  std::vector<double> values_;
};

// Index of the largest entry; the lowest index wins ties.
std::size_t argmax_lowest(std::span<const double> v);

struct MaxFeatures {
  enum class Rule { Sqrt, Log2, All, Fixed };
  Rule rule = Rule::Sqrt;
  int count = 0;  // used by Fixed

  int resolve(int n_features) const;
};

struct ForestParams {
  int n_trees = 100;
  std::optional<int> max_depth;  // unlimited when empty
  int min_samples_split = 2;
  MaxFeatures max_features;
  std::uint64_t seed = 0;
};

struct LabeledSample {
  FeatureVector x;
  int label = 0;
};

// Base-2 entropy of a class-count histogram; 0 for an empty or pure node.
double entropy_bits(std::span<const double> class_counts);

// Parent entropy minus size-weighted child entropy for the split x <= threshold.
double information_gain(std::span<const double> values, std::span<const int> labels,
                        double threshold, int class_count);

struct SplitChoice {
  int feature = -1;  // -1 when no feature offers a valid threshold
  double threshold = 0.0;
  double gain = 0.0;
};

// Best entropy split over `features` for the rows of a row-major matrix.
// Thresholds are midpoints between consecutive distinct values; equal gains
// keep the lowest feature index, then the lowest threshold.
SplitChoice best_split(std::span<const double> matrix, int n_features,
                       std::span<const std::size_t> rows, std::span<const int> labels,
                       std::span<const int> features, int class_count);

class DecisionTree {
public:
  struct Node {
    int feature = -1;  // -1 for leaves
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int leaf = -1;  // index into leaves()

    bool operator==(const Node&) const = default;
  };

  DecisionTree() = default;
  DecisionTree(std::vector<Node> nodes, std::vector<std::vector<double>> leaves);

  const std::vector<double>& leaf_for(std::span<const double> x) const;

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<std::vector<double>>& leaves() const { return leaves_; }
  int depth() const;

  bool operator==(const DecisionTree&) const = default;

private:
  std::vector<Node> nodes_;
  std::vector<std::vector<double>> leaves_;
};

class TrainedForest {
public:
  TrainedForest() = default;
  TrainedForest(std::vector<DecisionTree> trees, ForestParams params, int class_count,
                std::vector<std::string> feature_names);

  const std::vector<DecisionTree>& trees() const { return trees_; }
  const ForestParams& params() const { return params_; }
  int class_count() const { return class_count_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }

  ClassSupport predict_soft(std::span<const double> x) const;
  ClassSupport predict_soft(const FeatureVector& x) const;
  int predict_crisp(const FeatureVector& x) const;

  // Versioned JSON document ("mmfuse-forest", version 1).
  std::string to_json() const;
  static TrainedForest from_json(const std::string& text);

  bool operator==(const TrainedForest& o) const {
    return trees_ == o.trees_ && class_count_ == o.class_count_ &&
           feature_names_ == o.feature_names_;
  }

private:
  std::vector<DecisionTree> trees_;
  ForestParams params_;
  int class_count_ = 0;
  std::vector<std::string> feature_names_;
};

// Random forest with bootstrap resampling and entropy splits. Tree t draws
// from a stream keyed by (params.seed, t), so the result does not depend on
// `workers`. `class_count` 0 means max label + 1.
TrainedForest train_forest(std::span<const LabeledSample> samples, const ForestParams& params,
                           int class_count = 0, int workers = 1);

// Reference implementation that grows the trees strictly in order.
TrainedForest train_forest_serial(std::span<const LabeledSample> samples,
                                  const ForestParams& params, int class_count = 0);

ClassSupport predict_soft(const TrainedForest& model, const FeatureVector& x);
int predict_crisp(const TrainedForest& model, const FeatureVector& x);
int predict_crisp(const ClassSupport& support);

}  // namespace mmfuse
