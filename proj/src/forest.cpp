#include "mmfuse/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "mmfuse/error.hpp"
#include "mmfuse/parallel.hpp"
#include "mmfuse/rng.hpp"

namespace mmfuse {

using json = nlohmann::json;

ClassSupport::ClassSupport(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) {
    throw DataError("class support must have at least one class");
  }
  double total = 0.0;
  for (double v : values_) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw DataError("class support entry outside [0, 1]");
    }
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw DataError("class support does not sum to 1 (sum = " + std::to_string(total) + ")");
  }
}

std::size_t argmax_lowest(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < v.size(); ++j) {
    if (v[j] > v[best]) {
      best = j;
    }
  }
  return best;
}

int MaxFeatures::resolve(int n_features) const {
  int m = n_features;
  switch (rule) {
    case Rule::Sqrt: m = static_cast<int>(std::sqrt(static_cast<double>(n_features))); break;
    case Rule::Log2: m = static_cast<int>(std::log2(static_cast<double>(n_features))); break;
    case Rule::All: m = n_features; break;
    case Rule::Fixed: m = count; break;
  }
  return std::clamp(m, 1, std::max(1, n_features));
}

double entropy_bits(std::span<const double> class_counts) {
  double n = 0.0;
  for (double c : class_counts) {
    n += c;
  }
  if (n <= 0.0) {
    return 0.0;
  }
  double h = 0.0;
  for (double c : class_counts) {
    if (c > 0.0) {
      const double p = c / n;
      h -= p * std::log2(p);
    }
  }
  return h;
}

namespace {

double weighted_child_entropy(const std::vector<double>& left, const std::vector<double>& right,
                              double n_left, double n_right) {
  const double n = n_left + n_right;
  return (n_left / n) * entropy_bits(left) + (n_right / n) * entropy_bits(right);
}

}  // namespace

double information_gain(std::span<const double> values, std::span<const int> labels,
                        double threshold, int class_count) {
  if (values.size() != labels.size() || values.empty()) {
    throw DataError("information_gain: values and labels must be aligned and non-empty");
  }
  std::vector<double> parent(static_cast<std::size_t>(class_count), 0.0);
  std::vector<double> left(parent.size(), 0.0);
  std::vector<double> right(parent.size(), 0.0);
  double nl = 0.0;
  double nr = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto c = static_cast<std::size_t>(labels[i]);
    parent[c] += 1.0;
    if (values[i] <= threshold) {
      left[c] += 1.0;
      nl += 1.0;
    } else {
      right[c] += 1.0;
      nr += 1.0;
    }
  }
  if (nl == 0.0 || nr == 0.0) {
    return 0.0;
  }
  return entropy_bits(parent) - weighted_child_entropy(left, right, nl, nr);
}

namespace {

struct FeatureSweep {
  bool found = false;
  double threshold = 0.0;
  double gain = 0.0;
};

// Scans all midpoint thresholds of one feature for the node rows.
FeatureSweep sweep_feature(std::span<const double> matrix, int n_features,
                           std::span<const std::size_t> rows, std::span<const int> labels,
                           int feature, int class_count, double parent_entropy,
                           std::vector<std::pair<double, int>>& scratch) {
  scratch.clear();
  for (auto r : rows) {
    scratch.emplace_back(matrix[r * static_cast<std::size_t>(n_features) + feature], labels[r]);
  }
  std::sort(scratch.begin(), scratch.end());
  FeatureSweep best;
  if (scratch.front().first == scratch.back().first) {
    return best;
  }
  const auto C = static_cast<std::size_t>(class_count);
  std::vector<double> left(C, 0.0);
  std::vector<double> right(C, 0.0);
  for (const auto& [v, c] : scratch) {
    right[static_cast<std::size_t>(c)] += 1.0;
  }
  const double n = static_cast<double>(scratch.size());
  for (std::size_t k = 0; k + 1 < scratch.size(); ++k) {
    const auto c = static_cast<std::size_t>(scratch[k].second);
    left[c] += 1.0;
    right[c] -= 1.0;
    const double a = scratch[k].first;
    const double b = scratch[k + 1].first;
    if (a == b) {
      continue;
    }
    const double nl = static_cast<double>(k + 1);
    const double gain = parent_entropy - weighted_child_entropy(left, right, nl, n - nl);
    if (!best.found || gain > best.gain) {
      double mid = a + (b - a) / 2.0;
      if (!(mid < b)) {
        mid = a;
      }
      best = {true, mid, gain};
    }
  }
  return best;
}

bool better_split(const SplitChoice& cand, const SplitChoice& cur) {
  if (cur.feature < 0) {
    return true;
  }
  if (cand.gain != cur.gain) {
    return cand.gain > cur.gain;
  }
  if (cand.feature != cur.feature) {
    return cand.feature < cur.feature;
  }
  return cand.threshold < cur.threshold;
}

}  // namespace

SplitChoice best_split(std::span<const double> matrix, int n_features,
                       std::span<const std::size_t> rows, std::span<const int> labels,
                       std::span<const int> features, int class_count) {
  SplitChoice best;
  if (rows.size() < 2) {
    return best;
  }
  std::vector<double> counts(static_cast<std::size_t>(class_count), 0.0);
  for (auto r : rows) {
    counts[static_cast<std::size_t>(labels[r])] += 1.0;
  }
  const double parent_entropy = entropy_bits(counts);
  std::vector<std::pair<double, int>> scratch;
  scratch.reserve(rows.size());
  for (int f : features) {
    const auto sweep =
        sweep_feature(matrix, n_features, rows, labels, f, class_count, parent_entropy, scratch);
    if (!sweep.found) {
      continue;
    }
    const SplitChoice cand{f, sweep.threshold, sweep.gain};
    if (better_split(cand, best)) {
      best = cand;
    }
  }
  return best;
}

DecisionTree::DecisionTree(std::vector<Node> nodes, std::vector<std::vector<double>> leaves)
    : nodes_(std::move(nodes)), leaves_(std::move(leaves)) {
  if (nodes_.empty()) {
    throw DataError("decision tree has no nodes");
  }
  for (const auto& n : nodes_) {
    const bool is_leaf = n.feature < 0;
    const auto nn = static_cast<int>(nodes_.size());
    if (is_leaf ? (n.leaf < 0 || n.leaf >= static_cast<int>(leaves_.size()))
                : (n.left <= 0 || n.left >= nn || n.right <= 0 || n.right >= nn)) {
      throw DataError("malformed decision tree node");
    }
  }
  for (const auto& leaf : leaves_) {
    ClassSupport check(leaf);
  }
}

const std::vector<double>& DecisionTree::leaf_for(std::span<const double> x) const {
  std::size_t i = 0;
  while (nodes_[i].feature >= 0) {
    const auto& n = nodes_[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                                                        : n.right);
  }
  return leaves_[static_cast<std::size_t>(nodes_[i].leaf)];
}

int DecisionTree::depth() const {
  std::vector<int> d(nodes_.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    deepest = std::max(deepest, d[i]);
    if (nodes_[i].feature >= 0) {
      d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
    }
  }
  return deepest;
}

TrainedForest::TrainedForest(std::vector<DecisionTree> trees, ForestParams params,
                             int class_count, std::vector<std::string> feature_names)
    : trees_(std::move(trees)),
      params_(std::move(params)),
      class_count_(class_count),
      feature_names_(std::move(feature_names)) {
  if (trees_.empty()) {
    throw DataError("forest has no trees");
  }
  for (const auto& t : trees_) {
    for (const auto& leaf : t.leaves()) {
      if (static_cast<int>(leaf.size()) != class_count_) {
        throw DataError("leaf class count does not match forest");
      }
    }
  }
}

ClassSupport TrainedForest::predict_soft(std::span<const double> x) const {
  if (x.size() != feature_names_.size()) {
    throw DataError("feature dimension " + std::to_string(x.size()) + " does not match model (" +
                    std::to_string(feature_names_.size()) + ")");
  }
  std::vector<double> acc(static_cast<std::size_t>(class_count_), 0.0);
  for (const auto& t : trees_) {
    const auto& leaf = t.leaf_for(x);
    for (std::size_t j = 0; j < acc.size(); ++j) {
      acc[j] += leaf[j];
    }
  }
  const auto n = static_cast<double>(trees_.size());
  for (auto& a : acc) {
    a = std::clamp(a / n, 0.0, 1.0);
  }
  return ClassSupport(std::move(acc));
}

ClassSupport TrainedForest::predict_soft(const FeatureVector& x) const {
  return predict_soft(std::span<const double>(x.values()));
}

int TrainedForest::predict_crisp(const FeatureVector& x) const {
  return mmfuse::predict_crisp(predict_soft(x));
}

std::string TrainedForest::to_json() const {
  json trees = json::array();
  for (const auto& t : trees_) {
    json nodes = json::array();
    for (const auto& n : t.nodes()) {
      nodes.push_back({n.feature, n.threshold, n.left, n.right, n.leaf});
    }
    trees.push_back({{"nodes", nodes}, {"leaves", t.leaves()}});
  }
  json params = {{"n_trees", params_.n_trees},
                 {"max_depth", params_.max_depth ? json(*params_.max_depth) : json(nullptr)},
                 {"min_samples_split", params_.min_samples_split},
                 {"max_features_rule", static_cast<int>(params_.max_features.rule)},
                 {"max_features_count", params_.max_features.count},
                 {"seed", params_.seed}};
  json doc = {{"format", "mmfuse-forest"},
              {"version", 1},
              {"class_count", class_count_},
              {"feature_names", feature_names_},
              {"params", params},
              {"trees", trees}};
  return doc.dump(1);
}

TrainedForest TrainedForest::from_json(const std::string& text) {
  try {
    const auto doc = json::parse(text);
    if (doc.at("format") != "mmfuse-forest") {
      throw DataError("not an mmfuse forest document");
    }
    if (doc.at("version") != 1) {
      throw DataError("unsupported forest version " + doc.at("version").dump());
    }
    ForestParams p;
    const auto& jp = doc.at("params");
    p.n_trees = jp.at("n_trees");
    if (!jp.at("max_depth").is_null()) {
      p.max_depth = jp.at("max_depth").get<int>();
    }
    p.min_samples_split = jp.at("min_samples_split");
    p.max_features.rule = static_cast<MaxFeatures::Rule>(jp.at("max_features_rule").get<int>());
    p.max_features.count = jp.at("max_features_count");
    p.seed = jp.at("seed");
    std::vector<DecisionTree> trees;
    for (const auto& jt : doc.at("trees")) {
      std::vector<DecisionTree::Node> nodes;
      for (const auto& jn : jt.at("nodes")) {
        nodes.push_back({jn.at(0), jn.at(1), jn.at(2), jn.at(3), jn.at(4)});
      }
      trees.emplace_back(std::move(nodes), jt.at("leaves").get<std::vector<std::vector<double>>>());
    }
    return TrainedForest(std::move(trees), p, doc.at("class_count"),
                         doc.at("feature_names").get<std::vector<std::string>>());
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed forest document: ") + e.what());
  }
}

namespace {

struct TrainingData {
  std::vector<double> matrix;  // row-major
  std::vector<int> labels;
  int n_features = 0;
  int class_count = 0;
  std::vector<std::string> names;
};

TrainingData prepare(std::span<const LabeledSample> samples, int class_count) {
  if (samples.size() < 2) {
    throw DataError("random forest needs at least 2 training samples");
  }
  TrainingData d;
  d.names = samples.front().x.names();
  d.n_features = static_cast<int>(d.names.size());
  if (d.n_features == 0) {
    throw DataError("training samples have no features");
  }
  std::set<int> distinct;
  int max_label = 0;
  for (const auto& s : samples) {
    if (s.x.size() != static_cast<std::size_t>(d.n_features)) {
      throw DataError("training sample dimension mismatch: expected " +
                      std::to_string(d.n_features) + ", got " + std::to_string(s.x.size()));
    }
    if (s.label < 0) {
      throw DataError("negative class label");
    }
    distinct.insert(s.label);
    max_label = std::max(max_label, s.label);
    d.matrix.insert(d.matrix.end(), s.x.values().begin(), s.x.values().end());
    d.labels.push_back(s.label);
  }
  if (distinct.size() < 2) {
    throw DataError("training set contains a single class");
  }
  d.class_count = class_count > 0 ? class_count : max_label + 1;
  if (max_label >= d.class_count) {
    throw DataError("label exceeds class count");
  }
  return d;
}

class TreeGrower {
public:
  TreeGrower(const TrainingData& data, const ForestParams& params, std::uint64_t key)
      : data_(data), params_(params), rng_(key) {}

  DecisionTree grow() {
    const auto n = data_.labels.size();
    std::vector<std::size_t> rows(n);
    for (auto& r : rows) {
      r = static_cast<std::size_t>(rng_.below(n));
    }
    features_.resize(static_cast<std::size_t>(data_.n_features));
    m_ = params_.max_features.resolve(data_.n_features);
    nodes_.clear();
    leaves_.clear();
    build(rows, 0);
    return DecisionTree(std::move(nodes_), std::move(leaves_));
  }

private:
  int make_leaf(const std::vector<double>& counts, double n) {
    std::vector<double> freq(counts.size());
    for (std::size_t j = 0; j < counts.size(); ++j) {
      freq[j] = counts[j] / n;
    }
    leaves_.push_back(std::move(freq));
    DecisionTree::Node node;
    node.leaf = static_cast<int>(leaves_.size()) - 1;
    nodes_.push_back(node);
    return static_cast<int>(nodes_.size()) - 1;
  }

  int build(std::vector<std::size_t>& rows, int depth) {
    std::vector<double> counts(static_cast<std::size_t>(data_.class_count), 0.0);
    for (auto r : rows) {
      counts[static_cast<std::size_t>(data_.labels[r])] += 1.0;
    }
    const auto n = static_cast<double>(rows.size());
    const bool pure = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0; }) <= 1;
    const bool depth_capped = params_.max_depth && depth >= *params_.max_depth;
    if (pure || depth_capped || static_cast<int>(rows.size()) < params_.min_samples_split) {
      return make_leaf(counts, n);
    }

    // Draw features in random order; examine at least m of them and keep
    // going past m only while none has offered a valid threshold.
    std::iota(features_.begin(), features_.end(), 0);
    SplitChoice best;
    std::size_t examined = 0;
    for (std::size_t k = 0; k < features_.size(); ++k) {
      const auto pick = k + static_cast<std::size_t>(rng_.below(features_.size() - k));
      std::swap(features_[k], features_[pick]);
      const int f = features_[k];
      const auto cand =
          best_split(data_.matrix, data_.n_features, rows, data_.labels, std::span(&f, 1),
                     data_.class_count);
      if (cand.feature >= 0 && better_split(cand, best)) {
        best = cand;
      }
      ++examined;
      if (examined >= static_cast<std::size_t>(m_) && best.feature >= 0) {
        break;
      }
    }
    if (best.feature < 0) {
      return make_leaf(counts, n);
    }

    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    const auto stride = static_cast<std::size_t>(data_.n_features);
    for (auto r : rows) {
      (data_.matrix[r * stride + static_cast<std::size_t>(best.feature)] <= best.threshold ? left
                                                                                          : right)
          .push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();

    const int self = static_cast<int>(nodes_.size());
    DecisionTree::Node node;
    node.feature = best.feature;
    node.threshold = best.threshold;
    nodes_.push_back(node);
    const int l = build(left, depth + 1);
    const int r = build(right, depth + 1);
    nodes_[static_cast<std::size_t>(self)].left = l;
    nodes_[static_cast<std::size_t>(self)].right = r;
    return self;
  }

  const TrainingData& data_;
  const ForestParams& params_;
  CounterRng rng_;
  int m_ = 1;
  std::vector<int> features_;
  std::vector<DecisionTree::Node> nodes_;
  std::vector<std::vector<double>> leaves_;
};

void check_params(const ForestParams& params) {
  if (params.n_trees < 1) {
    throw DataError("forest needs at least one tree");
  }
  if (params.min_samples_split < 2) {
    throw DataError("min_samples_split must be >= 2");
  }
  if (params.max_depth && *params.max_depth < 0) {
    throw DataError("max_depth must be non-negative");
  }
}

}  // namespace

TrainedForest train_forest(std::span<const LabeledSample> samples, const ForestParams& params,
                           int class_count, int workers) {
  check_params(params);
  const auto data = prepare(samples, class_count);
  std::vector<DecisionTree> trees(static_cast<std::size_t>(params.n_trees));
  parallel_for(trees.size(), workers, [&](std::size_t t) {
    trees[t] = TreeGrower(data, params, derive_key(params.seed, t)).grow();
  });
  return TrainedForest(std::move(trees), params, data.class_count, data.names);
}

TrainedForest train_forest_serial(std::span<const LabeledSample> samples,
                                  const ForestParams& params, int class_count) {
  check_params(params);
  const auto data = prepare(samples, class_count);
  std::vector<DecisionTree> trees;
  trees.reserve(static_cast<std::size_t>(params.n_trees));
  for (int t = 0; t < params.n_trees; ++t) {
    trees.push_back(TreeGrower(data, params, derive_key(params.seed, static_cast<std::uint64_t>(t))).grow());
  }
  return TrainedForest(std::move(trees), params, data.class_count, data.names);
}

ClassSupport predict_soft(const TrainedForest& model, const FeatureVector& x) {
  return model.predict_soft(x);
}

int predict_crisp(const TrainedForest& model, const FeatureVector& x) {
  return model.predict_crisp(x);
}

int predict_crisp(const ClassSupport& support) {
  return static_cast<int>(argmax_lowest(support.values()));
}

}  // namespace mmfuse
