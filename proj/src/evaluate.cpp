#include "mmfuse/evaluate.hpp"

#include <algorithm>
#include <bit>
#include <map>
#include <set>
#include <tuple>

#include "mmfuse/error.hpp"
#include "mmfuse/parallel.hpp"
#include "mmfuse/rng.hpp"

namespace mmfuse {

namespace {

constexpr int kClasses = 2;
constexpr std::uint64_t kEarlyTag = 0x4561726c79ULL;

std::vector<FeatureVector> sample_vectors(const PatientRecord& p, std::size_t modality) {
  std::vector<FeatureVector> out;
  for (const auto& s : p.per_modality.at(modality)) {
    out.push_back(s.features);
  }
  if (out.empty()) {
    throw DataError("patient '" + p.id + "' has no samples in modality " + std::to_string(modality));
  }
  return out;
}

double positive_score(const FusionOutcome& o, FusionRule rule) {
  if (is_crisp(rule)) {
    return o.chosen_class == static_cast<std::size_t>(kPositiveClass) ? 1.0 : 0.0;
  }
  return o.supports->at(kPositiveClass);
}

std::string fold_context(const FeatureDataset& data, const Fold& fold) {
  return "fold '" + data.patients[fold.test].id + "'";
}

}  // namespace

std::vector<Fold> lopo_folds(std::span<const int> labels) {
  if (labels.size() < 2) {
    throw DataError("leave-one-patient-out needs at least 2 patients");
  }
  const std::set<int> classes(labels.begin(), labels.end());
  if (classes.size() < 2) {
    throw DataError("leave-one-patient-out needs both classes in the cohort");
  }
  std::vector<Fold> folds(labels.size());
  for (std::size_t t = 0; t < labels.size(); ++t) {
    folds[t].test = t;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (i != t) {
        folds[t].train.push_back(i);
      }
    }
  }
  return folds;
}

std::vector<Fold> lopo_folds(const FeatureDataset& data) {
  const auto labels = data.labels();
  return lopo_folds(labels);
}

std::string ExperimentConfig::id() const {
  std::string flow;
  for (const auto& m : modalities) {
    flow += (flow.empty() ? "" : "+") + m;
  }
  std::string method = "single";
  if (rule) {
    method = std::string(to_string(*rule));
  } else if (early) {
    method = "early-" + std::string(to_string(*early));
  }
  return std::string(to_string(aggregation)) + "_" + method + "_" + flow;
}

void ExperimentConfig::validate() const {
  if (modalities.empty()) {
    throw ConfigError("experiment needs at least one modality");
  }
  if (std::set<std::string>(modalities.begin(), modalities.end()).size() != modalities.size()) {
    throw ConfigError("experiment lists a modality twice");
  }
  if (rule && early) {
    throw ConfigError("experiment sets both a fusion rule and an early-fusion mode");
  }
  if (early && aggregation == Aggregation::ScoreMean) {
    throw ConfigError("early fusion cannot be combined with A2 (score-level aggregation)");
  }
  if (!rule && !early && modalities.size() > 1) {
    throw ConfigError("multimodal experiment needs a fusion rule or an early-fusion mode");
  }
  if (forest.n_trees < 1) {
    throw ConfigError("forest needs at least one tree");
  }
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw DataError("auc: scores and labels differ in length");
  }
  double concordant = 0.0;
  std::size_t pos = 0;
  std::size_t neg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] == kPositiveClass) {
      ++pos;
    } else {
      ++neg;
    }
  }
  if (pos == 0 || neg == 0) {
    throw DataError("auc needs both positive and negative examples");
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != kPositiveClass) {
      continue;
    }
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] == kPositiveClass) {
        continue;
      }
      if (scores[i] > scores[j]) {
        concordant += 1.0;
      } else if (scores[i] == scores[j]) {
        concordant += 0.5;
      }
    }
  }
  return concordant / (static_cast<double>(pos) * static_cast<double>(neg));
}

double auc(const std::vector<PatientOutcome>& outcomes) {
  std::vector<double> s;
  std::vector<int> l;
  for (const auto& o : outcomes) {
    s.push_back(o.score);
    l.push_back(o.label);
  }
  return auc(s, l);
}

TrainingSet build_training_set(const FeatureDataset& data, const Fold& fold, std::size_t modality,
                               Aggregation aggregation) {
  TrainingSet ts;
  for (auto pi : fold.train) {
    if (pi == fold.test) {
      throw InvariantError("test patient listed among its fold's training patients");
    }
    const auto& p = data.patients.at(pi);
    if (aggregation == Aggregation::FeatureMean) {
      ts.samples.push_back({aggregate_a1(sample_vectors(p, modality)), p.label});
      ts.sample_ids.push_back(p.id);
      ts.source_patient.push_back(pi);
    } else {
      for (const auto& s : p.per_modality.at(modality)) {
        ts.samples.push_back({s.features, p.label});
        ts.sample_ids.push_back(s.sample_id);
        ts.source_patient.push_back(pi);
      }
    }
  }
  return ts;
}

namespace {

ClassSupport patient_support(const TrainedForest& model, const PatientRecord& p,
                             std::size_t modality, Aggregation aggregation) {
  const auto vectors = sample_vectors(p, modality);
  if (aggregation == Aggregation::FeatureMean) {
    return model.predict_soft(aggregate_a1(vectors));
  }
  std::vector<ClassSupport> supports;
  supports.reserve(vectors.size());
  for (const auto& v : vectors) {
    supports.push_back(model.predict_soft(v));
  }
  return aggregate_a2(supports);
}

std::uint64_t modality_key(std::uint64_t seed, std::size_t modality, Aggregation aggregation,
                           std::size_t fold) {
  return derive_key(derive_key(derive_key(seed, modality), static_cast<std::uint64_t>(aggregation)),
                    fold);
}

}  // namespace

ModalityScores score_modality(const FeatureDataset& data, const std::vector<Fold>& folds,
                              std::size_t modality, Aggregation aggregation,
                              const ForestParams& forest, std::uint64_t seed, int workers) {
  ModalityScores out;
  out.test.resize(folds.size());
  out.train.resize(folds.size());
  parallel_for(folds.size(), workers, [&](std::size_t f) {
    const auto& fold = folds[f];
    try {
      const auto ts = build_training_set(data, fold, modality, aggregation);
      auto params = forest;
      params.seed = modality_key(seed, modality, aggregation, f);
      const auto model = train_forest(ts.samples, params, kClasses, 1);
      out.test[f] = patient_support(model, data.patients[fold.test], modality, aggregation);
      auto& train = out.train[f];
      train.reserve(fold.train.size());
      for (auto pi : fold.train) {
        train.push_back(patient_support(model, data.patients[pi], modality, aggregation));
      }
    } catch (const DataError& e) {
      throw DataError(fold_context(data, fold) + ", modality '" + data.modalities[modality] +
                      "': " + e.what());
    }
  });
  return out;
}

namespace {

using ScoreKey = std::pair<std::size_t, Aggregation>;
using ScoreCache = std::map<ScoreKey, ModalityScores>;

std::vector<std::size_t> modality_indices(const FeatureDataset& data, const ExperimentConfig& c) {
  std::vector<std::size_t> idx;
  for (const auto& m : c.modalities) {
    idx.push_back(data.modality_index(m));
  }
  return idx;
}

// Late fusion or a unimodal flow from precomputed per-modality scores.
ExperimentResult combine_scores(const FeatureDataset& data, const std::vector<Fold>& folds,
                                const ExperimentConfig& config, const ScoreCache& cache) {
  const auto idx = modality_indices(data, config);
  ExperimentResult r;
  r.config = config;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto& fold = folds[f];
    const auto& patient = data.patients[fold.test];
    double score = 0.0;
    if (!config.rule) {
      score = cache.at({idx.front(), config.aggregation}).test[f][kPositiveClass];
    } else {
      std::vector<ClassSupport> rows;
      for (auto m : idx) {
        rows.push_back(cache.at({m, config.aggregation}).test[f]);
      }
      const auto dp = build_profile(rows, config.modalities);
      std::optional<DecisionTemplateSet> dts;
      if (needs_templates(*config.rule)) {
        std::vector<std::pair<DecisionProfile, int>> training;
        for (std::size_t k = 0; k < fold.train.size(); ++k) {
          std::vector<ClassSupport> train_rows;
          for (auto m : idx) {
            train_rows.push_back(cache.at({m, config.aggregation}).train[f][k]);
          }
          training.emplace_back(build_profile(train_rows, config.modalities),
                                data.patients[fold.train[k]].label);
        }
        try {
          dts = fit_decision_templates(training);
        } catch (const DataError& e) {
          throw DataError(fold_context(data, fold) + ": " + e.what());
        }
      }
      score = positive_score(fuse(*config.rule, dp, dts ? &*dts : nullptr), *config.rule);
    }
    r.per_patient.push_back({patient.id, patient.label, score});
  }
  r.auc = auc(r.per_patient);
  return r;
}

ExperimentResult run_early(const FeatureDataset& data, const std::vector<Fold>& folds,
                           const ExperimentConfig& config, int workers) {
  const auto idx = modality_indices(data, config);
  std::uint64_t subset_key = 0;
  for (auto m : idx) {
    subset_key |= std::uint64_t{1} << (m % 64);
  }
  const auto fused = [&](const PatientRecord& p) {
    NamedVectors parts;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      parts.emplace_back(config.modalities[k], aggregate_a1(sample_vectors(p, idx[k])));
    }
    return early_fuse(*config.early, parts, config.kronecker_augment);
  };
  std::vector<double> scores(folds.size());
  parallel_for(folds.size(), workers, [&](std::size_t f) {
    const auto& fold = folds[f];
    try {
      std::vector<LabeledSample> samples;
      for (auto pi : fold.train) {
        samples.push_back({fused(data.patients[pi]), data.patients[pi].label});
      }
      auto params = config.forest;
      params.seed = derive_key(
          derive_key(derive_key(derive_key(config.seed, kEarlyTag),
                                static_cast<std::uint64_t>(*config.early)),
                     subset_key),
          f);
      const auto model = train_forest(samples, params, kClasses, 1);
      scores[f] = model.predict_soft(fused(data.patients[fold.test]))[kPositiveClass];
    } catch (const DataError& e) {
      throw DataError(fold_context(data, fold) + ": " + e.what());
    }
  });
  ExperimentResult r;
  r.config = config;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto& p = data.patients[folds[f].test];
    r.per_patient.push_back({p.id, p.label, scores[f]});
  }
  r.auc = auc(r.per_patient);
  return r;
}

void fill_cache(const FeatureDataset& data, const std::vector<Fold>& folds,
                const std::vector<ExperimentConfig>& configs, ScoreCache& cache, int workers) {
  std::vector<ScoreKey> needed;
  for (const auto& c : configs) {
    if (c.early) {
      continue;
    }
    for (auto m : modality_indices(data, c)) {
      const ScoreKey key{m, c.aggregation};
      if (!cache.contains(key) && std::find(needed.begin(), needed.end(), key) == needed.end()) {
        needed.push_back(key);
      }
    }
  }
  std::sort(needed.begin(), needed.end());
  for (const auto& key : needed) {
    const auto& c = configs.front();
    cache.emplace(key, score_modality(data, folds, key.first, key.second, c.forest, c.seed, workers));
  }
}

}  // namespace

ExperimentResult run_experiment(const FeatureDataset& data, const ExperimentConfig& config,
                                int workers) {
  config.validate();
  modality_indices(data, config);
  const auto folds = lopo_folds(data);
  if (config.early) {
    return run_early(data, folds, config, workers);
  }
  ScoreCache cache;
  fill_cache(data, folds, {config}, cache, workers);
  return combine_scores(data, folds, config, cache);
}

std::vector<std::vector<std::string>> default_subsets(const std::vector<std::string>& modalities) {
  const auto n = modalities.size();
  if (n > 16) {
    throw ConfigError("too many modalities to enumerate subsets");
  }
  std::vector<std::vector<std::string>> out;
  for (std::size_t size = 2; size <= n; ++size) {
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
      if (static_cast<std::size_t>(std::popcount(mask)) != size) {
        continue;
      }
      std::vector<std::string> subset;
      for (std::size_t i = 0; i < n; ++i) {
        if (mask & (1u << i)) {
          subset.push_back(modalities[i]);
        }
      }
      out.push_back(std::move(subset));
    }
  }
  // Within a size, order lexicographically by member indices.
  std::stable_sort(out.begin(), out.end(), [&](const auto& a, const auto& b) {
    if (a.size() != b.size()) {
      return a.size() < b.size();
    }
    std::vector<std::size_t> ia, ib;
    for (const auto& m : a) {
      ia.push_back(static_cast<std::size_t>(std::find(modalities.begin(), modalities.end(), m) - modalities.begin()));
    }
    for (const auto& m : b) {
      ib.push_back(static_cast<std::size_t>(std::find(modalities.begin(), modalities.end(), m) - modalities.begin()));
    }
    return ia < ib;
  });
  return out;
}

GridResult run_grid(const FeatureDataset& data, const GridSpec& spec, int workers) {
  const auto make = [&](std::vector<std::string> mods, Aggregation a) {
    ExperimentConfig c;
    c.modalities = std::move(mods);
    c.aggregation = a;
    c.kronecker_augment = spec.kronecker_augment;
    c.forest = spec.forest;
    c.seed = spec.seed;
    return c;
  };
  std::vector<ExperimentConfig> late;
  std::vector<ExperimentConfig> early;
  std::vector<ExperimentConfig> unimodal;
  for (auto a : spec.aggregations) {
    for (auto rule : spec.rules) {
      for (const auto& s : spec.subsets) {
        auto c = make(s, a);
        c.rule = rule;
        late.push_back(std::move(c));
      }
    }
  }
  for (auto mode : spec.early) {
    for (const auto& s : spec.subsets) {
      auto c = make(s, Aggregation::FeatureMean);
      c.early = mode;
      early.push_back(std::move(c));
    }
  }
  if (spec.unimodal) {
    for (auto a : spec.aggregations) {
      for (const auto& m : data.modalities) {
        unimodal.push_back(make({m}, a));
      }
    }
  }
  if (late.empty() && early.empty() && unimodal.empty()) {
    throw ConfigError("experiment grid is empty");
  }
  for (const auto* group : {&late, &early, &unimodal}) {
    for (const auto& c : *group) {
      c.validate();
      modality_indices(data, c);
    }
  }

  const auto folds = lopo_folds(data);
  ScoreCache cache;
  std::vector<ExperimentConfig> scored = late;
  scored.insert(scored.end(), unimodal.begin(), unimodal.end());
  if (!scored.empty()) {
    fill_cache(data, folds, scored, cache, workers);
  }

  GridResult out;
  for (const auto& c : late) {
    out.late.push_back(combine_scores(data, folds, c, cache));
  }
  for (const auto& c : early) {
    out.early.push_back(run_early(data, folds, c, workers));
  }
  for (const auto& c : unimodal) {
    out.unimodal.push_back(combine_scores(data, folds, c, cache));
  }
  return out;
}

}  // namespace mmfuse
