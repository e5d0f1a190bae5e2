#include "mmfuse/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "mmfuse/error.hpp"

namespace mmfuse {

std::string_view to_string(Aggregation a) {
  return a == Aggregation::FeatureMean ? "A1" : "A2";
}

Aggregation parse_aggregation(std::string_view id) {
  if (id == "A1") {
    return Aggregation::FeatureMean;
  }
  if (id == "A2") {
    return Aggregation::ScoreMean;
  }
  throw ConfigError("unknown aggregation rule '" + std::string(id) + "' (expected A1 or A2)");
}

FeatureVector aggregate_a1(const std::vector<FeatureVector>& vectors) {
  if (vectors.empty()) {
    throw DataError("A1 aggregation of an empty sample set");
  }
  std::vector<double> sum(vectors.front().size(), 0.0);
  for (const auto& v : vectors) {
    if (!v.same_layout(vectors.front())) {
      throw DataError("A1 aggregation: feature names differ between samples");
    }
    for (std::size_t k = 0; k < sum.size(); ++k) {
      sum[k] += v[k];
    }
  }
  const auto n = static_cast<double>(vectors.size());
  for (auto& s : sum) {
    s /= n;
  }
  return FeatureVector(vectors.front().names(), std::move(sum));
}

ClassSupport aggregate_a2(const std::vector<ClassSupport>& supports) {
  if (supports.empty()) {
    throw DataError("A2 aggregation of an empty sample set");
  }
  std::vector<double> sum(supports.front().classes(), 0.0);
  for (const auto& s : supports) {
    if (s.classes() != sum.size()) {
      throw DataError("A2 aggregation: class counts differ");
    }
    for (std::size_t j = 0; j < sum.size(); ++j) {
      sum[j] += s[j];
    }
  }
  const auto n = static_cast<double>(supports.size());
  for (auto& s : sum) {
    s = std::clamp(s / n, 0.0, 1.0);
  }
  return ClassSupport(std::move(sum));
}

DecisionProfile::DecisionProfile(std::size_t modalities, std::size_t classes,
                                 std::vector<double> mu, std::vector<std::string> modality_ids)
    : rows_(modalities), cols_(classes), mu_(std::move(mu)), ids_(std::move(modality_ids)) {
  if (rows_ == 0 || cols_ == 0 || mu_.size() != rows_ * cols_) {
    throw DataError("decision profile shape mismatch");
  }
  if (!ids_.empty() && ids_.size() != rows_) {
    throw DataError("decision profile needs one modality id per row");
  }
  for (std::size_t i = 0; i < rows_; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < cols_; ++j) {
      const double v = (*this)(i, j);
      if (!(v >= 0.0 && v <= 1.0)) {
        throw DataError("decision profile entry outside [0, 1]");
      }
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw DataError("decision profile row " + std::to_string(i) + " does not sum to 1");
    }
  }
}

DecisionProfile build_profile(const std::vector<ClassSupport>& per_modality,
                              std::vector<std::string> modality_ids) {
  if (per_modality.empty()) {
    throw DataError("decision profile needs at least one modality");
  }
  const auto c = per_modality.front().classes();
  std::vector<double> mu;
  mu.reserve(per_modality.size() * c);
  for (const auto& s : per_modality) {
    if (s.classes() != c) {
      throw DataError("modalities disagree on the number of classes");
    }
    mu.insert(mu.end(), s.values().begin(), s.values().end());
  }
  return DecisionProfile(per_modality.size(), c, std::move(mu), std::move(modality_ids));
}

DecisionTemplateSet fit_decision_templates(
    const std::vector<std::pair<DecisionProfile, int>>& training) {
  if (training.empty()) {
    throw DataError("decision templates need training profiles");
  }
  const auto L = training.front().first.modalities();
  const auto C = training.front().first.classes();
  std::vector<std::vector<double>> sums(C, std::vector<double>(L * C, 0.0));
  DecisionTemplateSet dts;
  dts.class_counts.assign(C, 0);
  for (const auto& [dp, label] : training) {
    if (dp.modalities() != L || dp.classes() != C) {
      throw DataError("training profiles differ in shape");
    }
    if (label < 0 || static_cast<std::size_t>(label) >= C) {
      throw DataError("training label outside [0, C)");
    }
    auto& s = sums[static_cast<std::size_t>(label)];
    for (std::size_t k = 0; k < s.size(); ++k) {
      s[k] += dp.entries()[k];
    }
    ++dts.class_counts[static_cast<std::size_t>(label)];
  }
  for (std::size_t c = 0; c < C; ++c) {
    if (dts.class_counts[c] == 0) {
      throw DataError("class " + std::to_string(c) + " has no training profile for its template");
    }
    const auto n = static_cast<double>(dts.class_counts[c]);
    for (auto& v : sums[c]) {
      v = std::clamp(v / n, 0.0, 1.0);
    }
    dts.templates.emplace_back(L, C, std::move(sums[c]), training.front().first.modality_ids());
  }
  return dts;
}

std::string_view to_string(FusionRule r) {
  switch (r) {
    case FusionRule::Product: return "product";
    case FusionRule::Max: return "max";
    case FusionRule::Min: return "min";
    case FusionRule::Mean: return "mean";
    case FusionRule::DecisionTemplate: return "dt";
    case FusionRule::DempsterShafer: return "ds";
    case FusionRule::Vote: return "vote";
    case FusionRule::Confidence: return "confidence";
  }
  return "?";
}

FusionRule parse_fusion_rule(std::string_view id) {
  for (auto r : kFusionRules) {
    if (to_string(r) == id) {
      return r;
    }
  }
  throw ConfigError("unknown fusion rule '" + std::string(id) + "'");
}

bool needs_templates(FusionRule r) {
  return r == FusionRule::DecisionTemplate || r == FusionRule::DempsterShafer;
}

bool is_crisp(FusionRule r) { return r == FusionRule::Vote || r == FusionRule::Confidence; }

namespace {

FusionOutcome soft_outcome(std::vector<double> chi) {
  const auto s = argmax_lowest(chi);
  return {std::move(chi), s};
}

template <class Combine>
FusionOutcome columnwise(const DecisionProfile& dp, double init, Combine combine) {
  std::vector<double> chi(dp.classes(), init);
  for (std::size_t j = 0; j < dp.classes(); ++j) {
    for (std::size_t i = 0; i < dp.modalities(); ++i) {
      chi[j] = combine(chi[j], dp(i, j));
    }
  }
  return soft_outcome(std::move(chi));
}

void check_templates(const DecisionProfile& dp, const DecisionTemplateSet& dts) {
  if (dts.templates.size() != dp.classes()) {
    throw DataError("decision templates do not cover every class");
  }
  for (const auto& t : dts.templates) {
    if (t.modalities() != dp.modalities() || t.classes() != dp.classes()) {
      throw DataError("decision template shape differs from the profile");
    }
  }
}

}  // namespace

FusionOutcome fuse_product(const DecisionProfile& dp) {
  return columnwise(dp, 1.0, [](double a, double m) { return a * m; });
}

FusionOutcome fuse_max(const DecisionProfile& dp) {
  return columnwise(dp, 0.0, [](double a, double m) { return std::max(a, m); });
}

FusionOutcome fuse_min(const DecisionProfile& dp) {
  return columnwise(dp, 1.0, [](double a, double m) { return std::min(a, m); });
}

FusionOutcome fuse_mean(const DecisionProfile& dp) {
  auto out = columnwise(dp, 0.0, [](double a, double m) { return a + m; });
  const auto L = static_cast<double>(dp.modalities());
  for (auto& v : *out.supports) {
    v /= L;
  }
  out.chosen_class = argmax_lowest(*out.supports);
  return out;
}

FusionOutcome fuse_decision_template(const DecisionProfile& dp, const DecisionTemplateSet& dts) {
  check_templates(dp, dts);
  const auto cells = static_cast<double>(dp.modalities() * dp.classes());
  std::vector<double> chi(dp.classes());
  for (std::size_t c = 0; c < dp.classes(); ++c) {
    double sq = 0.0;
    for (std::size_t k = 0; k < dp.entries().size(); ++k) {
      const double d = dp.entries()[k] - dts.templates[c].entries()[k];
      sq += d * d;
    }
    chi[c] = std::clamp(1.0 - sq / cells, 0.0, 1.0);
  }
  return soft_outcome(std::move(chi));
}

FusionOutcome fuse_dempster_shafer(const DecisionProfile& dp, const DecisionTemplateSet& dts) {
  check_templates(dp, dts);
  const auto L = dp.modalities();
  const auto C = dp.classes();
  std::vector<double> chi(C, 1.0);
  std::vector<double> phi(C);
  for (std::size_t i = 0; i < L; ++i) {
    const auto out = dp.row(i);
    double norm = 0.0;
    for (std::size_t j = 0; j < C; ++j) {
      const auto ref = dts.templates[j].row(i);
      double d2 = 0.0;
      for (std::size_t c = 0; c < C; ++c) {
        d2 += (ref[c] - out[c]) * (ref[c] - out[c]);
      }
      phi[j] = 1.0 / (1.0 + d2);
      norm += phi[j];
    }
    for (auto& p : phi) {
      p /= norm;
    }
    for (std::size_t j = 0; j < C; ++j) {
      double others = 1.0;
      for (std::size_t k = 0; k < C; ++k) {
        if (k != j) {
          others *= 1.0 - phi[k];
        }
      }
      const double denom = 1.0 - phi[j] * (1.0 - others);
      if (denom <= 0.0) {
        // modality i is certain about class j
        std::vector<double> certain(C, 0.0);
        certain[j] = 1.0;
        return soft_outcome(std::move(certain));
      }
      chi[j] *= phi[j] * others / denom;
    }
  }
  double total = 0.0;
  for (double v : chi) {
    total += v;
  }
  if (total > 0.0) {
    for (auto& v : chi) {
      v /= total;
    }
  } else {
    std::fill(chi.begin(), chi.end(), 1.0 / static_cast<double>(C));
  }
  return soft_outcome(std::move(chi));
}

FusionOutcome fuse_majority_vote(const DecisionProfile& dp) {
  std::vector<double> votes(dp.classes(), 0.0);
  for (std::size_t i = 0; i < dp.modalities(); ++i) {
    votes[argmax_lowest(dp.row(i))] += 1.0;
  }
  return {std::nullopt, argmax_lowest(votes)};
}

FusionOutcome fuse_confidence(const DecisionProfile& dp) {
  std::size_t q = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < dp.modalities(); ++i) {
    const auto row = dp.row(i);
    const double m = *std::max_element(row.begin(), row.end());
    if (m > best) {
      best = m;
      q = i;
    }
  }
  return {std::nullopt, argmax_lowest(dp.row(q))};
}

FusionOutcome fuse(FusionRule rule, const DecisionProfile& dp, const DecisionTemplateSet* dts) {
  if (needs_templates(rule) && dts == nullptr) {
    throw DataError("fusion rule '" + std::string(to_string(rule)) + "' needs decision templates");
  }
  switch (rule) {
    case FusionRule::Product: return fuse_product(dp);
    case FusionRule::Max: return fuse_max(dp);
    case FusionRule::Min: return fuse_min(dp);
    case FusionRule::Mean: return fuse_mean(dp);
    case FusionRule::DecisionTemplate: return fuse_decision_template(dp, *dts);
    case FusionRule::DempsterShafer: return fuse_dempster_shafer(dp, *dts);
    case FusionRule::Vote: return fuse_majority_vote(dp);
    case FusionRule::Confidence: return fuse_confidence(dp);
  }
  throw InvariantError("unhandled fusion rule");
}

std::string_view to_string(EarlyFusion e) {
  return e == EarlyFusion::Concat ? "concat" : "kronecker";
}

EarlyFusion parse_early_fusion(std::string_view id) {
  if (id == "concat") {
    return EarlyFusion::Concat;
  }
  if (id == "kronecker") {
    return EarlyFusion::Kronecker;
  }
  throw ConfigError("unknown early fusion mode '" + std::string(id) + "'");
}

namespace {

void check_early_inputs(const NamedVectors& vectors) {
  if (vectors.empty()) {
    throw DataError("early fusion needs at least one modality");
  }
  for (const auto& [name, v] : vectors) {
    if (v.empty()) {
      throw DataError("modality '" + name + "' contributes an empty feature vector");
    }
  }
}

}  // namespace

FeatureVector early_concat(const NamedVectors& vectors) {
  check_early_inputs(vectors);
  FeatureVector out;
  for (const auto& [name, v] : vectors) {
    out.append(v, name + ":");
  }
  return out;
}

FeatureVector early_kronecker(const NamedVectors& vectors, bool augment) {
  check_early_inputs(vectors);
  std::vector<std::string> names = {""};
  std::vector<double> values = {1.0};
  for (const auto& [modality, v] : vectors) {
    std::vector<std::string> rn;
    std::vector<double> rv;
    for (std::size_t k = 0; k < v.size(); ++k) {
      rn.push_back(modality + ":" + v.names()[k]);
      rv.push_back(v[k]);
    }
    if (augment) {
      rn.push_back(modality + ":1");
      rv.push_back(1.0);
    }
    std::vector<std::string> nn;
    std::vector<double> nv;
    nn.reserve(names.size() * rn.size());
    nv.reserve(values.size() * rv.size());
    for (std::size_t a = 0; a < values.size(); ++a) {
      for (std::size_t b = 0; b < rv.size(); ++b) {
        nn.push_back(names[a].empty() ? rn[b] : names[a] + "*" + rn[b]);
        nv.push_back(values[a] * rv[b]);
      }
    }
    names = std::move(nn);
    values = std::move(nv);
  }
  return FeatureVector(std::move(names), std::move(values));
}

FeatureVector early_fuse(EarlyFusion mode, const NamedVectors& vectors, bool augment) {
  return mode == EarlyFusion::Concat ? early_concat(vectors) : early_kronecker(vectors, augment);
}

}  // namespace mmfuse
