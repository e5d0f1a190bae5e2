#include "mmfuse/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <map>
#include <set>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mmfuse/error.hpp"
#include "mmfuse/io.hpp"
#include "mmfuse/parallel.hpp"

namespace mmfuse {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// small helpers

std::string fmt(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string fmt_exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    out += (i ? sep : "") + parts[i];
  }
  return out;
}

std::string flow_label(const std::vector<std::string>& modalities) { return join(modalities, "+"); }

std::string row_label(const std::string& aggregation, const std::string& rule) {
  return aggregation + "+" + rule;
}

// Column-aligned rendering of a table for humans.
std::string aligned(const CsvTable& t, const std::string& title) {
  std::vector<std::size_t> width(t.header.size(), 0);
  const auto widen = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size() && i < width.size(); ++i) {
      width[i] = std::max(width[i], r[i].size());
    }
  };
  widen(t.header);
  for (const auto& r : t.rows) {
    widen(r);
  }
  std::string out = title.empty() ? "" : title + "\n";
  const auto emit = [&](const std::vector<std::string>& r) {
    std::string line;
    for (std::size_t i = 0; i < r.size(); ++i) {
      auto cell = r[i];
      cell.resize(width[i], ' ');
      line += (i ? "  " : "") + cell;
    }
    while (!line.empty() && line.back() == ' ') {
      line.pop_back();
    }
    out += line + "\n";
  };
  emit(t.header);
  std::size_t total = 0;
  for (auto w : width) {
    total += w;
  }
  out += std::string(total + 2 * (width.empty() ? 0 : width.size() - 1), '-') + "\n";
  for (const auto& r : t.rows) {
    emit(r);
  }
  return out;
}

void write_table(const fs::path& dir, const std::string& stem, const CsvTable& t,
                 const std::string& title) {
  write_text(dir / (stem + ".csv"), format_csv(t));
  write_text(dir / (stem + ".txt"), aligned(t, title));
}

// ---------------------------------------------------------------------------
// config parsing

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) {
    throw ConfigError(where + " must be an object");
  }
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.contains(key)) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

template <class T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) {
    out = j.at(key).get<T>();
  }
}

MaxFeatures parse_max_features(const json& j) {
  MaxFeatures mf;
  if (j.is_number_integer()) {
    mf.rule = MaxFeatures::Rule::Fixed;
    mf.count = j.get<int>();
    if (mf.count < 1) {
      throw ConfigError("forest.max_features must be positive");
    }
    return mf;
  }
  const auto s = j.get<std::string>();
  if (s == "sqrt") {
    mf.rule = MaxFeatures::Rule::Sqrt;
  } else if (s == "log2") {
    mf.rule = MaxFeatures::Rule::Log2;
  } else if (s == "all") {
    mf.rule = MaxFeatures::Rule::All;
  } else {
    throw ConfigError("forest.max_features must be sqrt, log2, all or an integer");
  }
  return mf;
}

json max_features_json(const MaxFeatures& mf) {
  switch (mf.rule) {
    case MaxFeatures::Rule::Sqrt: return "sqrt";
    case MaxFeatures::Rule::Log2: return "log2";
    case MaxFeatures::Rule::All: return "all";
    case MaxFeatures::Rule::Fixed: return mf.count;
  }
  return "sqrt";
}

Alternative parse_alternative(const std::string& s) {
  if (s == "greater") {
    return Alternative::Greater;
  }
  if (s == "less") {
    return Alternative::Less;
  }
  if (s == "two-sided") {
    return Alternative::TwoSided;
  }
  throw ConfigError("compare.wilcoxon_alternative must be greater, less or two-sided");
}

std::string alternative_name(Alternative a) {
  switch (a) {
    case Alternative::Greater: return "greater";
    case Alternative::Less: return "less";
    case Alternative::TwoSided: return "two-sided";
  }
  return "greater";
}

template <class E, class Parse>
std::vector<E> parse_ids(const json& j, Parse parse, const std::string& where) {
  std::vector<E> out;
  for (const auto& s : j) {
    try {
      out.push_back(parse(s.template get<std::string>()));
    } catch (const std::invalid_argument&) {
      throw ConfigError(where + ": unknown identifier '" + s.template get<std::string>() + "'");
    } catch (const DataError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  return out;
}

template <class E>
json id_list(const std::vector<E>& v) {
  json out = json::array();
  for (auto e : v) {
    out.push_back(std::string(to_string(e)));
  }
  return out;
}

}  // namespace

RunConfig RunConfig::from_json(const std::string& text, const fs::path& base_dir) {
  RunConfig c;
  try {
    const auto j = json::parse(text);
    check_keys(j,
               {"manifest", "output_dir", "seed", "workers", "subsets", "aggregations", "rules",
                "early_fusion", "early_aggregations", "kronecker_augment", "unimodal_flows",
                "forest", "features", "preprocess", "compare", "synthetic"},
               "config");
    if (j.contains("manifest")) {
      c.manifest = j.at("manifest").get<std::string>();
    }
    if (j.contains("output_dir")) {
      c.output_dir = j.at("output_dir").get<std::string>();
    }
    read_if(j, "seed", c.seed);
    read_if(j, "workers", c.workers);
    read_if(j, "subsets", c.subsets);
    if (j.contains("aggregations")) {
      c.aggregations = parse_ids<Aggregation>(j.at("aggregations"), parse_aggregation, "aggregations");
    }
    if (j.contains("rules")) {
      c.rules = parse_ids<FusionRule>(j.at("rules"), parse_fusion_rule, "rules");
    }
    if (j.contains("early_fusion")) {
      c.early = parse_ids<EarlyFusion>(j.at("early_fusion"), parse_early_fusion, "early_fusion");
    }
    if (j.contains("early_aggregations")) {
      c.early_aggregations =
          parse_ids<Aggregation>(j.at("early_aggregations"), parse_aggregation, "early_aggregations");
    }
    read_if(j, "kronecker_augment", c.kronecker_augment);
    read_if(j, "unimodal_flows", c.unimodal_flows);
    if (j.contains("forest")) {
      const auto& f = j.at("forest");
      check_keys(f, {"n_trees", "max_depth", "min_samples_split", "max_features"}, "forest");
      read_if(f, "n_trees", c.forest.n_trees);
      if (f.contains("max_depth") && !f.at("max_depth").is_null()) {
        c.forest.max_depth = f.at("max_depth").get<int>();
      }
      read_if(f, "min_samples_split", c.forest.min_samples_split);
      if (f.contains("max_features")) {
        c.forest.max_features = parse_max_features(f.at("max_features"));
      }
    }
    if (j.contains("features")) {
      const auto& f = j.at("features");
      check_keys(f, {"glcm_levels", "glcm_distance", "lbp_points", "lbp_radius", "smoothness"},
                 "features");
      read_if(f, "glcm_levels", c.features.glcm_levels);
      read_if(f, "glcm_distance", c.features.glcm_distance);
      read_if(f, "lbp_points", c.features.lbp.points);
      read_if(f, "lbp_radius", c.features.lbp.radius);
      read_if(f, "smoothness", c.features.smoothness);
    }
    if (j.contains("preprocess")) {
      const auto& p = j.at("preprocess");
      check_keys(p, {"patch_window", "patch_stride", "background_threshold", "max_background_fraction"},
                 "preprocess");
      read_if(p, "patch_window", c.preprocess.patch_window);
      read_if(p, "patch_stride", c.preprocess.patch_stride);
      read_if(p, "background_threshold", c.preprocess.background_threshold);
      read_if(p, "max_background_fraction", c.preprocess.max_background_fraction);
    }
    if (j.contains("compare")) {
      const auto& p = j.at("compare");
      check_keys(p, {"friedman_alpha", "wilcoxon_alpha", "wilcoxon_alternative"}, "compare");
      read_if(p, "friedman_alpha", c.compare.friedman_alpha);
      read_if(p, "wilcoxon_alpha", c.compare.wilcoxon_alpha);
      if (p.contains("wilcoxon_alternative")) {
        c.compare.wilcoxon_alternative = parse_alternative(p.at("wilcoxon_alternative").get<std::string>());
      }
    }
    if (j.contains("synthetic")) {
      const auto& s = j.at("synthetic");
      check_keys(s, {"patients", "samples_per_patient", "patient_spread", "sample_noise", "modalities"},
                 "synthetic");
      read_if(s, "patients", c.synthetic.patients);
      read_if(s, "samples_per_patient", c.synthetic.samples_per_patient);
      read_if(s, "patient_spread", c.synthetic.patient_spread);
      read_if(s, "sample_noise", c.synthetic.sample_noise);
      if (s.contains("modalities")) {
        c.synthetic.modalities.clear();
        for (const auto& m : s.at("modalities")) {
          check_keys(m, {"name", "informativeness", "dims"}, "synthetic.modalities");
          SyntheticModality sm;
          sm.name = m.at("name").get<std::string>();
          read_if(m, "informativeness", sm.informativeness);
          read_if(m, "dims", sm.dims);
          c.synthetic.modalities.push_back(sm);
        }
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }

  if (!c.manifest.empty() && c.manifest.is_relative() && !base_dir.empty()) {
    c.manifest = base_dir / c.manifest;
  }
  if (c.output_dir.is_relative() && !base_dir.empty()) {
    c.output_dir = base_dir / c.output_dir;
  }
  if (c.workers < 0) {
    throw ConfigError("workers must be >= 0 (0 uses every available thread)");
  }
  if (c.aggregations.empty() && !c.unimodal_flows && c.early.empty()) {
    throw ConfigError("experiment grid is empty");
  }
  if (c.rules.empty() && c.early.empty() && !c.unimodal_flows) {
    throw ConfigError("experiment grid is empty");
  }
  for (auto a : c.early_aggregations) {
    if (a == Aggregation::ScoreMean && !c.early.empty()) {
      throw ConfigError("early fusion cannot be combined with A2 (score-level aggregation)");
    }
  }
  if (c.forest.n_trees < 1 || c.forest.min_samples_split < 2 ||
      (c.forest.max_depth && *c.forest.max_depth < 0)) {
    throw ConfigError("forest parameters out of range");
  }
  if (c.features.glcm_levels < 2 || c.features.glcm_distance < 1 || c.features.lbp.points < 1 ||
      c.features.lbp.radius < 1) {
    throw ConfigError("feature parameters out of range");
  }
  if (c.preprocess.patch_window < 1 || c.preprocess.patch_stride < 1 ||
      c.preprocess.max_background_fraction < 0.0 || c.preprocess.max_background_fraction > 1.0) {
    throw ConfigError("preprocess parameters out of range");
  }
  for (const auto& s : c.subsets) {
    if (s.empty()) {
      throw ConfigError("subsets must be nonempty");
    }
  }
  return c;
}

std::string RunConfig::to_json() const {
  json j;
  j["manifest"] = manifest.generic_string();
  j["output_dir"] = output_dir.generic_string();
  j["seed"] = seed;
  j["workers"] = workers;
  j["subsets"] = subsets;
  j["aggregations"] = id_list(aggregations);
  j["rules"] = id_list(rules);
  j["early_fusion"] = id_list(early);
  j["early_aggregations"] = id_list(early_aggregations);
  j["kronecker_augment"] = kronecker_augment;
  j["unimodal_flows"] = unimodal_flows;
  j["forest"] = {{"n_trees", forest.n_trees},
                 {"max_depth", forest.max_depth ? json(*forest.max_depth) : json(nullptr)},
                 {"min_samples_split", forest.min_samples_split},
                 {"max_features", max_features_json(forest.max_features)}};
  j["features"] = {{"glcm_levels", features.glcm_levels},
                   {"glcm_distance", features.glcm_distance},
                   {"lbp_points", features.lbp.points},
                   {"lbp_radius", features.lbp.radius},
                   {"smoothness", features.smoothness}};
  j["preprocess"] = {{"patch_window", preprocess.patch_window},
                     {"patch_stride", preprocess.patch_stride},
                     {"background_threshold", preprocess.background_threshold},
                     {"max_background_fraction", preprocess.max_background_fraction}};
  j["compare"] = {{"friedman_alpha", compare.friedman_alpha},
                  {"wilcoxon_alpha", compare.wilcoxon_alpha},
                  {"wilcoxon_alternative", alternative_name(compare.wilcoxon_alternative)}};
  json mods = json::array();
  for (const auto& m : synthetic.modalities) {
    mods.push_back({{"name", m.name}, {"informativeness", m.informativeness}, {"dims", m.dims}});
  }
  j["synthetic"] = {{"patients", synthetic.patients},
                    {"samples_per_patient", synthetic.samples_per_patient},
                    {"patient_spread", synthetic.patient_spread},
                    {"sample_noise", synthetic.sample_noise},
                    {"modalities", mods}};
  return j.dump(2) + "\n";
}

RunConfig load_run_config(const fs::path& path) {
  if (!fs::exists(path)) {
    throw ConfigError("config not found: " + path.string());
  }
  auto c = RunConfig::from_json(read_text(path), path.parent_path());
  if (c.manifest.empty()) {
    throw ConfigError("config does not name a manifest");
  }
  if (!fs::exists(c.manifest)) {
    throw ConfigError("manifest not found: " + c.manifest.string());
  }
  return c;
}

// ---------------------------------------------------------------------------
// results document

ResultsDoc ResultsDoc::from_grid(const GridResult& grid, const FeatureDataset& data,
                                 const RunConfig& config) {
  ResultsDoc doc;
  doc.seed = config.seed;
  doc.modalities = data.modalities;
  for (auto a : config.aggregations) {
    doc.aggregations.emplace_back(to_string(a));
  }
  for (auto r : config.rules) {
    doc.rules.emplace_back(to_string(r));
  }
  for (auto e : config.early) {
    doc.early_modes.emplace_back(to_string(e));
  }
  doc.subsets = config.subsets.empty() ? default_subsets(data.modalities) : config.subsets;
  const auto add = [&](const ExperimentResult& r, const std::string& flow) {
    CellRecord cell;
    cell.id = r.config.id();
    cell.flow = flow;
    cell.aggregation = std::string(to_string(r.config.aggregation));
    if (r.config.rule) {
      cell.method = std::string(to_string(*r.config.rule));
    } else if (r.config.early) {
      cell.method = std::string(to_string(*r.config.early));
    } else {
      cell.method = "single";
    }
    cell.modalities = r.config.modalities;
    cell.auc = r.auc;
    cell.patients = r.per_patient;
    doc.cells.push_back(std::move(cell));
  };
  for (const auto& r : grid.late) {
    add(r, "late");
  }
  for (const auto& r : grid.early) {
    add(r, "early");
  }
  for (const auto& r : grid.unimodal) {
    add(r, "unimodal");
  }
  return doc;
}

std::string ResultsDoc::to_json() const {
  json cells_j = json::array();
  for (const auto& c : cells) {
    json patients = json::array();
    for (const auto& p : c.patients) {
      patients.push_back({{"id", p.patient_id}, {"label", p.label}, {"score", p.score}});
    }
    cells_j.push_back({{"id", c.id},
                       {"flow", c.flow},
                       {"aggregation", c.aggregation},
                       {"method", c.method},
                       {"modalities", c.modalities},
                       {"auc", c.auc},
                       {"patients", patients}});
  }
  json j = {{"format", "mmfuse-results"},
            {"version", 1},
            {"seed", seed},
            {"modalities", modalities},
            {"aggregations", aggregations},
            {"rules", rules},
            {"early_modes", early_modes},
            {"subsets", subsets},
            {"cells", cells_j}};
  return j.dump(1) + "\n";
}

ResultsDoc ResultsDoc::from_json(const std::string& text) {
  ResultsDoc doc;
  try {
    const auto j = json::parse(text);
    if (j.value("format", std::string()) != "mmfuse-results" || j.value("version", 0) != 1) {
      throw DataError("not an mmfuse results document (format mmfuse-results, version 1)");
    }
    doc.seed = j.at("seed").get<std::uint64_t>();
    doc.modalities = j.at("modalities").get<std::vector<std::string>>();
    doc.aggregations = j.at("aggregations").get<std::vector<std::string>>();
    doc.rules = j.at("rules").get<std::vector<std::string>>();
    doc.early_modes = j.at("early_modes").get<std::vector<std::string>>();
    doc.subsets = j.at("subsets").get<std::vector<std::vector<std::string>>>();
    for (const auto& jc : j.at("cells")) {
      CellRecord c;
      c.id = jc.at("id").get<std::string>();
      c.flow = jc.at("flow").get<std::string>();
      c.aggregation = jc.at("aggregation").get<std::string>();
      c.method = jc.at("method").get<std::string>();
      c.modalities = jc.at("modalities").get<std::vector<std::string>>();
      c.auc = jc.at("auc").get<double>();
      for (const auto& jp : jc.at("patients")) {
        c.patients.push_back(
            {jp.at("id").get<std::string>(), jp.at("label").get<int>(), jp.at("score").get<double>()});
      }
      doc.cells.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed results document: ") + e.what());
  }
  return doc;
}

const CellRecord* ResultsDoc::find(const std::string& flow, const std::string& aggregation,
                                   const std::string& method,
                                   const std::vector<std::string>& mods) const {
  for (const auto& c : cells) {
    if (c.flow == flow && c.aggregation == aggregation && c.method == method && c.modalities == mods) {
      return &c;
    }
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// comparison

namespace {

const CellRecord& require(const ResultsDoc& doc, const std::string& flow, const std::string& agg,
                          const std::string& method, const std::vector<std::string>& mods) {
  const auto* c = doc.find(flow, agg, method, mods);
  if (!c) {
    throw DataError("results lack the " + flow + " cell " + agg + "+" + method + " for " +
                    flow_label(mods));
  }
  return *c;
}

std::vector<std::pair<double, double>> error_pairs(const CellRecord& other, const CellRecord& best) {
  if (other.patients.size() != best.patients.size()) {
    throw DataError("cells " + other.id + " and " + best.id + " cover different patients");
  }
  std::vector<std::pair<double, double>> pairs;
  for (std::size_t i = 0; i < best.patients.size(); ++i) {
    const auto& a = other.patients[i];
    const auto& b = best.patients[i];
    if (a.patient_id != b.patient_id) {
      throw DataError("cells " + other.id + " and " + best.id + " list patients in different orders");
    }
    pairs.emplace_back(std::abs(a.label - a.score), std::abs(b.label - b.score));
  }
  return pairs;
}

}  // namespace

ComparisonReport compare_results(const ResultsDoc& doc, const CompareParams& params) {
  ComparisonReport rep;
  bool with_unimodal = !doc.modalities.empty();
  for (const auto& m : doc.modalities) {
    for (const auto& a : doc.aggregations) {
      with_unimodal = with_unimodal && doc.find("unimodal", a, "single", {m}) != nullptr;
    }
  }
  if (with_unimodal) {
    rep.flows = doc.modalities;
  }
  for (const auto& s : doc.subsets) {
    rep.flows.push_back(flow_label(s));
  }
  for (const auto& a : doc.aggregations) {
    for (const auto& r : doc.rules) {
      rep.rows.push_back(row_label(a, r));
      std::vector<double> row;
      if (with_unimodal) {
        for (const auto& m : doc.modalities) {
          row.push_back(require(doc, "unimodal", a, "single", {m}).auc);
        }
      }
      for (const auto& s : doc.subsets) {
        row.push_back(require(doc, "late", a, r, s).auc);
      }
      rep.auc_table.push_back(std::move(row));
    }
  }

  if (!rep.auc_table.empty() && !rep.flows.empty()) {
    rep.ranking = rank_flows(rep.auc_table);
    const auto mean = rep.ranking.ranks.mean_ranks();
    rep.best_flow = argmax_lowest(mean);
    if (rep.flows.size() >= 3 && rep.rows.size() >= 2) {
      try {
        rep.friedman = friedman_iman_davenport(rep.ranking.ranks, params.friedman_alpha);
      } catch (const DataError& e) {
        rep.notes.push_back(std::string("Friedman test skipped: ") + e.what());
      }
    } else {
      rep.notes.push_back("Friedman test skipped: needs at least 3 flows and 2 rule combinations");
    }
    if (rep.flows.size() >= 2) {
      rep.posthoc = bonferroni_dunn(rep.ranking.ranks, rep.best_flow, params.friedman_alpha);
    }
  }

  if (!doc.subsets.empty() && !rep.rows.empty()) {
    std::vector<std::vector<double>> multi;
    const auto offset = with_unimodal ? doc.modalities.size() : 0;
    for (const auto& row : rep.auc_table) {
      multi.emplace_back(row.begin() + static_cast<std::ptrdiff_t>(offset), row.end());
    }
    std::vector<std::vector<std::size_t>> members;
    for (const auto& s : doc.subsets) {
      std::vector<std::size_t> idx;
      for (const auto& m : s) {
        const auto it = std::find(doc.modalities.begin(), doc.modalities.end(), m);
        if (it == doc.modalities.end()) {
          throw DataError("subset member '" + m + "' is not a modality of the results");
        }
        idx.push_back(static_cast<std::size_t>(it - doc.modalities.begin()));
      }
      members.push_back(std::move(idx));
    }
    rep.contribution = rank_unimodal_contribution(multi, members, doc.modalities.size());
  }

  for (const auto& s : doc.subsets) {
    SubsetRuleComparison cmp;
    cmp.subset = s;
    std::vector<const CellRecord*> cells;
    std::vector<double> aucs;
    for (const auto& a : doc.aggregations) {
      for (const auto& r : doc.rules) {
        cells.push_back(&require(doc, "late", a, r, s));
        aucs.push_back(cells.back()->auc);
      }
    }
    if (cells.empty()) {
      continue;
    }
    cmp.best_row = argmax_lowest(aucs);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      RuleWilcoxon rw;
      rw.rule = rep.rows[i];
      rw.auc = aucs[i];
      if (i != cmp.best_row) {
        const auto pairs = error_pairs(*cells[i], *cells[cmp.best_row]);
        if (pairs.size() >= 5) {
          rw.test = wilcoxon_signed_rank(pairs, params.wilcoxon_alpha, params.wilcoxon_alternative);
        }
      }
      cmp.rows.push_back(std::move(rw));
    }
    if (cells.front()->patients.size() < 5) {
      rep.notes.push_back("Wilcoxon tests for " + flow_label(s) + " skipped: fewer than 5 patients");
    }
    rep.rule_comparisons.push_back(std::move(cmp));
  }

  const bool have_a1 =
      std::find(doc.aggregations.begin(), doc.aggregations.end(), "A1") != doc.aggregations.end();
  for (const auto& s : doc.subsets) {
    for (const auto& mode : doc.early_modes) {
      if (!have_a1) {
        continue;
      }
      const double early_auc = require(doc, "early", "A1", mode, s).auc;
      std::vector<double> late;
      for (const auto& r : doc.rules) {
        late.push_back(require(doc, "late", "A1", r, s).auc);
      }
      const std::vector<double> early(late.size(), early_auc);
      const auto wtl = count_win_tie_loss(late, early);
      rep.sign_tests.push_back({s, mode, sign_test(wtl.wins, wtl.ties, wtl.losses)});
    }
  }
  if (!have_a1 && !doc.early_modes.empty()) {
    rep.notes.push_back("late-vs-early sign tests skipped: no A1 late-fusion cells");
  }
  return rep;
}

// ---------------------------------------------------------------------------
// commands

namespace {

FeatureDataset load_dataset(const RunConfig& config, int workers) {
  const auto manifest = load_manifest(config.manifest);
  return materialize(manifest, config.preprocess, config.features, workers);
}

int resolve_workers(int workers) { return workers == 0 ? available_workers() : workers; }

std::string report_text(const ComparisonReport& rep, const std::map<std::string, CsvTable>& tables) {
  std::string out;
  const std::pair<const char*, const char*> order[] = {
      {"flow_ranks", "Flow ranks (best flow per rule combination = M)"},
      {"friedman", "Friedman test with Iman-Davenport correction"},
      {"posthoc", "Bonferroni-Dunn post-hoc against the best flow"},
      {"modality_contribution", "Modality contribution from multimodal flow ranks"},
      {"best_rule_wilcoxon", "Best rule per modality combination, Wilcoxon signed-rank vs best"},
      {"sign_tests", "Late (A1) vs early fusion, win-tie-loss sign tests"}};
  for (const auto& [key, title] : order) {
    if (tables.contains(key)) {
      out += aligned(tables.at(key), title) + "\n";
    }
  }
  for (const auto& n : rep.notes) {
    out += "note: " + n + "\n";
  }
  return out;
}

}  // namespace

void cmd_extract(const RunConfig& config, const fs::path& out_dir, int workers) {
  const auto manifest = load_manifest(config.manifest);
  const auto data = materialize(manifest, config.preprocess, config.features, resolve_workers(workers));
  DatasetManifest features;
  for (std::size_t m = 0; m < data.modalities.size(); ++m) {
    const auto rel = fs::path("features") / (data.modalities[m] + ".csv");
    write_text(out_dir / rel, format_csv(feature_table(data, m)));
    features.modalities.push_back({data.modalities[m], ModalityKind::FeatureTable, rel, {}});
  }
  for (const auto& p : data.patients) {
    features.patients.push_back({p.id, p.label, {}});
  }
  write_text(out_dir / "features_manifest.json", manifest_to_json(features));
}

ResultsDoc cmd_run(const RunConfig& config, const fs::path& out_dir, int workers) {
  const auto data = load_dataset(config, resolve_workers(workers));
  GridSpec spec;
  spec.subsets = config.subsets.empty() ? default_subsets(data.modalities) : config.subsets;
  for (const auto& s : spec.subsets) {
    for (const auto& m : s) {
      if (std::find(data.modalities.begin(), data.modalities.end(), m) == data.modalities.end()) {
        throw ConfigError("subset member '" + m + "' is not a modality of the manifest");
      }
    }
  }
  spec.aggregations = config.aggregations;
  spec.rules = config.rules;
  spec.early = config.early;
  spec.kronecker_augment = config.kronecker_augment;
  spec.unimodal = config.unimodal_flows;
  spec.forest = config.forest;
  spec.seed = config.seed;
  const auto grid = run_grid(data, spec, resolve_workers(workers));
  auto doc = ResultsDoc::from_grid(grid, data, config);
  doc.subsets = spec.subsets;

  write_text(out_dir / "results.json", doc.to_json());

  CsvTable late;
  late.header = {"rule"};
  for (const auto& s : doc.subsets) {
    late.header.push_back(flow_label(s));
  }
  for (const auto& a : doc.aggregations) {
    for (const auto& r : doc.rules) {
      std::vector<std::string> row = {row_label(a, r)};
      for (const auto& s : doc.subsets) {
        row.push_back(fmt(require(doc, "late", a, r, s).auc, 4));
      }
      late.rows.push_back(std::move(row));
    }
  }
  if (!late.rows.empty()) {
    write_table(out_dir, "grid_auc", late, "Late fusion AUC (rule combination x modality combination)");
  }

  if (!doc.early_modes.empty()) {
    CsvTable early;
    early.header = late.header;
    early.header.front() = "early_fusion";
    for (const auto& mode : doc.early_modes) {
      std::vector<std::string> row = {"A1+" + mode};
      for (const auto& s : doc.subsets) {
        row.push_back(fmt(require(doc, "early", "A1", mode, s).auc, 4));
      }
      early.rows.push_back(std::move(row));
    }
    write_table(out_dir, "early_auc", early, "Early fusion AUC");
  }

  if (config.unimodal_flows) {
    CsvTable uni;
    uni.header = {"aggregation"};
    uni.header.insert(uni.header.end(), doc.modalities.begin(), doc.modalities.end());
    for (const auto& a : doc.aggregations) {
      std::vector<std::string> row = {a};
      for (const auto& m : doc.modalities) {
        row.push_back(fmt(require(doc, "unimodal", a, "single", {m}).auc, 4));
      }
      uni.rows.push_back(std::move(row));
    }
    write_table(out_dir, "unimodal_auc", uni, "Unimodal AUC");
  }

  for (const auto& c : doc.cells) {
    CsvTable t;
    t.header = {"patient_id", "label", "score"};
    for (const auto& p : c.patients) {
      t.rows.push_back({p.patient_id, std::to_string(p.label), fmt_exact(p.score)});
    }
    write_text(out_dir / "cells" / (c.id + ".csv"), format_csv(t));
  }
  return doc;
}

ComparisonReport cmd_compare(const fs::path& results_json, const fs::path& out_dir,
                             const CompareParams& params) {
  if (!fs::exists(results_json)) {
    throw ConfigError("results not found: " + results_json.string());
  }
  const auto doc = ResultsDoc::from_json(read_text(results_json));
  const auto rep = compare_results(doc, params);
  std::map<std::string, CsvTable> tables;

  if (!rep.auc_table.empty() && !rep.flows.empty()) {
    CsvTable ranks;
    ranks.header = {"rule"};
    ranks.header.insert(ranks.header.end(), rep.flows.begin(), rep.flows.end());
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
      std::vector<std::string> row = {rep.rows[i]};
      for (std::size_t f = 0; f < rep.flows.size(); ++f) {
        row.push_back(fmt(rep.ranking.ranks(i, f), 1));
      }
      ranks.rows.push_back(std::move(row));
    }
    std::vector<std::string> mean_row = {"mean_rank"};
    std::vector<std::string> norm_row = {"normalized"};
    const auto mean = rep.ranking.ranks.mean_ranks();
    for (std::size_t f = 0; f < rep.flows.size(); ++f) {
      mean_row.push_back(fmt(mean[f], 4));
      norm_row.push_back(fmt(rep.ranking.normalized[f], 4));
    }
    ranks.rows.push_back(std::move(mean_row));
    ranks.rows.push_back(std::move(norm_row));
    tables["flow_ranks"] = ranks;

    if (rep.friedman) {
      const auto& fr = *rep.friedman;
      CsvTable t;
      t.header = {"rows", "flows", "chi_square", "F_F", "df1", "df2", "p_value", "alpha", "significant"};
      t.rows.push_back({std::to_string(rep.rows.size()), std::to_string(rep.flows.size()),
                        fmt(fr.chi_square), fmt(fr.statistic), fmt(fr.df1, 0), fmt(fr.df2, 0),
                        fmt(fr.p_value), fmt(fr.alpha, 3), fr.significant ? "yes" : "no"});
      tables["friedman"] = t;
    }
    CsvTable ph;
    ph.header = {"flow", "mean_rank", "best", "z", "p_value", "threshold", "significant"};
    const double threshold =
        rep.flows.size() > 1 ? params.friedman_alpha / static_cast<double>(rep.flows.size() - 1) : 0.0;
    for (std::size_t f = 0; f < rep.flows.size(); ++f) {
      if (f == rep.best_flow) {
        ph.rows.push_back({rep.flows[f], fmt(mean[f], 4), "yes", "", "", "", ""});
        continue;
      }
      for (const auto& r : rep.posthoc) {
        if (r.column == f) {
          ph.rows.push_back({rep.flows[f], fmt(mean[f], 4), "no", fmt(r.z, 4), fmt(r.p_value),
                             fmt(threshold), r.significant ? "yes" : "no"});
        }
      }
    }
    tables["posthoc"] = ph;
  }

  if (rep.contribution) {
    CsvTable t;
    t.header = {"modality", "accumulated", "maximum", "normalized"};
    for (std::size_t m = 0; m < doc.modalities.size(); ++m) {
      t.rows.push_back({doc.modalities[m], fmt(rep.contribution->accumulated[m], 1),
                        fmt(rep.contribution->maximum[m], 1), fmt(rep.contribution->normalized[m], 4)});
    }
    tables["modality_contribution"] = t;
  }

  if (!rep.rule_comparisons.empty()) {
    CsvTable t;
    t.header = {"modalities", "rule", "auc", "best", "r_plus", "r_minus", "z", "p_value", "significant"};
    for (const auto& cmp : rep.rule_comparisons) {
      for (std::size_t i = 0; i < cmp.rows.size(); ++i) {
        const auto& rw = cmp.rows[i];
        std::vector<std::string> row = {flow_label(cmp.subset), rw.rule, fmt(rw.auc, 4),
                                        i == cmp.best_row ? "yes" : "no"};
        if (rw.test) {
          row.insert(row.end(), {fmt(rw.test->r_plus, 1), fmt(rw.test->r_minus, 1),
                                 fmt(rw.test->statistic, 4), fmt(rw.test->p_value),
                                 rw.test->significant ? "yes" : "no"});
        } else {
          row.insert(row.end(), {"", "", "", "", ""});
        }
        t.rows.push_back(std::move(row));
      }
    }
    tables["best_rule_wilcoxon"] = t;
  }

  if (!rep.sign_tests.empty()) {
    CsvTable t;
    t.header = {"modalities", "early_fusion", "win-tie-loss", "wins", "ties", "losses", "threshold",
                "significant"};
    for (const auto& c : rep.sign_tests) {
      const auto& r = c.result;
      t.rows.push_back({flow_label(c.subset), c.early_mode,
                        std::to_string(r.wins) + "-" + std::to_string(r.ties) + "-" + std::to_string(r.losses),
                        std::to_string(r.wins), std::to_string(r.ties), std::to_string(r.losses),
                        fmt(r.threshold, 4), r.significant ? "yes" : "no"});
    }
    tables["sign_tests"] = t;
  }

  for (const auto& [name, table] : tables) {
    write_text(out_dir / (name + ".csv"), format_csv(table));
  }
  write_text(out_dir / "report.txt", report_text(rep, tables));

  json j = json::object();
  for (const auto& [name, table] : tables) {
    json rows = json::array();
    for (const auto& r : table.rows) {
      json obj = json::object();
      for (std::size_t c = 0; c < table.header.size(); ++c) {
        obj[table.header[c]] = r[c];
      }
      rows.push_back(obj);
    }
    j[name] = rows;
  }
  j["notes"] = rep.notes;
  write_text(out_dir / "report.json", j.dump(1) + "\n");
  return rep;
}

void cmd_synth(const SyntheticSpec& spec, const fs::path& out_dir) {
  const auto manifest = make_synthetic_manifest(spec);
  write_text(out_dir / "manifest.json", manifest_to_json(manifest));
  RunConfig config;
  config.manifest = "manifest.json";
  config.output_dir = "results";
  config.seed = spec.seed;
  config.synthetic = spec;
  write_text(out_dir / "config.json", config.to_json());
}

// ---------------------------------------------------------------------------
// entry point

int run_cli(int argc, char** argv) {
  CLI::App app{"Multimodal late-fusion pipeline: feature extraction, LOPO grid, statistics"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out;
  std::string results_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;

  const auto common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("--config", config_path, "run configuration (JSON)");
    if (config_required) {
      opt->required();
    }
    sub->add_option("--seed", seed, "override the configured seed");
    sub->add_option("--workers", workers, "worker threads (0 = all available)");
    sub->add_option("--out", out, "output directory (overrides the config)");
  };
  auto* extract = app.add_subcommand("extract", "pre-process and write per-modality feature tables");
  common(extract, true);
  auto* run = app.add_subcommand("run", "run the LOPO experiment grid");
  common(run, true);
  auto* compare = app.add_subcommand("compare", "statistical comparison of a results document");
  common(compare, false);
  compare->add_option("--results", results_path, "results.json (default: <output_dir>/results.json)");
  auto* synth = app.add_subcommand("synth", "write a synthetic cohort manifest and config");
  common(synth, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth->parsed()) {
      RunConfig base;
      if (!config_path.empty()) {
        if (!fs::exists(config_path)) {
          throw ConfigError("config not found: " + config_path);
        }
        base = RunConfig::from_json(read_text(config_path), fs::path(config_path).parent_path());
      }
      auto spec = base.synthetic;
      spec.seed = seed.value_or(base.seed);
      cmd_synth(spec, out.empty() ? fs::path("synthetic") : fs::path(out));
      return kExitOk;
    }

    RunConfig config;
    if (compare->parsed() && config_path.empty()) {
      if (results_path.empty()) {
        throw ConfigError("compare needs --config or --results");
      }
    } else {
      config = load_run_config(config_path);
    }
    if (seed) {
      config.seed = *seed;
    }
    const int nworkers = workers.value_or(config.workers);
    if (nworkers < 0) {
      throw ConfigError("--workers must be >= 0");
    }
    const fs::path out_dir = out.empty() ? config.output_dir : fs::path(out);

    if (extract->parsed()) {
      cmd_extract(config, out_dir, nworkers);
    } else if (run->parsed()) {
      cmd_run(config, out_dir, nworkers);
    } else if (compare->parsed()) {
      const fs::path results = results_path.empty() ? out_dir / "results.json" : fs::path(results_path);
      const fs::path dest = out.empty() && config_path.empty() ? results.parent_path() / "compare"
                                                               : out_dir / "compare";
      cmd_compare(results, dest, config.compare);
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "mmfuse: configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "mmfuse: data error: " << e.what() << "\n";
    return kExitData;
  } catch (const InvariantError& e) {
    std::cerr << "mmfuse: internal error: " << e.what() << "\n";
    return kExitInternal;
  } catch (const std::exception& e) {
    std::cerr << "mmfuse: internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace mmfuse
