#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "mmfuse/cli.hpp"
#include "mmfuse/error.hpp"
#include "mmfuse/io.hpp"

using namespace mmfuse;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("mmfuse_test_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

int invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "mmfuse");
  std::vector<char*> argv;
  for (auto& a : args) {
    argv.push_back(a.data());
  }
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

// A synthetic cohort plus a config that keeps the forest small.
fs::path synth_config(const fs::path& dir, const std::string& extra = "") {
  write(dir / "base.json", R"({"synthetic": {"patients": 12}})");
  REQUIRE(invoke({"synth", "--config", (dir / "base.json").string(), "--out", dir.string(), "--seed", "3"}) ==
          kExitOk);
  write(dir / "config.json", R"({"manifest": "manifest.json", "seed": 3, "forest": {"n_trees": 8},
      "synthetic": {"patients": 12})" + extra + "}");
  return dir / "config.json";
}

CellRecord cell(const std::string& flow, const std::string& agg, const std::string& method,
                std::vector<std::string> mods, double auc, const std::vector<double>& scores) {
  CellRecord c;
  c.flow = flow;
  c.aggregation = agg;
  c.method = method;
  c.modalities = std::move(mods);
  c.id = flow + "_" + agg + "_" + method;
  c.auc = auc;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    c.patients.push_back({"p" + std::to_string(i), static_cast<int>(i % 2), scores[i]});
  }
  return c;
}

// Full results document; `auc_of` picks each late cell's AUC.
template <class F>
ResultsDoc handmade(F auc_of, double other_auc = 0.6) {
  ResultsDoc d;
  d.modalities = {"P", "R", "S"};
  d.aggregations = {"A1", "A2"};
  d.rules = {"product", "max", "min", "mean", "dt", "ds", "vote", "confidence"};
  d.early_modes = {"concat", "kronecker"};
  d.subsets = {{"P", "R"}, {"P", "S"}, {"R", "S"}, {"P", "R", "S"}};
  const std::vector<double> scores = {0.2, 0.7, 0.4, 0.6, 0.5, 0.9, 0.1, 0.8};
  for (const auto& a : d.aggregations) {
    for (const auto& m : d.modalities) {
      d.cells.push_back(cell("unimodal", a, "single", {m}, other_auc, scores));
    }
    for (std::size_t r = 0; r < d.rules.size(); ++r) {
      for (std::size_t s = 0; s < d.subsets.size(); ++s) {
        d.cells.push_back(cell("late", a, d.rules[r], d.subsets[s], auc_of(a, r, s), scores));
      }
    }
  }
  for (const auto& mode : d.early_modes) {
    for (const auto& s : d.subsets) {
      d.cells.push_back(cell("early", "A1", mode, s, other_auc, scores));
    }
  }
  return d;
}

}  // namespace

TEST_CASE("config defaults and parsing") {
  const auto c = RunConfig::from_json("{}");
  CHECK(c.seed == 0);
  CHECK(c.aggregations.size() == 2);
  CHECK(c.rules.size() == 8);
  CHECK(c.early.size() == 2);
  CHECK(c.preprocess.patch_window == 100);
  CHECK(c.preprocess.patch_stride == 60);
  CHECK(c.preprocess.max_background_fraction == 0.2);
  CHECK(c.features.glcm_distance == 1);
  CHECK(c.features.lbp.points == 8);
  CHECK(c.features.lbp.radius == 1);
  CHECK(c.compare.friedman_alpha == 0.1);

  const auto d = RunConfig::from_json(R"({"manifest": "m.json", "seed": 9, "rules": ["ds"],
      "aggregations": ["A2"], "early_fusion": [], "forest": {"n_trees": 3, "max_depth": 4}})",
                                      "/base");
  CHECK(d.manifest == fs::path("/base/m.json"));
  CHECK(d.seed == 9);
  CHECK(d.rules == std::vector<FusionRule>{FusionRule::DempsterShafer});
  CHECK(d.forest.max_depth == 4);
  const auto back = RunConfig::from_json(d.to_json());
  CHECK(back.to_json() == d.to_json());

  CHECK_THROWS_AS(RunConfig::from_json(R"({"sed": 1})"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(R"({"forest": {"trees": 1}})"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(R"({"rules": ["median"]})"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json("{not json"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(R"({"early_aggregations": ["A1", "A2"]})"), ConfigError);
  CHECK_NOTHROW(RunConfig::from_json(R"({"early_aggregations": ["A2"], "early_fusion": []})"));
  CHECK_THROWS_AS(RunConfig::from_json(R"({"rules": [], "early_fusion": [], "unimodal_flows": false})"),
                  ConfigError);
}

TEST_CASE("exit codes") {
  const auto dir = scratch("exit");
  write(dir / "config.json", R"({"manifest": "missing.json"})");
  CHECK(invoke({"run", "--config", (dir / "config.json").string()}) == kExitUsage);
  CHECK(invoke({"extract", "--config", (dir / "nope.json").string()}) == kExitUsage);
  CHECK(invoke({"frobnicate"}) == kExitUsage);
  CHECK(invoke({"run"}) == kExitUsage);
  write(dir / "bad.json", R"({"manifest": "m.json", "early_aggregations": ["A2"]})");
  write(dir / "m.json", "{}");
  CHECK(invoke({"run", "--config", (dir / "bad.json").string()}) == kExitUsage);
  write(dir / "data.json", R"({"manifest": "m.json"})");
  CHECK(invoke({"run", "--config", (dir / "data.json").string()}) == kExitData);
  CHECK(invoke({"compare", "--results", (dir / "none.json").string()}) == kExitUsage);
}

TEST_CASE("extract writes feature tables from image files") {
  const auto dir = scratch("extract");
  std::mt19937_64 gen(5);
  auto image = [&](int w, int h) {
    std::vector<GrayImage::Pixel> px(static_cast<std::size_t>(w) * h);
    for (auto& p : px) {
      p = static_cast<GrayImage::Pixel>(gen() % 210);
    }
    return GrayImage(w, h, 8, std::move(px));
  };
  std::string patients;
  for (int i = 0; i < 4; ++i) {
    const auto id = "q" + std::to_string(i);
    write_pgm(dir / (id + ".pgm"), image(160, 160));
    write_png(dir / (id + "_a.png"), image(24, 24));
    write_png(dir / (id + "_b.png"), image(24, 24));
    patients += std::string(i ? "," : "") + R"({"id": ")" + id + R"(", "label": )" + std::to_string(i % 2) +
                R"(, "samples": {"histo": [")" + id + R"(.pgm"], "ct": [{"slices": [")" + id + R"(_a.png", ")" +
                id + R"(_b.png"]}]}})";
  }
  write(dir / "manifest.json", R"({"format": "mmfuse-manifest", "version": 1, "modalities": [
      {"name": "histo", "kind": "pathomics"}, {"name": "ct", "kind": "radiomics"}], "patients": [)" +
                                   patients + "]}");
  write(dir / "config.json", R"({"manifest": "manifest.json"})");
  REQUIRE(invoke({"extract", "--config", (dir / "config.json").string(), "--out", (dir / "out").string()}) ==
          kExitOk);
  const auto histo = read_csv(dir / "out/features/histo.csv");
  CHECK(histo.header.size() == 4 + 24);
  CHECK(histo.rows.size() == 4 * 4);
  const auto ct = read_csv(dir / "out/features/ct.csv");
  CHECK(ct.header.size() == 4 + 48);
  CHECK(ct.rows.size() == 4 * 2);
  const auto first = read_text(dir / "out/features/histo.csv");
  REQUIRE(invoke({"extract", "--config", (dir / "config.json").string(), "--out", (dir / "out").string(),
                  "--workers", "3"}) == kExitOk);
  CHECK(read_text(dir / "out/features/histo.csv") == first);

  // the dump feeds back in as a feature-table manifest
  write(dir / "out/config.json", R"({"manifest": "features_manifest.json", "forest": {"n_trees": 4},
      "rules": ["mean"], "aggregations": ["A1"], "early_fusion": [], "unimodal_flows": false})");
  CHECK(invoke({"run", "--config", (dir / "out/config.json").string(), "--out", (dir / "run").string()}) ==
        kExitOk);
  CHECK(fs::exists(dir / "run/results.json"));
}

TEST_CASE("default grid on a synthetic cohort") {
  const auto dir = scratch("grid");
  const auto config = synth_config(dir);
  REQUIRE(invoke({"run", "--config", config.string(), "--out", (dir / "res").string()}) == kExitOk);
  const auto doc = ResultsDoc::from_json(read_text(dir / "res/results.json"));
  std::size_t late = 0, early = 0;
  for (const auto& c : doc.cells) {
    late += c.flow == "late";
    early += c.flow == "early";
    CHECK(c.patients.size() == 12);
    CHECK(fs::exists(dir / "res/cells" / (c.id + ".csv")));
  }
  CHECK(late == 64);
  CHECK(early == 8);
  const auto grid = read_csv(dir / "res/grid_auc.csv");
  CHECK(grid.rows.size() == 16);
  CHECK(grid.header.size() == 5);
  CHECK(fs::exists(dir / "res/grid_auc.txt"));

  REQUIRE(invoke({"compare", "--results", (dir / "res/results.json").string()}) == kExitOk);
  const auto signs = read_csv(dir / "res/compare/sign_tests.csv");
  CHECK(signs.rows.size() == 8);
  for (const auto& row : signs.rows) {
    CHECK(std::stoi(row[3]) + std::stoi(row[4]) + std::stoi(row[5]) == 8);
  }
  CHECK(read_csv(dir / "res/compare/flow_ranks.csv").header.size() == 1 + 7);
  CHECK(fs::exists(dir / "res/compare/report.txt"));
  CHECK(fs::exists(dir / "res/compare/report.json"));
}

TEST_CASE("single-cell grid") {
  const auto dir = scratch("single");
  const auto config = synth_config(dir, R"(, "subsets": [["pathomics", "semantic"]], "rules": ["dt"],
      "aggregations": ["A1"], "early_fusion": [], "unimodal_flows": false)");
  REQUIRE(invoke({"run", "--config", config.string(), "--out", (dir / "res").string()}) == kExitOk);
  const auto doc = ResultsDoc::from_json(read_text(dir / "res/results.json"));
  REQUIRE(doc.cells.size() == 1);
  CHECK(doc.cells[0].id == "A1_dt_pathomics+semantic");
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir / "res/cells")) {
    ++files;
  }
  CHECK(files == 1);

  write(dir / "bad.json", R"({"manifest": "manifest.json", "subsets": [["pathomics", "ghost"]]})");
  CHECK(invoke({"run", "--config", (dir / "bad.json").string(), "--out", (dir / "bad").string()}) ==
        kExitUsage);
  CHECK_FALSE(fs::exists(dir / "bad/results.json"));
}

TEST_CASE("results document round trip") {
  const auto doc = handmade([](const std::string&, std::size_t r, std::size_t s) { return 0.5 + 0.01 * r + 0.1 * s; });
  const auto back = ResultsDoc::from_json(doc.to_json());
  CHECK(back.to_json() == doc.to_json());
  REQUIRE(back.find("late", "A2", "ds", {"P", "S"}) != nullptr);
  CHECK(back.find("late", "A2", "ds", {"P", "S"})->auc == doctest::Approx(0.5 + 0.05 + 0.1));
  CHECK(back.find("late", "A3", "ds", {"P", "S"}) == nullptr);
}

TEST_CASE("identical aucs raise no significance flags") {
  const auto rep = compare_results(handmade([](auto&&...) { return 0.7; }, 0.7), {});
  CHECK(rep.flows.size() == 7);
  CHECK(rep.rows.size() == 16);
  if (rep.friedman) {
    CHECK_FALSE(rep.friedman->significant);
  }
  for (const auto& p : rep.posthoc) {
    CHECK_FALSE(p.significant);
  }
  for (const auto& cmp : rep.rule_comparisons) {
    for (const auto& r : cmp.rows) {
      if (r.test) {
        CHECK_FALSE(r.test->significant);
      }
    }
  }
  REQUIRE(rep.sign_tests.size() == 8);
  for (const auto& s : rep.sign_tests) {
    CHECK_FALSE(s.result.significant);
  }
  REQUIRE(rep.contribution.has_value());
  CHECK(rep.contribution->normalized[0] == rep.contribution->normalized[1]);
}

TEST_CASE("a dominant flow is flagged best and tested against the rest") {
  std::mt19937_64 gen(12);
  const auto doc = handmade([&](const std::string&, std::size_t, std::size_t s) {
    return s == 3 ? 0.95 : 0.3 + static_cast<double>(gen() % 50) / 100.0;
  });
  const auto rep = compare_results(doc, {});
  CHECK(rep.flows[rep.best_flow] == "P+R+S");
  CHECK(rep.posthoc.size() == 6);
  for (const auto& p : rep.posthoc) {
    CHECK(p.column != rep.best_flow);
    CHECK(p.z > 0.0);
  }
  REQUIRE(rep.friedman.has_value());
  CHECK(rep.friedman->significant);
  for (const auto& s : rep.sign_tests) {
    if (s.subset.size() == 3) {
      CHECK(s.result.wins == 8);
      CHECK(s.result.significant);
    }
  }
}
