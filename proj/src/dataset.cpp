#include "mmfuse/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>

#include <nlohmann/json.hpp>

#include "mmfuse/error.hpp"
#include "mmfuse/io.hpp"
#include "mmfuse/parallel.hpp"
#include "mmfuse/rng.hpp"

namespace mmfuse {

namespace fs = std::filesystem;
using json = nlohmann::json;

int parse_label(const std::string& text) {
  if (text == "1" || text == "adaptive" || text == "positive") {
    return kPositiveClass;
  }
  if (text == "0" || text == "not-adaptive" || text == "not_adaptive" || text == "negative") {
    return kNegativeClass;
  }
  throw DataError("unknown label '" + text + "' (expected adaptive/not-adaptive or 1/0)");
}

std::string label_name(int label) { return label == kPositiveClass ? "adaptive" : "not-adaptive"; }

std::string to_string(ModalityKind k) {
  switch (k) {
    case ModalityKind::Pathomics: return "pathomics";
    case ModalityKind::Radiomics: return "radiomics";
    case ModalityKind::Tabular: return "tabular";
    case ModalityKind::Vectors: return "vectors";
    case ModalityKind::FeatureTable: return "features";
  }
  return "?";
}

ModalityKind parse_modality_kind(const std::string& s) {
  for (auto k : {ModalityKind::Pathomics, ModalityKind::Radiomics, ModalityKind::Tabular,
                 ModalityKind::Vectors, ModalityKind::FeatureTable}) {
    if (to_string(k) == s) {
      return k;
    }
  }
  throw DataError("unknown modality kind '" + s + "'");
}

std::size_t DatasetManifest::modality_index(const std::string& name) const {
  for (std::size_t i = 0; i < modalities.size(); ++i) {
    if (modalities[i].name == name) {
      return i;
    }
  }
  throw DataError("manifest has no modality '" + name + "'");
}

fs::path DatasetManifest::resolve(const fs::path& p) const {
  return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

std::size_t FeatureDataset::modality_index(const std::string& name) const {
  for (std::size_t i = 0; i < modalities.size(); ++i) {
    if (modalities[i] == name) {
      return i;
    }
  }
  throw DataError("dataset has no modality '" + name + "'");
}

std::vector<int> FeatureDataset::labels() const {
  std::vector<int> out;
  out.reserve(patients.size());
  for (const auto& p : patients) {
    out.push_back(p.label);
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

std::string label_text(const json& j) {
  if (j.is_number_integer()) {
    return std::to_string(j.get<int>());
  }
  return j.get<std::string>();
}

SampleRef parse_sample(const json& j, const std::string& default_id) {
  SampleRef s;
  s.id = default_id;
  if (j.is_string()) {
    s.paths.emplace_back(j.get<std::string>());
  } else if (j.is_array()) {
    s.values = j.get<std::vector<double>>();
  } else if (j.is_object()) {
    if (j.contains("id")) {
      s.id = j.at("id").get<std::string>();
    }
    if (j.contains("path")) {
      s.paths.emplace_back(j.at("path").get<std::string>());
    }
    if (j.contains("slices")) {
      for (const auto& p : j.at("slices")) {
        s.paths.emplace_back(p.get<std::string>());
      }
    }
    if (j.contains("values")) {
      s.values = j.at("values").get<std::vector<double>>();
    }
  } else {
    throw DataError("sample '" + default_id + "' must be a path, a vector or an object");
  }
  return s;
}

ColumnEncoding parse_column(const json& j) {
  ColumnEncoding c;
  c.column = j.at("column").get<std::string>();
  const auto enc = j.value("encoding", std::string("numeric"));
  if (enc == "numeric") {
    c.kind = ColumnEncoding::Kind::Numeric;
  } else if (enc == "ordinal") {
    c.kind = ColumnEncoding::Kind::Ordinal;
  } else if (enc == "onehot") {
    c.kind = ColumnEncoding::Kind::OneHot;
  } else {
    throw DataError("column '" + c.column + "': unknown encoding '" + enc + "'");
  }
  if (c.kind != ColumnEncoding::Kind::Numeric) {
    c.categories = j.at("categories").get<std::vector<std::string>>();
    if (c.categories.empty()) {
      throw DataError("column '" + c.column + "' lists no categories");
    }
  }
  return c;
}

json column_to_json(const ColumnEncoding& c) {
  json j = {{"column", c.column}};
  switch (c.kind) {
    case ColumnEncoding::Kind::Numeric: j["encoding"] = "numeric"; break;
    case ColumnEncoding::Kind::Ordinal: j["encoding"] = "ordinal"; break;
    case ColumnEncoding::Kind::OneHot: j["encoding"] = "onehot"; break;
  }
  if (!c.categories.empty()) {
    j["categories"] = c.categories;
  }
  return j;
}

}  // namespace

DatasetManifest manifest_from_json(const std::string& text, const fs::path& base_dir) {
  DatasetManifest m;
  m.base_dir = base_dir;
  try {
    const auto doc = json::parse(text);
    if (doc.value("format", std::string("mmfuse-manifest")) != "mmfuse-manifest") {
      throw DataError("not an mmfuse manifest");
    }
    if (doc.value("version", 1) != 1) {
      throw DataError("unsupported manifest version");
    }
    std::set<std::string> names;
    for (const auto& jm : doc.at("modalities")) {
      ModalitySpec spec;
      spec.name = jm.at("name").get<std::string>();
      spec.kind = parse_modality_kind(jm.value("kind", std::string("vectors")));
      if (jm.contains("table")) {
        spec.table = jm.at("table").get<std::string>();
      }
      if (jm.contains("schema")) {
        for (const auto& jc : jm.at("schema")) {
          spec.schema.push_back(parse_column(jc));
        }
      }
      if ((spec.kind == ModalityKind::Tabular || spec.kind == ModalityKind::FeatureTable) &&
          spec.table.empty()) {
        throw DataError("modality '" + spec.name + "' needs a 'table' path");
      }
      if (spec.kind == ModalityKind::Tabular && spec.schema.empty()) {
        throw DataError("tabular modality '" + spec.name + "' needs a 'schema'");
      }
      if (!names.insert(spec.name).second) {
        throw DataError("duplicate modality '" + spec.name + "'");
      }
      m.modalities.push_back(std::move(spec));
    }
    if (m.modalities.empty()) {
      throw DataError("manifest lists no modalities");
    }
    std::set<std::string> ids;
    for (const auto& jp : doc.at("patients")) {
      PatientEntry p;
      p.id = jp.at("id").get<std::string>();
      if (!ids.insert(p.id).second) {
        throw DataError("duplicate patient id '" + p.id + "'");
      }
      p.label = parse_label(label_text(jp.at("label")));
      if (jp.contains("samples")) {
        for (const auto& [modality, list] : jp.at("samples").items()) {
          m.modality_index(modality);
          auto& out = p.samples[modality];
          std::size_t k = 0;
          for (const auto& js : list) {
            out.push_back(parse_sample(js, p.id + "/" + modality + "/" + std::to_string(k++)));
          }
        }
      }
      m.patients.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

std::string manifest_to_json(const DatasetManifest& m) {
  json mods = json::array();
  for (const auto& spec : m.modalities) {
    json jm = {{"name", spec.name}, {"kind", to_string(spec.kind)}};
    if (!spec.table.empty()) {
      jm["table"] = spec.table.generic_string();
    }
    if (!spec.schema.empty()) {
      json schema = json::array();
      for (const auto& c : spec.schema) {
        schema.push_back(column_to_json(c));
      }
      jm["schema"] = schema;
    }
    mods.push_back(jm);
  }
  json patients = json::array();
  for (const auto& p : m.patients) {
    json samples = json::object();
    for (const auto& [modality, list] : p.samples) {
      json arr = json::array();
      for (const auto& s : list) {
        json js = {{"id", s.id}};
        if (s.paths.size() == 1) {
          js["path"] = s.paths.front().generic_string();
        } else if (!s.paths.empty()) {
          json slices = json::array();
          for (const auto& path : s.paths) {
            slices.push_back(path.generic_string());
          }
          js["slices"] = slices;
        }
        if (!s.values.empty()) {
          js["values"] = s.values;
        }
        arr.push_back(js);
      }
      samples[modality] = arr;
    }
    patients.push_back({{"id", p.id}, {"label", label_name(p.label)}, {"samples", samples}});
  }
  json doc = {{"format", "mmfuse-manifest"},
              {"version", 1},
              {"modalities", mods},
              {"patients", patients}};
  return doc.dump(1) + "\n";
}

DatasetManifest load_manifest(const fs::path& path) {
  if (!fs::exists(path)) {
    throw ConfigError("manifest not found: " + path.string());
  }
  return manifest_from_json(read_text(path), path.parent_path());
}

// ---------------------------------------------------------------------------
// Materialization

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& context) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw DataError(context + ": '" + s + "' is not a finite number");
  }
  return v;
}

GrayImage luminance(const RgbImage& rgb) {
  std::vector<GrayImage::Pixel> px;
  px.reserve(rgb.pixels.size());
  for (const auto& p : rgb.pixels) {
    // ITU-R BT.601 weights in integer form, rounded
    const unsigned y = (299u * p[0] + 587u * p[1] + 114u * p[2] + 500u) / 1000u;
    px.push_back(static_cast<GrayImage::Pixel>(y));
  }
  return GrayImage(rgb.width, rgb.height, 8, std::move(px));
}

struct PendingImage {
  std::size_t patient;
  std::string sample_id;
  GrayImage image;
};

std::vector<PendingImage> pathomics_patches(const DatasetManifest& m, const std::string& modality,
                                            const PreprocessParams& pre) {
  std::vector<PendingImage> out;
  const BrightnessBackground background{pre.background_threshold};
  for (std::size_t pi = 0; pi < m.patients.size(); ++pi) {
    const auto& patient = m.patients[pi];
    const auto it = patient.samples.find(modality);
    if (it == patient.samples.end()) {
      continue;
    }
    for (const auto& s : it->second) {
      if (s.paths.size() != 1) {
        throw DataError("pathomics sample '" + s.id + "' must reference exactly one crop");
      }
      const auto path = m.resolve(s.paths.front());
      try {
        auto img = read_image(path);
        GrayImage texture;
        GrayImage brightness;
        if (auto* rgb = std::get_if<RgbImage>(&img)) {
          texture = saturation_channel(*rgb);
          brightness = luminance(*rgb);
        } else {
          texture = std::get<GrayImage>(img);
          brightness = texture;
        }
        const auto tex = extract_patches(texture, pre.patch_window, pre.patch_stride);
        const auto bri = extract_patches(brightness, pre.patch_window, pre.patch_stride);
        for (std::size_t k = 0; k < tex.size(); ++k) {
          if (!is_mostly_background(bri[k], background, pre.max_background_fraction)) {
            out.push_back({pi, s.id + "#" + std::to_string(k), tex[k]});
          }
        }
      } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
      }
    }
  }
  return out;
}

std::vector<PendingImage> radiomics_slices(const DatasetManifest& m, const std::string& modality) {
  std::vector<PendingImage> out;
  for (std::size_t pi = 0; pi < m.patients.size(); ++pi) {
    const auto& patient = m.patients[pi];
    const auto it = patient.samples.find(modality);
    if (it == patient.samples.end()) {
      continue;
    }
    for (const auto& s : it->second) {
      std::vector<GrayImage> slices;
      for (const auto& p : s.paths) {
        const auto path = m.resolve(p);
        try {
          auto img = read_image(path);
          if (!std::holds_alternative<GrayImage>(img)) {
            throw DataError("radiomics slices must be grayscale");
          }
          slices.push_back(std::get<GrayImage>(std::move(img)));
        } catch (const DataError& e) {
          throw DataError(path.string() + ": " + e.what());
        }
      }
      for (auto& [index, slice] : decompose_volume(ImageStack(s.id, std::move(slices)))) {
        out.push_back({pi, s.id + "#" + std::to_string(index), std::move(slice)});
      }
    }
  }
  return out;
}

}  // namespace

FeatureDataset materialize(const DatasetManifest& m, const PreprocessParams& pre,
                           const FeatureParams& feat, int workers) {
  FeatureDataset data;
  for (const auto& spec : m.modalities) {
    data.modalities.push_back(spec.name);
  }
  for (const auto& p : m.patients) {
    data.patients.push_back({p.id, p.label, std::vector<std::vector<SampleFeatures>>(m.modalities.size())});
  }
  std::map<std::string, std::size_t> patient_index;
  for (std::size_t i = 0; i < m.patients.size(); ++i) {
    patient_index[m.patients[i].id] = i;
  }

  for (std::size_t mi = 0; mi < m.modalities.size(); ++mi) {
    const auto& spec = m.modalities[mi];
    switch (spec.kind) {
      case ModalityKind::Pathomics:
      case ModalityKind::Radiomics: {
        const bool patho = spec.kind == ModalityKind::Pathomics;
        auto pending = patho ? pathomics_patches(m, spec.name, pre) : radiomics_slices(m, spec.name);
        std::vector<GrayImage> images;
        images.reserve(pending.size());
        for (auto& p : pending) {
          images.push_back(std::move(p.image));
        }
        const auto feats = extract_batch(images, patho ? FeatureKind::Pathomics : FeatureKind::Radiomics,
                                         feat, workers);
        for (std::size_t k = 0; k < pending.size(); ++k) {
          data.patients[pending[k].patient].per_modality[mi].push_back(
              {pending[k].sample_id, feats[k]});
        }
        break;
      }
      case ModalityKind::Vectors: {
        for (std::size_t pi = 0; pi < m.patients.size(); ++pi) {
          const auto it = m.patients[pi].samples.find(spec.name);
          if (it == m.patients[pi].samples.end()) {
            continue;
          }
          for (const auto& s : it->second) {
            if (s.values.empty()) {
              throw DataError("sample '" + s.id + "' of vector modality has no values");
            }
            data.patients[pi].per_modality[mi].push_back({s.id, make_unnamed(s.values, spec.name + "_f")});
          }
        }
        break;
      }
      case ModalityKind::Tabular: {
        const auto table = read_csv(m.resolve(spec.table));
        const auto id_col = table.column("patient_id");
        for (const auto& row : table.rows) {
          const auto it = patient_index.find(row[id_col]);
          if (it == patient_index.end()) {
            continue;
          }
          TabularRecord rec;
          for (std::size_t c = 0; c < table.header.size(); ++c) {
            rec.attributes.emplace_back(table.header[c], row[c]);
          }
          auto& slot = data.patients[it->second].per_modality[mi];
          if (!slot.empty()) {
            throw DataError("table " + spec.table.string() + " has several rows for patient '" +
                            row[id_col] + "'");
          }
          slot.push_back({row[id_col] + "/" + spec.name, encode_record(rec, spec.schema)});
        }
        break;
      }
      case ModalityKind::FeatureTable: {
        const auto table = read_csv(m.resolve(spec.table));
        const auto sid = table.column("sample_id");
        const auto pid = table.column("patient_id");
        const auto mod = table.column("modality");
        const auto lab = table.column("label");
        std::vector<std::string> names;
        std::vector<std::size_t> cols;
        for (std::size_t c = 0; c < table.header.size(); ++c) {
          if (c != sid && c != pid && c != mod && c != lab) {
            names.push_back(table.header[c]);
            cols.push_back(c);
          }
        }
        for (const auto& row : table.rows) {
          if (row[mod] != spec.name) {
            continue;
          }
          const auto it = patient_index.find(row[pid]);
          if (it == patient_index.end()) {
            continue;
          }
          if (parse_label(row[lab]) != data.patients[it->second].label) {
            throw DataError("feature table label of '" + row[sid] + "' disagrees with the manifest");
          }
          std::vector<double> values;
          values.reserve(cols.size());
          for (auto c : cols) {
            values.push_back(parse_double(row[c], spec.table.string() + " column " + table.header[c]));
          }
          data.patients[it->second].per_modality[mi].push_back({row[sid], FeatureVector(names, std::move(values))});
        }
        break;
      }
    }
  }
  return data;
}

CsvTable feature_table(const FeatureDataset& data, std::size_t modality) {
  CsvTable t;
  t.header = {"sample_id", "patient_id", "modality", "label"};
  bool have_names = false;
  for (const auto& p : data.patients) {
    for (const auto& s : p.per_modality.at(modality)) {
      if (!have_names) {
        t.header.insert(t.header.end(), s.features.names().begin(), s.features.names().end());
        have_names = true;
      }
      std::vector<std::string> row = {s.sample_id, p.id, data.modalities[modality],
                                      std::to_string(p.label)};
      for (double v : s.features.values()) {
        row.push_back(format_double(v));
      }
      if (row.size() != t.header.size()) {
        throw DataError("samples of modality '" + data.modalities[modality] +
                        "' have inconsistent feature counts");
      }
      t.rows.push_back(std::move(row));
    }
  }
  return t;
}

DatasetManifest make_synthetic_manifest(const SyntheticSpec& spec) {
  if (spec.patients < 4) {
    throw DataError("synthetic cohort needs at least 4 patients");
  }
  if (spec.samples_per_patient < 1 || spec.modalities.empty()) {
    throw DataError("synthetic cohort needs samples and modalities");
  }
  DatasetManifest m;
  for (const auto& mod : spec.modalities) {
    if (mod.dims < 1) {
      throw DataError("synthetic modality '" + mod.name + "' needs at least one dimension");
    }
    m.modalities.push_back({mod.name, ModalityKind::Vectors, {}, {}});
  }
  char idbuf[16];
  for (int i = 0; i < spec.patients; ++i) {
    PatientEntry p;
    std::snprintf(idbuf, sizeof idbuf, "S%03d", i);
    p.id = idbuf;
    p.label = i % 2 == 0 ? kNegativeClass : kPositiveClass;
    for (std::size_t mi = 0; mi < spec.modalities.size(); ++mi) {
      const auto& mod = spec.modalities[mi];
      CounterRng rng(derive_key(derive_key(spec.seed, mi), static_cast<std::uint64_t>(i)));
      std::vector<double> centre(static_cast<std::size_t>(mod.dims));
      for (auto& c : centre) {
        c = p.label * mod.informativeness + spec.patient_spread * rng.normal();
      }
      auto& list = p.samples[mod.name];
      for (int s = 0; s < spec.samples_per_patient; ++s) {
        SampleRef ref;
        ref.id = p.id + "/" + mod.name + "/" + std::to_string(s);
        for (double c : centre) {
          ref.values.push_back(c + spec.sample_noise * rng.normal());
        }
        list.push_back(std::move(ref));
      }
    }
    m.patients.push_back(std::move(p));
  }
  return m;
}

}  // namespace mmfuse
