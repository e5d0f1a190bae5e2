#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mmfuse/feature_vector.hpp"
#include "mmfuse/features.hpp"
#include "mmfuse/io.hpp"
#include "mmfuse/preprocess.hpp"

namespace mmfuse {

// Binary outcome: class 1 is the positive (adaptive) class.
inline constexpr int kNegativeClass = 0;
inline constexpr int kPositiveClass = 1;

int parse_label(const std::string& text);
std::string label_name(int label);

enum class ModalityKind {
  Pathomics,     // colour or gray crops -> background-filtered patches -> 24 GLCM features
  Radiomics,     // slice stacks -> per-slice 48 features
  Tabular,       // one encoded record per patient from a delimited table
  Vectors,       // inline numeric vectors in the manifest
  FeatureTable,  // per-sample feature dump written by `extract`
};

std::string to_string(ModalityKind k);
ModalityKind parse_modality_kind(const std::string& s);

struct ModalitySpec {
  std::string name;
  ModalityKind kind = ModalityKind::Vectors;
  std::filesystem::path table;  // Tabular and FeatureTable
  TabularSchema schema;         // Tabular
};

// A sample reference: image path(s) or an inline vector.
struct SampleRef {
  std::string id;
  std::vector<std::filesystem::path> paths;  // a crop, or the slices of one stack
  std::vector<double> values;                // Vectors
};

struct PatientEntry {
  std::string id;
  int label = kNegativeClass;
  std::map<std::string, std::vector<SampleRef>> samples;  // by modality name
};

// File-level description of a cohort (JSON document, "mmfuse-manifest" v1).
struct DatasetManifest {
  std::vector<ModalitySpec> modalities;
  std::vector<PatientEntry> patients;
  std::filesystem::path base_dir;  // relative paths resolve against this

  std::size_t modality_index(const std::string& name) const;
  std::filesystem::path resolve(const std::filesystem::path& p) const;
};

DatasetManifest manifest_from_json(const std::string& text,
                                   const std::filesystem::path& base_dir = {});
std::string manifest_to_json(const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::filesystem::path& path);

// Pre-processing knobs for image modalities.
struct PreprocessParams {
  int patch_window = 100;
  int patch_stride = 60;
  GrayImage::Pixel background_threshold = 220;
  double max_background_fraction = 0.2;
};

struct SampleFeatures {
  std::string sample_id;
  FeatureVector features;
};

struct PatientRecord {
  std::string id;
  int label = kNegativeClass;
  std::vector<std::vector<SampleFeatures>> per_modality;  // indexed like modalities
};

// Materialized cohort: every sample reduced to a feature vector.
struct FeatureDataset {
  std::vector<std::string> modalities;
  std::vector<PatientRecord> patients;

  std::size_t modality_index(const std::string& name) const;
  std::vector<int> labels() const;
};

// Runs pre-processing and feature extraction for every modality. Feature
// extraction is parallel over samples; output does not depend on `workers`.
FeatureDataset materialize(const DatasetManifest& manifest, const PreprocessParams& pre,
                           const FeatureParams& feat, int workers = 1);

// Feature dump for one modality: sample_id, patient_id, modality, label,
// then one column per feature.
CsvTable feature_table(const FeatureDataset& data, std::size_t modality);

// -- synthetic cohorts ---------------------------------------------------------

struct SyntheticModality {
  std::string name;
  double informativeness = 1.0;  // class-mean separation per dimension
  int dims = 4;
};

struct SyntheticSpec {
  int patients = 40;
  int samples_per_patient = 5;
  std::vector<SyntheticModality> modalities = {
      {"pathomics", 1.0, 4}, {"radiomics", 1.0, 4}, {"semantic", 1.0, 4}};
  double patient_spread = 1.0;  // sd of the patient-level offset
  double sample_noise = 1.0;    // sd of per-sample noise around the patient centre
  std::uint64_t seed = 0;
};

// Patients alternate between classes (0, 1, 0, ...). Each patient has a
// centre label * informativeness + N(0, patient_spread) per dimension, and
// samples scatter around it with sd sample_noise. Modalities draw from
// independent streams, so they are conditionally independent views.
DatasetManifest make_synthetic_manifest(const SyntheticSpec& spec);

}  // namespace mmfuse
