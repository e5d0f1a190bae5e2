#include "mmfuse/feature_vector.hpp"

#include <cmath>
#include <unordered_set>
#include <utility>

#include "mmfuse/error.hpp"

namespace mmfuse {

namespace {

void check_unique(const std::vector<std::string>& names) {
  std::unordered_set<std::string> seen;
  for (const auto& n : names) {
    if (!seen.insert(n).second) {
      throw DataError("duplicate feature name '" + n + "'");
    }
  }
}

}  // namespace

FeatureVector::FeatureVector(std::vector<std::string> names, std::vector<double> values)
    : names_(std::move(names)), values_(std::move(values)) {
  if (names_.size() != values_.size()) {
    throw DataError("feature names and values differ in length");
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw DataError("feature '" + names_[i] + "' is not finite");
    }
  }
  check_unique(names_);
}

void FeatureVector::append(const FeatureVector& other, const std::string& prefix) {
  for (std::size_t i = 0; i < other.size(); ++i) {
    names_.push_back(prefix + other.names_[i]);
    values_.push_back(other.values_[i]);
  }
  check_unique(names_);
}

FeatureVector make_unnamed(std::vector<double> values, const std::string& stem) {
  std::vector<std::string> names;
  names.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    names.push_back(stem + std::to_string(i));
  }
  return FeatureVector(std::move(names), std::move(values));
}

}  // namespace mmfuse
