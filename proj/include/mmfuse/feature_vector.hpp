#pragma once

#include <string>
#include <vector>

namespace mmfuse {

// Ordered, named real-valued features for one sample.
class FeatureVector {
public:
  FeatureVector() = default;
  FeatureVector(std::vector<std::string> names, std::vector<double> values);

  const std::vector<std::string>& names() const { return names_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double operator[](std::size_t i) const { return values_[i]; }

  // Appends another vector; names must stay unique.
  void append(const FeatureVector& other, const std::string& prefix = {});

  bool same_layout(const FeatureVector& other) const { return names_ == other.names_; }

  bool operator==(const FeatureVector&) const = default;

private:
  std::vector<std::string> names_;
  std::vector<double> values_;
};

// Unnamed vector with generated names f0..f{n-1}.
FeatureVector make_unnamed(std::vector<double> values, const std::string& stem = "f");

}  // namespace mmfuse
