#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace tibcad {

/// Ordered feature names. The hash identifies the column layout a model was
/// trained on.
struct FeatureSchema {
  std::vector<std::string> names;

  std::size_t size() const { return names.size(); }
  std::string hash() const;
  friend bool operator==(const FeatureSchema&, const FeatureSchema&) = default;
};

/// One labelled patch: label is 1 for abnormal, 0 for normal.
struct Sample {
  std::string scanId;
  int z = 0;
  int x0 = 0;
  int y0 = 0;
  int label = 0;
  std::vector<double> x;
};

struct Dataset {
  FeatureSchema schema;
  std::vector<Sample> samples;

  /// Throws DataError on rows whose width differs from the schema or that
  /// contain non-finite values.
  void validate() const;
};

// CSV layout: header "scanId,z,x0,y0,label,<feature names>", one row per
// patch, numbers in shortest round-trip form.
void write_dataset_csv(std::ostream& out, const Dataset& data);
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);
Dataset read_dataset_csv(const std::filesystem::path& path);

/// One feature name per line after a comment header.
void write_schema(const std::filesystem::path& path, const FeatureSchema& schema, const std::string& comment = {});
FeatureSchema read_schema(const std::filesystem::path& path);

} // namespace tibcad
