#include "tibcad/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "tibcad/error.hpp"
#include "tibcad/keyvalue.hpp"
#include "tibcad/volio.hpp"

namespace tibcad {
namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) {
    if (!field.empty() && field.back() == '\r') field.pop_back();
    fields.push_back(field);
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

const char* kFixedColumns[] = {"scanId", "z", "x0", "y0", "label"};

} // namespace

std::string FeatureSchema::hash() const {
  std::uint64_t h = fnv1a(std::string("tibcad-schema"));
  for (const auto& name : names) {
    h = fnv1a(name, h);
    h = fnv1a("\n", 1, h);
  }
  return hex64(h);
}

void Dataset::validate() const {
  for (const auto& s : samples) {
    if (s.x.size() != schema.size())
      throw DataError("sample width " + std::to_string(s.x.size()) + " does not match schema width " +
                      std::to_string(schema.size()));
    for (double v : s.x)
      if (!std::isfinite(v)) throw DataError("non-finite feature value in scan " + s.scanId);
    if (s.label != 0 && s.label != 1) throw DataError("labels must be 0 or 1");
  }
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  out << "scanId,z,x0,y0,label";
  for (const auto& name : data.schema.names) out << ',' << name;
  out << '\n';
  for (const auto& s : data.samples) {
    out << s.scanId << ',' << s.z << ',' << s.x0 << ',' << s.y0 << ',' << s.label;
    for (double v : s.x) out << ',' << format_double(v);
    out << '\n';
  }
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_dataset_csv(out, data);
  if (!out) throw DataError("write failed for " + path.string());
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty feature file");
  const auto header = split_csv(line);
  if (header.size() < 5) throw DataError(path.string() + ": header lacks the fixed columns");
  for (std::size_t i = 0; i < 5; ++i)
    if (header[i] != kFixedColumns[i]) throw DataError(path.string() + ": unexpected column '" + header[i] + "'");

  Dataset data;
  data.schema.names.assign(header.begin() + 5, header.end());
  int lineNo = 1;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv(line);
    const std::string where = path.string() + ":" + std::to_string(lineNo);
    if (fields.size() != header.size()) throw DataError(where + ": expected " + std::to_string(header.size()) + " fields");
    Sample s;
    s.scanId = fields[0];
    s.z = static_cast<int>(parse_int(fields[1], where));
    s.x0 = static_cast<int>(parse_int(fields[2], where));
    s.y0 = static_cast<int>(parse_int(fields[3], where));
    s.label = static_cast<int>(parse_int(fields[4], where));
    s.x.reserve(fields.size() - 5);
    for (std::size_t i = 5; i < fields.size(); ++i) s.x.push_back(parse_double(fields[i], where));
    data.samples.push_back(std::move(s));
  }
  data.validate();
  return data;
}

void write_schema(const std::filesystem::path& path, const FeatureSchema& schema, const std::string& comment) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "# tibcad feature schema " << schema.hash() << '\n';
  if (!comment.empty()) out << "# " << comment << '\n';
  for (const auto& name : schema.names) out << name << '\n';
}

FeatureSchema read_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  FeatureSchema schema;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    schema.names.push_back(line);
  }
  return schema;
}

} // namespace tibcad
