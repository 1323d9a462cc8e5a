#include "tibcad/keyvalue.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "tibcad/error.hpp"

namespace tibcad {
namespace {

std::string trim(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return text.substr(first, last - first + 1);
}

std::vector<std::string> split_fields(const std::string& text) {
  std::vector<std::string> fields;
  std::string current;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == ',') {
      if (!current.empty()) fields.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) fields.push_back(std::move(current));
  return fields;
}

} // namespace

std::string format_double(double value) {
  char buffer[64];
  auto [end, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
  if (ec != std::errc{}) throw Error("cannot format number");
  return std::string(buffer, end);
}

double parse_double(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  double value = 0.0;
  const char* begin = t.data();
  const char* end = t.data() + t.size();
  if (!t.empty() && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (t.empty() || ec != std::errc{} || ptr != end) throw DataError("invalid number for " + what + ": '" + text + "'");
  return value;
}

long long parse_int(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  long long value = 0;
  const char* begin = t.data();
  const char* end = t.data() + t.size();
  if (!t.empty() && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (t.empty() || ec != std::errc{} || ptr != end) throw DataError("invalid integer for " + what + ": '" + text + "'");
  return value;
}

KeyValues KeyValues::parse(std::istream& in, const std::string& origin) {
  KeyValues kv;
  kv.origin_ = origin;
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto sep = line.find_first_of(":=");
    if (sep == std::string::npos)
      throw DataError(origin + ":" + std::to_string(lineNo) + ": expected 'key: value'");
    const std::string key = trim(line.substr(0, sep));
    if (key.empty()) throw DataError(origin + ":" + std::to_string(lineNo) + ": empty key");
    kv.set(key, trim(line.substr(sep + 1)));
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse(in, path.string());
}

bool KeyValues::has(const std::string& key) const { return values_.count(key) != 0; }

const std::string& KeyValues::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw DataError(origin_ + ": missing key '" + key + "'");
  return it->second;
}

std::string KeyValues::get_or(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValues::get_double(const std::string& key) const { return parse_double(get(key), origin_ + ":" + key); }

double KeyValues::get_double_or(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

long long KeyValues::get_int(const std::string& key) const { return parse_int(get(key), origin_ + ":" + key); }

long long KeyValues::get_int_or(const std::string& key, long long fallback) const {
  return has(key) ? get_int(key) : fallback;
}

std::vector<double> KeyValues::get_doubles(const std::string& key) const {
  std::vector<double> out;
  for (const auto& field : split_fields(get(key))) out.push_back(parse_double(field, origin_ + ":" + key));
  return out;
}

std::vector<long long> KeyValues::get_ints(const std::string& key) const {
  std::vector<long long> out;
  for (const auto& field : split_fields(get(key))) out.push_back(parse_int(field, origin_ + ":" + key));
  return out;
}

void KeyValues::set(const std::string& key, const std::string& value) {
  if (values_.count(key) == 0) order_.push_back(key);
  values_[key] = value;
}

void KeyValues::set(const std::string& key, double value) { set(key, format_double(value)); }

void KeyValues::set(const std::string& key, long long value) { set(key, std::to_string(value)); }

void KeyValues::write(std::ostream& out) const {
  for (const auto& key : order_) out << key << ": " << values_.at(key) << '\n';
}

void KeyValues::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write(out);
  if (!out) throw DataError("write failed for " + path.string());
}

} // namespace tibcad
