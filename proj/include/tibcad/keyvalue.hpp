#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace tibcad {

/// Flat "key: value" text document. '#' starts a comment, blank lines are
/// ignored, and "key=value" is accepted on input. Keys keep insertion order
/// on output so written files are byte-stable.
class KeyValues {
public:
  static KeyValues parse(std::istream& in, const std::string& origin = "<stream>");
  static KeyValues load(const std::filesystem::path& path);

  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;

  double get_double(const std::string& key) const;
  double get_double_or(const std::string& key, double fallback) const;
  long long get_int(const std::string& key) const;
  long long get_int_or(const std::string& key, long long fallback) const;
  std::vector<double> get_doubles(const std::string& key) const;
  std::vector<long long> get_ints(const std::string& key) const;

  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, long long value);

  const std::vector<std::string>& keys() const { return order_; }
  const std::string& origin() const { return origin_; }

  void write(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;

private:
  std::map<std::string, std::string> values_;
  std::vector<std::string> order_;
  std::string origin_ = "<memory>";
};

/// Shortest decimal representation that round-trips to the same double.
std::string format_double(double value);

double parse_double(const std::string& text, const std::string& what);
long long parse_int(const std::string& text, const std::string& what);

} // namespace tibcad
