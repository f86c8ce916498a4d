#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <boost/property_tree/ptree.hpp>

namespace maips {

// Sectioned key/value configuration (INI). Keys are addressed as
// "section.key".
class Config {
public:
  static Config from_file(const std::filesystem::path &path);
  static Config from_string(const std::string &text);

  /// Values of `other` replace ours. With `strict`, keys we do not have are
  /// rejected.
  void merge(const Config &other, bool strict);
  void set(const std::string &key, const std::string &value);
  /// "section.key=value".
  void apply_override(const std::string &assignment);
  void erase_section(const std::string &section);

  bool has(const std::string &key) const;
  std::string get_string(const std::string &key) const;
  double get_double(const std::string &key) const;
  long long get_int(const std::string &key) const;
  std::uint64_t get_u64(const std::string &key) const;
  bool get_bool(const std::string &key) const;
  // Comma-separated lists; an empty value is an empty list.
  std::vector<std::string> get_strings(const std::string &key) const;
  std::vector<double> get_doubles(const std::string &key) const;
  std::vector<long long> get_ints(const std::string &key) const;

  std::vector<std::string> keys() const;
  void write(std::ostream &out) const;
  void write_file(const std::filesystem::path &path) const;

private:
  boost::property_tree::ptree tree_;
};

/// Built-in defaults for every section (desk scale).
Config default_config();

} // namespace maips
