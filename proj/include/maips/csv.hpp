#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace maips {

/// RFC 4180 field quoting: fields containing a comma, quote, CR or LF are
/// wrapped in quotes with embedded quotes doubled.
std::string csv_quote(const std::string &field);

class CsvWriter {
public:
  CsvWriter(const std::filesystem::path &path, const std::vector<std::string> &header);

  CsvWriter &operator<<(const std::string &field);
  CsvWriter &operator<<(const char *field);
  CsvWriter &operator<<(double value);
  CsvWriter &operator<<(long long value);
  CsvWriter &operator<<(int value) { return *this << static_cast<long long>(value); }
  CsvWriter &operator<<(long value) { return *this << static_cast<long long>(value); }
  CsvWriter &operator<<(std::size_t value) { return *this << static_cast<long long>(value); }
  // Terminates the current row; checks the field count against the header.
  void end_row();

  const std::filesystem::path &path() const { return path_; }

private:
  void put(const std::string &text);

  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t columns_;
  std::size_t in_row_ = 0;
};

} // namespace maips
