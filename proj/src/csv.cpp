#include "maips/csv.hpp"

#include "maips/errors.hpp"
#include "maips/format.hpp"

namespace maips {

std::string csv_quote(const std::string &field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

CsvWriter::CsvWriter(const std::filesystem::path &path,
                     const std::vector<std::string> &header)
    : path_(path), out_(path, std::ios::binary), columns_(header.size()) {
  if (!out_) throw ConfigError("cannot open " + path.string() + " for writing");
  for (const auto &h : header) *this << h;
  end_row();
}

void CsvWriter::put(const std::string &text) {
  if (in_row_ > 0) out_ << ',';
  out_ << text;
  ++in_row_;
}

CsvWriter &CsvWriter::operator<<(const std::string &field) {
  put(csv_quote(field));
  return *this;
}

CsvWriter &CsvWriter::operator<<(const char *field) { return *this << std::string(field); }

CsvWriter &CsvWriter::operator<<(double value) {
  put(format_double(value));
  return *this;
}

CsvWriter &CsvWriter::operator<<(long long value) {
  put(std::to_string(value));
  return *this;
}

void CsvWriter::end_row() {
  if (in_row_ != columns_) {
    throw Error(path_.string() + ": row has " + std::to_string(in_row_) + " fields, header has " +
                std::to_string(columns_));
  }
  out_ << "\r\n";
  in_row_ = 0;
  if (!out_) throw Error("write failed: " + path_.string());
}

} // namespace maips
