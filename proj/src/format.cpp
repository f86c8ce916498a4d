#include "maips/format.hpp"

#include <charconv>

namespace maips {

std::string format_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

} // namespace maips
