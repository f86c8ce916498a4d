#pragma once

#include <string>

namespace maips {

/// 17 significant digits, general notation.
std::string format_double(double v);

} // namespace maips
