#pragma once

#include <cstdint>

#include "maips/linalg.hpp"
#include "maips/rng.hpp"

namespace testing {

inline maips::RngStream stream(std::uint64_t a, std::uint64_t b = 0) {
  return maips::RngStream({4242, a, b, 0, 0, maips::DrawPurpose::Test});
}

inline maips::Matrix random_matrix(int rows, int cols, maips::RngStream &s) {
  maips::Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = s.normal();
  }
  return m;
}

inline double rel_frobenius(const maips::Matrix &a, const maips::Matrix &b) {
  return (a - b).norm() / b.norm();
}

} // namespace testing
