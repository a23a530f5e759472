#pragma once

#include "core/model.hpp"

#include <algorithm>
#include <cmath>

namespace fogctl::testing {

inline LinearSystemModel scalar(int N, double a = 1.0, double w = 1.0) {
  const Matrix one = Matrix::Ones(1, 1);
  return LinearSystemModel::constant(N, a * one, one, one, one, w * one, one);
}

inline Matrix s1(double v) { return Matrix::Constant(1, 1, v); }

inline double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

inline double max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace fogctl::testing
