#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>

namespace fga {

using cplx = std::complex<double>;

inline constexpr int kMaxDim = 2;
inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Fixed-capacity Eigen types: no heap traffic inside per-trajectory loops.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;
using CVec = Eigen::Matrix<cplx, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using CMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;
using PhaseMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, 2 * kMaxDim, 2 * kMaxDim>;

// Integer lattice vector; only the first `dim` entries are meaningful.
using IVec = std::array<int, kMaxDim>;

inline Vec zero_vec(int dim) { return Vec::Zero(dim); }

// Round-trippable decimal text for a double.
std::string format_double(double v);

// Maps a quasi-momentum component into [-pi, pi) and reports the number of
// 2*pi shifts removed.
inline double wrap_to_zone(double xi, int* winding = nullptr) {
  const double shifted = xi + kPi;
  const double turns = std::floor(shifted / kTwoPi);
  double wrapped = shifted - turns * kTwoPi - kPi;
  int w = static_cast<int>(turns);
  if (wrapped >= kPi) {
    wrapped -= kTwoPi;
    ++w;
  }
  if (winding != nullptr) *winding = w;
  return wrapped;
}

}  // namespace fga
