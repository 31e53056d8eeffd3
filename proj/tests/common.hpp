#pragma once

#include <gtest/gtest.h>

#include <random>

#include "hitchin/hitchin.hpp"

namespace testing_util {

using namespace hitchin;

// det-1 matrix with moderate condition number
inline Mat randomSL(int d, std::mt19937_64& rng, double spread = 1.5) {
  std::normal_distribution<double> n(0.0, 1.0);
  Mat m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = n(rng) * spread;
  m += Mat::Identity(d, d);
  double det = m.determinant();
  if (det < 0) {
    m.row(0) *= -1;
    det = -det;
  }
  return m / std::pow(det, 1.0 / d);
}

inline Mat randomOrthogonal(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Mat m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = n(rng);
  Eigen::HouseholderQR<Mat> qr(m);
  Mat q = qr.householderQ();
  if (q.determinant() < 0) q.col(0) *= -1;
  return q;
}

inline Moebius randomSL2(std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Moebius m;
  do {
    m << 1 + n(rng), n(rng), n(rng), 1 + n(rng);
  } while (std::abs(m.determinant()) < 0.1);
  if (m.determinant() < 0) m.row(0) *= -1;
  return m / std::sqrt(m.determinant());
}

inline double maxDiff(const CartanVector& a, const CartanVector& b) { return (a.values - b.values).cwiseAbs().maxCoeff(); }

inline Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

inline CartanVector cv(std::initializer_list<double> xs) { return CartanVector{vec(xs)}; }

}  // namespace testing_util
