#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "hitchin/error.hpp"
#include "hitchin/linalg.hpp"
#include "hitchin/representations.hpp"

namespace hitchin {

enum class Positivity { Positive, NonPositive, Indeterminate };

inline const char* positivityName(Positivity p) {
  switch (p) {
    case Positivity::Positive: return "positive";
    case Positivity::NonPositive: return "non-positive";
    case Positivity::Indeterminate: return "indeterminate";
  }
  return "?";
}

struct PositivityReport {
  Positivity verdict = Positivity::Indeterminate;
  double minMinor = 0.0;  // smallest non-forced minor
  int minorsChecked = 0;
};

namespace detail {

inline double cofactorDet(const Mat& a) {
  const Eigen::Index n = a.rows();
  if (n == 1) return a(0, 0);
  if (n == 2) return a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
  double s = 0.0;
  Mat sub(n - 1, n - 1);
  for (Eigen::Index c = 0; c < n; ++c) {
    if (a(0, c) == 0.0) continue;
    for (Eigen::Index r = 1; r < n; ++r) {
      Eigen::Index cc = 0;
      for (Eigen::Index k = 0; k < n; ++k)
        if (k != c) sub(r - 1, cc++) = a(r, k);
    }
    s += ((c % 2) ? -1.0 : 1.0) * a(0, c) * cofactorDet(sub);
  }
  return s;
}

// Fraction-free (Bareiss) elimination with row pivoting.
inline double bareissDet(Mat a) {
  const Eigen::Index n = a.rows();
  double sign = 1.0, prev = 1.0;
  for (Eigen::Index k = 0; k < n - 1; ++k) {
    if (a(k, k) == 0.0) {
      Eigen::Index p = k + 1;
      while (p < n && a(p, k) == 0.0) ++p;
      if (p == n) return 0.0;
      a.row(k).swap(a.row(p));
      sign = -sign;
    }
    for (Eigen::Index i = k + 1; i < n; ++i)
      for (Eigen::Index j = k + 1; j < n; ++j) a(i, j) = (a(i, j) * a(k, k) - a(i, k) * a(k, j)) / prev;
    prev = a(k, k);
  }
  return sign * a(n - 1, n - 1);
}

inline double minorDet(const Mat& a) { return a.rows() <= 5 ? cofactorDet(a) : bareissDet(a); }

}  // namespace detail

// Minors u^{I}_{J} with i_l <= j_l for all l.
inline PositivityReport unipotentMinors(const Mat& u, double tol = 1e-10) {
  const int d = static_cast<int>(u.rows());
  if (u.cols() != d) fail(ErrorKind::InvalidInput, "square matrix required");
  for (int i = 0; i < d; ++i) {
    if (std::abs(u(i, i) - 1.0) > 1e-8) fail(ErrorKind::InvalidInput, "diagonal must be 1");
    for (int j = 0; j < i; ++j)
      if (std::abs(u(i, j)) > 1e-8) fail(ErrorKind::InvalidInput, "matrix must be upper triangular");
  }
  PositivityReport rep;
  rep.minMinor = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= d; ++k) {
    auto subsets = kSubsets(d, k);
    Mat sub(k, k);
    for (const auto& I : subsets) {
      for (const auto& J : subsets) {
        bool nonForced = true;
        for (int l = 0; l < k; ++l)
          if (I[l] > J[l]) nonForced = false;
        if (!nonForced) continue;
        // minors on the diagonal blocks are identically 1; skip I == J
        if (I == J) continue;
        for (int r = 0; r < k; ++r)
          for (int c = 0; c < k; ++c) sub(r, c) = u(I[r], J[c]);
        double m = detail::minorDet(sub);
        rep.minMinor = std::min(rep.minMinor, m);
        ++rep.minorsChecked;
      }
    }
  }
  if (rep.minMinor > tol) rep.verdict = Positivity::Positive;
  else if (rep.minMinor < -tol) rep.verdict = Positivity::NonPositive;
  else rep.verdict = Positivity::Indeterminate;
  return rep;
}

inline bool isTotallyPositiveUnipotent(const Mat& u, double tol = 1e-10) {
  return unipotentMinors(u, tol).verdict == Positivity::Positive;
}

inline bool transverse(const Flag& F, const Flag& G, double tol = 1e-10) {
  const int d = F.dim();
  if (G.dim() != d) fail(ErrorKind::InvalidInput, "flags live in different dimensions");
  for (int i = 1; i < d; ++i) {
    Mat stack(d, d);
    stack << F.subspace(i).basis, G.subspace(d - i).basis;
    if (std::abs(stack.determinant()) <= tol) return false;
  }
  return true;
}

struct CompatibleBasis {
  Mat basis;  // columns b_1..b_d
};

// b_i spans F^i ∩ G^{d-i+1}.
inline CompatibleBasis compatibleBasis(const Flag& F, const Flag& G) {
  const int d = F.dim();
  if (!transverse(F, G)) fail(ErrorKind::NotTransverse, "flags are not transverse");
  CompatibleBasis B;
  B.basis.resize(d, d);
  for (int i = 1; i <= d; ++i) {
    Mat A = F.subspace(i).basis;
    Mat C = G.subspace(d - i + 1).basis;
    Mat M(d, d + 1);
    M << A, -C;
    Eigen::JacobiSVD<Mat> svd(M, Eigen::ComputeFullV);
    Vec z = svd.matrixV().col(d);
    Vec b = A * z.head(i);
    b.normalize();
    B.basis.col(i - 1) = b;
  }
  if (B.basis.determinant() < 0) B.basis.col(d - 1) *= -1.0;
  return B;
}

// The unipotent u (upper triangular in the basis compatible with (F1, F3))
// carrying F3 to F2, rescaled so its superdiagonal is 1 where possible.
inline Mat tripleUnipotent(const Flag& F1, const Flag& F2, const Flag& F3) {
  const int d = F1.dim();
  CompatibleBasis B = compatibleBasis(F1, F3);
  Mat N = B.basis.lu().solve(F2.basis);
  Mat w0 = Mat::Identity(d, d).rowwise().reverse();
  Mat X = w0 * N;
  // unpivoted LU: X = L U with L unit lower triangular
  Mat L = Mat::Identity(d, d), U = X;
  for (int k = 0; k < d; ++k) {
    if (std::abs(U(k, k)) < 1e-13 * std::max(1.0, U.cwiseAbs().maxCoeff()))
      fail(ErrorKind::NotTransverse, "middle flag not transverse to the first");
    for (int i = k + 1; i < d; ++i) {
      double f = U(i, k) / U(k, k);
      L(i, k) = f;
      U.row(i) -= f * U.row(k);
    }
  }
  Mat u = w0 * L * w0;
  // diagonal conjugation (signs allowed: B is only fixed up to diagonal
  // change) normalizing the superdiagonal to 1
  Vec lam(d);
  lam[0] = 1.0;
  bool ok = true;
  for (int i = 0; i + 1 < d; ++i) {
    double s = u(i, i + 1);
    if (std::abs(s) < 1e-300) {
      ok = false;
      break;
    }
    lam[i + 1] = lam[i] / s;
  }
  if (ok) u = lam.cwiseInverse().asDiagonal() * u * lam.asDiagonal();
  // residual of the unipotent condition
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < i; ++j)
      if (std::abs(u(i, j)) > 1e-8) fail(ErrorKind::NumericalFailure, "triple matrix is not unipotent");
  for (int i = 0; i < d; ++i) u(i, i) = 1.0;
  return u;
}

inline PositivityReport positiveTripleReport(const Flag& F1, const Flag& F2, const Flag& F3, double tol = 1e-10) {
  if (!transverse(F1, F2) || !transverse(F2, F3) || !transverse(F1, F3))
    fail(ErrorKind::NotTransverse, "triple is not pairwise transverse");
  Mat u = tripleUnipotent(F1, F2, F3);
  return unipotentMinors(u, tol);
}

inline bool isPositiveTriple(const Flag& F1, const Flag& F2, const Flag& F3, double tol = 1e-10) {
  return positiveTripleReport(F1, F2, F3, tol).verdict == Positivity::Positive;
}

// Necessary condition: all ordered sub-triples positive.
inline bool checkTupleViaTriples(const std::vector<Flag>& flags, double tol = 1e-10, double* minMinor = nullptr) {
  const int n = static_cast<int>(flags.size());
  if (n < 3) fail(ErrorKind::InvalidInput, "need at least three flags");
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (!transverse(flags[i], flags[j])) fail(ErrorKind::NotTransverse, "tuple is not pairwise transverse");
  bool all = true;
  double mm = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int k = j + 1; k < n; ++k) {
        PositivityReport r = positiveTripleReport(flags[i], flags[j], flags[k], tol);
        mm = std::min(mm, r.minMinor);
        if (r.verdict != Positivity::Positive) all = false;
      }
  if (minMinor) *minMinor = mm;
  return all;
}

inline bool directSumCheck(const std::vector<Flag>& flags, const std::vector<int>& dims, double tol = 1e-10) {
  if (flags.size() != dims.size() || flags.empty()) fail(ErrorKind::InvalidInput, "one dimension per flag");
  const int d = flags[0].dim();
  int total = 0;
  for (int k : dims) {
    if (k < 0) fail(ErrorKind::InvalidInput, "negative dimension");
    total += k;
  }
  if (total != d) fail(ErrorKind::InvalidInput, "dimensions must sum to d");
  Mat stack(d, d);
  int col = 0;
  for (size_t i = 0; i < flags.size(); ++i) {
    if (dims[i] == 0) continue;
    stack.middleCols(col, dims[i]) = flags[i].subspace(dims[i]).basis;
    col += dims[i];
  }
  return std::abs(stack.determinant()) > tol;
}

}  // namespace hitchin
