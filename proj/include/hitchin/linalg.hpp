#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "hitchin/error.hpp"

namespace hitchin {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

namespace detail {

inline double maxAbs(const Mat& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

inline bool allFinite(const Mat& m) { return m.allFinite(); }

// log|det| through partial-pivot LU; fine for the moderately conditioned inputs
// that enter through constructors (long products never go through here).
inline double logAbsDet(const Mat& m) {
  Eigen::PartialPivLU<Mat> lu(m);
  const Mat& u = lu.matrixLU();
  double s = 0.0;
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    double a = std::abs(u(i, i));
    if (a == 0.0) return -std::numeric_limits<double>::infinity();
    s += std::log(a);
  }
  return s;
}

// Sign flip so the first non-negligible entry of the first column is positive.
inline double canonicalSign(const Mat& e) {
  for (Eigen::Index i = 0; i < e.rows(); ++i) {
    if (std::abs(e(i, 0)) > 1e-14) return e(i, 0) > 0 ? 1.0 : -1.0;
  }
  return 1.0;
}

}  // namespace detail

// Element of PGL(d,R). The represented matrix is exp(logScale)*entries with
// |det| = 1; entries carry unit max-norm. The inverse is stored the same way so
// both ends of the spectrum stay resolved on long products.
class ProjectiveMatrix {
 public:
  ProjectiveMatrix() = default;

  explicit ProjectiveMatrix(const Mat& m) {
    check(m);
    double ld = detail::logAbsDet(m);
    if (!std::isfinite(ld)) fail(ErrorKind::InvalidMatrix, "singular matrix");
    Mat inv = m.fullPivLu().inverse();
    if (!detail::allFinite(inv)) fail(ErrorKind::InvalidMatrix, "inverse not finite");
    const double d = static_cast<double>(m.rows());
    setParts(m, -ld / d, inv, ld / d);
  }

  // m is known to satisfy |det m| = 1 and minv is its exact inverse.
  static ProjectiveMatrix fromUnimodular(const Mat& m, const Mat& minv) {
    check(m);
    check(minv);
    ProjectiveMatrix p;
    p.setParts(m, 0.0, minv, 0.0);
    return p;
  }

  // Represented matrix exp(ls)*e with |det| = 1, inverse exp(lsi)*ei.
  static ProjectiveMatrix fromScaled(const Mat& e, double ls, const Mat& ei, double lsi) {
    check(e);
    check(ei);
    ProjectiveMatrix p;
    p.setParts(e, ls, ei, lsi);
    return p;
  }

  static ProjectiveMatrix identity(int d) {
    if (d < 2) fail(ErrorKind::InvalidMatrix, "dimension must be at least 2");
    Mat id = Mat::Identity(d, d);
    return fromUnimodular(id, id);
  }

  int dim() const { return static_cast<int>(e_.rows()); }
  const Mat& entries() const { return e_; }
  double logScale() const { return ls_; }
  const Mat& inverseEntries() const { return ei_; }
  double inverseLogScale() const { return lsi_; }

  // Determinant-one representative; may overflow for very long products.
  Mat normalized() const { return std::exp(ls_) * e_; }

  ProjectiveMatrix inverse() const {
    ProjectiveMatrix p;
    p.e_ = ei_;
    p.ls_ = lsi_;
    p.ei_ = e_;
    p.lsi_ = ls_;
    p.canonicalize();
    return p;
  }

  ProjectiveMatrix operator*(const ProjectiveMatrix& o) const {
    if (o.dim() != dim()) fail(ErrorKind::InvalidInput, "dimension mismatch in product");
    ProjectiveMatrix p;
    Mat a = e_ * o.e_;
    Mat b = o.ei_ * ei_;
    double sa = detail::maxAbs(a), sb = detail::maxAbs(b);
    if (!(sa > 0.0) || !(sb > 0.0) || !std::isfinite(sa) || !std::isfinite(sb))
      fail(ErrorKind::NumericalFailure, "product lost all precision");
    p.e_ = a / sa;
    p.ls_ = ls_ + o.ls_ + std::log(sa);
    p.ei_ = b / sb;
    p.lsi_ = lsi_ + o.lsi_ + std::log(sb);
    p.canonicalize();
    return p;
  }

  // Equality in PGL: normalized representatives agree up to a global sign.
  double distanceTo(const ProjectiveMatrix& o) const {
    if (o.dim() != dim()) return std::numeric_limits<double>::infinity();
    double r = std::exp(o.ls_ - ls_);
    double plus = (e_ - r * o.e_).cwiseAbs().maxCoeff();
    double minus = (e_ + r * o.e_).cwiseAbs().maxCoeff();
    return std::min(plus, minus);
  }
  bool approxEqual(const ProjectiveMatrix& o, double tol) const { return distanceTo(o) <= tol; }

 private:
  static void check(const Mat& m) {
    if (m.rows() != m.cols() || m.rows() < 2) fail(ErrorKind::InvalidMatrix, "need a square matrix of size >= 2");
    if (!detail::allFinite(m)) fail(ErrorKind::InvalidMatrix, "non-finite entries");
  }

  void setParts(const Mat& m, double extra, const Mat& minv, double extraInv) {
    double s = detail::maxAbs(m), si = detail::maxAbs(minv);
    if (!(s > 0.0) || !(si > 0.0)) fail(ErrorKind::InvalidMatrix, "zero matrix");
    e_ = m / s;
    ls_ = std::log(s) + extra;
    ei_ = minv / si;
    lsi_ = std::log(si) + extraInv;
    canonicalize();
  }

  void canonicalize() {
    if (detail::canonicalSign(e_) < 0) {
      e_ = -e_;
      ei_ = -ei_;
    }
  }

  Mat e_;
  double ls_ = 0.0;
  Mat ei_;
  double lsi_ = 0.0;
};

// Point of the Cartan subspace: weakly descending, summing to zero.
struct CartanVector {
  Vec values;
  int dim() const { return static_cast<int>(values.size()); }
  double operator[](int i) const { return values[i]; }
};

namespace detail {

// Combine log-moduli read off g (top end accurate) with those read off g^{-1}
// (bottom end accurate). errTop/errBottom are relative error proxies.
inline CartanVector mergeSpectra(const std::vector<double>& fromG, const std::vector<double>& errG,
                                 const std::vector<double>& fromInv, const std::vector<double>& errInv) {
  const int d = static_cast<int>(fromG.size());
  std::vector<double> v(d), err(d);
  for (int i = 0; i < d; ++i) {
    bool useG = errG[i] <= errInv[i];
    v[i] = useG ? fromG[i] : fromInv[i];
    err[i] = useG ? errG[i] : errInv[i];
    if (!std::isfinite(v[i])) err[i] = std::numeric_limits<double>::infinity();
  }
  // the worst index is recovered from the trace-zero constraint when that is
  // more accurate than reading it directly
  int w = static_cast<int>(std::max_element(err.begin(), err.end()) - err.begin());
  double others = 0.0, sumOthers = 0.0;
  for (int i = 0; i < d; ++i) {
    if (i == w) continue;
    others += err[i];
    sumOthers += v[i];
  }
  if (!std::isfinite(others) || !std::isfinite(sumOthers)) fail(ErrorKind::NumericalFailure, "spectrum not resolved");
  if (err[w] > others) v[w] = -sumOthers;
  std::sort(v.begin(), v.end(), std::greater<double>());
  double mean = std::accumulate(v.begin(), v.end(), 0.0) / d;
  CartanVector c;
  c.values.resize(d);
  for (int i = 0; i < d; ++i) c.values[i] = v[i] - mean;
  return c;
}

inline double relErr(double top, double x) {
  if (!(x > 0.0)) return std::numeric_limits<double>::infinity();
  return top / x;
}

}  // namespace detail

inline CartanVector cartanProjection(const ProjectiveMatrix& g) {
  const int d = g.dim();
  if (!g.entries().allFinite() || !g.inverseEntries().allFinite())
    fail(ErrorKind::InvalidMatrix, "non-finite entries");
  Eigen::JacobiSVD<Mat> sg(g.entries());
  Eigen::JacobiSVD<Mat> si(g.inverseEntries());
  const Vec& s = sg.singularValues();
  const Vec& t = si.singularValues();
  std::vector<double> a(d), ea(d), b(d), eb(d);
  for (int i = 0; i < d; ++i) {
    a[i] = g.logScale() + std::log(s[i]);
    ea[i] = detail::relErr(s[0], s[i]);
    double ti = t[d - 1 - i];
    b[i] = -(g.inverseLogScale() + std::log(ti));
    eb[i] = detail::relErr(t[0], ti);
  }
  return detail::mergeSpectra(a, ea, b, eb);
}

inline CartanVector jordanProjection(const ProjectiveMatrix& g) {
  const int d = g.dim();
  if (!g.entries().allFinite()) fail(ErrorKind::InvalidMatrix, "non-finite entries");
  auto moduli = [d](const Mat& m) {
    Eigen::EigenSolver<Mat> es(m, false);
    if (es.info() != Eigen::Success) fail(ErrorKind::NumericalFailure, "eigenvalue solver did not converge");
    std::vector<double> r(d);
    for (int i = 0; i < d; ++i) r[i] = std::abs(es.eigenvalues()[i]);
    std::sort(r.begin(), r.end(), std::greater<double>());
    return r;
  };
  std::vector<double> s = moduli(g.entries());
  std::vector<double> t = moduli(g.inverseEntries());
  std::vector<double> a(d), ea(d), b(d), eb(d);
  for (int i = 0; i < d; ++i) {
    a[i] = g.logScale() + std::log(s[i]);
    ea[i] = detail::relErr(s[0], s[i]);
    double ti = t[d - 1 - i];
    b[i] = -(g.inverseLogScale() + std::log(ti));
    eb[i] = detail::relErr(t[0], ti);
  }
  return detail::mergeSpectra(a, ea, b, eb);
}

// Lexicographic k-subsets of {0..d-1}.
inline std::vector<std::vector<int>> kSubsets(int d, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(k);
  for (int i = 0; i < k; ++i) cur[i] = i;
  if (k == 0 || k > d) return out;
  while (true) {
    out.push_back(cur);
    int i = k - 1;
    while (i >= 0 && cur[i] == d - k + i) --i;
    if (i < 0) break;
    ++cur[i];
    for (int j = i + 1; j < k; ++j) cur[j] = cur[j - 1] + 1;
  }
  return out;
}

inline Mat exteriorMatrix(int k, const Mat& g) {
  const int d = static_cast<int>(g.rows());
  if (k < 1 || k > d) fail(ErrorKind::InvalidInput, "exterior degree out of range");
  auto subsets = kSubsets(d, k);
  const int D = static_cast<int>(subsets.size());
  Mat E(D, D);
  Mat sub(k, k);
  for (int I = 0; I < D; ++I) {
    for (int J = 0; J < D; ++J) {
      for (int r = 0; r < k; ++r)
        for (int c = 0; c < k; ++c) sub(r, c) = g(subsets[I][r], subsets[J][c]);
      E(I, J) = k == 1 ? sub(0, 0) : sub.determinant();
    }
  }
  return E;
}

// kappa(g^(2^m)) / 2^m by repeated squaring. Each omega_k is read as the
// top singular value of E^k(g)^(2^m), which stays accurate where the middle
// singular values of g^(2^m) itself are lost to rounding.
inline CartanVector jordanViaPowers(const ProjectiveMatrix& g, int m) {
  if (m < 1) fail(ErrorKind::InvalidInput, "m must be positive");
  if (m > 60) fail(ErrorKind::InvalidInput, "m too large");
  const int d = g.dim();
  std::vector<double> omega(d + 1, 0.0);
  for (int k = 1; k < d; ++k) {
    ProjectiveMatrix h = k == 1 ? g
                                : ProjectiveMatrix::fromScaled(exteriorMatrix(k, g.entries()), k * g.logScale(),
                                                               exteriorMatrix(k, g.inverseEntries()),
                                                               k * g.inverseLogScale());
    for (int i = 0; i < m; ++i) h = h * h;
    if (!std::isfinite(h.logScale())) fail(ErrorKind::NumericalFailure, "overflow in repeated squaring");
    Eigen::JacobiSVD<Mat> svd(h.entries());
    omega[k] = (h.logScale() + std::log(svd.singularValues()[0])) / std::ldexp(1.0, m);
  }
  CartanVector c;
  c.values.resize(d);
  for (int k = 1; k <= d; ++k) c.values[k - 1] = omega[k] - omega[k - 1];
  return c;
}

inline double simpleRoot(int k, const CartanVector& v) {
  if (k < 1 || k > v.dim() - 1) fail(ErrorKind::InvalidIndex, "root index " + std::to_string(k));
  return v.values[k - 1] - v.values[k];
}

inline double fundamentalWeight(int k, const CartanVector& v) {
  if (k < 1 || k > v.dim() - 1) fail(ErrorKind::InvalidIndex, "weight index " + std::to_string(k));
  return v.values.head(k).sum();
}

// phi = sum_k c_k alpha_k.
struct RootFunctional {
  Vec coeffs;

  RootFunctional() = default;
  explicit RootFunctional(Vec c) : coeffs(std::move(c)) {}
  static RootFunctional root(int k, int d) {
    if (k < 1 || k > d - 1) fail(ErrorKind::InvalidIndex, "root index " + std::to_string(k));
    Vec c = Vec::Zero(d - 1);
    c[k - 1] = 1.0;
    return RootFunctional(c);
  }
  static RootFunctional fromWeights(const Vec& a) {
    // invert the Cartan matrix of A_{d-1}
    const int n = static_cast<int>(a.size());
    Mat cm = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      cm(i, i) = 2.0;
      if (i > 0) cm(i, i - 1) = -1.0;
      if (i + 1 < n) cm(i, i + 1) = -1.0;
    }
    return RootFunctional(cm.lu().solve(a));
  }

  int dim() const { return static_cast<int>(coeffs.size()) + 1; }

  // coefficients over omega_k: a_k = 2c_k - c_{k-1} - c_{k+1}
  Vec weightCoords() const {
    const int n = static_cast<int>(coeffs.size());
    Vec a(n);
    for (int k = 0; k < n; ++k) {
      a[k] = 2.0 * coeffs[k] - (k > 0 ? coeffs[k - 1] : 0.0) - (k + 1 < n ? coeffs[k + 1] : 0.0);
    }
    return a;
  }

  double coeffSum() const { return coeffs.sum(); }

  bool isPositive() const {
    return coeffs.size() > 0 && coeffs.minCoeff() >= 0.0 && coeffs.maxCoeff() > 0.0;
  }
};

inline double evaluate(const RootFunctional& phi, const CartanVector& v) {
  if (phi.dim() != v.dim()) fail(ErrorKind::InvalidIndex, "functional and vector dimensions differ");
  double s = 0.0;
  for (int k = 1; k < v.dim(); ++k) s += phi.coeffs[k - 1] * simpleRoot(k, v);
  return s;
}

struct ThetaSet {
  int d = 0;
  std::vector<int> indices;

  ThetaSet() = default;
  ThetaSet(int dim, std::vector<int> ks) : d(dim), indices(std::move(ks)) {
    std::sort(indices.begin(), indices.end());
    indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
    for (int k : indices) {
      if (k < 1 || k > d - 1) fail(ErrorKind::InvalidIndex, "theta index out of range");
      if (!contains(d - k)) fail(ErrorKind::InvalidInput, "theta must be symmetric");
    }
  }
  static ThetaSet full(int dim) {
    std::vector<int> ks(dim - 1);
    std::iota(ks.begin(), ks.end(), 1);
    return ThetaSet(dim, ks);
  }
  bool contains(int k) const { return std::binary_search(indices.begin(), indices.end(), k); }

  // p_theta: the roots in theta evaluated on v
  Vec project(const CartanVector& v) const {
    Vec r(indices.size());
    for (size_t i = 0; i < indices.size(); ++i) r[static_cast<Eigen::Index>(i)] = simpleRoot(indices[i], v);
    return r;
  }
};

// k-plane in R^d with orthonormal columns.
struct Subspace {
  Mat basis;

  Subspace() = default;
  static Subspace span(const Mat& cols) {
    if (cols.cols() == 0 || cols.cols() > cols.rows()) fail(ErrorKind::InvalidInput, "bad spanning set");
    Eigen::HouseholderQR<Mat> qr(cols);
    Mat q = qr.householderQ() * Mat::Identity(cols.rows(), cols.cols());
    Subspace s;
    s.basis = q;
    return s;
  }
  int rank() const { return static_cast<int>(basis.cols()); }
  int ambient() const { return static_cast<int>(basis.rows()); }
};

// Orthonormal basis of the orthogonal complement of span(cols).
inline Mat orthogonalComplement(const Mat& cols) {
  const Eigen::Index d = cols.rows(), m = cols.cols();
  Eigen::HouseholderQR<Mat> qr(cols);
  Mat q = qr.householderQ();
  return q.rightCols(d - m);
}

// span(U_k) of g. The left singular vectors of g are only good to about
// eps e^{kappa_1 - kappa_k}; the complement of the top d-k of g^{-T} is good
// to eps e^{kappa_{k+1} - kappa_d}. Take the better one.
inline Subspace cartanAttractor(const ProjectiveMatrix& g, int k, double gapTolerance = 1e-8) {
  CartanVector c = cartanProjection(g);
  const int d = g.dim();
  if (simpleRoot(k, c) <= gapTolerance) fail(ErrorKind::DegenerateGap, "singular value gap below tolerance");
  Subspace s;
  if (c[0] - c[k - 1] <= c[k] - c[d - 1]) {
    Eigen::JacobiSVD<Mat> svd(g.entries(), Eigen::ComputeFullU);
    s.basis = svd.matrixU().leftCols(k);
  } else {
    Eigen::JacobiSVD<Mat> svd(Mat(g.inverseEntries().transpose()), Eigen::ComputeFullU);
    s.basis = orthogonalComplement(svd.matrixU().leftCols(d - k));
  }
  return s;
}

// Angle between the Pluecker lines of V and W. cos = prod cos(theta_i) over
// principal angles; the sines come from the orthogonal residual so small
// angles keep full precision.
inline double grassmannianDistance(const Subspace& v, const Subspace& w) {
  if (v.rank() != w.rank() || v.ambient() != w.ambient()) fail(ErrorKind::InvalidInput, "rank mismatch");
  const int k = v.rank();
  Mat resid = w.basis - v.basis * (v.basis.transpose() * w.basis);
  Eigen::JacobiSVD<Mat> sr(resid);
  Eigen::JacobiSVD<Mat> sc(v.basis.transpose() * w.basis);
  double logCos = 0.0;
  for (int i = 0; i < k; ++i) {
    double sn = std::min(1.0, sr.singularValues()[i]);
    double cs = std::min(1.0, sc.singularValues()[k - 1 - i]);
    if (sn < 0.7) {
      logCos += 0.5 * std::log1p(-sn * sn);
    } else {
      if (cs <= 0.0) return M_PI / 2;
      logCos += std::log(cs);
    }
  }
  double oneMinusCos = -std::expm1(logCos);
  if (oneMinusCos >= 1.0) return M_PI / 2;
  return 2.0 * std::asin(std::sqrt(std::max(0.0, oneMinusCos) / 2.0));
}

}  // namespace hitchin
