#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "hitchin/error.hpp"
#include "hitchin/fuchsian.hpp"
#include "hitchin/linalg.hpp"
#include "hitchin/representations.hpp"

namespace hitchin {

// Parameters of the boundary crossings of the line a + t(b - a) (chart
// normalized): tMinus < 0 behind a, tPlus > 1 beyond b.
struct Chord {
  Vec a, b;            // chart-normalized homogeneous points
  Vec aPrime, bPrime;  // boundary endpoints
  double tMinus = 0.0, tPlus = 0.0;
};

// Properly convex domain in projective space, points given in homogeneous
// coordinates. Ellipsoid and polytope use the last coordinate as chart;
// the positive-definite cone uses the trace (coordinates are the
// orthonormal symmetric-matrix coordinates).
class ConvexDomain {
 public:
  enum class Kind { Ellipsoid, Polytope, PosDefCone };

  // form Q of signature (m,1): domain {X^T Q X < 0}
  static ConvexDomain ellipsoid(const Mat& Q) {
    ConvexDomain D;
    D.kind_ = Kind::Ellipsoid;
    D.Q_ = (Q + Q.transpose()) / 2;
    D.N_ = static_cast<int>(Q.rows());
    Vec c = Vec::Zero(D.N_);
    c[D.N_ - 1] = 1.0;
    D.chart_ = c;
    Eigen::SelfAdjointEigenSolver<Mat> es(D.Q_);
    int neg = 0;
    for (int i = 0; i < D.N_; ++i) neg += es.eigenvalues()[i] < 0;
    if (neg != 1) fail(ErrorKind::InvalidInput, "form must have exactly one negative direction");
    Vec o = Vec::Zero(D.N_);
    o[D.N_ - 1] = 1.0;
    if (o.dot(D.Q_ * o) >= 0) fail(ErrorKind::InvalidInput, "chart origin must lie inside the ellipsoid");
    return D;
  }

  static ConvexDomain kleinBall(int m) {
    Mat Q = Mat::Identity(m + 1, m + 1);
    Q(m, m) = -1.0;
    return ellipsoid(Q);
  }

  // {x : A x <= b} in the affine chart; basepoint is an interior anchor used
  // for duality. Vertices are computed when not supplied.
  static ConvexDomain polytope(const Mat& A, const Vec& b, const Vec& basepoint,
                               std::optional<std::vector<Vec>> vertices = std::nullopt) {
    ConvexDomain D;
    D.kind_ = Kind::Polytope;
    D.A_ = A;
    D.b_ = b;
    D.N_ = static_cast<int>(A.cols()) + 1;
    D.chart_ = Vec::Zero(D.N_);
    D.chart_[D.N_ - 1] = 1.0;
    D.anchor_ = basepoint;
    if ((b - A * basepoint).minCoeff() <= 1e-12) fail(ErrorKind::NotInterior, "polytope basepoint must be interior");
    D.vertices_ = vertices ? *vertices : enumerateVertices(A, b);
    if (D.vertices_.empty()) fail(ErrorKind::InvalidInput, "polytope has no vertices (unbounded?)");
    for (const auto& v : D.vertices_)
      if ((A * v - b).maxCoeff() > 1e-10) fail(ErrorKind::InvalidInput, "vertex violates a facet");
    return D;
  }

  static ConvexDomain posDefCone(int n) {
    ConvexDomain D;
    D.kind_ = Kind::PosDefCone;
    D.n_ = n;
    D.N_ = n * (n + 1) / 2;
    D.chart_ = symmetricToVector(Mat::Identity(n, n));
    return D;
  }

  Kind kind() const { return kind_; }
  int ambient() const { return N_; }
  int matrixSize() const { return n_; }
  const Mat& facetNormals() const { return A_; }
  const Vec& facetBounds() const { return b_; }
  const std::vector<Vec>& vertices() const { return vertices_; }
  const Vec& anchor() const { return anchor_; }
  const Mat& form() const { return Q_; }

  // homogeneous lift of an affine-chart point
  Vec affine(const Vec& x) const {
    if (kind_ == Kind::PosDefCone) fail(ErrorKind::Unsupported, "cone points are symmetric matrices");
    Vec X(N_);
    X << x, 1.0;
    return X;
  }
  Vec matrixPoint(const Mat& S) const {
    if (kind_ != Kind::PosDefCone) fail(ErrorKind::Unsupported, "matrix points need the cone");
    return symmetricToVector(S);
  }

  Vec normalize(const Vec& X) const {
    double c = chart_.dot(X);
    if (!(std::abs(c) > 0)) fail(ErrorKind::NotInterior, "point at infinity of the chart");
    return X / c;
  }

  // Signed interior margin of a chart-normalized point (positive inside).
  double margin(const Vec& Xin) const {
    Vec X = normalize(Xin);
    switch (kind_) {
      case Kind::Ellipsoid: return -X.dot(Q_ * X);
      case Kind::Polytope: return (b_ - A_ * X.head(N_ - 1)).minCoeff();
      case Kind::PosDefCone: {
        Eigen::SelfAdjointEigenSolver<Mat> es(vectorToSymmetric(X, n_));
        return es.eigenvalues().minCoeff();
      }
    }
    return 0;
  }
  bool interior(const Vec& X, double tol = 1e-12) const {
    if (kind_ == Kind::PosDefCone) {
      // sign of the chart matters for the cone
      if (chart_.dot(X) <= 0) return false;
    }
    return margin(X) > tol;
  }

  // Crossings of the projective line through a and b with the boundary.
  // a must be interior; b may be interior or on the boundary.
  Chord chord(const Vec& aIn, const Vec& bIn) const {
    Chord c;
    c.a = normalize(aIn);
    c.b = normalize(bIn);
    Vec v = c.b - c.a;
    if (v.norm() < 1e-300) fail(ErrorKind::InvalidInput, "chord needs distinct points");
    switch (kind_) {
      case Kind::Ellipsoid: {
        double A = v.dot(Q_ * v), B = c.a.dot(Q_ * v), C = c.a.dot(Q_ * c.a);
        // A t^2 + 2 B t + C = 0 with C < 0
        double disc = std::sqrt(std::max(0.0, B * B - A * C));
        double q = -(B + std::copysign(disc, B));
        double r1 = q / A, r2 = C / q;
        if (q == 0.0) r1 = r2 = 0.0;
        c.tMinus = std::min(r1, r2);
        c.tPlus = std::max(r1, r2);
        break;
      }
      case Kind::Polytope: {
        Vec x = c.a.head(N_ - 1), w = v.head(N_ - 1);
        double lo = -kInf, hi = kInf;
        for (Eigen::Index i = 0; i < A_.rows(); ++i) {
          double s = A_.row(i).dot(w), slack = b_[i] - A_.row(i).dot(x);
          if (s > 0) hi = std::min(hi, slack / s);
          else if (s < 0) lo = std::max(lo, slack / s);
        }
        c.tMinus = lo;
        c.tPlus = hi;
        break;
      }
      case Kind::PosDefCone: {
        Mat Sa = vectorToSymmetric(c.a, n_), Sv = vectorToSymmetric(v, n_);
        Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(Sv, Sa);
        double mmin = es.eigenvalues().minCoeff(), mmax = es.eigenvalues().maxCoeff();
        c.tPlus = mmin < 0 ? -1.0 / mmin : kInf;
        c.tMinus = mmax > 0 ? -1.0 / mmax : -kInf;
        break;
      }
    }
    if (!std::isfinite(c.tMinus) || !std::isfinite(c.tPlus)) fail(ErrorKind::NumericalFailure, "unbounded chord");
    c.aPrime = c.a + c.tMinus * v;
    c.bPrime = c.a + c.tPlus * v;
    return c;
  }

 private:
  static std::vector<Vec> enumerateVertices(const Mat& A, const Vec& b) {
    const int m = static_cast<int>(A.cols());
    const int F = static_cast<int>(A.rows());
    std::vector<Vec> out;
    for (const auto& S : kSubsets(F, m)) {
      Mat M(m, m);
      Vec r(m);
      for (int i = 0; i < m; ++i) {
        M.row(i) = A.row(S[i]);
        r[i] = b[S[i]];
      }
      Eigen::FullPivLU<Mat> lu(M);
      if (!lu.isInvertible()) continue;
      Vec x = lu.solve(r);
      if ((A * x - b).maxCoeff() > 1e-10) continue;
      bool dup = false;
      for (const auto& y : out)
        if ((x - y).norm() < 1e-9) dup = true;
      if (!dup) out.push_back(x);
    }
    return out;
  }

  Kind kind_ = Kind::Ellipsoid;
  int N_ = 0;
  int n_ = 0;
  Mat Q_;
  Mat A_;
  Vec b_;
  Vec chart_;
  Vec anchor_;
  std::vector<Vec> vertices_;
};

inline double hilbertDistanceFromChord(const Chord& c) {
  double tm = c.tMinus, tp = c.tPlus;
  return std::log((1.0 - tm) / (-tm)) + std::log(tp / (tp - 1.0));
}

inline double hilbertDistance(const ConvexDomain& D, const Vec& a, const Vec& b) {
  if (!D.interior(a) || !D.interior(b)) fail(ErrorKind::NotInterior, "points must be interior");
  Vec an = D.normalize(a), bn = D.normalize(b);
  if ((an - bn).norm() <= 1e-15 * std::max(1.0, an.norm())) return 0.0;
  return std::max(0.0, hilbertDistanceFromChord(D.chord(an, bn)));
}

inline Vec radialProjection(const ConvexDomain& D, const Vec& b0, const Vec& z) {
  if (!D.interior(b0)) fail(ErrorKind::NotInterior, "basepoint must be interior");
  Vec bn = D.normalize(b0), zn = D.normalize(z);
  if ((bn - zn).norm() < 1e-14) fail(ErrorKind::InvalidInput, "z coincides with the basepoint");
  if (D.margin(zn) < -1e-10) fail(ErrorKind::NotInterior, "z outside the closed domain");
  return D.chord(bn, zn).bPrime;
}

// Homogeneous linear functional H with H.X = 0 the supporting hyperplane.
inline Vec supportingHyperplane(const ConvexDomain& D, const Vec& xIn) {
  Vec x = D.normalize(xIn);
  if (std::abs(D.margin(x)) > 1e-10) fail(ErrorKind::InvalidInput, "point is not on the boundary");
  switch (D.kind()) {
    case ConvexDomain::Kind::Ellipsoid: return D.form() * x;
    case ConvexDomain::Kind::PosDefCone: {
      const int n = D.matrixSize();
      Eigen::SelfAdjointEigenSolver<Mat> es(vectorToSymmetric(x, n));
      double top = es.eigenvalues().cwiseAbs().maxCoeff();
      int kernel = 0;
      for (int i = 0; i < n; ++i)
        if (std::abs(es.eigenvalues()[i]) <= 1e-10 * std::max(1.0, top)) ++kernel;
      if (kernel >= 2) fail(ErrorKind::MultipleSupports, "kernel of dimension " + std::to_string(kernel));
      Vec v = es.eigenvectors().col(0);
      return symmetricToVector(v * v.transpose());
    }
    case ConvexDomain::Kind::Polytope: {
      const Mat& A = D.facetNormals();
      const Vec& b = D.facetBounds();
      Vec p = x.head(D.ambient() - 1);
      std::vector<int> active;
      for (Eigen::Index i = 0; i < A.rows(); ++i)
        if (std::abs(b[i] - A.row(i).dot(p)) <= 1e-10) active.push_back(static_cast<int>(i));
      if (active.size() != 1) {
        std::string list;
        for (int i : active) list += (list.empty() ? "" : ",") + std::to_string(i);
        fail(ErrorKind::MultipleSupports, "active facets {" + list + "}");
      }
      Vec H(D.ambient());
      H << A.row(active[0]).transpose(), -b[active[0]];
      return H;
    }
  }
  return {};
}

// Dual with respect to the anchor p: facet a.x <= b becomes the vertex
// p + a/(b - a.p); vertex v becomes the facet (v - p).(y - p) <= 1.
inline ConvexDomain dualDomain(const ConvexDomain& D) {
  if (D.kind() != ConvexDomain::Kind::Polytope) fail(ErrorKind::Unsupported, "duality implemented for polytopes");
  const Mat& A = D.facetNormals();
  const Vec& b = D.facetBounds();
  const Vec& p = D.anchor();
  const int m = static_cast<int>(A.cols());
  std::vector<Vec> dualVerts;
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    double c = b[i] - A.row(i).dot(p);
    dualVerts.push_back(p + A.row(i).transpose() / c);
  }
  const auto& V = D.vertices();
  Mat As(static_cast<Eigen::Index>(V.size()), m);
  Vec bs(static_cast<Eigen::Index>(V.size()));
  for (size_t j = 0; j < V.size(); ++j) {
    Vec n = V[j] - p;
    As.row(static_cast<Eigen::Index>(j)) = n.transpose();
    bs[static_cast<Eigen::Index>(j)] = 1.0 + n.dot(p);
  }
  return ConvexDomain::polytope(As, bs, p, dualVerts);
}

// Vertex sets equal up to order.
inline double vertexSetDistance(const std::vector<Vec>& a, const std::vector<Vec>& b) {
  if (a.size() != b.size()) return kInf;
  double worst = 0.0;
  for (const auto& x : a) {
    double best = kInf;
    for (const auto& y : b) best = std::min(best, (x - y).norm());
    worst = std::max(worst, best);
  }
  return worst;
}

namespace detail {

// minimize a unimodal-ish f on [lo, hi]: uniform scan then golden section
// around the best sample. If the refinement ends above the scan minimum
// (f not unimodal there) the scan value is the answer.
template <class F>
double scanGoldenMin(F f, double lo, double hi, int samples = 256) {
  double best = kInf;
  int bi = 0;
  std::vector<double> xs(samples + 1);
  for (int i = 0; i <= samples; ++i) {
    xs[i] = lo + (hi - lo) * i / samples;
    double v = f(xs[i]);
    if (v < best) {
      best = v;
      bi = i;
    }
  }
  double a = xs[std::max(0, bi - 1)], b = xs[std::min(samples, bi + 1)];
  const double g = (std::sqrt(5.0) - 1) / 2;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 80 && b - a > 1e-14 * std::max(1.0, std::abs(a)); ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return std::min({best, fc, fd});
}

}  // namespace detail

// Distance from z to the half-open chord [b, x).
inline double distanceToRay(const ConvexDomain& D, const Vec& b, const Vec& z, const Vec& x) {
  Vec bn = D.normalize(b), xn = D.normalize(x);
  double reach = hilbertDistance(D, b, z);
  auto point = [&](double s) -> Vec { return bn + s * (xn - bn); };
  // only the part of the ray within reach + (current best) can matter;
  // search s in [0, sMax) with d(b, p(sMax)) = 2 reach + 1
  double target = 2 * reach + 1.0;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    double mid = (lo + hi) / 2;
    if (mid == lo || mid == hi) break;
    Vec p = point(mid);
    if (!D.interior(p, 0.0) || hilbertDistance(D, bn, p) > target) hi = mid;
    else lo = mid;
  }
  double sMax = lo;
  if (sMax <= 0) return reach;
  // uniform in -log(1-s/sMax') keeps resolution near the far end
  double tauMax = -std::log1p(-sMax);
  auto f = [&](double tau) {
    double s = -std::expm1(-tau);
    if (s <= 0) return reach;
    return hilbertDistance(D, point(s), z);
  };
  return std::min(reach, detail::scanGoldenMin(f, 0.0, tauMax));
}

inline bool inShadow(const ConvexDomain& D, const Vec& b, const Vec& z, double r, const Vec& x) {
  if (!(r > 0)) fail(ErrorKind::InvalidInput, "radius must be positive");
  if (!D.interior(b) || !D.interior(z)) fail(ErrorKind::NotInterior, "b and z must be interior");
  return distanceToRay(D, b, z, x) <= r;
}

// Random interior point (deterministic given the generator).
inline Vec randomInteriorPoint(const ConvexDomain& D, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  switch (D.kind()) {
    case ConvexDomain::Kind::Ellipsoid: {
      // along a random chord through the chart origin
      const int N = D.ambient();
      Vec o = Vec::Zero(N);
      o[N - 1] = 1.0;
      Vec dir(N);
      for (int i = 0; i < N - 1; ++i) dir[i] = nd(rng);
      dir[N - 1] = 0.0;
      Chord c = D.chord(o, o + dir);
      double s = c.tPlus * 0.95 * std::pow(ud(rng), 0.5);
      return o + s * dir;
    }
    case ConvexDomain::Kind::Polytope: {
      const auto& V = D.vertices();
      Vec w(static_cast<Eigen::Index>(V.size()));
      for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = -std::log(std::max(1e-300, ud(rng)));
      w /= w.sum();
      Vec x = 0.2 * D.anchor();
      for (size_t i = 0; i < V.size(); ++i) x += 0.8 * w[static_cast<Eigen::Index>(i)] * V[i];
      return D.affine(x);
    }
    case ConvexDomain::Kind::PosDefCone: {
      const int n = D.matrixSize();
      Mat G(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) G(i, j) = nd(rng);
      Mat S = G * G.transpose() + 0.05 * Mat::Identity(n, n);
      return D.normalize(D.matrixPoint(S / S.trace()));
    }
  }
  return {};
}

inline bool preservesDomain(const ConvexDomain& D, const ProjectiveMatrix& g, int samples, std::uint64_t seed = 7) {
  if (g.dim() != D.ambient()) fail(ErrorKind::InvalidInput, "matrix does not act on the domain's space");
  std::mt19937_64 rng(seed);
  const Mat& E = g.entries();
  std::vector<Vec> pts, imgs;
  for (int i = 0; i < samples; ++i) {
    Vec p = randomInteriorPoint(D, rng);
    Vec q = E * p;
    // projective image: either sign of the representative may land in the cone
    if (D.kind() == ConvexDomain::Kind::PosDefCone && q.dot(symmetricToVector(Mat::Identity(D.matrixSize(), D.matrixSize()))) < 0) q = -q;
    if (!D.interior(q, 0.0)) return false;
    pts.push_back(p);
    imgs.push_back(q);
  }
  for (int i = 0; i + 1 < samples; i += 2) {
    double d0 = hilbertDistance(D, pts[i], pts[i + 1]);
    double d1 = hilbertDistance(D, imgs[i], imgs[i + 1]);
    if (std::abs(d0 - d1) > 1e-8 * std::max(1.0, d0)) return false;
  }
  return true;
}

// Hausdorff distance between segments [p1,p2] and [q1,q2], sampled on the
// outer segment; the inner minimum uses golden section (Hilbert balls are
// convex, so the distance to a segment is unimodal along it).
inline double segmentHausdorff(const ConvexDomain& D, const Vec& p1, const Vec& p2, const Vec& q1, const Vec& q2,
                               int samples = 64) {
  auto oneSide = [&](const Vec& a1, const Vec& a2, const Vec& c1, const Vec& c2) {
    Vec A1 = D.normalize(a1), A2 = D.normalize(a2), C1 = D.normalize(c1), C2 = D.normalize(c2);
    double worst = 0.0;
    for (int i = 0; i <= samples; ++i) {
      double s = static_cast<double>(i) / samples;
      Vec p = A1 + s * (A2 - A1);
      auto f = [&](double t) { return hilbertDistance(D, p, C1 + t * (C2 - C1)); };
      worst = std::max(worst, detail::scanGoldenMin(f, 0.0, 1.0, 32));
    }
    return worst;
  };
  return std::max(oneSide(p1, p2, q1, q2), oneSide(q1, q2, p1, p2));
}

}  // namespace hitchin
