#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hitchin/error.hpp"
#include "hitchin/fuchsian.hpp"
#include "hitchin/hilbert.hpp"
#include "hitchin/linalg.hpp"
#include "hitchin/representations.hpp"

namespace hitchin {

struct CountingProfile {
  std::vector<double> values;  // sorted ascending, all <= cutoff
  double cutoff = 0.0;
  bool classes = false;  // class profile (lengths) vs orbit profile (Cartan)
  bool heuristicCutoff = false;
  std::string group, representation, functional;
};

struct ExponentEstimate {
  double value = 0.0;
  double halfWidth = 0.0;
  double windowMin = 0.0, windowMax = 0.0;
  std::string method;
  double intercept = 0.0;
  std::vector<std::pair<double, double>> fitPoints;  // (T', y) used by the main fit
};

// Neumaier compensated sum.
class CompensatedSum {
 public:
  void add(double x) {
    double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) c_ += (sum_ - t) + x;
    else c_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + c_; }

 private:
  double sum_ = 0.0, c_ = 0.0;
};

inline double poincareSeries(const CountingProfile& p, double s) {
  if (!(s >= 0)) fail(ErrorKind::InvalidInput, "s must be non-negative");
  CompensatedSum acc;
  for (double v : p.values) acc.add(std::exp(-s * v));
  return acc.value();
}

inline std::size_t countAtMost(const std::vector<double>& sorted, double t) {
  return static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin());
}

namespace detail {

struct LineFit {
  double slope = 0.0, intercept = 0.0, se = 0.0;
  int n = 0;
};

inline LineFit fitLine(const std::vector<std::pair<double, double>>& pts) {
  LineFit f;
  f.n = static_cast<int>(pts.size());
  if (f.n < 3) fail(ErrorKind::InsufficientWindow, "too few populated grid points");
  double mx = 0, my = 0;
  for (auto [x, y] : pts) {
    mx += x;
    my += y;
  }
  mx /= f.n;
  my /= f.n;
  double sxx = 0, sxy = 0;
  for (auto [x, y] : pts) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssr = 0;
  for (auto [x, y] : pts) {
    double r = y - f.intercept - f.slope * x;
    ssr += r * r;
  }
  f.se = std::sqrt(ssr / std::max(1, f.n - 2) / sxx);
  return f;
}

// log N(T') (orbit) or log(T' N(T')) (class; the prime-geodesic 1/T factor)
// sampled on a grid over [lo, hi]
inline std::vector<std::pair<double, double>> countingGrid(const CountingProfile& p, double lo, double hi,
                                                           int points) {
  std::vector<std::pair<double, double>> pts;
  for (int i = 0; i < points; ++i) {
    double t = lo + (hi - lo) * i / (points - 1);
    std::size_t n = countAtMost(p.values, t);
    if (n == 0 || t <= 0) continue;
    double y = std::log(static_cast<double>(n));
    if (p.classes) y += std::log(t);
    pts.push_back({t, y});
  }
  return pts;
}

}  // namespace detail

// Slope of the counting function over the top half of [0, T]; halfWidth is
// twice the standard error plus the spread against the top-third fit.
inline ExponentEstimate criticalExponentEstimate(const CountingProfile& p) {
  const double T = p.cutoff;
  if (p.values.size() < 50) fail(ErrorKind::InsufficientWindow, "need at least 50 values");
  if (!(T > 0) || p.values.back() - p.values.front() < 4.0)
    fail(ErrorKind::InsufficientWindow, "profile spans less than 4 units");
  constexpr int kGrid = 64;
  auto main = detail::countingGrid(p, T / 2, T, kGrid);
  auto top = detail::countingGrid(p, 2 * T / 3, T, kGrid);
  if (main.size() < 8 || top.size() < 8) fail(ErrorKind::InsufficientWindow, "window too sparsely populated");
  detail::LineFit f = detail::fitLine(main), g = detail::fitLine(top);
  ExponentEstimate e;
  e.value = f.slope;
  e.intercept = f.intercept;
  e.halfWidth = 2.0 * f.se + std::abs(f.slope - g.slope);
  e.windowMin = T / 2;
  e.windowMax = T;
  e.method = p.classes ? "class-count-slope" : "orbit-count-slope";
  e.fitPoints = std::move(main);
  if (!std::isfinite(e.value)) fail(ErrorKind::InsufficientWindow, "non-finite slope");
  return e;
}

inline ExponentEstimate entropyEstimate(const CountingProfile& classProfile) {
  if (!classProfile.classes) fail(ErrorKind::InvalidInput, "entropy needs a class profile");
  return criticalExponentEstimate(classProfile);
}

// Secondary method: for s < delta the partial sums log Q_{T'}(s) grow at
// rate (delta - s), so s + growth(s) estimates delta for several s below the
// count slope; the spread over s is the half width.
inline ExponentEstimate seriesGrowthEstimate(const CountingProfile& p) {
  const double T = p.cutoff;
  if (p.values.size() < 50) fail(ErrorKind::InsufficientWindow, "need at least 50 values");
  auto growth = [&](double s) {
    std::vector<std::pair<double, double>> pts;
    CompensatedSum acc;
    std::size_t i = 0;
    constexpr int kGrid = 64;
    for (int k = 0; k < kGrid; ++k) {
      double t = T / 2 + (T / 2) * k / (kGrid - 1);
      while (i < p.values.size() && p.values[i] <= t) acc.add(std::exp(-s * p.values[i++]));
      if (acc.value() > 0) pts.push_back({t, std::log(acc.value())});
    }
    return detail::fitLine(pts).slope;
  };
  const double d0 = growth(0.0);
  double lo = kInf, hi = -kInf, sum = 0;
  const double fractions[] = {0.0, 0.25, 0.5};
  for (double f : fractions) {
    double s = f * std::max(0.0, d0);
    double est = s + growth(s);
    lo = std::min(lo, est);
    hi = std::max(hi, est);
    sum += est;
  }
  ExponentEstimate e;
  e.value = sum / 3;
  e.halfWidth = (hi - lo) / 2;
  e.windowMin = T / 2;
  e.windowMax = T;
  e.method = "series-growth";
  return e;
}

// ---------------------------------------------------------------------------
// Cartan data over balls and conjugacy classes. Profiles for any functional
// are cut from the same cloud.

struct CartanCloud {
  std::vector<CartanVector> vectors;  // kappa (orbit) or nu (classes)
  std::vector<double> hyperbolic;     // d(g b0, b0) or translation length
  double radius = 0.0;                // hyperbolic cutoff used
  bool classes = false;
  // kappa(rho(a_1)) when rho factors through PSL2 with orthogonal image of
  // the rotation group and the basepoint is i: then every value scales
  // exactly with the hyperbolic quantity
  std::optional<CartanVector> unitRate;
  std::string group, representation;
};

inline bool rotationsAreOrthogonal(const Representation& rho) {
  if (!rho.lift()) return false;
  for (double a : {0.37, 1.3, 2.9}) {
    const Mat& e = (*rho.lift())(rotationAbout_i(a)).normalized();
    Mat q = e / std::pow(std::abs(e.determinant()), 1.0 / static_cast<double>(e.rows()));
    if ((q.transpose() * q - Mat::Identity(q.rows(), q.cols())).cwiseAbs().maxCoeff() > 1e-9) return false;
  }
  return true;
}

inline std::optional<CartanVector> liftUnitRate(const Representation& rho) {
  const GeneratorSystem& G = rho.domain();
  if (std::abs(G.basepoint.x) > 1e-15 || std::abs(G.basepoint.y - 1.0) > 1e-15) return std::nullopt;
  if (!rotationsAreOrthogonal(rho)) return std::nullopt;
  return cartanProjection((*rho.lift())(makeMoebius(std::exp(0.5), 0, 0, std::exp(-0.5))));
}

inline CartanCloud orbitCloud(const Representation& rho, double T, const BallOptions& opt = {}) {
  const GeneratorSystem& G = rho.domain();
  CartanCloud c;
  c.radius = T;
  c.group = G.name;
  c.representation = rho.description();
  c.unitRate = liftUnitRate(rho);
  visitBall(
      G, G.basepoint, T,
      [&](const Letters& w, const Moebius& m, double dist) {
        c.vectors.push_back(cartanProjection(rho.evaluate(w, m)));
        c.hyperbolic.push_back(dist);
      },
      opt);
  return c;
}

inline CartanCloud classCloud(const Representation& rho, double T, const BallOptions& opt = {}) {
  const GeneratorSystem& G = rho.domain();
  CartanCloud c;
  c.radius = T;
  c.classes = true;
  c.group = G.name;
  c.representation = rho.description();
  c.unitRate = liftUnitRate(rho);
  for (const auto& k : enumerateHyperbolicConjugacyClasses(G, T, opt)) {
    c.vectors.push_back(jordanProjection(rho.evaluate(k.word, k.matrix)));
    c.hyperbolic.push_back(k.length);
  }
  return c;
}

// Functional applied to a cloud vector.
using CloudFunctional = std::function<double(const CartanVector&)>;

inline CloudFunctional asFunctional(const RootFunctional& phi) {
  return [phi](const CartanVector& v) { return evaluate(phi, v); };
}

// Cutoff in functional units below which the cloud is complete. Exact for
// the scaling case; otherwise the least ratio value/hyperbolic over the outer
// half of the cloud, times the radius (heuristic).
inline double cloudCutoff(const CartanCloud& c, const CloudFunctional& f, bool* heuristic = nullptr) {
  if (c.unitRate) {
    if (heuristic) *heuristic = false;
    double r = f(*c.unitRate);
    if (!(r > 0)) fail(ErrorKind::InvalidInput, "functional vanishes on the Fuchsian direction");
    return r * c.radius;
  }
  if (heuristic) *heuristic = true;
  double rate = kInf;
  for (size_t i = 0; i < c.vectors.size(); ++i)
    if (c.hyperbolic[i] >= c.radius / 2 && c.hyperbolic[i] > 0) rate = std::min(rate, f(c.vectors[i]) / c.hyperbolic[i]);
  if (!std::isfinite(rate) || !(rate > 0)) fail(ErrorKind::InsufficientWindow, "cannot bound the functional on the cloud");
  return rate * c.radius;
}

inline CountingProfile profileFrom(const CartanCloud& c, const CloudFunctional& f, const std::string& name) {
  CountingProfile p;
  p.classes = c.classes;
  p.group = c.group;
  p.representation = c.representation;
  p.functional = name;
  p.cutoff = cloudCutoff(c, f, &p.heuristicCutoff);
  const double slack = 1e-9 * std::max(1.0, p.cutoff);
  for (const auto& v : c.vectors) {
    double x = f(v);
    if (x <= p.cutoff + slack) p.values.push_back(std::min(x, p.cutoff));
  }
  std::sort(p.values.begin(), p.values.end());
  return p;
}

inline std::string functionalName(const RootFunctional& phi) {
  std::string s;
  for (Eigen::Index k = 0; k < phi.coeffs.size(); ++k) {
    if (phi.coeffs[k] == 0.0) continue;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s%.17g*a%d", s.empty() ? "" : "+", phi.coeffs[k], static_cast<int>(k + 1));
    s += buf;
  }
  return s.empty() ? "0" : s;
}

inline CountingProfile profileFrom(const CartanCloud& c, const RootFunctional& phi) {
  return profileFrom(c, asFunctional(phi), functionalName(phi));
}

inline CountingProfile orbitProfile(const Representation& rho, const RootFunctional& phi, double T,
                                    const BallOptions& opt = {}) {
  return profileFrom(orbitCloud(rho, T, opt), phi);
}

inline CountingProfile classProfile(const Representation& rho, const RootFunctional& phi, double T,
                                    const BallOptions& opt = {}) {
  return profileFrom(classCloud(rho, T, opt), phi);
}

// ---------------------------------------------------------------------------

// Unit Jordan directions of hyperbolic class representatives, deduplicated.
inline std::vector<CartanVector> limitConeFromCloud(const CartanCloud& c) {
  std::vector<CartanVector> rays;
  for (const auto& v : c.vectors) {
    double n = v.values.norm();
    if (!(n > 0)) continue;
    CartanVector u{v.values / n};
    bool dup = false;
    for (const auto& r : rays) {
      double cosang = std::clamp(r.values.dot(u.values), -1.0, 1.0);
      if (std::acos(cosang) < 1e-6 || (r.values - u.values).norm() < 1e-6) {
        dup = true;
        break;
      }
    }
    if (!dup) rays.push_back(u);
  }
  return rays;
}

inline std::vector<CartanVector> limitConeSample(const Representation& rho, double T, const BallOptions& opt = {}) {
  return limitConeFromCloud(classCloud(rho, T, opt));
}

// Strict positivity with a small floor: exact zeros come out as O(1e-16).
inline bool functionalPositive(const RootFunctional& phi, const std::vector<CartanVector>& sample,
                               double floor = 1e-9) {
  if (sample.empty()) fail(ErrorKind::InvalidInput, "empty cone sample");
  double m = kInf;
  for (const auto& v : sample) m = std::min(m, evaluate(phi, v));
  return m > floor;
}

inline double symmetricSpaceConstant(int d) {
  double c = 0;
  for (int i = 0; i < d; ++i) c += std::pow(d - 1 - 2 * i, 2);
  return c;
}

// (2/sqrt C) |kappa|
inline double symmetricSpaceDisplacement(const CartanVector& k) {
  return 2.0 / std::sqrt(symmetricSpaceConstant(k.dim())) * k.values.norm();
}

inline ExponentEstimate symmetricSpaceExponent(const CartanCloud& orbit) {
  CountingProfile p = profileFrom(orbit, CloudFunctional(symmetricSpaceDisplacement), "dX");
  ExponentEstimate e = criticalExponentEstimate(p);
  e.method = "symmetric-space-slope";
  return e;
}

inline ExponentEstimate symmetricSpaceExponent(const Representation& rho, double T, const BallOptions& opt = {}) {
  return symmetricSpaceExponent(orbitCloud(rho, T, opt));
}

struct RigidityReport {
  ExponentEstimate entropy;
  double bound = 0.0;
  double margin = 0.0;  // bound - h
  bool equalityFlagged = false;
  std::vector<ExponentEstimate> perRoot;  // h^{alpha_k}, k = 1..d-1
};

inline RigidityReport rigidityReport(const CartanCloud& classes, const RootFunctional& phi) {
  if (!classes.classes) fail(ErrorKind::InvalidInput, "rigidity needs class data");
  if (!phi.isPositive()) fail(ErrorKind::InvalidInput, "functional must be positive");
  RigidityReport r;
  r.entropy = entropyEstimate(profileFrom(classes, phi));
  r.bound = 1.0 / phi.coeffSum();
  r.margin = r.bound - r.entropy.value;
  r.equalityFlagged = std::abs(r.margin) <= r.entropy.halfWidth;
  const int d = phi.dim();
  for (int k = 1; k < d; ++k) {
    try {
      r.perRoot.push_back(entropyEstimate(profileFrom(classes, RootFunctional::root(k, d))));
    } catch (const Error& e) {
      // a root may vanish on the Fuchsian direction (reducible chains)
      ExponentEstimate bad;
      bad.value = std::nan("");
      bad.method = std::string("unavailable: ") + e.what();
      r.perRoot.push_back(bad);
    }
  }
  return r;
}

inline RigidityReport rigidityReport(const Representation& rho, const RootFunctional& phi, double T,
                                     const BallOptions& opt = {}) {
  return rigidityReport(classCloud(rho, T, opt), phi);
}

struct ConvexityProbe {
  std::vector<double> t;
  std::vector<ExponentEstimate> entropy;
  std::vector<double> inverse;  // 1/h along the segment
  double defect = 0.0;          // largest secant excess over 1/h (concavity)
  double maxHalfWidth = 0.0;
};

inline ConvexityProbe convexityProbe(const CartanCloud& classes, const RootFunctional& phi1,
                                     const RootFunctional& phi2, int steps) {
  if (steps < 1) fail(ErrorKind::InvalidInput, "steps must be positive");
  if (!phi1.isPositive() || !phi2.isPositive()) fail(ErrorKind::InvalidInput, "functionals must be positive");
  if (phi1.dim() != phi2.dim()) fail(ErrorKind::InvalidIndex, "functional dimensions differ");
  ConvexityProbe out;
  for (int i = 0; i <= steps; ++i) {
    double t = static_cast<double>(i) / steps;
    RootFunctional f((1 - t) * phi1.coeffs + t * phi2.coeffs);
    ExponentEstimate e = entropyEstimate(profileFrom(classes, f));
    out.t.push_back(t);
    out.inverse.push_back(1.0 / e.value);
    out.maxHalfWidth = std::max(out.maxHalfWidth, e.halfWidth);
    out.entropy.push_back(std::move(e));
  }
  const int n = steps + 1;
  for (int i = 0; i < n; ++i)
    for (int k = i + 2; k < n; ++k)
      for (int j = i + 1; j < k; ++j) {
        double w = (out.t[j] - out.t[i]) / (out.t[k] - out.t[i]);
        double secant = (1 - w) * out.inverse[i] + w * out.inverse[k];
        out.defect = std::max(out.defect, secant - out.inverse[j]);
      }
  return out;
}

inline ConvexityProbe convexityProbe(const Representation& rho, const RootFunctional& phi1,
                                     const RootFunctional& phi2, int steps, double T, const BallOptions& opt = {}) {
  return convexityProbe(classCloud(rho, T, opt), phi1, phi2, steps);
}

// ---------------------------------------------------------------------------

struct AuditOptions {
  double radius = 8.0;  // hyperbolic radius of the sampled ball
  std::uint64_t seed = 1;
  BallOptions ball;
};

struct AdditivityAudit {
  int pairsDrawn = 0;
  int pairsSeparated = 0;
  std::vector<double> minDefect, maxDefect;  // alpha_k, k = 1..d-1, separated pairs
  std::vector<double> batchMinA, batchMinB;  // alpha_k minima on the two halves
  double omegaMaxDefect = -kInf;             // over all pairs and k
  bool stable(double tol) const {
    for (size_t k = 0; k < batchMinA.size(); ++k)
      if (!(std::abs(batchMinA[k] - batchMinB[k]) <= tol)) return false;
    return true;
  }
};

// Klein-model point of z, with the disk centered at the system's basepoint.
inline Vec kleinPoint(const HPoint& z, const HPoint& b0) {
  std::complex<double> w = toDisk(z, b0);
  double s = 2.0 / (1.0 + std::norm(w));
  Vec X(3);
  X << s * w.real(), s * w.imag(), 1.0;
  return X;
}

inline AdditivityAudit coarseAdditivityAudit(const Representation& rho, const ConvexDomain& omega, const Vec& b0,
                                             double eps, int samples, const AuditOptions& opt = {}) {
  const GeneratorSystem& G = rho.domain();
  if (omega.kind() != ConvexDomain::Kind::Ellipsoid || omega.ambient() != 3)
    fail(ErrorKind::Unsupported, "the separation test runs in the Klein disk");
  if (samples < 2) fail(ErrorKind::InvalidInput, "need at least two samples");
  std::vector<GroupElement> ball = enumerateBall(G, G.basepoint, opt.radius, opt.ball);
  ball.erase(ball.begin());  // identity (shortlex first)
  if (ball.size() < 2) fail(ErrorKind::InsufficientWindow, "ball too small to sample pairs");
  std::vector<ProjectiveMatrix> images;
  std::vector<CartanVector> kappas;
  for (const auto& e : ball) {
    images.push_back(rho.evaluate(e.word, e.matrix));
    kappas.push_back(cartanProjection(images.back()));
  }
  const int d = rho.dim();
  AdditivityAudit a;
  a.minDefect.assign(d - 1, kInf);
  a.maxDefect.assign(d - 1, -kInf);
  a.batchMinA.assign(d - 1, kInf);
  a.batchMinB.assign(d - 1, kInf);
  std::mt19937_64 rng(opt.seed);
  std::uniform_int_distribution<std::size_t> pick(0, ball.size() - 1);
  auto edge = [&](const HPoint& z) {
    Vec p = kleinPoint(z, G.basepoint);
    return omega.normalize(radialProjection(omega, b0, p)).head(2).eval();
  };
  for (int s = 0; s < samples; ++s) {
    std::size_t i = pick(rng), j = pick(rng);
    ++a.pairsDrawn;
    const ProjectiveMatrix prod = images[i] * images[j];
    CartanVector kp = cartanProjection(prod);
    for (int k = 1; k < d; ++k) {
      double dw = fundamentalWeight(k, kp) - fundamentalWeight(k, kappas[i]) - fundamentalWeight(k, kappas[j]);
      a.omegaMaxDefect = std::max(a.omegaMaxDefect, dw);
    }
    HPoint back = apply(moebiusInverse(ball[i].matrix), G.basepoint);
    HPoint fwd = apply(ball[j].matrix, G.basepoint);
    if ((edge(back) - edge(fwd)).norm() < eps) continue;
    ++a.pairsSeparated;
    for (int k = 1; k < d; ++k) {
      double da = simpleRoot(k, kp) - simpleRoot(k, kappas[i]) - simpleRoot(k, kappas[j]);
      a.minDefect[k - 1] = std::min(a.minDefect[k - 1], da);
      a.maxDefect[k - 1] = std::max(a.maxDefect[k - 1], da);
      auto& batch = (s % 2 == 0) ? a.batchMinA : a.batchMinB;
      batch[k - 1] = std::min(batch[k - 1], da);
    }
  }
  return a;
}

}  // namespace hitchin
