#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <complex>
#include <numeric>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "hitchin/dynamics.hpp"
#include "hitchin/error.hpp"
#include "hitchin/fuchsian.hpp"
#include "hitchin/hilbert.hpp"
#include "hitchin/linalg.hpp"
#include "hitchin/representations.hpp"

namespace hitchin {

// Angle between lines, accurate for tiny angles.
inline double projectiveAngle(const Vec& u, const Vec& v) {
  double a = (u - v).norm(), b = (u + v).norm();
  return 2.0 * std::asin(std::min(1.0, std::min(a, b) / 2.0));
}

enum class LimitMode { Cartan, Eigen };

struct LimitSetSample {
  std::vector<Vec> points;      // unit vectors
  std::vector<Letters> words;   // source elements
  std::vector<double> baseAngles;  // boundary direction of g b0 seen from b0
  int dim = 0;
};

namespace detail {

struct CellKey {
  std::vector<long long> k;
  bool operator==(const CellKey& o) const { return k == o.k; }
};
struct CellKeyHash {
  std::size_t operator()(const CellKey& c) const {
    std::size_t h = 1469598103934665603ull;
    for (long long x : c.k) {
      h ^= static_cast<std::size_t>(x);
      h *= 1099511628211ull;
    }
    return h;
  }
};

inline CellKey cellOf(const Vec& v, double size) {
  CellKey c;
  c.k.resize(static_cast<size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) c.k[static_cast<size_t>(i)] = static_cast<long long>(std::floor(v[i] / size));
  return c;
}

// Dedup of lines at a resolution: cells of that size on the unit vector and
// its negative, with all neighbouring cells checked.
class LineDeduper {
 public:
  explicit LineDeduper(double res) : res_(res) {}
  bool insert(const Vec& u) {
    for (int sgn : {1, -1}) {
      Vec v = sgn * u;
      CellKey base = cellOf(v, res_);
      const int d = static_cast<int>(v.size());
      int total = 1;
      for (int i = 0; i < d; ++i) total *= 3;
      for (int code = 0; code < total; ++code) {
        CellKey k = base;
        int c = code;
        for (int i = 0; i < d; ++i, c /= 3) k.k[static_cast<size_t>(i)] += (c % 3) - 1;
        auto it = cells_.find(k);
        if (it == cells_.end()) continue;
        for (size_t idx : it->second)
          if (projectiveAngle(stored_[idx], u) <= res_) return false;
      }
    }
    cells_[cellOf(u, res_)].push_back(stored_.size());
    stored_.push_back(u);
    return true;
  }

 private:
  double res_;
  std::vector<Vec> stored_;
  std::unordered_map<CellKey, std::vector<size_t>, CellKeyHash> cells_;
};

inline double diskAngle(const HPoint& z, const HPoint& b0) {
  std::complex<double> w = toDisk(z, b0);
  return wrapAngle(std::arg(w));
}

inline Vec topEigenline(const ProjectiveMatrix& g, bool* ok) {
  Eigen::EigenSolver<Mat> es(g.entries());
  *ok = false;
  if (es.info() != Eigen::Success) return {};
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < es.eigenvalues().size(); ++i)
    if (std::abs(es.eigenvalues()[i]) > std::abs(es.eigenvalues()[best])) best = i;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
    if (i != best && std::abs(es.eigenvalues()[i]) >= std::abs(es.eigenvalues()[best]) * (1 - 1e-12)) return {};
  if (std::abs(es.eigenvalues()[best].imag()) > 0) return {};
  Vec v = es.eigenvectors().col(best).real();
  *ok = true;
  return v.normalized();
}

}  // namespace detail

// Elements of the outer shell [T - step, T] of the ball; their U_1 (or
// attracting lines) sit within O(e^{-T}) of the limit set.
inline LimitSetSample sampleLimitSet(const Representation& rho, double T, LimitMode mode,
                                     const BallOptions& opt = {}) {
  const GeneratorSystem& G = rho.domain();
  const double inner = std::max(0.0, T - G.maxGeneratorStep());
  LimitSetSample s;
  s.dim = rho.dim();
  detail::LineDeduper dedup(1e-9);
  visitBall(
      G, G.basepoint, T,
      [&](const Letters& w, const Moebius& m, double dist) {
        if (dist < inner || w.empty()) return;
        ProjectiveMatrix g = rho.evaluate(w, m);
        Vec u;
        if (mode == LimitMode::Cartan) {
          Eigen::JacobiSVD<Mat> svd(g.entries(), Eigen::ComputeFullU);
          u = svd.matrixU().col(0);
        } else {
          if (classify(m) != ElementType::Hyperbolic) return;
          bool ok = false;
          u = detail::topEigenline(g, &ok);
          if (!ok) return;
        }
        if (!dedup.insert(u)) return;
        s.points.push_back(u);
        s.words.push_back(w);
        s.baseAngles.push_back(detail::diskAngle(apply(m, G.basepoint), G.basepoint));
      },
      opt);
  return s;
}

// Two-sided Hausdorff distance (angle metric) between finite line sets.
inline double sampleHausdorffDistance(const std::vector<Vec>& a, const std::vector<Vec>& b) {
  if (a.empty() || b.empty()) fail(ErrorKind::InvalidInput, "empty sample");
  auto oneSide = [](const std::vector<Vec>& x, const std::vector<Vec>& y) {
    double worst = 0.0;
    for (const auto& u : x) {
      double best = kInf;
      for (const auto& v : y) best = std::min(best, projectiveAngle(u, v));
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(oneSide(a, b), oneSide(b, a));
}

// Cartan-mode and eigen-mode samples at the same depth, compared as sets.
inline double limitModeMismatch(const Representation& rho, double T, const BallOptions& opt = {}) {
  LimitSetSample c = sampleLimitSet(rho, T, LimitMode::Cartan, opt);
  LimitSetSample e = sampleLimitSet(rho, T, LimitMode::Eigen, opt);
  return sampleHausdorffDistance(c.points, e.points);
}

// Occupied cells of a cubic grid in the embedding u -> u u^T (off-diagonal
// entries scaled by sqrt 2), which is smooth on projective space.
inline std::size_t occupiedCells(const std::vector<Vec>& points, double eps) {
  std::unordered_set<detail::CellKey, detail::CellKeyHash> cells;
  for (const auto& u : points) cells.insert(detail::cellOf(symmetricToVector(u * u.transpose()), eps));
  return cells.size();
}

struct ScaleRange {
  double minScale = 1e-3;
  double maxScale = 1e-1;
};

inline ExponentEstimate boxCountingDimension(const std::vector<Vec>& points, const ScaleRange& range) {
  if (points.size() < 1000) fail(ErrorKind::InsufficientScales, "need at least 1000 points");
  if (!(range.minScale > 0) || !(range.maxScale > range.minScale))
    fail(ErrorKind::InsufficientScales, "bad scale range");
  std::vector<std::pair<double, double>> pts;
  for (double eps = range.maxScale; eps >= range.minScale * (1 - 1e-12); eps /= 2)
    pts.push_back({std::log(1.0 / eps), std::log(static_cast<double>(occupiedCells(points, eps)))});
  if (pts.size() < 3) fail(ErrorKind::InsufficientScales, "fewer than three dyadic scales");
  detail::LineFit f = detail::fitLine(pts);
  ExponentEstimate e;
  e.value = f.slope;
  e.intercept = f.intercept;
  e.halfWidth = 2.0 * f.se;
  e.windowMin = range.minScale;
  e.windowMax = range.maxScale;
  e.method = "box-counting";
  e.fitPoints = std::move(pts);
  return e;
}

inline ExponentEstimate boxCountingDimension(const LimitSetSample& s, const ScaleRange& range) {
  return boxCountingDimension(s.points, range);
}

// ---------------------------------------------------------------------------
// Shadows on the Fuchsian base, as arcs of the boundary circle seen from the
// basepoint. Radii are Hilbert radii in the Klein disk (twice hyperbolic).

inline Arc shadowArc(const HPoint& b0, const HPoint& z, double hilbertRadius) {
  const double rho = hilbertRadius / 2.0;
  const double D = hypDistance(b0, z);
  if (D <= rho) return {0.0, M_PI};
  double half = std::asin(std::min(1.0, std::sinh(rho) / std::sinh(D)));
  return {detail::diskAngle(z, b0), half};
}

inline bool arcInside(const Arc& inner, const Arc& outer, double tol = 1e-12) {
  if (outer.halfWidth >= M_PI) return true;
  return circleDistance(inner.center, outer.center) + inner.halfWidth <= outer.halfWidth + tol;
}

inline bool arcsDisjoint(const Arc& a, const Arc& b, double tol = 1e-12) { return arcGap(a, b) > tol; }

inline void requireKleinBase(const ConvexDomain& omega, const Vec& b0) {
  if (omega.kind() != ConvexDomain::Kind::Ellipsoid || omega.ambient() != 3)
    fail(ErrorKind::Unsupported, "Fuchsian base shadows live in the Klein disk");
  Vec c = omega.normalize(b0);
  if (c.head(2).norm() > 1e-12) fail(ErrorKind::Unsupported, "the base point must be the disk center");
}

struct ShadowCoverResult {
  ExponentEstimate estimate;
  double maxDiameterRatio = 0.0;  // max diam * e^{a(g)}
  std::vector<double> levelRatios; // the same max per level N < a <= N+1, N = windowMin..
  std::size_t coverSize = 0;
  int levels = 0;
};

// Partition sums over level sets N < a(g) <= N+1 of the cover by image
// shadows; the estimate is the s where log sum_N(s) stops growing in N.
// Cover elements come from the ball of radius T - coverMargin so each shadow
// still holds several sample points from the shell at T.
inline ShadowCoverResult shadowCoverExponent(const Representation& rho, const ConvexDomain& omega, const Vec& b0,
                                             double r, double T, const BallOptions& opt = {},
                                             double coverMargin = 6.0) {
  requireKleinBase(omega, b0);
  if (!(r >= 1.0)) fail(ErrorKind::InvalidInput, "shadow radius must be at least 1");
  const GeneratorSystem& G = rho.domain();
  const int d = rho.dim();
  LimitSetSample sample = sampleLimitSet(rho, T, LimitMode::Cartan, opt);
  std::vector<size_t> order(sample.points.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return sample.baseAngles[a] < sample.baseAngles[b]; });
  std::vector<double> angles;
  for (size_t i : order) angles.push_back(sample.baseAngles[i]);

  auto pointsIn = [&](const Arc& arc) {
    std::vector<size_t> out;
    if (arc.halfWidth >= M_PI) {
      out = order;
      return out;
    }
    auto collect = [&](double lo, double hi) {
      auto a = std::lower_bound(angles.begin(), angles.end(), lo);
      auto b = std::upper_bound(angles.begin(), angles.end(), hi);
      for (auto it = a; it < b; ++it) out.push_back(order[static_cast<size_t>(it - angles.begin())]);
    };
    double lo = arc.center - arc.halfWidth, hi = arc.center + arc.halfWidth;
    if (lo < 0) {
      collect(lo + 2 * M_PI, 2 * M_PI);
      collect(0, hi);
    } else if (hi >= 2 * M_PI) {
      collect(lo, 2 * M_PI);
      collect(0, hi - 2 * M_PI);
    } else {
      collect(lo, hi);
    }
    return out;
  };
  auto diameter = [&](const std::vector<size_t>& idx) {
    if (idx.size() < 2) return 0.0;
    auto far = [&](size_t from) {
      size_t best = from;
      double bd = -1;
      for (size_t j : idx) {
        double a = projectiveAngle(sample.points[from], sample.points[j]);
        if (a > bd) {
          bd = a;
          best = j;
        }
      }
      return std::make_pair(best, bd);
    };
    auto [p1, d1] = far(idx[0]);
    auto [p2, d2] = far(p1);
    (void)p2;
    return std::max(d1, d2);
  };

  auto aOf = [&](const CartanVector& k) { return std::min(simpleRoot(1, k), simpleRoot(d - 1, k)); };
  const double Tc = T - coverMargin;
  if (!(Tc > 0)) fail(ErrorKind::EmptyCover, "sample depth below the cover margin");
  const double step = G.maxGeneratorStep();
  struct Item {
    double a, diam;
  };
  std::vector<Item> items;
  double aComplete = kInf;
  ShadowCoverResult res;
  visitBall(
      G, G.basepoint, Tc,
      [&](const Letters& w, const Moebius& m, double dist) {
        if (w.empty()) return;
        double a = aOf(cartanProjection(rho.evaluate(w, m)));
        if (dist >= Tc - step) aComplete = std::min(aComplete, a);
        Arc arc = shadowArc(G.basepoint, apply(m, G.basepoint), r);
        std::vector<size_t> in = pointsIn(arc);
        if (in.empty()) return;
        double diam = diameter(in);  // 0 for a single point
        items.push_back({a, diam});
        res.maxDiameterRatio = std::max(res.maxDiameterRatio, diam * std::exp(a));
      },
      opt);
  if (items.empty()) fail(ErrorKind::EmptyCover, "no shadow contains a sample point");
  const int nMax = static_cast<int>(std::floor(aComplete)) - 1;
  const int nMin = std::max(1, nMax / 3);  // skip the pre-asymptotic levels
  if (nMax - nMin + 1 < 4) fail(ErrorKind::EmptyCover, "fewer than four complete levels");
  res.levels = nMax - nMin + 1;
  res.levelRatios.assign(static_cast<size_t>(nMax - nMin + 1), 0.0);
  for (const auto& it : items) {
    int n = static_cast<int>(std::ceil(it.a)) - 1;
    if (n < nMin || n > nMax) continue;
    ++res.coverSize;
    double& m = res.levelRatios[static_cast<size_t>(n - nMin)];
    m = std::max(m, it.diam * std::exp(it.a));
  }
  // every shadow sees at most one sample point: the sums vanish for s > 0
  if (std::none_of(items.begin(), items.end(), [](const Item& it) { return it.diam > 0; })) {
    res.estimate.value = 0.0;
    res.estimate.windowMin = nMin;
    res.estimate.windowMax = nMax + 1;
    res.estimate.method = "shadow-cover";
    return res;
  }

  auto slopeAt = [&](double s, int lo, int hi, double* se) {
    std::vector<CompensatedSum> sums(static_cast<size_t>(hi - lo + 1));
    for (const auto& it : items) {
      int n = static_cast<int>(std::ceil(it.a)) - 1;  // N < a <= N+1
      if (n < lo || n > hi) continue;
      sums[static_cast<size_t>(n - lo)].add(std::pow(it.diam, s));
    }
    std::vector<std::pair<double, double>> pts;
    for (int n = lo; n <= hi; ++n) {
      double v = sums[static_cast<size_t>(n - lo)].value();
      if (v > 0) pts.push_back({static_cast<double>(n), std::log(v)});
    }
    if (pts.size() < 3) fail(ErrorKind::EmptyCover, "too few populated levels");
    detail::LineFit f = detail::fitLine(pts);
    if (se) *se = f.se;
    return f.slope;
  };
  auto root = [&](int lo, int hi) {
    double a = 0.0, b = static_cast<double>(d - 1);
    if (slopeAt(a, lo, hi, nullptr) <= 0) return 0.0;
    if (slopeAt(b, lo, hi, nullptr) > 0) return b;
    for (int i = 0; i < 60; ++i) {
      double m = (a + b) / 2;
      if (slopeAt(m, lo, hi, nullptr) > 0) a = m;
      else b = m;
    }
    return (a + b) / 2;
  };
  double s = root(nMin, nMax);
  double sTop = root((nMin + nMax) / 2, nMax);
  double se = 0;
  slopeAt(s, nMin, nMax, &se);
  const double h = 1e-3;
  double deriv = (slopeAt(s + h, nMin, nMax, nullptr) - slopeAt(std::max(0.0, s - h), nMin, nMax, nullptr)) /
                 (s + h - std::max(0.0, s - h));
  res.estimate.value = s;
  res.estimate.halfWidth = (std::abs(deriv) > 1e-12 ? 2.0 * se / std::abs(deriv) : 0.0) + std::abs(s - sTop);
  res.estimate.windowMin = nMin;
  res.estimate.windowMax = nMax + 1;
  res.estimate.method = "shadow-cover";
  return res;
}

// ---------------------------------------------------------------------------
// Shadow trees.

struct TreeCertificate {
  double nestingMargin = kInf;   // min over children of outer - inner slack (1)
  double siblingGap = kInf;      // min gap between sibling shadows (2)
  double maxDistance = 0.0;      // max Hilbert distance parent-child (3)
  double massRatio = 0.0;        // sum c(w)^delta / c(z)^delta (4)
  std::vector<int> annuli;       // annulus indices the children came from
};

struct ShadowTreeNode {
  Letters word;
  Moebius matrix;
  HPoint point;     // z = g b0 in the upper half plane
  Vec klein;        // z in the Klein disk
  double c = 1.0;   // sigma_2 / sigma_1 of rho(g)
  int annulus = 0;  // n with e^{-(n+1)} < c(h) <= e^{-n} for the step h from the parent
  int depth = 0;
  int parent = -1;
  std::vector<int> children;
  double mass = 0.0;
  Vec limitPoint;   // U_1(rho(g)), representative of the node's shadow
  TreeCertificate certificate;
};

struct ShadowTree {
  std::vector<ShadowTreeNode> nodes;  // nodes[0] is the root b0
  double delta = 0.0;
  double r0 = 0.0, D0 = 0.0;          // certified grid point (Hilbert units)
  int depth = 0;
  bool complete = false;
  std::string diagnostic;
};

struct TreeOptions {
  std::vector<double> r0Grid{1.0, 2.0, 4.0};
  std::vector<double> D0Grid{4.0, 8.0, 12.0, 16.0, 20.0, 24.0};
  int maxAnnulus = 12;
  BallOptions ball;
};

namespace detail {

inline int annulusOf(double c) { return static_cast<int>(std::floor(-std::log(c))); }

inline double sigmaRatio(const ProjectiveMatrix& g) {
  CartanVector k = cartanProjection(g);
  return std::exp(-simpleRoot(1, k));
}

inline Vec topSingularLine(const ProjectiveMatrix& g) {
  Eigen::JacobiSVD<Mat> svd(g.entries(), Eigen::ComputeFullU);
  return svd.matrixU().col(0);
}

struct ChildCandidate {
  Letters word;
  Moebius matrix;
  ProjectiveMatrix image;
  double c;
  int annulus;
  Arc outer;  // shadow of radius 2 r0
};

inline bool tryTree(const Representation& rho, double delta, int depth, double r0, double D0, const TreeOptions& opt,
                    ShadowTree& tree) {
  const GeneratorSystem& G = rho.domain();
  const HPoint b0 = G.basepoint;
  // children are g.h with d(b0, h b0) <= D0 (Hilbert), i.e. D0/2 hyperbolic
  std::vector<GroupElement> steps = enumerateBall(G, b0, D0 / 2, opt.ball);
  std::vector<ProjectiveMatrix> stepImages;
  std::vector<int> stepAnnulus;
  for (const auto& e : steps) {
    stepImages.push_back(rho.evaluate(e.word, e.matrix));
    stepAnnulus.push_back(e.word.empty() ? 0 : annulusOf(sigmaRatio(stepImages.back())));
  }

  tree = ShadowTree{};
  tree.delta = delta;
  tree.r0 = r0;
  tree.D0 = D0;
  tree.depth = depth;
  ShadowTreeNode root;
  root.matrix = Moebius::Identity();
  root.point = b0;
  root.klein = kleinPoint(b0, b0);
  root.c = 1.0;
  root.mass = 1.0;
  tree.nodes.push_back(root);
  std::vector<ProjectiveMatrix> images{ProjectiveMatrix::identity(rho.dim())};

  std::vector<int> frontier{0};
  for (int level = 0; level < depth; ++level) {
    std::vector<int> next;
    for (int zi : frontier) {
      const ShadowTreeNode z = tree.nodes[static_cast<size_t>(zi)];
      const ProjectiveMatrix zImage = images[static_cast<size_t>(zi)];
      Arc inner = shadowArc(b0, z.point, r0);
      std::vector<ChildCandidate> cands;
      for (size_t k = 0; k < steps.size(); ++k) {
        if (steps[k].word.empty()) continue;
        Moebius m = z.matrix * steps[k].matrix;
        HPoint w = apply(m, b0);
        if (hypDistance(w, z.point) < 1e-9) continue;
        Arc outer = shadowArc(b0, w, 2 * r0);
        if (!arcInside(outer, inner)) continue;
        // the annulus is that of the step h (children are g(S) with S in A_n)
        int n = stepAnnulus[k];
        if (n > opt.maxAnnulus) continue;
        ProjectiveMatrix img = zImage * stepImages[k];
        double c = sigmaRatio(img);
        Letters word = z.word;
        word.insert(word.end(), steps[k].word.begin(), steps[k].word.end());
        cands.push_back({reduceWord(word), m, img, c, n, outer});
      }
      const double target = std::pow(z.c, delta);
      // candidate child sets: each annulus alone, then all annuli together;
      // greedy by weight keeping shadows disjoint, stopping once (4) holds
      std::vector<std::vector<int>> pools;
      std::vector<int> annuli;
      for (const auto& c : cands) annuli.push_back(c.annulus);
      std::sort(annuli.begin(), annuli.end());
      annuli.erase(std::unique(annuli.begin(), annuli.end()), annuli.end());
      for (int n : annuli) pools.push_back({n});
      pools.push_back(annuli);
      std::vector<size_t> chosen;
      double mass = 0.0, bestMass = 0.0;
      bool found = false;
      for (const auto& pool : pools) {
        std::vector<size_t> idx;
        for (size_t i = 0; i < cands.size(); ++i)
          if (std::find(pool.begin(), pool.end(), cands[i].annulus) != pool.end()) idx.push_back(i);
        std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return cands[a].c > cands[b].c; });
        chosen.clear();
        mass = 0.0;
        for (size_t i : idx) {
          bool ok = true;
          for (size_t j : chosen)
            if (!arcsDisjoint(cands[i].outer, cands[j].outer)) {
              ok = false;
              break;
            }
          if (!ok) continue;
          chosen.push_back(i);
          mass += std::pow(cands[i].c, delta);
          if (mass >= target) break;
        }
        bestMass = std::max(bestMass, mass);
        if (mass >= target && !chosen.empty()) {
          found = true;
          break;
        }
      }
      if (!found) {
        tree.diagnostic = "NoChildrenFound at node " + std::to_string(zi) + " (depth " + std::to_string(z.depth) +
                          ", word " + wordToString(G, z.word) + "): " + std::to_string(cands.size()) +
                          " nested candidates, best mass ratio " + std::to_string(bestMass / target);
        return false;
      }
      // certificate, recomputed on the chosen set
      TreeCertificate cert;
      double total = 0.0;
      for (size_t a = 0; a < chosen.size(); ++a) {
        const auto& ch = cands[chosen[a]];
        double slack = inner.halfWidth >= M_PI
                           ? M_PI
                           : inner.halfWidth - circleDistance(ch.outer.center, inner.center) - ch.outer.halfWidth;
        cert.nestingMargin = std::min(cert.nestingMargin, slack);
        for (size_t b = a + 1; b < chosen.size(); ++b)
          cert.siblingGap = std::min(cert.siblingGap, arcGap(ch.outer, cands[chosen[b]].outer));
        cert.maxDistance = std::max(cert.maxDistance, 2.0 * hypDistance(z.point, apply(ch.matrix, b0)));
        total += std::pow(ch.c, delta);
        if (std::find(cert.annuli.begin(), cert.annuli.end(), ch.annulus) == cert.annuli.end())
          cert.annuli.push_back(ch.annulus);
      }
      std::sort(cert.annuli.begin(), cert.annuli.end());
      cert.massRatio = total / target;
      tree.nodes[static_cast<size_t>(zi)].certificate = cert;
      for (size_t i : chosen) {
        const auto& ch = cands[i];
        ShadowTreeNode w;
        w.word = ch.word;
        w.matrix = ch.matrix;
        w.point = apply(ch.matrix, b0);
        w.klein = kleinPoint(w.point, b0);
        w.c = ch.c;
        w.annulus = ch.annulus;
        w.depth = level + 1;
        w.parent = zi;
        w.limitPoint = topSingularLine(ch.image);
        // inductive reweighting
        w.mass = tree.nodes[static_cast<size_t>(zi)].mass * std::pow(ch.c, delta) / total;
        int id = static_cast<int>(tree.nodes.size());
        tree.nodes[static_cast<size_t>(zi)].children.push_back(id);
        tree.nodes.push_back(w);
        images.push_back(ch.image);
        next.push_back(id);
      }
    }
    frontier = std::move(next);
  }
  tree.complete = true;
  return true;
}

}  // namespace detail

// Grid search over (r0, D0); the first grid point whose tree completes is
// returned. On failure the deepest partial tree comes back with complete =
// false and a diagnostic.
inline ShadowTree buildShadowTree(const Representation& rho, const ConvexDomain& omega, const Vec& b0, double delta,
                                  int depth, const TreeOptions& opt = {}) {
  requireKleinBase(omega, b0);
  if (rho.domain().structure != Structure::Free) fail(ErrorKind::Unsupported, "shadow trees need a free Schottky base");
  if (delta < 0) fail(ErrorKind::InvalidInput, "delta must be non-negative");
  if (depth < 1 || depth > 5) fail(ErrorKind::BudgetExceeded, "tree depth is limited to 1..5");
  ShadowTree best;
  int bestNodes = -1;
  for (double r0 : opt.r0Grid)
    for (double D0 : opt.D0Grid) {
      ShadowTree t;
      if (detail::tryTree(rho, delta, depth, r0, D0, opt, t)) return t;
      if (static_cast<int>(t.nodes.size()) > bestNodes) {
        bestNodes = static_cast<int>(t.nodes.size());
        best = std::move(t);
      }
    }
  best.complete = false;
  return best;
}

inline void requireComplete(const ShadowTree& t) {
  if (!t.complete) fail(ErrorKind::NoChildrenFound, t.diagnostic);
}

struct FrostmanReport {
  std::vector<double> scales;
  std::vector<double> maxRatio;  // max_p mu(B(p,t)) / t^delta per scale
  double overall = 0.0;
  double firstDecade = 0.0, secondDecade = 0.0;
  double totalMass = 0.0;
  int leaves = 0;
};

inline std::vector<int> treeLeaves(const ShadowTree& t) {
  std::vector<int> out;
  for (size_t i = 0; i < t.nodes.size(); ++i)
    if (t.nodes[i].depth == t.depth) out.push_back(static_cast<int>(i));
  return out;
}

// Leaf masses pushed to the leaves' limit-point representatives; test balls
// centred on those representatives. Scales are log-spaced over [tMin, tMax];
// the two decades split the range at its geometric midpoint.
inline FrostmanReport treeMeasureFrostman(const ShadowTree& t, double tMin, double tMax, int perDecade = 4) {
  if (!t.complete) fail(ErrorKind::IncompleteTree, t.diagnostic.empty() ? "tree is incomplete" : t.diagnostic);
  if (!(tMin > 0) || !(tMax > tMin)) fail(ErrorKind::InvalidInput, "bad scale range");
  FrostmanReport r;
  std::vector<int> leaves = treeLeaves(t);
  r.leaves = static_cast<int>(leaves.size());
  CompensatedSum total;
  for (int i : leaves) total.add(t.nodes[static_cast<size_t>(i)].mass);
  r.totalMass = total.value();
  const double decades = std::log10(tMax / tMin);
  const int n = std::max(2, static_cast<int>(std::lround(decades * perDecade)) + 1);
  const double mid = std::sqrt(tMin * tMax);
  for (int k = 0; k < n; ++k) {
    double s = tMin * std::pow(tMax / tMin, static_cast<double>(k) / (n - 1));
    double worst = 0.0;
    for (int a : leaves) {
      double m = 0.0;
      for (int b : leaves)
        if (projectiveAngle(t.nodes[static_cast<size_t>(a)].limitPoint, t.nodes[static_cast<size_t>(b)].limitPoint) < s)
          m += t.nodes[static_cast<size_t>(b)].mass;
      worst = std::max(worst, m / std::pow(s, t.delta));
    }
    r.scales.push_back(s);
    r.maxRatio.push_back(worst);
    r.overall = std::max(r.overall, worst);
    if (s <= mid * (1 + 1e-12)) r.firstDecade = std::max(r.firstDecade, worst);
    if (s >= mid * (1 - 1e-12)) r.secondDecade = std::max(r.secondDecade, worst);
  }
  return r;
}

}  // namespace hitchin
