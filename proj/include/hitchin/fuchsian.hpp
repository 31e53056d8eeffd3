#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "hitchin/error.hpp"

namespace hitchin {

using Moebius = Eigen::Matrix2d;
// letter code = 2*generator + (1 if inverse)
using Letter = std::uint8_t;
using Letters = std::vector<Letter>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline Letter inverseLetter(Letter x) { return static_cast<Letter>(x ^ 1u); }

struct HPoint {
  double x = 0.0;
  double y = 1.0;
};

inline Moebius canonical(const Moebius& m) {
  double s = 1.0;
  if (std::abs(m(0, 0)) > 1e-14) s = m(0, 0) > 0 ? 1.0 : -1.0;
  else if (std::abs(m(1, 0)) > 1e-14) s = m(1, 0) > 0 ? 1.0 : -1.0;
  return s * m;
}

inline Moebius moebiusInverse(const Moebius& m) {
  Moebius r;
  r << m(1, 1), -m(0, 1), -m(1, 0), m(0, 0);
  return r;
}

// Normalizes det to 1; rejects det <= 0.
inline Moebius makeMoebius(double a, double b, double c, double d) {
  double det = a * d - b * c;
  if (!(det > 0.0) || !std::isfinite(det)) fail(ErrorKind::InvalidInput, "Moebius matrix needs positive determinant");
  double s = 1.0 / std::sqrt(det);
  Moebius m;
  m << a * s, b * s, c * s, d * s;
  return m;
}

inline Moebius rotationAbout_i(double angle) {
  // rotates H^2 about i by `angle`; the matrix angle is half of it
  double c = std::cos(angle / 2), s = std::sin(angle / 2);
  Moebius r;
  r << c, s, -s, c;
  return r;
}

inline HPoint apply(const Moebius& m, const HPoint& z) {
  std::complex<double> w(z.x, z.y);
  std::complex<double> r = (m(0, 0) * w + m(0, 1)) / (m(1, 0) * w + m(1, 1));
  return {r.real(), std::max(r.imag(), std::numeric_limits<double>::min())};
}

inline double hypDistance(const HPoint& p, const HPoint& q) {
  double dx = p.x - q.x, dy = p.y - q.y;
  return 2.0 * std::asinh(std::sqrt(dx * dx + dy * dy) / (2.0 * std::sqrt(p.y * q.y)));
}

// Image of a boundary point (x = +-inf stands for infinity).
inline double applyBoundary(const Moebius& m, double x) {
  if (std::isinf(x)) return m(1, 0) == 0.0 ? kInf : m(0, 0) / m(1, 0);
  double den = m(1, 0) * x + m(1, 1);
  if (den == 0.0) return kInf;
  return (m(0, 0) * x + m(0, 1)) / den;
}

enum class ElementType { Identity, Elliptic, Parabolic, Hyperbolic };

inline const char* elementTypeName(ElementType t) {
  switch (t) {
    case ElementType::Identity: return "Identity";
    case ElementType::Elliptic: return "Elliptic";
    case ElementType::Parabolic: return "Parabolic";
    case ElementType::Hyperbolic: return "Hyperbolic";
  }
  return "?";
}

inline ElementType classify(const Moebius& g) {
  double tr = std::abs(g.trace());
  if (std::abs(tr - 2.0) <= 1e-10) {
    Moebius c = canonical(g);
    if ((c - Moebius::Identity()).cwiseAbs().maxCoeff() <= 1e-10) return ElementType::Identity;
    return ElementType::Parabolic;
  }
  return tr > 2.0 ? ElementType::Hyperbolic : ElementType::Elliptic;
}

inline double translationLength(const Moebius& g) {
  ElementType t = classify(g);
  if (t == ElementType::Elliptic) fail(ErrorKind::InvalidInput, "elliptic element has no translation length");
  if (t != ElementType::Hyperbolic) return 0.0;
  return 2.0 * std::acosh(std::abs(g.trace()) / 2.0);
}

// Attracting / repelling fixed points on R u {inf} of a hyperbolic element.
inline std::pair<double, double> fixedPoints(const Moebius& g) {
  if (classify(g) != ElementType::Hyperbolic) fail(ErrorKind::InvalidInput, "fixed points need a hyperbolic element");
  Moebius m = canonical(g);
  double a = m(0, 0), b = m(0, 1), c = m(1, 0), d = m(1, 1);
  if (std::abs(c) < 1e-15) {
    double other = b / (d - a);
    return std::abs(a) > std::abs(d) ? std::make_pair(kInf, other) : std::make_pair(other, kInf);
  }
  double disc = std::sqrt((a + d) * (a + d) - 4.0);
  double z1 = ((a - d) + disc) / (2 * c), z2 = ((a - d) - disc) / (2 * c);
  auto deriv = [&](double z) { double q = c * z + d; return 1.0 / (q * q); };
  return deriv(z1) < deriv(z2) ? std::make_pair(z1, z2) : std::make_pair(z2, z1);
}

// Disk picture centred at a basepoint: boundary x maps to the angle of the
// Cayley image of (x - x0)/y0.
inline double boundaryAngle(double x, const HPoint& b0 = {}) {
  if (std::isinf(x)) return 0.0;
  double u = (x - b0.x) / b0.y;
  return 2.0 * std::atan2(1.0, -u);
}

inline double angleToBoundary(double theta, const HPoint& b0 = {}) {
  double s = std::sin(theta / 2);
  if (std::abs(s) < 1e-300) return kInf;
  double u = -std::cos(theta / 2) / s;
  return b0.x + b0.y * u;
}

inline std::complex<double> toDisk(const HPoint& z, const HPoint& b0 = {}) {
  std::complex<double> u((z.x - b0.x) / b0.y, z.y / b0.y);
  const std::complex<double> i(0, 1);
  return (u - i) / (u + i);
}

inline HPoint fromDisk(std::complex<double> w, const HPoint& b0 = {}) {
  const std::complex<double> i(0, 1);
  std::complex<double> u = i * (1.0 + w) / (1.0 - w);
  return {b0.x + b0.y * u.real(), b0.y * std::max(u.imag(), 1e-300)};
}

inline double wrapAngle(double a) {
  a = std::fmod(a, 2 * M_PI);
  if (a < 0) a += 2 * M_PI;
  return a;
}

// |a - b| on the circle, in [0, pi]
inline double circleDistance(double a, double b) {
  double d = wrapAngle(a - b);
  return std::min(d, 2 * M_PI - d);
}

// Closed arc of the circle: centre angle and half width.
struct Arc {
  double center = 0.0;
  double halfWidth = 0.0;
  bool contains(double t, double slack = 0.0) const { return circleDistance(t, center) <= halfWidth + slack; }
};

// Gap between two arcs (negative when they overlap).
inline double arcGap(const Arc& a, const Arc& b) {
  return circleDistance(a.center, b.center) - a.halfWidth - b.halfWidth;
}

// Open half-plane {z : a|z|^2 + b x + c < 0} bounded by a geodesic.
struct HalfPlane {
  double a = 0, b = 0, c = 0;

  double value(const HPoint& z) const { return a * (z.x * z.x + z.y * z.y) + b * z.x + c; }
  // sinh of signed distance to the boundary geodesic (positive outside)
  double signedSinh(const HPoint& z) const { return value(z) / (z.y * std::sqrt(b * b - 4 * a * c)); }
  double distanceFrom(const HPoint& z) const {
    double s = signedSinh(z);
    return s <= 0 ? 0.0 : std::asinh(s);
  }
  bool boundaryContains(double x) const {
    if (std::isinf(x)) return a < 0 || (a == 0.0);
    return a * x * x + b * x + c <= 0;
  }
};

// {z : d(z, p) < d(z, q)}
inline HalfPlane bisectorHalfPlane(const HPoint& p, const HPoint& q) {
  HalfPlane h;
  h.a = q.y - p.y;
  h.b = -2.0 * (q.y * p.x - p.y * q.x);
  h.c = q.y * (p.x * p.x + p.y * p.y) - p.y * (q.x * q.x + q.y * q.y);
  return h;
}

// Ideal boundary of a half-plane as an arc in the disk picture at b0.
inline Arc idealArc(const HalfPlane& h, const HPoint& b0 = {}) {
  double scale = std::max({std::abs(h.a), std::abs(h.b), std::abs(h.c)});
  double a = h.a / scale, b = h.b / scale, c = h.c / scale;
  double x1, x2;
  if (std::abs(a) < 1e-14) {
    x1 = -c / b;
    x2 = kInf;
  } else {
    double disc = std::sqrt(std::max(0.0, b * b - 4 * a * c));
    x1 = (-b - disc) / (2 * a);
    x2 = (-b + disc) / (2 * a);
  }
  double t1 = boundaryAngle(x1, b0), t2 = boundaryAngle(x2, b0);
  double span = wrapAngle(t2 - t1);
  double mid = t1 + span / 2;
  // sample a point just inside the disk in the middle of the ccw arc t1 -> t2
  HPoint probe = fromDisk(std::polar(0.999, mid), b0);
  bool inside = h.value(probe) < 0;
  Arc arc;
  if (inside) {
    arc.center = wrapAngle(mid);
    arc.halfWidth = span / 2;
  } else {
    arc.center = wrapAngle(mid + M_PI);
    arc.halfWidth = M_PI - span / 2;
  }
  return arc;
}

// Distance from the centre of the disk to the geodesic joining two boundary
// points at angular separation theta.
inline double geodesicDepth(double theta) {
  if (theta <= 0) return kInf;
  theta = std::min(theta, M_PI);
  double r = std::tan(M_PI / 4 - theta / 4);
  return std::log((1 + r) / (1 - r));
}

enum class Structure { Free, Generic };

struct GeneratorSystem {
  std::string name;
  std::vector<Moebius> generators;
  std::vector<std::string> names;
  Structure structure = Structure::Generic;
  std::vector<bool> parabolic;
  HPoint basepoint{0.0, 1.0};
  // bound on the distance from the basepoint to every closed geodesic's
  // lift, modulo the group; needed to enumerate classes when arcs touch
  std::optional<double> coreRadius;

  // ping-pong certificate, indexed by letter code (free systems only)
  std::vector<HalfPlane> dirichlet;
  std::vector<Arc> arcs;
  double classConstant = kInf;
  bool hasTangency = false;

  int rank() const { return static_cast<int>(generators.size()); }
  int letterCount() const { return 2 * rank(); }
  Moebius letter(Letter x) const {
    const Moebius& g = generators[x >> 1];
    return (x & 1u) ? moebiusInverse(g) : g;
  }
  double maxGeneratorStep() const {
    double m = 0;
    for (const auto& g : generators) m = std::max(m, hypDistance(apply(g, basepoint), basepoint));
    return m;
  }
};

inline std::string letterName(const GeneratorSystem& G, Letter x) {
  const std::string& n = G.names[x >> 1];
  if (!(x & 1u)) return n;
  if (n.size() == 1 && std::islower(static_cast<unsigned char>(n[0]))) return std::string(1, static_cast<char>(std::toupper(n[0])));
  return n + "^-1";
}

inline std::string wordToString(const GeneratorSystem& G, const Letters& w) {
  if (w.empty()) return "e";
  std::string s;
  for (Letter x : w) s += letterName(G, x);
  return s;
}

inline Moebius evaluateWord(const GeneratorSystem& G, const Letters& w) {
  Moebius m = Moebius::Identity();
  for (Letter x : w) m = m * G.letter(x);
  return canonical(m);
}

inline bool isReduced(const Letters& w) {
  for (size_t i = 1; i < w.size(); ++i)
    if (w[i] == inverseLetter(w[i - 1])) return false;
  return true;
}

inline Letters reduceWord(const Letters& w) {
  Letters r;
  for (Letter x : w) {
    if (!r.empty() && r.back() == inverseLetter(x)) r.pop_back();
    else r.push_back(x);
  }
  return r;
}

inline Letters inverseWord(const Letters& w) {
  Letters r(w.rbegin(), w.rend());
  for (auto& x : r) x = inverseLetter(x);
  return r;
}

inline bool shortlexLess(const Letters& a, const Letters& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

// Strip conjugating letters from a reduced word.
inline Letters cyclicallyReduce(Letters w) {
  w = reduceWord(w);
  size_t i = 0, j = w.size();
  while (j - i >= 2 && w[j - 1] == inverseLetter(w[i])) {
    ++i;
    --j;
  }
  return Letters(w.begin() + static_cast<long>(i), w.begin() + static_cast<long>(j));
}

// Start index of the lexicographically least rotation (Booth).
inline size_t leastRotation(const Letters& s) {
  const size_t n = s.size();
  if (n == 0) return 0;
  std::vector<long> f(2 * n, -1);
  size_t k = 0;
  for (size_t j = 1; j < 2 * n; ++j) {
    Letter sj = s[j % n];
    long i = f[j - k - 1];
    while (i != -1 && sj != s[(k + static_cast<size_t>(i) + 1) % n]) {
      if (sj < s[(k + static_cast<size_t>(i) + 1) % n]) k = j - static_cast<size_t>(i) - 1;
      i = f[static_cast<size_t>(i)];
    }
    if (sj != s[(k + static_cast<size_t>(i) + 1) % n]) {
      if (sj < s[k % n]) k = j;
      f[j - k] = -1;
    } else {
      f[j - k] = i + 1;
    }
  }
  return k % n;
}

inline Letters canonicalNecklace(const Letters& w) {
  size_t k = leastRotation(w);
  Letters r(w.size());
  for (size_t i = 0; i < w.size(); ++i) r[i] = w[(i + k) % w.size()];
  return r;
}

// Verify the Dirichlet ping-pong picture at the basepoint: the half-planes
// D_x = {z : d(z, x b0) < d(z, b0)} must have pairwise disjoint ideal arcs.
// Touching arcs are allowed and recorded.
inline void certifyPingPong(GeneratorSystem& G) {
  const int n = G.letterCount();
  G.dirichlet.assign(n, {});
  G.arcs.assign(n, {});
  for (int x = 0; x < n; ++x) {
    HPoint p = apply(G.letter(static_cast<Letter>(x)), G.basepoint);
    if (hypDistance(p, G.basepoint) < 1e-9) fail(ErrorKind::NotDiscreteCertificate, "generator fixes the basepoint");
    G.dirichlet[x] = bisectorHalfPlane(p, G.basepoint);
    G.arcs[x] = idealArc(G.dirichlet[x], G.basepoint);
  }
  double worstDepth = 0.0;
  bool tangent = false;
  for (int x = 0; x < n; ++x) {
    for (int y = x + 1; y < n; ++y) {
      double gap = arcGap(G.arcs[x], G.arcs[y]);
      if (gap < -1e-9) fail(ErrorKind::NotDiscreteCertificate, "ping-pong arcs overlap");
      if (gap <= 1e-9) tangent = true;
      else worstDepth = std::max(worstDepth, geodesicDepth(gap));
    }
  }
  G.hasTangency = tangent;
  G.classConstant = tangent ? kInf : 2.0 * worstDepth;
  G.structure = Structure::Free;
}

inline GeneratorSystem makeSystem(const std::string& name, const std::vector<Moebius>& gens, Structure s,
                                  std::vector<std::string> names = {}) {
  if (gens.empty()) fail(ErrorKind::InvalidInput, "no generators");
  if (gens.size() > 26) fail(ErrorKind::InvalidInput, "at most 26 generators");
  GeneratorSystem G;
  G.name = name;
  for (const auto& g : gens) {
    if (!g.allFinite() || std::abs(g.determinant() - 1.0) > 1e-9)
      fail(ErrorKind::InvalidInput, "generator must have determinant 1");
    G.generators.push_back(canonical(g));
    G.parabolic.push_back(classify(g) == ElementType::Parabolic);
  }
  if (names.empty())
    for (size_t i = 0; i < gens.size(); ++i) names.push_back(std::string(1, static_cast<char>('a' + i)));
  G.names = std::move(names);
  if (s == Structure::Free) certifyPingPong(G);
  return G;
}

inline GeneratorSystem schottkyGroup(double t, double angle) {
  if (!(t > 0)) fail(ErrorKind::InvalidInput, "translation length must be positive");
  Moebius A;
  A << std::exp(t / 2), 0, 0, std::exp(-t / 2);
  Moebius R = rotationAbout_i(angle);
  Moebius B = R * A * moebiusInverse(R);
  GeneratorSystem G = makeSystem("schottky", {A, B}, Structure::Free);
  return G;
}

inline GeneratorSystem congruenceLevel2() {
  Moebius A, B;
  A << 1, 2, 0, 1;
  B << 1, 0, 2, 1;
  GeneratorSystem G = makeSystem("congruenceLevel2", {A, B}, Structure::Free);
  // cusp horoballs tangent at the feet of the perpendiculars from i to the sides
  G.coreRadius = std::asinh(1.0);
  return G;
}

// Square once-punctured torus: opposite sides of the ideal quadrilateral
// with vertices at angles pi/4 + k pi/2 (disk at i) are paired by
// translations through i, which is the tangent case of the Schottky family.
inline GeneratorSystem puncturedTorusLattice() {
  double t = 2.0 * std::asinh(1.0);
  Moebius A;
  A << std::exp(t / 2), 0, 0, std::exp(-t / 2);
  Moebius R = rotationAbout_i(M_PI / 2);
  Moebius B = R * A * moebiusInverse(R);
  GeneratorSystem G = makeSystem("puncturedTorusLattice", {A, B}, Structure::Free);
  G.coreRadius = std::asinh(1.0);
  return G;
}

inline GeneratorSystem cyclicGroup(double t) {
  Moebius A;
  A << std::exp(t / 2), 0, 0, std::exp(-t / 2);
  return makeSystem("cyclic", {A}, Structure::Free);
}

inline GeneratorSystem builtinGroup(const std::string& name, const std::vector<double>& params = {}) {
  if (name == "schottky") {
    double t = params.size() > 0 ? params[0] : 3.0;
    double ang = params.size() > 1 ? params[1] : M_PI / 2;
    return schottkyGroup(t, ang);
  }
  if (name == "congruenceLevel2") return congruenceLevel2();
  if (name == "puncturedTorusLattice") return puncturedTorusLattice();
  if (name == "cyclic") return cyclicGroup(params.empty() ? 2.0 : params[0]);
  fail(ErrorKind::InvalidInput, "unknown builtin group '" + name + "'");
}

struct BallOptions {
  std::size_t elementCap = 50'000'000;
  int maxWordLength = std::numeric_limits<int>::max();
  int threads = 1;
  // generic systems keep elements up to T + slack in the frontier (<0: max generator step)
  double genericSlack = -1.0;
};

struct GroupElement {
  Letters word;
  Moebius matrix;
  double displacement = 0.0;  // d(g b0, b0)
};

namespace detail {

struct DfsFrame {
  Moebius m;
  Moebius minv;
  HPoint back;  // minv applied to the basepoint
  int next;
};

// Pre-order walk of reduced words below the prefix `w` (explicit stack: cusp
// words can run very deep). For each candidate child w.x, `prune(x, back)`
// decides from the cylinder bound; `visit(word, matrix)` sees every kept node.
template <class Prune, class Visit>
void wordTreeWalk(const GeneratorSystem& G, const HPoint& b0, int maxLen, Letters& w, const Moebius& m0,
                  const Moebius& mi0, int firstLetter, Prune& prune, Visit& visit) {
  std::vector<DfsFrame> stack;
  const std::size_t base = w.size();
  stack.push_back({m0, mi0, apply(mi0, b0), firstLetter});
  while (!stack.empty()) {
    DfsFrame& f = stack.back();
    if (f.next >= G.letterCount() || static_cast<int>(w.size()) >= maxLen) {
      stack.pop_back();
      if (w.size() > base) w.pop_back();
      continue;
    }
    Letter x = static_cast<Letter>(f.next++);
    if (!w.empty() && x == inverseLetter(w.back())) continue;
    if (prune(x, f.back)) continue;
    Moebius g = G.letter(x);
    Moebius mc = f.m * g;
    Moebius mic = moebiusInverse(g) * f.minv;
    w.push_back(x);
    visit(w, mc);
    stack.push_back({mc, mic, apply(mic, b0), firstLetter});
  }
}

template <class Visit>
void ballDfs(const GeneratorSystem& G, const HPoint& b0, double T, const BallOptions& opt, Letters& w,
             const Moebius& m, const Moebius& minv, Visit& visit, std::size_t& count) {
  auto prune = [&](Letter x, const HPoint& back) { return G.dirichlet[x].distanceFrom(back) > T; };
  auto onNode = [&](const Letters& word, const Moebius& mc) {
    double dist = hypDistance(apply(mc, b0), b0);
    if (dist <= T) {
      if (++count > opt.elementCap) fail(ErrorKind::BudgetExceeded, "ball exceeds element cap");
      visit(word, mc, dist);
    }
  };
  wordTreeWalk(G, b0, opt.maxWordLength, w, m, minv, 0, prune, onNode);
}

struct MatrixKey {
  long long k[4];
  bool operator==(const MatrixKey& o) const { return std::equal(k, k + 4, o.k); }
};
struct MatrixKeyHash {
  std::size_t operator()(const MatrixKey& m) const {
    std::size_t h = 1469598103934665603ull;
    for (long long v : m.k) h = (h ^ static_cast<std::size_t>(v)) * 1099511628211ull;
    return h;
  }
};

inline MatrixKey keyOf(const Moebius& m, double quantum) {
  Moebius c = canonical(m);
  MatrixKey k;
  for (int i = 0; i < 4; ++i) k.k[i] = std::llround(c(i / 2, i % 2) / quantum);
  return k;
}

// lookup tolerant to rounding across a quantum boundary
inline bool seenNear(const std::unordered_set<MatrixKey, MatrixKeyHash>& set, const MatrixKey& k) {
  for (int mask = 0; mask < 81; ++mask) {
    MatrixKey q = k;
    int r = mask;
    for (int i = 0; i < 4; ++i) {
      q.k[i] += (r % 3) - 1;
      r /= 3;
    }
    if (set.count(q)) return true;
  }
  return false;
}

template <class Visit>
void ballGeneric(const GeneratorSystem& G, const HPoint& b0, double T, const BallOptions& opt, Visit& visit) {
  double slack = opt.genericSlack >= 0 ? opt.genericSlack : G.maxGeneratorStep();
  const double quantum = 1e-9;
  std::unordered_set<MatrixKey, MatrixKeyHash> seen;
  std::vector<GroupElement> frontier{{Letters{}, Moebius::Identity(), 0.0}};
  seen.insert(keyOf(Moebius::Identity(), quantum));
  visit(frontier[0].word, frontier[0].matrix, 0.0);
  std::size_t count = 1;
  int len = 0;
  while (!frontier.empty() && len < opt.maxWordLength) {
    std::vector<GroupElement> next;
    for (const auto& e : frontier) {
      for (int xi = 0; xi < G.letterCount(); ++xi) {
        Letter x = static_cast<Letter>(xi);
        if (!e.word.empty() && x == inverseLetter(e.word.back())) continue;
        Moebius m = canonical(e.matrix * G.letter(x));
        double dist = hypDistance(apply(m, b0), b0);
        if (dist > T + slack) continue;
        MatrixKey k = keyOf(m, quantum);
        if (seenNear(seen, k)) continue;
        seen.insert(k);
        Letters w = e.word;
        w.push_back(x);
        if (dist <= T) {
          if (++count > opt.elementCap) fail(ErrorKind::BudgetExceeded, "ball exceeds element cap");
          visit(w, m, dist);
        }
        next.push_back({std::move(w), m, dist});
      }
    }
    frontier = std::move(next);
    ++len;
  }
}

}  // namespace detail

// Calls visit(word, matrix, displacement) once per element of the ball,
// identity included. Order is the depth-first word order.
template <class Visit>
void visitBall(const GeneratorSystem& G, const HPoint& b0, double T, Visit&& visit, const BallOptions& opt = {}) {
  if (!(T >= 0)) fail(ErrorKind::InvalidInput, "radius must be non-negative");
  if (G.structure == Structure::Free) {
    if (std::abs(b0.x - G.basepoint.x) > 1e-15 || std::abs(b0.y - G.basepoint.y) > 1e-15)
      fail(ErrorKind::InvalidInput, "free systems enumerate at their certified basepoint");
    Letters w;
    std::size_t count = 1;
    visit(w, Moebius::Identity().eval(), 0.0);
    detail::ballDfs(G, b0, T, opt, w, Moebius::Identity(), Moebius::Identity(), visit, count);
  } else {
    detail::ballGeneric(G, b0, T, opt, visit);
  }
}

inline std::vector<GroupElement> enumerateBall(const GeneratorSystem& G, const HPoint& b0, double T,
                                               const BallOptions& opt = {}) {
  std::vector<GroupElement> out;
  if (G.structure == Structure::Free && opt.threads > 1) {
    // one work unit per first letter; merged then sorted
    if (!(T >= 0)) fail(ErrorKind::InvalidInput, "radius must be non-negative");
    std::vector<std::vector<GroupElement>> parts(G.letterCount());
    std::vector<std::exception_ptr> errs(G.letterCount());
    auto work = [&](int first) {
      try {
        Letter x = static_cast<Letter>(first);
        if (G.dirichlet[x].distanceFrom(b0) > T) return;
        Letters w{x};
        Moebius m = G.letter(x);
        Moebius mi = moebiusInverse(m);
        auto visit = [&](const Letters& word, const Moebius& mm, double d) {
          parts[first].push_back({word, canonical(mm), d});
        };
        double dist = hypDistance(apply(m, b0), b0);
        if (dist <= T) visit(w, m, dist);
        BallOptions o = opt;
        std::size_t count = 0;
        detail::ballDfs(G, b0, T, o, w, m, mi, visit, count);
      } catch (...) {
        errs[first] = std::current_exception();
      }
    };
    std::vector<std::thread> pool;
    int next = 0;
    while (next < G.letterCount()) {
      pool.clear();
      for (int k = 0; k < opt.threads && next < G.letterCount(); ++k, ++next) pool.emplace_back(work, next);
      for (auto& t : pool) t.join();
    }
    for (auto& e : errs)
      if (e) std::rethrow_exception(e);
    out.push_back({{}, Moebius::Identity(), 0.0});
    for (auto& p : parts)
      for (auto& e : p) out.push_back(std::move(e));
    if (out.size() > opt.elementCap) fail(ErrorKind::BudgetExceeded, "ball exceeds element cap");
  } else {
    visitBall(G, b0, T, [&](const Letters& w, const Moebius& m, double d) { out.push_back({w, canonical(m), d}); },
              opt);
  }
  std::sort(out.begin(), out.end(), [](const GroupElement& a, const GroupElement& b) { return shortlexLess(a.word, b.word); });
  return out;
}

struct ConjugacyClass {
  Letters word;
  Moebius matrix;
  double length = 0.0;
};

namespace detail {

// Coordinates against the axis of a hyperbolic g: distance to the axis and
// position of the foot point (log scale, g shifts it by its length).
struct AxisFrame {
  double attract, repel;
  explicit AxisFrame(const Moebius& g) { std::tie(attract, repel) = fixedPoints(g); }
  std::pair<double, double> operator()(const HPoint& p) const {
    std::complex<double> z(p.x, p.y), w;
    if (std::isinf(attract)) w = z - repel;
    else if (std::isinf(repel)) w = -1.0 / (z - attract);
    else w = (z - repel) / (z - attract);
    return {std::asinh(std::abs(w.real()) / std::abs(w.imag())), std::log(std::abs(w))};
  }
};

// long conjugates have large entries; quantize relative to the largest
inline MatrixKey relativeKey(const Moebius& m) {
  Moebius c = canonical(m);
  return keyOf(c / c.cwiseAbs().maxCoeff(), 1e-9);
}

}  // namespace detail

// One representative per conjugacy class of hyperbolic elements with
// translation length <= T, in shortlex order of representatives.
inline std::vector<ConjugacyClass> enumerateHyperbolicConjugacyClasses(const GeneratorSystem& G, double T,
                                                                        const BallOptions& opt = {}) {
  if (!(T >= 0)) fail(ErrorKind::InvalidInput, "T must be non-negative");
  std::vector<ConjugacyClass> out;
  auto consider = [&](const Letters& w, const Moebius& m) {
    if (classify(m) != ElementType::Hyperbolic) return;
    double l = translationLength(m);
    if (l <= T) out.push_back({w, canonical(m), l});
  };
  if (G.structure == Structure::Free && std::isfinite(G.classConstant)) {
    std::size_t count = 0;
    auto emit = [&](const Letters& w, const Moebius& m, std::size_t& c) {
      if (w.back() == inverseLetter(w[0])) return;
      if (leastRotation(w) != 0) return;
      if (++c > opt.elementCap) fail(ErrorKind::BudgetExceeded, "class enumeration exceeds element cap");
      consider(w, m);
    };
    for (int f = 0; f < G.letterCount(); ++f) {
      Letters w{static_cast<Letter>(f)};
      Moebius m = G.letter(w[0]);
      emit(w, m, count);
      // every cyclically reduced extension of w.x moves b0 into w(D_x)
      auto prune = [&](Letter x, const HPoint& back) {
        return x < w[0] || G.dirichlet[x].distanceFrom(back) - G.classConstant > T;
      };
      auto onNode = [&](const Letters& word, const Moebius& mc) { emit(word, mc, count); };
      detail::wordTreeWalk(G, G.basepoint, opt.maxWordLength, w, m, moebiusInverse(m), f, prune, onNode);
    }
  } else if (G.structure == Structure::Free) {
    if (!G.coreRadius) fail(ErrorKind::InvalidInput, "cusped free system needs a core radius for class enumeration");
    std::unordered_set<std::string> seen;
    visitBall(
        G, G.basepoint, T + 2.0 * *G.coreRadius,
        [&](const Letters& w, const Moebius& m, double) {
          if (w.empty()) return;
          if (classify(m) != ElementType::Hyperbolic || translationLength(m) > T) return;
          Letters c = canonicalNecklace(cyclicallyReduce(w));
          std::string key(c.begin(), c.end());
          if (!seen.insert(key).second) return;
          consider(c, evaluateWord(G, c));
        },
        opt);
  } else {
    // Conjugates of g whose axis passes within R of b0 are c^-1 g c with c b0
    // within R of the axis. Those orbit points are chained by steps of
    // displacement <= 2R + 1, so one walk along a period of the axis marks
    // the whole class. Complete when R covers every closed geodesic from
    // the orbit (convex cocompact, R >= covering radius); heuristic otherwise.
    const double R = G.coreRadius ? *G.coreRadius : G.maxGeneratorStep();
    const double reach = 2.0 * R + 1.0;
    std::vector<GroupElement> ball = enumerateBall(G, G.basepoint, std::max(T, 1.0) + 2.0 * R, opt);
    std::vector<Moebius> steps;
    for (const auto& e : ball)
      if (!e.word.empty() && e.displacement <= reach) steps.push_back(e.matrix);
    std::unordered_set<detail::MatrixKey, detail::MatrixKeyHash> done;
    for (const auto& e : ball) {
      if (e.word.empty()) continue;
      if (classify(e.matrix) != ElementType::Hyperbolic) continue;
      double l = translationLength(e.matrix);
      if (l > T) continue;
      detail::AxisFrame axis(e.matrix);
      auto [r0, tau0] = axis(G.basepoint);
      if (r0 > R) continue;
      if (detail::seenNear(done, detail::relativeKey(e.matrix))) continue;
      std::unordered_set<detail::MatrixKey, detail::MatrixKeyHash> visited{detail::relativeKey(Moebius::Identity())};
      std::vector<Moebius> stack{Moebius::Identity()};
      while (!stack.empty()) {
        Moebius c = stack.back();
        stack.pop_back();
        done.insert(detail::relativeKey(moebiusInverse(c) * e.matrix * c));
        for (const auto& s : steps) {
          Moebius n = canonical(c * s);
          auto [r, tau] = axis(apply(n, G.basepoint));
          if (r > R || tau < tau0 - reach || tau > tau0 + l + reach) continue;
          detail::MatrixKey k = detail::relativeKey(n);
          if (detail::seenNear(visited, k)) continue;
          visited.insert(k);
          stack.push_back(n);
        }
      }
      out.push_back({e.word, e.matrix, l});
    }
  }
  std::sort(out.begin(), out.end(),
            [](const ConjugacyClass& a, const ConjugacyClass& b) { return shortlexLess(a.word, b.word); });
  return out;
}

}  // namespace hitchin
