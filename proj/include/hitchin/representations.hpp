#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "hitchin/error.hpp"
#include "hitchin/fuchsian.hpp"
#include "hitchin/linalg.hpp"

namespace hitchin {

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Action of a 2x2 matrix on degree-(d-1) binary forms in the basis
// sqrt(C(n,k)) e1^(n-k) e2^k. Works for any 2x2 matrix, so it also carries
// the orientation-reversing reflections used in doubling.
inline Mat irreducibleMatrix(int d, const Eigen::Matrix2d& g) {
  if (d < 2) fail(ErrorKind::InvalidInput, "irreducible dimension must be at least 2");
  const int n = d - 1;
  const double a = g(0, 0), b = g(0, 1), c = g(1, 0), e = g(1, 1);
  std::vector<double> s(d);
  for (int k = 0; k < d; ++k) s[k] = std::sqrt(binomial(n, k));
  Mat M = Mat::Zero(d, d);
  for (int j = 0; j < d; ++j) {
    for (int i = 0; i < d; ++i) {
      double acc = 0.0;
      for (int p = 0; p <= std::min(i, n - j); ++p) {
        int q = i - p;
        if (q > j) continue;
        acc += binomial(n - j, p) * std::pow(c, p) * std::pow(a, n - j - p) * binomial(j, q) * std::pow(e, q) *
               std::pow(b, j - q);
      }
      M(i, j) = s[j] / s[i] * acc;
    }
  }
  return M;
}

inline ProjectiveMatrix irreducibleSL2(int d, const Moebius& g) {
  return ProjectiveMatrix::fromUnimodular(irreducibleMatrix(d, g), irreducibleMatrix(d, moebiusInverse(g)));
}

inline ProjectiveMatrix exteriorPower(int k, const ProjectiveMatrix& g) {
  if (k < 1 || k > g.dim() - 1) fail(ErrorKind::InvalidInput, "exterior degree must lie in [1, d-1]");
  return ProjectiveMatrix::fromScaled(exteriorMatrix(k, g.entries()), k * g.logScale(),
                                      exteriorMatrix(k, g.inverseEntries()), k * g.inverseLogScale());
}

// X -> g X g^T on symmetric matrices, in the Frobenius-orthonormal basis
// e_i e_i^T, (e_i e_j^T + e_j e_i^T)/sqrt2 (i<j), ordered diagonal first.
inline std::vector<std::pair<int, int>> symmetricBasisIndex(int n) {
  std::vector<std::pair<int, int>> idx;
  for (int i = 0; i < n; ++i) idx.push_back({i, i});
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) idx.push_back({i, j});
  return idx;
}

inline Vec symmetricToVector(const Mat& X) {
  const int n = static_cast<int>(X.rows());
  auto idx = symmetricBasisIndex(n);
  Vec v(idx.size());
  for (size_t k = 0; k < idx.size(); ++k) {
    auto [i, j] = idx[k];
    v[static_cast<Eigen::Index>(k)] = i == j ? X(i, i) : std::sqrt(2.0) * X(i, j);
  }
  return v;
}

inline Mat vectorToSymmetric(const Vec& v, int n) {
  auto idx = symmetricBasisIndex(n);
  Mat X(n, n);
  for (size_t k = 0; k < idx.size(); ++k) {
    auto [i, j] = idx[k];
    double x = v[static_cast<Eigen::Index>(k)];
    if (i == j) X(i, i) = x;
    else X(i, j) = X(j, i) = x / std::sqrt(2.0);
  }
  return X;
}

inline Mat symmetricMatrix(const Mat& g) {
  const int n = static_cast<int>(g.rows());
  auto idx = symmetricBasisIndex(n);
  const int D = static_cast<int>(idx.size());
  Mat S(D, D);
  for (int a = 0; a < D; ++a) {
    auto [k, l] = idx[a];
    Mat Y;
    if (k == l) Y = g.col(k) * g.col(k).transpose();
    else Y = (g.col(k) * g.col(l).transpose() + g.col(l) * g.col(k).transpose()) / std::sqrt(2.0);
    S.col(a) = symmetricToVector(Y);
  }
  return S;
}

inline ProjectiveMatrix hermitianSymmetric(const ProjectiveMatrix& g) {
  return ProjectiveMatrix::fromScaled(symmetricMatrix(g.entries()), 2 * g.logScale(),
                                      symmetricMatrix(g.inverseEntries()), 2 * g.inverseLogScale());
}

inline ProjectiveMatrix visibleEmbed(int k, const ProjectiveMatrix& g) {
  if (k < 1 || 2 * k > g.dim()) fail(ErrorKind::InvalidInput, "visible embedding needs 1 <= k <= d/2");
  return hermitianSymmetric(exteriorPower(k, g));
}

// Nested subspaces spanned by prefixes of an ordered basis.
struct Flag {
  Mat basis;

  Flag() = default;
  explicit Flag(Mat b) : basis(std::move(b)) {
    for (Eigen::Index j = 0; j < basis.cols(); ++j) {
      double n = basis.col(j).norm();
      if (!(n > 0)) fail(ErrorKind::InvalidInput, "flag basis has a zero vector");
      basis.col(j) /= n;
    }
    if (std::abs(basis.determinant()) <= 1e-12) fail(ErrorKind::InvalidInput, "flag basis degenerate");
  }
  int dim() const { return static_cast<int>(basis.rows()); }
  Subspace subspace(int i) const { return Subspace::span(basis.leftCols(i)); }
  Flag transformed(const ProjectiveMatrix& g) const { return Flag(g.entries() * basis); }
};

inline Flag coordinateFlag(int d) { return Flag(Mat::Identity(d, d)); }
inline Flag reversedCoordinateFlag(int d) { return Flag(Mat::Identity(d, d).rowwise().reverse()); }

// Limit map of iota_d at a boundary point of H^2 (x = inf allowed).
// Uses the rotation sending inf to x = cot(theta): iota_d of it is orthogonal,
// so the basis stays well conditioned for large |x|.
inline Flag veroneseFlag(int d, double x) {
  if (std::isinf(x)) return coordinateFlag(d);
  const double th = std::atan2(1.0, x);
  Eigen::Matrix2d h;
  h << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  return Flag(irreducibleMatrix(d, h));
}

// Image of a flag under E^k: wedges of basis prefixes, as a flag in
// Lambda^k R^d whose first line is F^1 ^ ... ^ F^k.
inline Mat wedgeOfColumns(const Mat& cols) {
  const int d = static_cast<int>(cols.rows());
  const int k = static_cast<int>(cols.cols());
  auto subsets = kSubsets(d, k);
  Vec v(subsets.size());
  Mat sub(k, k);
  for (size_t I = 0; I < subsets.size(); ++I) {
    for (int r = 0; r < k; ++r) sub.row(r) = cols.row(subsets[I][r]);
    v[static_cast<Eigen::Index>(I)] = sub.determinant();
  }
  return v;
}

class Representation {
 public:
  using Lift = std::function<ProjectiveMatrix(const Moebius&)>;

  Representation() = default;

  static Representation fromImages(GeneratorSystem domain, std::vector<ProjectiveMatrix> images,
                                   std::string description = "images") {
    if (images.size() != domain.generators.size())
      fail(ErrorKind::InvalidInput, "one image per generator is required");
    Representation r;
    r.dim_ = images.at(0).dim();
    for (const auto& m : images)
      if (m.dim() != r.dim_) fail(ErrorKind::InvalidInput, "images must share a dimension");
    r.domain_ = std::move(domain);
    r.images_ = std::move(images);
    r.description_ = std::move(description);
    return r;
  }

  static Representation fromLift(GeneratorSystem domain, Lift lift, std::string description) {
    std::vector<ProjectiveMatrix> imgs;
    for (const auto& g : domain.generators) imgs.push_back(lift(g));
    Representation r = fromImages(std::move(domain), std::move(imgs), std::move(description));
    r.lift_ = std::move(lift);
    return r;
  }

  const GeneratorSystem& domain() const { return domain_; }
  int dim() const { return dim_; }
  const std::string& description() const { return description_; }
  bool factorsThroughPSL2() const { return static_cast<bool>(lift_); }
  const std::vector<ProjectiveMatrix>& images() const { return images_; }

  ProjectiveMatrix letter(Letter x) const {
    const ProjectiveMatrix& g = images_.at(x >> 1);
    return (x & 1u) ? g.inverse() : g;
  }

  ProjectiveMatrix evaluate(const Letters& w) const {
    if (cache_) {
      std::string key(w.begin(), w.end());
      {
        std::lock_guard<std::mutex> lk(cache_->mu);
        auto it = cache_->map.find(key);
        if (it != cache_->map.end()) return it->second;
      }
      ProjectiveMatrix m = product(w);
      std::lock_guard<std::mutex> lk(cache_->mu);
      cache_->map.insert_or_assign(key, m);
      return m;
    }
    return product(w);
  }

  // Uses the lift when available: one matrix construction instead of a
  // product, and exact inverses.
  ProjectiveMatrix evaluate(const Letters& w, const Moebius& m) const {
    if (lift_) return (*lift_)(m);
    return evaluate(w);
  }

  const Lift* lift() const { return lift_ ? &*lift_ : nullptr; }

  void enableCache(bool on = true) { cache_ = on ? std::make_shared<Cache>() : nullptr; }

 private:
  ProjectiveMatrix product(const Letters& w) const {
    ProjectiveMatrix m = ProjectiveMatrix::identity(dim_);
    for (Letter x : w) m = m * letter(x);
    return m;
  }

  struct Cache {
    std::mutex mu;
    std::unordered_map<std::string, ProjectiveMatrix> map;
  };

  GeneratorSystem domain_;
  int dim_ = 0;
  std::vector<ProjectiveMatrix> images_;
  std::optional<Lift> lift_;
  std::string description_;
  std::shared_ptr<Cache> cache_;
};

// Parses chains such as "exterior:2∘irreducible:4", "visible:1∘irreducible:3",
// "symmetric∘irreducible:3". Stages apply right to left; the rightmost stage
// must be irreducible:d.
inline Representation::Lift parseChain(const std::string& spec, int* targetDim = nullptr) {
  std::vector<std::string> stages;
  std::string cur;
  const std::string ring = "\xE2\x88\x98";
  for (size_t i = 0; i < spec.size();) {
    if (spec.compare(i, ring.size(), ring) == 0) {
      stages.push_back(cur);
      cur.clear();
      i += ring.size();
    } else if (spec[i] == '*') {
      stages.push_back(cur);
      cur.clear();
      ++i;
    } else {
      if (!std::isspace(static_cast<unsigned char>(spec[i]))) cur += spec[i];
      ++i;
    }
  }
  stages.push_back(cur);
  auto parseStage = [&](const std::string& s, std::string& name, int& arg) {
    auto c = s.find(':');
    name = s.substr(0, c);
    arg = 0;
    if (c != std::string::npos) {
      try {
        arg = std::stoi(s.substr(c + 1));
      } catch (...) {
        fail(ErrorKind::InvalidInput, "bad stage argument in '" + s + "'");
      }
    }
  };
  std::string name;
  int arg = 0;
  parseStage(stages.back(), name, arg);
  if (name != "irreducible" || arg < 2) fail(ErrorKind::InvalidInput, "chain must end with irreducible:d (d >= 2)");
  int d = arg;
  std::vector<std::function<ProjectiveMatrix(const ProjectiveMatrix&)>> ops;
  for (int s = static_cast<int>(stages.size()) - 2; s >= 0; --s) {
    parseStage(stages[s], name, arg);
    if (name == "exterior") {
      if (arg < 1 || arg > d - 1) fail(ErrorKind::InvalidInput, "exterior degree out of range");
      int k = arg;
      ops.push_back([k](const ProjectiveMatrix& g) { return exteriorPower(k, g); });
      d = static_cast<int>(binomial(d, k) + 0.5);
    } else if (name == "symmetric") {
      ops.push_back([](const ProjectiveMatrix& g) { return hermitianSymmetric(g); });
      d = d * (d + 1) / 2;
    } else if (name == "visible") {
      if (arg < 1 || 2 * arg > d) fail(ErrorKind::InvalidInput, "visible degree out of range");
      int k = arg;
      ops.push_back([k](const ProjectiveMatrix& g) { return visibleEmbed(k, g); });
      int D = static_cast<int>(binomial(d, k) + 0.5);
      d = D * (D + 1) / 2;
    } else {
      fail(ErrorKind::InvalidInput, "unknown stage '" + name + "'");
    }
  }
  if (targetDim) *targetDim = d;
  int base = 0;
  parseStage(stages.back(), name, base);
  return [base, ops](const Moebius& m) {
    ProjectiveMatrix g = irreducibleSL2(base, m);
    for (const auto& op : ops) g = op(g);
    return g;
  };
}

inline Representation representationFromChain(const GeneratorSystem& G, const std::string& spec) {
  return Representation::fromLift(G, parseChain(spec), spec);
}

// Eigenbasis of a proximal-type element, columns ordered by descending
// eigenvalue modulus. Top vectors are read from g, bottom ones from g^{-1}.
inline Mat orderedEigenbasis(const ProjectiveMatrix& g, double gapTolerance = 1e-8) {
  const int d = g.dim();
  auto solve = [d](const Mat& m, std::vector<double>& mod, Mat& vecs) {
    Eigen::EigenSolver<Mat> es(m, true);
    if (es.info() != Eigen::Success) fail(ErrorKind::NumericalFailure, "eigen solver did not converge");
    std::vector<int> order(d);
    for (int i = 0; i < d; ++i) order[i] = i;
    const auto& ev = es.eigenvalues();
    for (int i = 0; i < d; ++i)
      if (std::abs(ev[i].imag()) > 1e-8 * std::abs(ev[i])) fail(ErrorKind::DegenerateGap, "complex eigenvalue pair");
    std::sort(order.begin(), order.end(), [&](int a, int b) { return std::abs(ev[a]) > std::abs(ev[b]); });
    mod.resize(d);
    vecs.resize(d, d);
    for (int i = 0; i < d; ++i) {
      mod[i] = std::abs(ev[order[i]]);
      vecs.col(i) = es.eigenvectors().col(order[i]).real().normalized();
    }
  };
  std::vector<double> s, t;
  Mat vg, vi;
  solve(g.entries(), s, vg);
  solve(g.inverseEntries(), t, vi);
  CartanVector nu = jordanProjection(g);
  for (int k = 1; k < d; ++k)
    if (simpleRoot(k, nu) <= gapTolerance) fail(ErrorKind::DegenerateGap, "eigenvalue moduli too close");
  Mat P(d, d);
  for (int i = 0; i < d; ++i) {
    double eg = s[0] / s[i];
    double ei = t[0] / t[d - 1 - i];
    P.col(i) = eg <= ei ? vg.col(i) : vi.col(d - 1 - i);
  }
  return P;
}

namespace detail {

// Orthogonal iteration from a starting guess: converges at e^{-alpha_k} per
// sweep down to the rounding floor of A.
inline Mat polishInvariant(const Mat& A, Mat Q, double gap) {
  const int sweeps = std::clamp(static_cast<int>(std::ceil(40.0 / std::max(gap, 1e-3))), 2, 60);
  for (int i = 0; i < sweeps; ++i) Q = Subspace::span(A * Q).basis;
  return Q;
}

}  // namespace detail

// Nested invariant subspaces of a proximal-type element. Level k comes from g
// (error ~ eps e^{nu_1 - nu_k}) or as the annihilator of the top d-k level of
// g^{-T} (error ~ eps e^{nu_{k+1} - nu_d}), whichever is smaller; the nested
// basis is then peeled off level by level. Last column: the repelling line.
inline Flag invariantFlag(const ProjectiveMatrix& g, double gapTolerance = 1e-8) {
  const int d = g.dim();
  Mat P = orderedEigenbasis(g, gapTolerance);
  CartanVector nu = jordanProjection(g);
  const Mat A = g.entries(), B = g.inverseEntries().transpose();
  // left eigenvectors for g^{-T}: rows of P^{-1}, reversed order
  const Mat L = P.inverse().transpose();
  Mat basis(d, d);
  Mat prev(d, 0);
  for (int k = 1; k < d; ++k) {
    Mat Qk;
    const double gap = simpleRoot(k, nu);
    if (nu[0] - nu[k - 1] <= nu[k] - nu[d - 1]) {
      Qk = detail::polishInvariant(A, Subspace::span(P.leftCols(k)).basis, gap);
    } else {
      Mat top = detail::polishInvariant(B, Subspace::span(L.rightCols(d - k)).basis, gap);
      Qk = orthogonalComplement(top);
    }
    Mat r = Qk - prev * (prev.transpose() * Qk);
    Eigen::JacobiSVD<Mat> svd(r, Eigen::ComputeThinU);
    basis.col(k - 1) = svd.matrixU().col(0);
    prev.conservativeResize(d, k);
    prev.col(k - 1) = basis.col(k - 1);
  }
  basis.col(d - 1) = P.col(d - 1);
  return Flag(basis);
}

inline Flag attractingFlag(const Representation& rho, const Letters& w) {
  Moebius m = evaluateWord(rho.domain(), w);
  if (classify(m) != ElementType::Hyperbolic) fail(ErrorKind::DegenerateGap, "element is not hyperbolic");
  return invariantFlag(rho.evaluate(w, m));
}

struct DoubledRepresentation {
  Representation rep;  // over the doubled generator system
  int baseRank = 0;
  std::vector<Letters> boundaryWords;
  std::vector<ProjectiveMatrix> reflections;
  std::vector<Eigen::Matrix2d> fuchsianReflections;  // det -1
};

// Reflection fixing the axis of a hyperbolic element: P diag(1,-1) P^{-1}.
inline Eigen::Matrix2d axisReflection(const Moebius& beta) {
  Eigen::EigenSolver<Eigen::Matrix2d> es(beta);
  Eigen::Matrix2d P;
  for (int i = 0; i < 2; ++i) P.col(i) = es.eigenvectors().col(i).real();
  return P * Eigen::Vector2d(1, -1).asDiagonal() * P.inverse();
}

inline Eigen::Matrix2d conjugateByReflection(const Eigen::Matrix2d& r, const Moebius& g) {
  return canonical(r * g * r.inverse());
}

inline DoubledRepresentation doubleRepresentation(const Representation& rho, const std::vector<Letters>& boundaryGens) {
  const GeneratorSystem& G = rho.domain();
  if (G.structure != Structure::Free) fail(ErrorKind::Unsupported, "doubling needs a certified free system");
  if (boundaryGens.empty()) fail(ErrorKind::InvalidInput, "no boundary words");
  DoubledRepresentation D;
  D.baseRank = G.rank();
  D.boundaryWords = boundaryGens;
  const int d = rho.dim();
  std::vector<Moebius> gens = G.generators;
  std::vector<std::string> names = G.names;
  std::vector<ProjectiveMatrix> imgs = rho.images();
  for (size_t b = 0; b < boundaryGens.size(); ++b) {
    const Letters& w = boundaryGens[b];
    Moebius beta = evaluateWord(G, w);
    if (classify(beta) != ElementType::Hyperbolic) fail(ErrorKind::InvalidInput, "boundary word must be hyperbolic");
    Mat P = orderedEigenbasis(rho.evaluate(w, beta));
    for (int j = 0; j < d; ++j) P.col(j).normalize();
    if (std::abs(P.determinant()) < 1e-10) fail(ErrorKind::NotTransverse, "eigenlines not in general position");
    Vec signs(d);
    for (int j = 0; j < d; ++j) signs[j] = (j % 2 == 0) ? 1.0 : -1.0;
    Mat R = P * signs.asDiagonal() * P.inverse();
    ProjectiveMatrix Rb = ProjectiveMatrix::fromUnimodular(R, R);
    Eigen::Matrix2d Mb = axisReflection(beta);
    D.reflections.push_back(Rb);
    D.fuchsianReflections.push_back(Mb);
    for (int j = 0; j < G.rank(); ++j) {
      gens.push_back(conjugateByReflection(Mb, G.generators[j]));
      names.push_back("r" + std::to_string(b) + G.names[j] + "r" + std::to_string(b));
      imgs.push_back(Rb * rho.images()[j] * Rb);
    }
  }
  GeneratorSystem GD = makeSystem(G.name + "-double", gens, Structure::Generic, names);
  GD.basepoint = G.basepoint;
  GD.coreRadius = G.coreRadius;
  D.rep = Representation::fromImages(GD, imgs, "double(" + rho.description() + ")");
  return D;
}

}  // namespace hitchin
