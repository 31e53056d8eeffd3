#include "common.hpp"

using namespace hitchin;
using namespace testing_util;

namespace {

const char* kIota3 = "irreducible:3";

Representation iota(const GeneratorSystem& G, int d = 3) {
  return representationFromChain(G, "irreducible:" + std::to_string(d));
}

CountingProfile scaled(CountingProfile p, double a) {
  for (double& v : p.values) v *= a;
  p.cutoff *= a;
  return p;
}

// Lattices, computed once: the clouds carry every functional.
const CartanCloud& latticeOrbit() {
  static CartanCloud c = orbitCloud(iota(builtinGroup("congruenceLevel2")), 12.0);
  return c;
}
const CartanCloud& latticeClasses() {
  static CartanCloud c = classCloud(iota(builtinGroup("congruenceLevel2")), 14.0);
  return c;
}

}  // namespace

TEST(Series, Examples) {
  CountingProfile id;
  id.values = {0.0};
  id.cutoff = 1.0;
  for (double s : {0.0, 0.5, 3.0}) EXPECT_EQ(poincareSeries(id, s), 1.0);
  CountingProfile p = orbitProfile(iota(cyclicGroup(2.0)), RootFunctional::root(1, 3), 40.0);
  EXPECT_EQ(poincareSeries(p, 0.0), static_cast<double>(p.values.size()));
  // values 2|n| for |n| <= 20; the non-identity part is 2 sum e^{-2ns}
  ASSERT_EQ(p.values.size(), 41u);
  for (double s : {0.1, 0.7, 2.0}) {
    double closed = 0;
    for (int n = 1; n <= 20; ++n) closed += 2 * std::exp(-2.0 * n * s);
    EXPECT_NEAR(poincareSeries(p, s) - 1.0, closed, 1e-13);
  }
}

TEST(Series, StrictlyDecreasing) {
  CountingProfile p = profileFrom(latticeOrbit(), RootFunctional::root(1, 3));
  double prev = kInf;
  for (double s = 0; s <= 3; s += 0.125) {
    double q = poincareSeries(p, s);
    EXPECT_LT(q, prev);
    prev = q;
  }
}

TEST(Exponent, CyclicIsZero) {
  Representation r = iota(cyclicGroup(2.0));
  ExponentEstimate e = criticalExponentEstimate(orbitProfile(r, RootFunctional::root(1, 3), 120.0));
  EXPECT_LE(std::abs(e.value), 0.05);
  // class counts grow like T, so log(T N) needs a long window (see the ledger)
  ExponentEstimate h = entropyEstimate(classProfile(r, RootFunctional::root(1, 3), 200.0));
  EXPECT_LE(std::abs(h.value), 0.05);
}

TEST(Exponent, LatticeNearOne) {
  ExponentEstimate e = criticalExponentEstimate(profileFrom(latticeOrbit(), RootFunctional::root(1, 3)));
  EXPECT_NEAR(e.value, 1.0, 0.1);
  EXPECT_GE(e.halfWidth, 0.0);
  ExponentEstimate h = entropyEstimate(profileFrom(latticeClasses(), RootFunctional::root(1, 3)));
  EXPECT_NEAR(h.value, 1.0, 0.1);
  ExponentEstimate x = symmetricSpaceExponent(latticeOrbit());
  EXPECT_NEAR(x.value, 1.0, 0.1);
}

TEST(Exponent, InsufficientWindow) {
  CountingProfile p;
  p.values = {0, 1, 2};
  p.cutoff = 3;
  try {
    criticalExponentEstimate(p);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InsufficientWindow);
  }
  CountingProfile narrow;
  for (int i = 0; i < 100; ++i) narrow.values.push_back(i * 0.03);
  narrow.cutoff = 3;
  EXPECT_THROW(criticalExponentEstimate(narrow), Error);
}

TEST(Exponent, SchottkyBelowOneAndEntropyAgrees) {
  for (double t : {3.0, 4.0}) {
    Representation r = iota(schottkyGroup(t, M_PI / 2));
    ExponentEstimate d = criticalExponentEstimate(orbitProfile(r, RootFunctional::root(1, 3), 22.0));
    ExponentEstimate h = entropyEstimate(classProfile(r, RootFunctional::root(1, 3), 30.0));
    if (t == 4.0) {
      EXPECT_LT(d.value, 0.9);
      EXPECT_LT(h.value, 0.9);
    }
    EXPECT_LE(std::abs(h.value - d.value), 0.1) << t;
  }
}

TEST(Exponent, EntropyDropForSubgroup) {
  // <A^2, B^2> has infinite index in the level-2 congruence group
  Moebius A, B;
  A << 1, 4, 0, 1;
  B << 1, 0, 4, 1;
  GeneratorSystem H = makeSystem("level2-squares", {A, B}, Structure::Free);
  H.coreRadius = std::asinh(1.0);
  ExponentEstimate sub = criticalExponentEstimate(orbitProfile(iota(H), RootFunctional::root(1, 3), 14.0));
  ExponentEstimate full = criticalExponentEstimate(profileFrom(latticeOrbit(), RootFunctional::root(1, 3)));
  EXPECT_LT(sub.value + sub.halfWidth, full.value - full.halfWidth);
}

TEST(Exponent, TruncationInvariance) {
  for (const CartanCloud* c : {&latticeOrbit(), &latticeClasses()}) {
    CountingProfile p = profileFrom(*c, RootFunctional::root(1, 3));
    ExponentEstimate e = criticalExponentEstimate(p);
    CountingProfile q = p;
    q.values.erase(std::remove_if(q.values.begin(), q.values.end(), [&](double v) { return v < 0.1 * p.cutoff; }),
                   q.values.end());
    // the fit uses log(T' N(T')) on the top window; dropping low values shifts N by a constant
    ExponentEstimate f = criticalExponentEstimate(q);
    EXPECT_LE(std::abs(f.value - e.value), e.halfWidth);
  }
}

TEST(Exponent, Homogeneity) {
  CountingProfile p = profileFrom(latticeOrbit(), RootFunctional::root(1, 3));
  ExponentEstimate e = criticalExponentEstimate(p);
  for (double a : {0.5, 2.0, 3.0}) {
    ExponentEstimate s = criticalExponentEstimate(scaled(p, a));
    EXPECT_NEAR(s.value, e.value / a, 1e-12);
    // and through the cloud with the functional a*alpha_1
    ExponentEstimate f = criticalExponentEstimate(profileFrom(latticeOrbit(), RootFunctional(a * vec({1, 0}))));
    EXPECT_NEAR(f.value, e.value / a, 1e-12);
  }
}

TEST(Exponent, FuchsianProfilesCollapse) {
  GeneratorSystem G = builtinGroup("schottky");
  for (int d = 3; d <= 5; ++d) {
    CartanCloud c = orbitCloud(iota(G, d), 12.0);
    CountingProfile p1 = profileFrom(c, RootFunctional::root(1, d));
    for (int k = 2; k < d; ++k) {
      CountingProfile pk = profileFrom(c, RootFunctional::root(k, d));
      ASSERT_EQ(pk.values.size(), p1.values.size());
      for (size_t i = 0; i < p1.values.size(); ++i) EXPECT_NEAR(pk.values[i], p1.values[i], 1e-9);
    }
  }
}

TEST(Exponent, SeriesGrowthCrossCheck) {
  ExponentEstimate g = seriesGrowthEstimate(profileFrom(latticeOrbit(), RootFunctional::root(1, 3)));
  EXPECT_NEAR(g.value, 1.0, 0.15);
}

TEST(Cone, Examples) {
  GeneratorSystem G = builtinGroup("schottky");
  for (int d = 3; d <= 5; ++d) {
    auto rays = limitConeSample(iota(G, d), 14.0);
    ASSERT_EQ(rays.size(), 1u);
    Vec expect(d);
    for (int i = 0; i < d; ++i) expect[i] = d - 1 - 2 * i;
    EXPECT_LT((rays[0].values - expect.normalized()).norm(), 1e-9);
  }
  EXPECT_EQ(limitConeSample(iota(cyclicGroup(2.0)), 20.0).size(), 1u);
  DoubledRepresentation D = doubleRepresentation(iota(G), {{0}});
  auto rays = limitConeSample(D.rep, 10.0);
  ASSERT_FALSE(rays.empty());
  Vec ray = vec({1, 0, -1}).normalized();
  for (const auto& r : rays) EXPECT_LT((r.values - ray).norm(), 1e-6);
}

TEST(Cone, FunctionalPositive) {
  auto rays = limitConeSample(iota(builtinGroup("schottky")), 14.0);
  EXPECT_TRUE(functionalPositive(RootFunctional::root(1, 3), rays));
  EXPECT_FALSE(functionalPositive(RootFunctional(vec({1, -1})), rays));
  auto rays4 = limitConeSample(representationFromChain(builtinGroup("schottky"), "exterior:2\xE2\x88\x98irreducible:4"), 10.0);
  EXPECT_TRUE(functionalPositive(RootFunctional::fromWeights(vec({1, 0, 0, 0, 0})), rays4));
  EXPECT_THROW(functionalPositive(RootFunctional::root(1, 3), {}), Error);
}

TEST(SymmetricSpace, Normalization) {
  EXPECT_EQ(symmetricSpaceConstant(3), 8.0);
  EXPECT_EQ(symmetricSpaceConstant(2), 2.0);
  EXPECT_EQ(symmetricSpaceConstant(4), 20.0);
  std::mt19937_64 rng(61);
  for (int t = 0; t < 100; ++t) {
    Moebius h = randomSL2(rng);
    double dh = hypDistance(apply(h, HPoint{}), HPoint{});
    for (int d = 2; d <= 6; ++d)
      EXPECT_NEAR(symmetricSpaceDisplacement(cartanProjection(irreducibleSL2(d, h))), dh, 1e-9 * std::max(1.0, dh));
  }
}

TEST(Rigidity, LatticeAndSchottky) {
  RigidityReport sum = rigidityReport(latticeClasses(), RootFunctional(vec({1, 1})));
  EXPECT_EQ(sum.bound, 0.5);
  EXPECT_NEAR(sum.entropy.value, 0.5, 0.05);
  EXPECT_TRUE(sum.equalityFlagged);
  RigidityReport one = rigidityReport(latticeClasses(), RootFunctional::root(1, 3));
  EXPECT_EQ(one.bound, 1.0);
  EXPECT_TRUE(one.equalityFlagged);
  ASSERT_EQ(one.perRoot.size(), 2u);
  EXPECT_NEAR(one.perRoot[0].value, one.perRoot[1].value, 1e-12);
  RigidityReport s = rigidityReport(iota(builtinGroup("schottky")), RootFunctional::root(1, 3), 30.0);
  EXPECT_FALSE(s.equalityFlagged);
  EXPECT_GT(s.margin, s.entropy.halfWidth);
  EXPECT_THROW(rigidityReport(latticeClasses(), RootFunctional(vec({1, -0.5}))), Error);
}

TEST(Convexity, FuchsianConstantAndHomogeneous) {
  const CartanCloud& c = latticeClasses();
  ConvexityProbe flat = convexityProbe(c, RootFunctional::root(1, 3), RootFunctional::root(2, 3), 4);
  for (const auto& e : flat.entropy) EXPECT_NEAR(e.value, flat.entropy[0].value, 1e-12);
  EXPECT_LE(flat.defect, 1e-12);
  ConvexityProbe line = convexityProbe(c, RootFunctional::root(1, 3), RootFunctional(vec({2, 0})), 4);
  for (size_t i = 0; i < line.t.size(); ++i)
    EXPECT_NEAR(line.entropy[i].value, line.entropy[0].value / (1 + line.t[i]), 1e-12);
}

TEST(Convexity, DoubledSchottkyDefect) {
  DoubledRepresentation D = doubleRepresentation(iota(builtinGroup("schottky")), {{0}});
  ConvexityProbe p = convexityProbe(D.rep, RootFunctional::root(1, 3), RootFunctional(vec({1, 2})), 4, 18.0);
  EXPECT_LE(p.defect, 2 * p.maxHalfWidth);
}

TEST(Audit, CommutingDiagonalsAdd) {
  std::mt19937_64 rng(62);
  std::uniform_real_distribution<double> u(0.1, 2);
  for (int t = 0; t < 20; ++t) {
    double a = u(rng), b = u(rng);
    ProjectiveMatrix g(Mat(vec({std::exp(a), 1, std::exp(-a)}).asDiagonal()));
    ProjectiveMatrix h(Mat(vec({std::exp(b), 1, std::exp(-b)}).asDiagonal()));
    CartanVector kg = cartanProjection(g), kh = cartanProjection(h), k = cartanProjection(g * h);
    EXPECT_NEAR(simpleRoot(1, k) - simpleRoot(1, kg) - simpleRoot(1, kh), 0.0, 1e-13);
  }
}

TEST(Audit, OmegaSubmultiplicative) {
  std::mt19937_64 rng(63);
  for (int t = 0; t < 2000; ++t) {
    int d = 3 + t % 3;
    ProjectiveMatrix g(randomSL(d, rng)), h(randomSL(d, rng));
    CartanVector a = cartanProjection(g), b = cartanProjection(h), c = cartanProjection(g * h);
    for (int k = 1; k < d; ++k) EXPECT_LE(fundamentalWeight(k, c) - fundamentalWeight(k, a) - fundamentalWeight(k, b), 1e-9);
  }
}

TEST(Audit, SchottkyStable) {
  AdditivityAudit a = coarseAdditivityAudit(iota(builtinGroup("schottky")), ConvexDomain::kleinBall(2),
                                            vec({0, 0, 1}), 0.5, 20000);
  EXPECT_LE(a.omegaMaxDefect, 1e-9);
  EXPECT_GT(a.pairsSeparated, 10000);
  for (double m : a.minDefect) EXPECT_TRUE(std::isfinite(m));
  EXPECT_TRUE(a.stable(0.2));
}
