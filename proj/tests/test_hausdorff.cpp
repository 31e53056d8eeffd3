#include <random>

#include "common.hpp"

using namespace hitchin;
using namespace testing_util;

namespace {

Representation schottky3() { return representationFromChain(builtinGroup("schottky"), "irreducible:3"); }

ConvexDomain klein() { return ConvexDomain::kleinBall(2); }

Vec center() { return vec({0, 0, 1}); }

// dense Veronese curve against the sample: the largest hole
double veroneseGap(const LimitSetSample& s) {
  double worst = 0;
  for (int i = 0; i < 2000; ++i) {
    double th = M_PI * (i + 0.5) / 2000.0;
    Vec v = veroneseFlag(3, 1.0 / std::tan(th)).basis.col(0);
    double best = kInf;
    for (const auto& u : s.points) best = std::min(best, projectiveAngle(u, v));
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace

TEST(Sample, CyclicTwoPoints) {
  Representation r = representationFromChain(cyclicGroup(2.0), "irreducible:3");
  for (LimitMode mode : {LimitMode::Cartan, LimitMode::Eigen}) {
    LimitSetSample s = sampleLimitSet(r, 40.0, mode);
    ASSERT_EQ(s.points.size(), 2u);
    EXPECT_NEAR(std::abs(s.points[0].dot(s.points[1])), 0.0, 1e-12);
  }
}

TEST(Sample, UnitAndDeduplicated) {
  LimitSetSample s = sampleLimitSet(schottky3(), 16.0, LimitMode::Cartan);
  ASSERT_GT(s.points.size(), 100u);
  EXPECT_EQ(s.words.size(), s.points.size());
  for (const auto& u : s.points) EXPECT_NEAR(u.norm(), 1.0, 1e-12);
  for (size_t i = 0; i < s.points.size(); ++i)
    for (size_t j = i + 1; j < s.points.size(); ++j) ASSERT_GE(projectiveAngle(s.points[i], s.points[j]), 1e-9);
}

TEST(Sample, LatticeFillsVeroneseCircle) {
  Representation r = representationFromChain(builtinGroup("congruenceLevel2"), "irreducible:3");
  double g6 = veroneseGap(sampleLimitSet(r, 6.0, LimitMode::Cartan));
  double g9 = veroneseGap(sampleLimitSet(r, 9.0, LimitMode::Cartan));
  EXPECT_LT(g9, g6 / 2);
  EXPECT_LT(g9, 0.02);
}

TEST(Sample, ModesAgreeOnSchottky) {
  // 6.7e-4 at depth 12, 4e-5 at 15: the bound is met one word length deeper
  EXPECT_LE(limitModeMismatch(schottky3(), 15.0), 1e-4);
  EXPECT_LT(limitModeMismatch(schottky3(), 15.0), limitModeMismatch(schottky3(), 12.0));
}

TEST(BoxCounting, Segment) {
  std::vector<Vec> pts;
  for (int i = 0; i < 10000; ++i) {
    double th = 0.2 + i * 1e-4;
    pts.push_back(vec({std::cos(th), std::sin(th), 0.0}));
  }
  ExponentEstimate e = boxCountingDimension(pts, {});
  EXPECT_NEAR(e.value, 1.0, 0.05);
}

TEST(BoxCounting, Cluster) {
  std::mt19937_64 rng(71);
  std::normal_distribution<double> n(0, 1e-7);
  Vec c = vec({0.3, 0.5, 0.7}).normalized();
  std::vector<Vec> pts;
  for (int i = 0; i < 2000; ++i) pts.push_back((c + vec({n(rng), n(rng), n(rng)})).normalized());
  EXPECT_NEAR(boxCountingDimension(pts, {}).value, 0.0, 0.05);
}

TEST(BoxCounting, Errors) {
  std::vector<Vec> few(999, vec({1, 0, 0}));
  EXPECT_THROW(boxCountingDimension(few, {}), Error);
  std::vector<Vec> many(1000, vec({1, 0, 0}));
  EXPECT_THROW(boxCountingDimension(many, {1e-2, 1e-3}), Error);
  EXPECT_THROW(boxCountingDimension(many, {0.04, 0.1}), Error);  // two dyadic scales
}

TEST(BoxCounting, FlagCurveAtMostOne) {
  // second flag space of iota_4 on the lattice, as lines in the exterior square
  Representation r = representationFromChain(builtinGroup("congruenceLevel2"), "exterior:2*irreducible:4");
  LimitSetSample s = sampleLimitSet(r, 10.0, LimitMode::Cartan);
  EXPECT_LE(boxCountingDimension(s, {}).value, 1.05);
}

TEST(BoxCounting, SchottkyNearCriticalExponent) {
  Representation r = schottky3();
  ExponentEstimate d = criticalExponentEstimate(orbitProfile(r, RootFunctional::root(1, 3), 22.0));
  ExponentEstimate b = boxCountingDimension(sampleLimitSet(r, 24.0, LimitMode::Cartan), {1e-4, 1e-2});
  EXPECT_LE(std::abs(b.value - d.value), 0.1);
  EXPECT_LE(b.value, d.value + d.halfWidth + b.halfWidth);
}

TEST(Shadows, ArcExamples) {
  HPoint b0;
  EXPECT_EQ(shadowArc(b0, b0, 1.0).halfWidth, M_PI);
  HPoint z{0, std::exp(3.0)};
  Arc a = shadowArc(b0, z, 1.0);
  EXPECT_NEAR(a.halfWidth, std::asin(std::sinh(0.5) / std::sinh(3.0)), 1e-15);
  EXPECT_TRUE(arcInside(shadowArc(b0, {0, std::exp(5.0)}, 2.0), a));
  EXPECT_TRUE(arcsDisjoint(a, shadowArc(b0, {0, std::exp(-3.0)}, 1.0)));
}

TEST(Shadows, CyclicCoverIsZero) {
  Representation r = representationFromChain(cyclicGroup(2.0), "irreducible:3");
  ShadowCoverResult c = shadowCoverExponent(r, klein(), center(), 1.0, 40.0);
  EXPECT_LE(c.estimate.value, 0.05);
}

TEST(Shadows, CoverAndDiameterLaw) {
  Representation r = schottky3();
  ExponentEstimate d = criticalExponentEstimate(orbitProfile(r, RootFunctional::root(1, 3), 22.0));
  ShadowCoverResult c24 = shadowCoverExponent(r, klein(), center(), 1.0, 24.0);
  ShadowCoverResult c28 = shadowCoverExponent(r, klein(), center(), 1.0, 28.0);
  EXPECT_LE(std::abs(c28.estimate.value - d.value), 0.15);
  EXPECT_GT(c28.maxDiameterRatio, 0.0);
  EXPECT_LT(c28.maxDiameterRatio, 10.0);
  // C stable across T: deeper samples only refine the measured diameters
  EXPECT_NEAR(c28.maxDiameterRatio, c24.maxDiameterRatio, 1e-3 * c24.maxDiameterRatio);
  EXPECT_GT(c28.levels, c24.levels);
  // and no larger on deep shadows than on shallow ones
  for (const ShadowCoverResult* c : {&c24, &c28}) {
    std::vector<double> populated;
    for (double x : c->levelRatios)
      if (x > 0) populated.push_back(x);
    ASSERT_GE(populated.size(), 2u);
    EXPECT_LE(populated.back(), populated.front());
    for (double x : populated) EXPECT_LE(x, c->maxDiameterRatio);
  }
}

TEST(Shadows, Errors) {
  Representation r = schottky3();
  try {
    shadowCoverExponent(r, klein(), center(), 0.5, 20.0);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidInput);
  }
  try {
    shadowCoverExponent(r, klein(), vec({0.1, 0, 1}), 1.0, 20.0);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Unsupported);
  }
  try {
    shadowCoverExponent(r, klein(), center(), 1.0, 5.0);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyCover);
  }
}

TEST(Tree, DeltaZeroExists) {
  ShadowTree t = buildShadowTree(schottky3(), klein(), center(), 0.0, 2);
  ASSERT_TRUE(t.complete);
  for (const auto& n : t.nodes)
    if (n.depth < 2) {
      EXPECT_FALSE(n.children.empty());
      EXPECT_GE(n.certificate.massRatio, 1.0);
    }
}

TEST(Tree, CertificatesAtPointThree) {
  ShadowTree t = buildShadowTree(schottky3(), klein(), center(), 0.3, 4);
  ASSERT_TRUE(t.complete) << t.diagnostic;
  EXPECT_FALSE(treeLeaves(t).empty());
  for (size_t i = 0; i < t.nodes.size(); ++i) {
    const ShadowTreeNode& z = t.nodes[i];
    if (z.depth == 4) continue;
    ASSERT_FALSE(z.children.empty());
    const TreeCertificate& c = z.certificate;
    EXPECT_GE(c.nestingMargin, 0.0);
    if (z.children.size() > 1) EXPECT_GT(c.siblingGap, 0.0);
    EXPECT_LE(c.maxDistance, t.D0 + 1e-9);
    EXPECT_GE(c.massRatio, 1.0);
    for (int n : c.annuli) EXPECT_LE(n, 12);
    // the predicates again, from the stored nodes
    Arc inner = shadowArc(HPoint{}, z.point, t.r0);
    for (size_t a = 0; a < z.children.size(); ++a) {
      const ShadowTreeNode& w = t.nodes[static_cast<size_t>(z.children[a])];
      Arc outer = shadowArc(HPoint{}, w.point, 2 * t.r0);
      EXPECT_TRUE(arcInside(outer, inner));
      for (size_t b = a + 1; b < z.children.size(); ++b)
        EXPECT_TRUE(arcsDisjoint(outer, shadowArc(HPoint{}, t.nodes[static_cast<size_t>(z.children[b])].point, 2 * t.r0)));
    }
  }
}

TEST(Tree, AboveCriticalFails) {
  ShadowTree t = buildShadowTree(schottky3(), klein(), center(), 0.9, 4);
  EXPECT_FALSE(t.complete);
  EXPECT_LT(t.nodes.size(), 50u);
  try {
    requireComplete(t);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NoChildrenFound);
  }
  try {
    treeMeasureFrostman(t, 1e-4, 1e-2);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::IncompleteTree);
  }
}

TEST(Tree, Limits) {
  EXPECT_THROW(buildShadowTree(schottky3(), klein(), center(), 0.3, 6), Error);
  EXPECT_THROW(buildShadowTree(schottky3(), klein(), center(), -0.1, 2), Error);
  DoubledRepresentation D = doubleRepresentation(schottky3(), {{0}});
  EXPECT_THROW(buildShadowTree(D.rep, klein(), center(), 0.3, 2), Error);  // generic base
}

TEST(Frostman, DepthOneClosedForm) {
  // delta = 0: every child weighs 1/k
  ShadowTree t = buildShadowTree(schottky3(), klein(), center(), 0.0, 1);
  ASSERT_TRUE(t.complete);
  std::vector<int> leaves = treeLeaves(t);
  const double k = static_cast<double>(leaves.size());
  ASSERT_GE(k, 1);
  double minSep = kInf;
  for (size_t a = 0; a < leaves.size(); ++a)
    for (size_t b = a + 1; b < leaves.size(); ++b)
      minSep = std::min(minSep, projectiveAngle(t.nodes[static_cast<size_t>(leaves[a])].limitPoint,
                                                t.nodes[static_cast<size_t>(leaves[b])].limitPoint));
  for (int i : leaves) EXPECT_DOUBLE_EQ(t.nodes[static_cast<size_t>(i)].mass, 1.0 / k);
  FrostmanReport f = treeMeasureFrostman(t, std::min(minSep / 2, 1e-3), 2.0);
  EXPECT_DOUBLE_EQ(f.maxRatio.front(), 1.0 / k);
  EXPECT_DOUBLE_EQ(f.maxRatio.back(), 1.0);
  EXPECT_DOUBLE_EQ(f.totalMass, 1.0);
}

TEST(Frostman, PointThreeBounded) {
  ShadowTree t = buildShadowTree(schottky3(), klein(), center(), 0.3, 4);
  ASSERT_TRUE(t.complete);
  FrostmanReport f = treeMeasureFrostman(t, 1e-4, 1e-2);
  EXPECT_NEAR(f.totalMass, 1.0, 1e-12);
  EXPECT_TRUE(std::isfinite(f.overall));
  EXPECT_GT(f.firstDecade, 0.0);
  EXPECT_LT(f.overall, 10.0);
  // stable across the two decades
  EXPECT_LT(f.secondDecade / f.firstDecade, 4.0);
  EXPECT_LT(f.firstDecade / f.secondDecade, 4.0);
}
