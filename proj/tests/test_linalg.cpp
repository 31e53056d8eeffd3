#include "common.hpp"

using namespace hitchin;
using namespace testing_util;

namespace {

ProjectiveMatrix pm(const Mat& m) { return ProjectiveMatrix(m); }

Mat diag3(double a, double b, double c) { return vec({a, b, c}).asDiagonal(); }

}  // namespace

TEST(Cartan, DiagonalAndIdentity) {
  CartanVector k = cartanProjection(pm(diag3(2, 1, 0.5)));
  EXPECT_LT(maxDiff(k, cv({std::log(2.0), 0, -std::log(2.0)})), 1e-12);
  for (int d = 2; d <= 6; ++d) EXPECT_LT(cartanProjection(ProjectiveMatrix::identity(d)).values.cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Cartan, FromFactors) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 20; ++t) {
    Mat U = randomOrthogonal(3, rng), V = randomOrthogonal(3, rng);
    Mat g = U * diag3(std::exp(2.0), 1, std::exp(-2.0)) * V.transpose();
    EXPECT_LT(maxDiff(cartanProjection(pm(g)), cv({2, 0, -2})), 1e-12);
  }
}

TEST(Cartan, DescendingAndTraceFree) {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 200; ++t) {
    int d = 2 + t % 5;
    CartanVector k = cartanProjection(pm(randomSL(d, rng)));
    EXPECT_LT(std::abs(k.values.sum()), 1e-10);
    for (int i = 0; i + 1 < d; ++i) EXPECT_GE(k[i], k[i + 1] - 1e-10);
  }
}

TEST(Cartan, InverseSwapsRoots) {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 200; ++t) {
    int d = 3 + t % 3;
    ProjectiveMatrix g = pm(randomSL(d, rng));
    CartanVector a = cartanProjection(g), b = cartanProjection(g.inverse());
    for (int k = 1; k < d; ++k) EXPECT_NEAR(simpleRoot(k, a), simpleRoot(d - k, b), 1e-9);
  }
}

TEST(Cartan, WeightsSubmultiplicative) {
  std::mt19937_64 rng(14);
  for (int t = 0; t < 300; ++t) {
    int d = 3 + t % 3;
    ProjectiveMatrix g = pm(randomSL(d, rng)), h = pm(randomSL(d, rng));
    CartanVector a = cartanProjection(g), b = cartanProjection(h), c = cartanProjection(g * h);
    for (int k = 1; k < d; ++k) EXPECT_LE(fundamentalWeight(k, c), fundamentalWeight(k, a) + fundamentalWeight(k, b) + 1e-9);
  }
}

TEST(Cartan, RejectsNonFinite) {
  Mat m = Mat::Identity(3, 3);
  m(0, 1) = std::nan("");
  EXPECT_THROW(ProjectiveMatrix{m}, Error);
  try {
    ProjectiveMatrix{Mat::Zero(3, 3)};
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidMatrix);
  }
}

TEST(Cartan, LongProductsKeepBothEnds) {
  // a^n for a hyperbolic diag: exact values at any n
  ProjectiveMatrix a = pm(diag3(3, 1, 1.0 / 3));
  ProjectiveMatrix p = ProjectiveMatrix::identity(3);
  for (int i = 0; i < 400; ++i) p = p * a;
  CartanVector k = cartanProjection(p);
  EXPECT_NEAR(k[0], 400 * std::log(3.0), 1e-9 * 400);
  EXPECT_NEAR(k[2], -400 * std::log(3.0), 1e-9 * 400);
}

TEST(Jordan, Examples) {
  EXPECT_LT(maxDiff(jordanProjection(pm(diag3(3, 1, 1.0 / 3))), cv({std::log(3.0), 0, -std::log(3.0)})), 1e-12);
  Mat r = Mat::Identity(3, 3);
  r.topLeftCorner(2, 2) << std::cos(0.7), -std::sin(0.7), std::sin(0.7), std::cos(0.7);
  EXPECT_LT(jordanProjection(pm(r)).values.cwiseAbs().maxCoeff(), 1e-12);
  Mat u(2, 2);
  u << 1, 1, 0, 1;
  EXPECT_LT(jordanProjection(pm(u)).values.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Jordan, ViaPowers) {
  EXPECT_LT(maxDiff(jordanViaPowers(pm(diag3(3, 1, 1.0 / 3)), 6), cv({std::log(3.0), 0, -std::log(3.0)})), 1e-9);
  Mat u(2, 2);
  u << 1, 1, 0, 1;
  EXPECT_LE(jordanViaPowers(pm(u), 10).values.cwiseAbs().maxCoeff(), 0.01);
  // hyperbolic SL2 products against the eigenvalue oracle. Normal products
  // reach 1e-6 at m = 8; in general the error is at most log cond(P) / 2^m.
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> ang(0, M_PI), len(0.3, 2.0);
  for (int t = 0; t < 20; ++t) {
    Moebius R = rotationAbout_i(ang(rng));
    double a = len(rng), b = len(rng);
    Moebius g = R * makeMoebius(std::exp(a), 0, 0, std::exp(-a)) * makeMoebius(std::exp(b), 0, 0, std::exp(-b)) *
                moebiusInverse(R);
    CartanVector j = jordanViaPowers(pm(g), 8);
    EXPECT_NEAR(j[0], a + b, 1e-6);
    EXPECT_LT(maxDiff(j, jordanProjection(pm(g))), 1e-6);
  }
  int tested = 0;
  while (tested < 50) {
    Moebius g = randomSL2(rng) * randomSL2(rng);
    if (std::abs(g.trace()) < 2.5) continue;
    ++tested;
    Mat gm = g;
    Eigen::EigenSolver<Mat> es(gm);
    Mat P = es.eigenvectors().real();
    Eigen::JacobiSVD<Mat> sv(P);
    double bound = std::log(sv.singularValues()[0] / sv.singularValues()[1]) / 256.0;
    double l = std::acosh(std::abs(g.trace()) / 2);
    CartanVector j = jordanViaPowers(pm(g), 8);
    EXPECT_GE(j[0], l - 1e-12);
    EXPECT_LE(j[0], l + bound + 1e-12);
  }
}

TEST(Jordan, PowersAgreeWithEigenvalues) {
  // random matrices with spectral gaps >= 0.1: P diag P^{-1}. The power
  // estimate is biased by up to log cond(P) / 2^m, so P stays near-orthogonal
  // for the 1e-4 check and the general case is checked against that bound.
  std::mt19937_64 rng(16);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> u(0.1, 0.6);
  for (int t = 0; t < 50; ++t) {
    int d = 3 + t % 3;
    Vec lam(d);
    lam[0] = 0;
    for (int i = 1; i < d; ++i) lam[i] = lam[i - 1] - u(rng);
    lam.array() -= lam.mean();
    Mat N(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) N(i, j) = nd(rng);
    Mat P = randomOrthogonal(d, rng) * (Mat::Identity(d, d) + 0.01 * N);
    Mat g = P * lam.array().exp().matrix().asDiagonal() * P.inverse();
    EXPECT_LE(maxDiff(jordanProjection(pm(g)), jordanViaPowers(pm(g), 10)), 1e-4);
    Mat Q = randomSL(d, rng, 0.5);
    Eigen::JacobiSVD<Mat> sv(Q);
    double cond = std::log(sv.singularValues()[0] / sv.singularValues()[d - 1]);
    Mat h = Q * lam.array().exp().matrix().asDiagonal() * Q.inverse();
    EXPECT_LE(maxDiff(jordanProjection(pm(h)), jordanViaPowers(pm(h), 10)), (2 * d - 3) * cond / 1024 + 1e-9);  // cond(E^k Q) <= cond(Q)^k
  }
}

TEST(Jordan, InvalidPowers) {
  EXPECT_THROW(jordanViaPowers(ProjectiveMatrix::identity(3), 0), Error);
}

TEST(Roots, Arithmetic) {
  CartanVector v = cv({1, 0, -1});
  EXPECT_EQ(simpleRoot(1, v), 1);
  EXPECT_EQ(simpleRoot(2, v), 1);
  EXPECT_EQ(fundamentalWeight(1, v), 1);
  EXPECT_EQ(fundamentalWeight(2, v), 1);
  CartanVector w = cv({3, 1, -4});
  EXPECT_EQ(simpleRoot(1, w), 2);
  EXPECT_EQ(simpleRoot(2, w), 5);
  EXPECT_EQ(fundamentalWeight(2, w), 4);
  EXPECT_EQ(evaluate(RootFunctional(vec({1, 1})), v), 2);
  try {
    simpleRoot(3, v);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidIndex);
  }
  EXPECT_THROW(fundamentalWeight(0, v), Error);
}

TEST(Roots, WeightCoordinatesRoundTrip) {
  RootFunctional phi(vec({0.3, 1.2, 0.5}));
  RootFunctional back = RootFunctional::fromWeights(phi.weightCoords());
  EXPECT_LT((back.coeffs - phi.coeffs).cwiseAbs().maxCoeff(), 1e-12);
  CartanVector v = cv({2, 0.5, -1, -1.5});
  double viaWeights = 0;
  Vec a = phi.weightCoords();
  for (int k = 1; k < 4; ++k) viaWeights += a[k - 1] * fundamentalWeight(k, v);
  EXPECT_NEAR(viaWeights, evaluate(phi, v), 1e-12);
}

TEST(Attractor, Examples) {
  ProjectiveMatrix g = pm(diag3(2, 1, 0.5));
  Subspace e1 = Subspace::span(Mat::Identity(3, 1));
  Subspace e12 = Subspace::span(Mat::Identity(3, 2));
  EXPECT_LT(grassmannianDistance(cartanAttractor(g, 1), e1), 1e-12);
  EXPECT_LT(grassmannianDistance(cartanAttractor(g, 2), e12), 1e-12);
  std::mt19937_64 rng(17);
  Mat U = randomOrthogonal(3, rng), V = randomOrthogonal(3, rng);
  ProjectiveMatrix h = pm(U * diag3(std::exp(2.0), 1, std::exp(-2.0)) * V.transpose());
  EXPECT_LT(grassmannianDistance(cartanAttractor(h, 1), Subspace::span(U.col(0))), 1e-10);
  try {
    cartanAttractor(ProjectiveMatrix::identity(3), 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateGap);
  }
}

TEST(Grassmannian, Examples) {
  Mat I = Mat::Identity(3, 3);
  Subspace e1 = Subspace::span(I.col(0)), e2 = Subspace::span(I.col(1));
  EXPECT_EQ(grassmannianDistance(e1, e1), 0.0);
  EXPECT_NEAR(grassmannianDistance(e1, e2), M_PI / 2, 1e-15);
  Subspace t = Subspace::span(std::cos(0.3) * I.col(0) + std::sin(0.3) * I.col(1));
  EXPECT_NEAR(grassmannianDistance(e1, t), 0.3, 1e-14);
}

TEST(Grassmannian, TriangleInequality) {
  std::mt19937_64 rng(18);
  std::normal_distribution<double> n;
  for (int t = 0; t < 300; ++t) {
    int d = 4, k = 1 + t % 3;
    auto rnd = [&] {
      Mat m(d, k);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < k; ++j) m(i, j) = n(rng);
      return Subspace::span(m);
    };
    Subspace a = rnd(), b = rnd(), c = rnd();
    EXPECT_LE(grassmannianDistance(a, c), grassmannianDistance(a, b) + grassmannianDistance(b, c) + 1e-12);
    EXPECT_NEAR(grassmannianDistance(a, b), grassmannianDistance(b, a), 1e-12);
  }
}
