#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "covact/covariance.hpp"
#include "covact/error.hpp"
#include "covact/spd.hpp"
#include "oracles.hpp"

using namespace covact;

namespace {

Eigen::MatrixXd random_spd(std::mt19937_64& rng, Eigen::Index n, double shift = 0.1) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = normal(rng);
  Eigen::MatrixXd s = a * a.transpose() + shift * Eigen::MatrixXd::Identity(n, n);
  symmetrize(s);
  return s;
}

Eigen::MatrixXd random_orthonormal(std::mt19937_64& rng, Eigen::Index n, Eigen::Index m) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd y(n, m);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = normal(rng);
  return qr_retract(y);
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return static_cast<ErrorKind>(0);
}

// Stein divergence through eigenvalues instead of Cholesky factors.
double stein_by_eigenvalues(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  auto logdet = [](const Eigen::MatrixXd& m) {
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues().array().log().sum();
  };
  return logdet(0.5 * (x + y)) - 0.5 * (logdet(x) + logdet(y));
}

}  // namespace

TEST(SpdMatrix, RejectsIndefinite) {
  Eigen::Matrix2d m;
  m << 1, 2, 2, 1;
  EXPECT_EQ(kind_of([&] { SpdMatrix{m}; }), ErrorKind::numerical);
  EXPECT_EQ(kind_of([] { SpdMatrix{Eigen::MatrixXd::Zero(2, 3)}; }), ErrorKind::data);
  Eigen::Matrix2d skew;
  skew << 1, 0.5, 0, 1;
  EXPECT_EQ(kind_of([&] { SpdMatrix{skew}; }), ErrorKind::data);
}

TEST(SpdMatrix, LogDeterminant) {
  const SpdMatrix m(Eigen::Vector3d(1.0, 2.0, 5.0).asDiagonal().toDenseMatrix());
  EXPECT_NEAR(m.log_det(), std::log(10.0), 1e-15);
  EXPECT_FALSE(cholesky_log_det(-Eigen::MatrixXd::Identity(2, 2)).has_value());
}

TEST(Stein, HandValue) {
  const SpdMatrix x(Eigen::MatrixXd::Identity(2, 2));
  const SpdMatrix y(4.0 * Eigen::MatrixXd::Identity(2, 2));
  EXPECT_NEAR(stein_divergence(x, y), 2.0 * std::log(2.5) - std::log(4.0), 1e-12);
  EXPECT_NEAR(stein_divergence(x, y), 0.44629, 1e-5);
}

TEST(Stein, Axioms) {
  std::mt19937_64 rng(31);
  for (int k = 0; k < 100; ++k) {
    const int n = 1 + k % 10;
    const SpdMatrix x(random_spd(rng, n));
    const SpdMatrix y(random_spd(rng, n));
    EXPECT_EQ(stein_divergence(x, x), 0.0);
    EXPECT_NEAR(stein_divergence(x, y), stein_divergence(y, x), 1e-12);
    EXPECT_GE(stein_divergence(x, y), 0.0);
    EXPECT_NEAR(stein_divergence(x, y), stein_by_eigenvalues(x.matrix(), y.matrix()), 1e-9);
  }
}

TEST(Stein, InvariantUnderCongruence) {
  std::mt19937_64 rng(37);
  const Eigen::MatrixXd q = random_orthonormal(rng, 5, 5);
  const Eigen::MatrixXd x = random_spd(rng, 5);
  const Eigen::MatrixXd y = random_spd(rng, 5);
  Eigen::MatrixXd qx = q.transpose() * x * q;
  Eigen::MatrixXd qy = q.transpose() * y * q;
  symmetrize(qx);
  symmetrize(qy);
  EXPECT_NEAR(stein_divergence(SpdMatrix(x), SpdMatrix(y)),
              stein_divergence(SpdMatrix(qx), SpdMatrix(qy)), 1e-10);
}

TEST(Regularize, ZeroMatrix) {
  const SpdMatrix r = regularize(Eigen::MatrixXd::Zero(4, 4), 1e-6);
  EXPECT_TRUE(r.matrix().isApprox(1e-6 * Eigen::MatrixXd::Identity(4, 4)));
}

TEST(Regularize, ShiftsSpectrumByEpsilon) {
  std::mt19937_64 rng(41);
  const Eigen::MatrixXd x = random_spd(rng, 6, 1.0);
  const SpdMatrix r = regularize(x, 1e-3);
  const Eigen::VectorXd before = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(x).eigenvalues();
  const Eigen::VectorXd after =
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(r.matrix()).eigenvalues();
  EXPECT_LT((after - before - Eigen::VectorXd::Constant(6, 1e-3)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Regularize, RankDeficientCovariance) {
  std::mt19937_64 rng(43);
  std::normal_distribution<double> normal;
  std::vector<WeightedFrame> frames;
  for (int i = 0; i < 3; ++i) {
    Eigen::VectorXd f(72);
    for (auto& v : f) v = normal(rng);
    frames.push_back({f, 1.0});
  }
  const auto m = batch_weighted_covariance(frames, 0.95);
  const SpdMatrix r = regularize(m.cov, 1e-6);
  EXPECT_TRUE(cholesky_log_det(r.matrix()).has_value());
}

TEST(Regularize, GivesUpOnHopelessInput) {
  Eigen::Matrix2d m;
  m << -1e6, 0, 0, 1;
  EXPECT_EQ(kind_of([&] { regularize(m, 1e-6); }), ErrorKind::numerical);
}

TEST(Project, IdentityAndTruncation) {
  std::mt19937_64 rng(47);
  const SpdMatrix x(random_spd(rng, 4));
  const SpdMatrix same = project(ProjectionMatrix::identity(4, 4), x);
  EXPECT_TRUE(same.matrix().isApprox(x.matrix() + 1e-10 * Eigen::MatrixXd::Identity(4, 4), 1e-14));

  const SpdMatrix d(Eigen::Vector3d(1.0, 2.0, 3.0).asDiagonal().toDenseMatrix());
  const SpdMatrix top = project(ProjectionMatrix::identity(3, 2), d);
  EXPECT_NEAR(top.matrix()(0, 0), 1.0, 1e-9);
  EXPECT_NEAR(top.matrix()(1, 1), 2.0, 1e-9);
  EXPECT_EQ(top.matrix()(0, 1), 0.0);
}

TEST(Project, RandomProjectionStaysSpd) {
  std::mt19937_64 rng(53);
  for (int k = 0; k < 20; ++k) {
    const ProjectionMatrix p(random_orthonormal(rng, 8, 3));
    const SpdMatrix y = project(p, SpdMatrix(random_spd(rng, 8)));
    EXPECT_EQ(y.dim(), 3);
    EXPECT_EQ(y.matrix(), y.matrix().transpose());
  }
}

TEST(ProjectionMatrix, Validation) {
  EXPECT_EQ(kind_of([] { ProjectionMatrix{Eigen::MatrixXd::Ones(3, 2)}; }), ErrorKind::numerical);
  EXPECT_EQ(kind_of([] { ProjectionMatrix{Eigen::MatrixXd::Identity(2, 3)}; }), ErrorKind::data);
  std::mt19937_64 rng(59);
  EXPECT_LE(orthonormality_error(random_orthonormal(rng, 9, 4)), 1e-14);
}

TEST(QrRetract, PositiveDiagonal) {
  std::mt19937_64 rng(61);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd y(6, 3);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = normal(rng);
  const Eigen::MatrixXd q = qr_retract(y);
  const Eigen::MatrixXd r = q.transpose() * y;
  for (int i = 0; i < 3; ++i) EXPECT_GT(r(i, i), 0.0);
  EXPECT_TRUE((q * r).isApprox(y, 1e-12));
}

TEST(Affinity, TwoInstances) {
  const Eigen::Matrix2d pairwise{{0.0, 1.0}, {1.0, 0.0}};
  const std::vector<int> same{1, 1};
  const std::vector<int> different{1, 2};
  EXPECT_EQ(build_affinity(same, 3, 3, pairwise).weights, (Eigen::Matrix2d{{0, 1}, {1, 0}}));
  EXPECT_EQ(build_affinity(different, 3, 3, pairwise).weights, (Eigen::Matrix2d{{0, -1}, {-1, 0}}));
}

TEST(Affinity, MatchesNeighborEnumeration) {
  std::mt19937_64 rng(67);
  std::uniform_real_distribution<double> u(0.1, 5.0);
  const std::vector<int> labels{1, 1, 1, 2, 2, 2, 3, 3, 3};
  const int n = 9;
  Eigen::MatrixXd pairwise = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) pairwise(i, j) = pairwise(j, i) = u(rng);
  }
  const auto a = build_affinity(labels, 2, 2, pairwise).weights;

  Eigen::MatrixXd want = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (bool within : {true, false}) {
      std::vector<std::pair<double, int>> cand;
      for (int j = 0; j < n; ++j) {
        if (j != i && (labels[j] == labels[i]) == within) cand.emplace_back(pairwise(i, j), j);
      }
      std::sort(cand.begin(), cand.end());
      for (int k = 0; k < 2; ++k) {
        const int j = cand[k].second;
        const double v = within ? 1.0 : -1.0;
        want(i, j) = want(j, i) = v;
      }
    }
  }
  EXPECT_EQ(a, want);
  EXPECT_EQ(a, a.transpose());
  EXPECT_TRUE(a.diagonal().isZero());
  for (int i = 0; i < n; ++i) EXPECT_LE(a.row(i).cwiseAbs().sum(), n - 1);
}

TEST(Affinity, SingleInstanceClass) {
  const std::vector<int> labels{1, 2, 2};
  Eigen::Matrix3d pairwise{{0, 1, 2}, {1, 0, 3}, {2, 3, 0}};
  const auto a = build_affinity(labels, 3, 3, pairwise).weights;
  EXPECT_EQ(a(1, 2), 1.0);
  EXPECT_EQ(a(0, 1), -1.0);
  EXPECT_EQ(a(0, 2), -1.0);
}

namespace {

struct Fixture {
  std::vector<SpdMatrix> descriptors;
  std::vector<int> labels;
};

Fixture clustered(std::mt19937_64& rng, int n, int classes, int per_class, double spread) {
  Fixture f;
  std::vector<Eigen::MatrixXd> centers;
  for (int c = 0; c < classes; ++c) centers.push_back(random_spd(rng, n));
  for (int c = 0; c < classes; ++c) {
    for (int i = 0; i < per_class; ++i) {
      Eigen::MatrixXd x = centers[c] + spread * random_spd(rng, n);
      symmetrize(x);
      f.descriptors.emplace_back(x);
      f.labels.push_back(c + 1);
    }
  }
  return f;
}

}  // namespace

TEST(ProjectionObjective, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(71);
  const Fixture f = clustered(rng, 6, 3, 4, 0.3);
  const auto affinity = build_affinity(f.labels, 3, 3, pairwise_divergences(f.descriptors));
  for (int k = 0; k < 10; ++k) {
    const Eigen::MatrixXd p = random_orthonormal(rng, 6, 2);
    const Eigen::MatrixXd g = projection_gradient(f.descriptors, affinity, p);
    const Eigen::MatrixXd fd = projection_gradient_numeric(f.descriptors, affinity, p, 1e-5);
    EXPECT_LT(oracle::relative_error(g, fd), 1e-4);
  }
}

TEST(ProjectionObjective, IdentityEmbeddingEqualsRawObjective) {
  std::mt19937_64 rng(73);
  const Fixture f = clustered(rng, 4, 2, 3, 0.3);
  const auto affinity = build_affinity(f.labels, 3, 3, pairwise_divergences(f.descriptors));
  double raw = 0.0;
  for (std::size_t i = 0; i < f.descriptors.size(); ++i) {
    for (std::size_t j = 0; j < f.descriptors.size(); ++j) {
      raw += affinity.weights(i, j) * stein_divergence(f.descriptors[i], f.descriptors[j]);
    }
  }
  EXPECT_NEAR(projection_objective(f.descriptors, affinity, Eigen::MatrixXd::Identity(4, 4)), raw,
              1e-10);

  ProjectionConfig config;
  config.init = ProjectionInit::identity;
  const auto result = learn_projection(f.descriptors, f.labels, 4, config);
  EXPECT_NEAR(result.initial_objective, raw, 1e-10);
  EXPECT_LE(result.final_objective, result.initial_objective + 1e-12);
}

TEST(LearnProjection, MonotoneAndOrthonormal) {
  std::mt19937_64 rng(79);
  const Fixture f = clustered(rng, 8, 3, 4, 0.3);
  for (auto init : {ProjectionInit::identity, ProjectionInit::principal, ProjectionInit::random}) {
    ProjectionConfig config;
    config.init = init;
    config.seed = 3;
    const auto result = learn_projection(f.descriptors, f.labels, 3, config);
    ASSERT_FALSE(result.trace.empty());
    for (std::size_t k = 0; k < result.trace.size(); ++k) {
      EXPECT_LE(result.trace[k].orthonormality_error, 1e-6);
      if (k > 0) EXPECT_LE(result.trace[k].objective, result.trace[k - 1].objective);
    }
    EXPECT_LE(result.final_objective, result.initial_objective);
    EXPECT_DOUBLE_EQ(result.final_objective, result.trace.back().objective);
  }
}

TEST(LearnProjection, FiniteDifferenceModeAgrees) {
  std::mt19937_64 rng(83);
  const Fixture f = clustered(rng, 5, 2, 3, 0.3);
  ProjectionConfig config;
  config.max_iterations = 5;
  const auto analytic = learn_projection(f.descriptors, f.labels, 2, config);
  config.gradient = GradientMode::finite_difference;
  const auto numeric = learn_projection(f.descriptors, f.labels, 2, config);
  EXPECT_NEAR(analytic.final_objective, numeric.final_objective,
              1e-4 * std::abs(analytic.final_objective));
}

TEST(LearnProjection, SeparatesHeldOutPairsBetterThanRandom) {
  std::mt19937_64 rng(89);
  const int n = 4;
  auto sample = [&](int cls) {
    Eigen::Vector4d diag = cls == 0 ? Eigen::Vector4d(4.0, 0.25, 1.0, 1.0)
                                    : Eigen::Vector4d(0.25, 4.0, 1.0, 1.0);
    std::normal_distribution<double> jitter(0.0, 0.05);
    Eigen::MatrixXd x = diag.asDiagonal();
    for (int i = 0; i < n; ++i) x(i, i) *= std::exp(jitter(rng));
    x += 0.2 * random_spd(rng, n, 0.0) / n;
    symmetrize(x);
    return SpdMatrix(x);
  };
  std::vector<SpdMatrix> train;
  std::vector<int> labels;
  for (int i = 0; i < 6; ++i) {
    train.push_back(sample(i % 2));
    labels.push_back(i % 2 + 1);
  }
  const auto learned = learn_projection(train, labels, 2);
  std::vector<SpdMatrix> a;
  std::vector<SpdMatrix> b;
  for (int i = 0; i < 5; ++i) {
    a.push_back(sample(0));
    b.push_back(sample(1));
  }
  auto between = [&](const ProjectionMatrix& p) {
    double total = 0.0;
    for (const auto& x : a) {
      for (const auto& y : b) total += stein_divergence(project(p, x), project(p, y));
    }
    return total;
  };
  const double ours = between(learned.projection);
  int beaten = 0;
  for (int k = 0; k < 100; ++k) {
    if (ours >= between(ProjectionMatrix(random_orthonormal(rng, n, 2)))) ++beaten;
  }
  EXPECT_EQ(beaten, 100);
}

TEST(LearnProjection, NeedsTwoClasses) {
  std::mt19937_64 rng(97);
  const Fixture f = clustered(rng, 4, 1, 3, 0.3);
  try {
    learn_projection(f.descriptors, f.labels, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::data);
    EXPECT_STREQ(e.what(), "affinity undefined");
  }
}
