#include <gtest/gtest.h>

#include <Eigen/QR>

#include <random>

#include "pcreg/extractor.hpp"
#include "pcreg/metrics.hpp"
#include "pcreg/oracle.hpp"
#include "pcreg/pointlk.hpp"
#include "pcreg/synthetic.hpp"
#include "support/oracles.hpp"

using namespace pcreg;
using namespace pcreg::pointlk;

namespace {

struct ConstantExtractor {
  FeatureVector phi(const PointCloud&, const RigidTransform&, const ApplyMode&) const {
    return FeatureVector::Constant(7, 2.5);
  }
};

/// Source is the template under a known motion; both hold the same points.
synthetic::Pair exact_pair(Eigen::Index n, double deg, double t, std::uint64_t seed) {
  synthetic::PairSpec spec;
  spec.n = n;
  spec.theta_max_deg = deg;
  spec.t_max = t;
  spec.seed = seed;
  return synthetic::gen_pair(spec, synthetic::make_shape(synthetic::Shape::table, n, seed + 1000));
}

}  // namespace

TEST(JacobianMethod, NamesRoundTrip) {
  for (auto m : {JacobianMethod::backward, JacobianMethod::forward, JacobianMethod::central,
                 JacobianMethod::five_point}) {
    EXPECT_EQ(parse_jacobian_method(to_string(m)), m);
  }
  EXPECT_THROW((void)parse_jacobian_method("sideways"), std::invalid_argument);
  EXPECT_EQ(jacobian_feature_calls(JacobianMethod::backward), 6);
  EXPECT_EQ(jacobian_feature_calls(JacobianMethod::forward), 6);
  EXPECT_EQ(jacobian_feature_calls(JacobianMethod::central), 12);
  EXPECT_EQ(jacobian_feature_calls(JacobianMethod::five_point), 24);
}

TEST(NumericalJacobian, ConstantFeatureGivesZero) {
  const auto p = pcreg_test::random_cloud(10, 1);
  for (auto m : {JacobianMethod::backward, JacobianMethod::forward, JacobianMethod::central,
                 JacobianMethod::five_point}) {
    EXPECT_TRUE(numerical_jacobian(p, ConstantExtractor{}, m, Vector6d::Constant(0.01)).isZero(0.0));
  }
}

TEST(NumericalJacobian, ExactOnTranslationOfMeans) {
  const auto p = synthetic::make_shape(synthetic::Shape::box, 100, 2);
  const oracle::MomentExtractor ex;
  const auto analytic = oracle::moment_jacobian_analytic(p, {});
  for (auto m : {JacobianMethod::backward, JacobianMethod::forward, JacobianMethod::central,
                 JacobianMethod::five_point}) {
    const auto j = numerical_jacobian(p, ex, m, Vector6d::Constant(0.01));
    EXPECT_LT((j.topRightCorner(3, 3) - analytic.topRightCorner(3, 3)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(NumericalJacobian, CentralCloserThanBackward) {
  const auto p = synthetic::make_shape(synthetic::Shape::table, 300, 3);
  const oracle::MomentExtractor ex(oracle::MomentConfig{2});
  const auto analytic = oracle::moment_jacobian_analytic(p, oracle::MomentConfig{2});
  const auto central = numerical_jacobian(p, ex, JacobianMethod::central, Vector6d::Constant(0.01));
  const auto backward = numerical_jacobian(p, ex, JacobianMethod::backward, Vector6d::Constant(0.01));
  const double scale = analytic.norm();
  EXPECT_LT((central - analytic).norm() / scale, 1e-3);
  EXPECT_LT((backward - analytic).norm() / scale, 1e-1);
  EXPECT_LT((central - analytic).norm(), (backward - analytic).norm());
}

TEST(NumericalJacobian, RejectsNonPositiveSteps) {
  const auto p = pcreg_test::random_cloud(10, 4);
  Vector6d steps = Vector6d::Constant(0.01);
  steps[2] = 0.0;
  EXPECT_THROW((void)numerical_jacobian(p, ConstantExtractor{}, JacobianMethod::central, steps),
               std::invalid_argument);
}

TEST(Pinv6, OrthonormalColumns) {
  const Eigen::MatrixXd j = Eigen::MatrixXd::Identity(10, 6);
  EXPECT_LT((pinv6(j) - j.transpose()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Pinv6, RandomFullRank) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXd j(1024, 6);
    for (Eigen::Index i = 0; i < j.size(); ++i) j.data()[i] = n(rng);
    const auto jd = pinv6(j);
    EXPECT_LT((jd * j - Eigen::Matrix<double, 6, 6>::Identity()).cwiseAbs().maxCoeff(), 1e-8);
    const Eigen::MatrixXd ref = j.completeOrthogonalDecomposition().pseudoInverse();
    EXPECT_LT((jd - ref).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Pinv6, IllConditionedButFullRank) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd j(50, 6);
  for (Eigen::Index i = 0; i < j.size(); ++i) j.data()[i] = n(rng);
  j.col(5) *= 1e-4;
  const auto jd = pinv6(j);
  EXPECT_LT((jd * j - Eigen::Matrix<double, 6, 6>::Identity()).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(Pinv6, DuplicateColumnsAreSingular) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd j(40, 6);
  for (Eigen::Index i = 0; i < j.size(); ++i) j.data()[i] = n(rng);
  j.col(4) = j.col(1);
  EXPECT_THROW((void)pinv6(j), SingularJacobianError);
  EXPECT_THROW((void)pinv6(Eigen::MatrixXd::Zero(40, 6)), SingularJacobianError);
  PinvOptions ridge;
  ridge.ridge = true;
  const auto jd = pinv6(j, ridge);
  EXPECT_TRUE(jd.allFinite());
}

TEST(Pinv6, RejectsWrongShape) {
  EXPECT_THROW((void)pinv6(Eigen::MatrixXd::Identity(6, 5)), std::invalid_argument);
  EXPECT_THROW((void)pinv6(Eigen::MatrixXd::Identity(5, 6)), std::invalid_argument);
}

TEST(Register, IdenticalCloudsConvergeImmediately) {
  const auto p = synthetic::make_shape(synthetic::Shape::table, 256, 7);
  const auto r = register_clouds(p, p, oracle::MomentExtractor{});
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iterations, 1);
  EXPECT_LT(r.twist_norms[0], 1e-7);
  EXPECT_TRUE(r.G.is_approx(RigidTransform::identity(), 1e-12));
}

TEST(Register, RecoversModerateMotion) {
  synthetic::PairSpec spec;
  spec.n = 256;
  spec.seed = 8;
  const auto base = synthetic::make_shape(synthetic::Shape::table, 256, 9);
  const RigidTransform g(rotation_z(0.1745) * rotation_x(0.02), Eigen::Vector3d(0.1, 0.0, 0.0));
  const PointCloud source = apply(g, base);
  const auto r = register_clouds(source, base, oracle::MomentExtractor{});
  const auto err = iso_error(r.G, inverse(g));
  EXPECT_LT(err.rotation_deg, 0.1);
  EXPECT_LE(r.iterations, 20);
  for (double v : r.twist_norms) EXPECT_TRUE(std::isfinite(v));
  const auto n = r.twist_norms.size();
  ASSERT_GE(n, 3u);
  EXPECT_LE(r.twist_norms[n - 1], r.twist_norms[n - 2]);
  EXPECT_LE(r.twist_norms[n - 2], r.twist_norms[n - 3]);
  EXPECT_EQ(r.transforms.size(), n);
}

TEST(Register, FeatureCallsAreOnePlusJacobianPlusIterations) {
  const auto pair = exact_pair(128, 20, 0.2, 10);
  const oracle::MomentExtractor inner;
  for (auto m : {JacobianMethod::backward, JacobianMethod::forward, JacobianMethod::central,
                 JacobianMethod::five_point}) {
    for (int iters : {1, 3, 20}) {
      CountingExtractor ex(inner);
      LkOptions opts;
      opts.method = m;
      opts.max_iters = iters;
      const auto r = register_clouds(pair.source, pair.tmpl, ex, opts);
      EXPECT_EQ(ex.calls(), static_cast<std::size_t>(1 + jacobian_feature_calls(m) + r.iterations));
      EXPECT_LE(r.iterations, iters);
      if (r.converged) {
        EXPECT_LT(r.twist_norms.back(), opts.epsilon);
      }
    }
  }
}

TEST(Register, StopsAtConvergence) {
  const auto pair = exact_pair(128, 10, 0.1, 11);
  const oracle::MomentExtractor inner;
  CountingExtractor ex(inner);
  LkOptions opts;
  opts.max_iters = 100;
  const auto r = register_clouds(pair.source, pair.tmpl, ex, opts);
  ASSERT_TRUE(r.converged);
  EXPECT_LT(r.iterations, 100);
  EXPECT_EQ(ex.calls(), static_cast<std::size_t>(13 + r.iterations));
  for (int i = 0; i + 1 < r.iterations; ++i) EXPECT_GE(r.twist_norms[static_cast<std::size_t>(i)], opts.epsilon);
}

TEST(Register, SingularJacobianFailsLoudly) {
  const auto p = pcreg_test::random_cloud(20, 12);
  EXPECT_THROW((void)register_clouds(p, p, ConstantExtractor{}), SingularJacobianError);
}

TEST(Register, NonFiniteFeatureIsReported) {
  struct NanOnSource {
    mutable int calls = 0;
    FeatureVector phi(const PointCloud& c, const RigidTransform& g, const ApplyMode& m) const {
      auto f = oracle::MomentExtractor{}.phi(c, g, m);
      if (++calls > 13) f[0] = NAN;
      return f;
    }
  };
  const auto p = synthetic::make_shape(synthetic::Shape::table, 64, 13);
  EXPECT_THROW((void)register_clouds(p, p, NanOnSource{}), NonFiniteFeatureError);
}

TEST(Register, RejectsBadOptions) {
  const auto p = pcreg_test::random_cloud(20, 14);
  LkOptions opts;
  opts.max_iters = 0;
  EXPECT_THROW((void)register_clouds(p, p, oracle::MomentExtractor{}, opts), std::invalid_argument);
  opts = {};
  opts.epsilon = 0.0;
  EXPECT_THROW((void)register_clouds(p, p, oracle::MomentExtractor{}, opts), std::invalid_argument);
}

TEST(Register, CentralAtLeastAsAccurateAsBackward) {
  int ok = 0;
  const int trials = 200;
  for (int s = 0; s < trials; ++s) {
    const auto pair = exact_pair(128, 30, 0.3, static_cast<std::uint64_t>(s));
    LkOptions central, backward;
    backward.method = JacobianMethod::backward;
    const double ec = iso_error(register_clouds(pair.source, pair.tmpl, oracle::MomentExtractor{}, central).G,
                                pair.truth).rotation_deg;
    const double eb = iso_error(register_clouds(pair.source, pair.tmpl, oracle::MomentExtractor{}, backward).G,
                                pair.truth).rotation_deg;
    if (ec <= eb + 1e-6) ++ok;
  }
  EXPECT_GE(ok, trials * 95 / 100);
}
