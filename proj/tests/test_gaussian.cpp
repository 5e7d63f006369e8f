#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <random>

#include "tugs/gaussian.hpp"

using namespace tugs;
using Eigen::Matrix3d;
using Eigen::Vector3d;
using Eigen::Vector4d;
using Eigen::VectorXd;

namespace {

VectorXd zero_raw() { return VectorXd::Zero(GaussianLayout::kParamCount); }

Eigen::Matrix<double, 16, 3> random_sh(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  Eigen::Matrix<double, 16, 3> sh;
  for (int k = 0; k < 16; ++k)
    for (int c = 0; c < 3; ++c) sh(k, c) = uni(rng);
  return sh;
}

Vector3d random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vector3d v(n(rng), n(rng), n(rng));
  return v.normalized();
}

}  // namespace

TEST_CASE("activation conventions") {
  VectorXd raw = zero_raw();
  raw[GaussianLayout::kRotation] = 1.0;
  const ActivatedGaussian g = activate(raw);
  CHECK(g.scale == Vector3d::Ones());        // exp(0) = 1
  CHECK(g.opacity == doctest::Approx(0.5));  // sigmoid(0)
  CHECK(g.rotation == Vector4d(1, 0, 0, 0));

  VectorXd raw2 = zero_raw();
  raw2.segment<4>(GaussianLayout::kRotation) << 2.0, 0.0, 0.0, 0.0;
  CHECK(activate(raw2).rotation == Vector4d(1, 0, 0, 0));
}

TEST_CASE("degenerate quaternion falls back to identity and is counted") {
  VectorXd raw = zero_raw();  // quaternion all zero
  const auto before = quaternion_degeneracy_count();
  const ActivatedGaussian g = activate(raw);
  CHECK(g.rotation == Vector4d(1, 0, 0, 0));
  CHECK(quaternion_degeneracy_count() == before + 1);
}

TEST_CASE("activation is total over random finite rows") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> uni(-3.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    VectorXd raw(GaussianLayout::kParamCount);
    for (int i = 0; i < raw.size(); ++i) raw[i] = uni(rng);
    const ActivatedGaussian g = activate(raw);
    CHECK(g.scale.minCoeff() > 0.0);
    CHECK(std::abs(g.rotation.norm() - 1.0) < 1e-6);
    CHECK(g.opacity > 0.0);
    CHECK(g.opacity < 1.0);
  }
}

TEST_CASE("covariance of identity rotation is the squared-scale diagonal") {
  const Matrix3d cov = covariance(Vector3d(1, 2, 3), Vector4d(1, 0, 0, 0));
  CHECK((cov - Vector3d(1, 4, 9).asDiagonal().toDenseMatrix())
            .cwiseAbs()
            .maxCoeff() < 1e-12);
}

TEST_CASE("covariance under a 90-degree z rotation permutes the axes") {
  // Hand-computed R S S^T R^T: x and y swap, so diag(1,4,1) -> diag(4,1,1).
  const double s = std::sin(M_PI / 4.0);
  const Vector4d quat(std::cos(M_PI / 4.0), 0.0, 0.0, s);
  const Matrix3d cov = covariance(Vector3d(1, 2, 1), quat);
  Matrix3d expected = Vector3d(4, 1, 1).asDiagonal();
  CHECK((cov - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("covariance is symmetric PSD with squared-scale eigenvalues") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uni(0.2, 2.5);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 25; ++trial) {
    const Vector3d scale(uni(rng), uni(rng), uni(rng));
    Vector4d q(n(rng), n(rng), n(rng), n(rng));
    q.normalize();
    const Matrix3d cov = covariance(scale, q);
    CHECK((cov - cov.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Matrix3d> eig(cov);
    Vector3d want = scale.cwiseProduct(scale);
    std::sort(want.data(), want.data() + 3);
    for (int k = 0; k < 3; ++k) {
      CHECK(eig.eigenvalues()[k] >= -1e-12);
      CHECK(eig.eigenvalues()[k] == doctest::Approx(want[k]).epsilon(1e-9));
    }
  }
}

TEST_CASE("eval_gaussian basics") {
  const Vector3d mean(0.3, -0.2, 1.0);
  CHECK(eval_gaussian(mean, mean, Matrix3d::Identity()) ==
        doctest::Approx(1.0));

  // |x - mean|^2 = 2 with identity covariance -> exp(-1); the covariance
  // ridge shifts the value at the 1e-8 level.
  const Vector3d x = mean + Vector3d(1.0, 1.0, 0.0);
  CHECK(eval_gaussian(x, mean, Matrix3d::Identity()) ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-7));

  // widening the Gaussian raises the value at a fixed offset
  const double narrow = eval_gaussian(x, mean, Matrix3d::Identity());
  const double wide = eval_gaussian(x, mean, 4.0 * Matrix3d::Identity());
  CHECK(wide > narrow);

  CHECK_THROWS_AS(
      eval_gaussian(Vector3d(std::numeric_limits<double>::quiet_NaN(), 0, 0),
                    mean, Matrix3d::Identity()),
      std::invalid_argument);
}

TEST_CASE("eval_gaussian is invariant under simultaneous rotation") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    Vector4d q(n(rng), n(rng), n(rng), n(rng));
    q.normalize();
    const Matrix3d rot = quat_to_rotation(q);
    const Vector3d x(n(rng), n(rng), n(rng));
    const Vector3d mean(n(rng), n(rng), n(rng));
    const Matrix3d cov =
        covariance(Vector3d(0.5, 1.0, 2.0), Vector4d(1, 0, 0, 0));
    const double base = eval_gaussian(x, mean, cov);
    const double rotated =
        eval_gaussian(rot * x, rot * mean, rot * cov * rot.transpose());
    CHECK(rotated == doctest::Approx(base).epsilon(1e-9));
  }
}

TEST_CASE("sh_color: DC-only coefficients are direction independent") {
  std::mt19937_64 rng(13);
  Eigen::Matrix<double, 16, 3> sh = Eigen::Matrix<double, 16, 3>::Zero();
  sh(0, 0) = 0.7;
  sh(0, 1) = -0.4;
  sh(0, 2) = 0.1;
  constexpr double c0 = 0.28209479177387814;
  const Vector3d expected(0.7 * c0 + 0.5, std::max(0.0, -0.4 * c0 + 0.5),
                          0.1 * c0 + 0.5);
  for (int trial = 0; trial < 5; ++trial) {
    const Vector3d rgb = sh_color(sh, random_unit(rng));
    CHECK((rgb - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("sh_color: all-zero coefficients give mid grey") {
  const Eigen::Matrix<double, 16, 3> sh = Eigen::Matrix<double, 16, 3>::Zero();
  const Vector3d rgb = sh_color(sh, Vector3d(0, 0, 1));
  CHECK(rgb == Vector3d(0.5, 0.5, 0.5));
}

TEST_CASE("odd-degree SH basis functions flip sign under direction negation") {
  std::mt19937_64 rng(17);
  const Vector3d d = random_unit(rng);
  const auto plus = sh_basis(d);
  const auto minus = sh_basis(-d);
  // degree 1 (1..3) and degree 3 (9..15) are odd; 0 and degree 2 are even
  for (int k = 1; k <= 3; ++k)
    CHECK(minus[k] == doctest::Approx(-plus[k]).epsilon(1e-12));
  for (int k = 4; k <= 8; ++k)
    CHECK(minus[k] == doctest::Approx(plus[k]).epsilon(1e-12));
  for (int k = 9; k <= 15; ++k)
    CHECK(minus[k] == doctest::Approx(-plus[k]).epsilon(1e-12));
}

TEST_CASE("sh_color is linear in the coefficients for a fixed direction") {
  std::mt19937_64 rng(19);
  const Vector3d d = random_unit(rng);
  // Keep colors in the unclamped regime so linearity is exact.
  Eigen::Matrix<double, 16, 3> a = random_sh(rng) * 0.01;
  Eigen::Matrix<double, 16, 3> b = random_sh(rng) * 0.01;
  const Vector3d ca = sh_color(a, d) - Vector3d::Constant(0.5);
  const Vector3d cb = sh_color(b, d) - Vector3d::Constant(0.5);
  const Vector3d cab = sh_color(a + b, d) - Vector3d::Constant(0.5);
  CHECK((cab - (ca + cb)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("sh_basis_gradient matches finite differences") {
  std::mt19937_64 rng(23);
  const Vector3d d = random_unit(rng);
  const auto grad = sh_basis_gradient(d);
  const double h = 1e-6;
  for (int axis = 0; axis < 3; ++axis) {
    Vector3d dp = d, dm = d;
    dp[axis] += h;
    dm[axis] -= h;
    const auto bp = sh_basis(dp);
    const auto bm = sh_basis(dm);
    for (int k = 0; k < 16; ++k) {
      const double fd = (bp[k] - bm[k]) / (2.0 * h);
      CHECK(grad[k][axis] == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}
