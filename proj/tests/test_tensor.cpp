#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "tugs/layout.hpp"
#include "tugs/tensor.hpp"

using namespace tugs;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd random_matrix(int rows, int cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = uni(rng);
  return m;
}

// Oracle: build the dense tensor directly from generating factors.
DenseTensor3 tensor_from_factors(const CpFactors& f) {
  DenseTensor3 t(static_cast<int>(f.medium_factor.rows()), f.num_gaussians(),
                 f.params_per_gaussian());
  for (int i = 0; i < t.shape[0]; ++i)
    for (int j = 0; j < t.shape[1]; ++j)
      for (int k = 0; k < t.shape[2]; ++k) {
        double v = 0.0;
        for (int r = 0; r < f.rank(); ++r)
          v += f.medium_factor(i, r) * f.number_factor(j, r) *
               f.gaussian_template(k, r);
        t.at(i, j, k) = v;
      }
  return t;
}

CpFactors random_factors(int d1, int n, int m, int rank, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return CpFactors{random_matrix(d1, rank, rng), random_matrix(n, rank, rng),
                   random_matrix(m, rank, rng)};
}

}  // namespace

TEST_CASE("exact rank-1 tensor decomposes to machine precision") {
  const CpFactors gen = random_factors(2, 8, 12, 1, 11);
  const DenseTensor3 t = tensor_from_factors(gen);
  const CpFactors f = cp_decompose(t, 1, 100, 1e-12, 0);
  CHECK(cp_relative_error(t, f) < 1e-10);
}

TEST_CASE("random rank-20 tensor recovers below 1e-6 relative error") {
  const CpFactors gen = random_factors(2, 50, 59, 20, 22);
  const DenseTensor3 t = tensor_from_factors(gen);
  const CpFactors f = cp_decompose(t, 20, 2000, 0.0, 1);
  CHECK(cp_relative_error(t, f) < 1e-6);
}

TEST_CASE("all-zero tensor gives an all-zero reconstruction") {
  const DenseTensor3 t(2, 5, 7);
  const CpFactors f = cp_decompose(t, 3, 50, 1e-9, 2);
  const DenseTensor3 rec = cp_reconstruct(f);
  for (double v : rec.data) CHECK(v == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(cp_relative_error(t, f) == doctest::Approx(0.0));
}

TEST_CASE("cp_decompose rejects bad arguments") {
  const DenseTensor3 t(2, 3, 4);
  CHECK_THROWS_AS(cp_decompose(t, 0), std::invalid_argument);
  CHECK_THROWS_AS(cp_decompose(DenseTensor3{}, 2), std::invalid_argument);
  DenseTensor3 bad(1, 1, 2);
  bad.at(0, 0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(cp_decompose(bad, 1), std::invalid_argument);
}

TEST_CASE("single outer product reconstruction") {
  CpFactors f;
  f.medium_factor = MatrixXd(2, 1);
  f.medium_factor << 1.0, 0.0;
  f.number_factor = MatrixXd::Constant(1, 1, 2.0);
  f.gaussian_template = MatrixXd::Constant(1, 1, 3.0);
  const DenseTensor3 t = cp_reconstruct(f);
  CHECK(t.shape == std::array<int, 3>{2, 1, 1});
  CHECK(t.at(0, 0, 0) == doctest::Approx(6.0));
  CHECK(t.at(1, 0, 0) == doctest::Approx(0.0));
}

TEST_CASE("decompose then reconstruct round-trips a rank-R tensor") {
  const CpFactors gen = random_factors(2, 30, 59, 8, 33);
  const DenseTensor3 t = tensor_from_factors(gen);
  const CpFactors f = cp_decompose(t, 8, 1000, 0.0, 3);
  const DenseTensor3 rec = cp_reconstruct(f);
  double err2 = 0.0;
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    const double d = t.data[i] - rec.data[i];
    err2 += d * d;
  }
  CHECK(std::sqrt(err2) / t.frobenius_norm() < 1e-6);
}

TEST_CASE("CP scale indeterminacy leaves the tensor unchanged") {
  CpFactors f = random_factors(2, 6, 9, 4, 44);
  const DenseTensor3 before = tensor_from_factors(f);
  const double a = 3.7;
  f.medium_factor.col(2) *= a;
  f.number_factor.col(2) /= a;
  const DenseTensor3 after = tensor_from_factors(f);
  for (std::size_t i = 0; i < before.data.size(); ++i)
    CHECK(before.data[i] == doctest::Approx(after.data[i]).epsilon(1e-12));
}

TEST_CASE("mode1_slice: zero medium row gives the zero matrix") {
  CpFactors f = random_factors(2, 5, 7, 3, 55);
  f.medium_factor.row(0).setZero();
  CHECK(mode1_slice(f, 0).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("mode1_slice matches full reconstruction") {
  const CpFactors f = random_factors(2, 12, 59, 6, 66);
  const DenseTensor3 full = cp_reconstruct(f);
  for (int i = 0; i < 2; ++i) {
    const MatrixXd s = mode1_slice(f, i);
    for (int j = 0; j < 12; ++j)
      for (int k = 0; k < 59; ++k)
        CHECK(s(j, k) == doctest::Approx(full.at(i, j, k)).epsilon(1e-12));
  }
}

TEST_CASE("mode1_slice degenerate 1x1x1 case and range check") {
  CpFactors f;
  f.medium_factor = MatrixXd::Identity(2, 1);
  f.number_factor = MatrixXd::Constant(1, 1, 4.0);
  f.gaussian_template = MatrixXd::Constant(1, 1, 5.0);
  CHECK(mode1_slice(f, 0)(0, 0) == doctest::Approx(20.0));
  CHECK_THROWS_AS(mode1_slice(f, 2), std::invalid_argument);
  CHECK_THROWS_AS(mode1_slice(f, -1), std::invalid_argument);
}

TEST_CASE("opacity_vector agrees with the slice column") {
  const CpFactors f = random_factors(2, 20, 59, 5, 77);
  for (int idx = 0; idx < 2; ++idx) {
    const VectorXd o = opacity_vector(f, idx);
    const MatrixXd s = mode1_slice(f, idx);
    for (int i = 0; i < 20; ++i)
      CHECK(o[i] ==
            doctest::Approx(s(i, GaussianLayout::kOpacity)).epsilon(1e-12));
  }
}

TEST_CASE("opacity_vector: zero opacity row gives zeros") {
  CpFactors f = random_factors(2, 10, 59, 4, 88);
  f.gaussian_template.row(GaussianLayout::kOpacity).setZero();
  CHECK(opacity_vector(f, 0).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("opacity_vector scalar arithmetic") {
  CpFactors f;
  f.medium_factor = MatrixXd::Constant(1, 1, 2.0);
  f.number_factor = MatrixXd(2, 1);
  f.number_factor << 3.0, 5.0;
  f.gaussian_template = MatrixXd::Zero(59, 1);
  f.gaussian_template(GaussianLayout::kOpacity, 0) = 0.5;
  const VectorXd o = opacity_vector(f, 0);
  CHECK(o[0] == doctest::Approx(3.0));
  CHECK(o[1] == doctest::Approx(5.0));
}

TEST_CASE("compression stats reproduce the 66% figure") {
  const CompressionStats s = compression_stats(200000, 59, 20);
  CHECK(s.compressed_params == 4001220);
  CHECK(s.dense_params == 11800000);
  CHECK(s.reduction_fraction == doctest::Approx(0.661).epsilon(0.002));
}

TEST_CASE("compression stats degenerate and recomputed cases") {
  const CompressionStats tiny = compression_stats(1, 1, 1);
  CHECK(tiny.compressed_params == 4);
  CHECK(tiny.dense_params == 1);
  CHECK(tiny.reduction_fraction == 0.0);

  const CompressionStats s = compression_stats(1000, 59, 30);
  CHECK(s.dense_params == 59 * 1000);
  CHECK(s.compressed_params == (59 + 1000 + 2) * 30);
  CHECK(s.reduction_fraction ==
        doctest::Approx(1.0 - double((59 + 1000 + 2) * 30) / (59 * 1000)));
}

TEST_CASE("ALS error history is non-increasing") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const CpFactors gen = random_factors(2, 40, 59, 10, 100 + seed);
    const DenseTensor3 t = tensor_from_factors(gen);
    std::vector<double> history;
    cp_decompose(t, 10, 60, 0.0, seed, &history);
    REQUIRE(history.size() > 1);
    for (std::size_t i = 1; i < history.size(); ++i)
      CHECK(history[i] <= history[i - 1] + 1e-12);
  }
}

TEST_CASE("slice consistency property over random factors") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const CpFactors f = random_factors(2, 15, 59, 7, 200 + seed);
    const DenseTensor3 full = cp_reconstruct(f);
    for (int i = 0; i < 2; ++i) {
      const MatrixXd s = mode1_slice(f, i);
      double max_diff = 0.0;
      for (int j = 0; j < 15; ++j)
        for (int k = 0; k < 59; ++k)
          max_diff = std::max(max_diff, std::abs(s(j, k) - full.at(i, j, k)));
      CHECK(max_diff < 1e-12);
    }
  }
}

TEST_CASE("reconstruct call counter increments") {
  const CpFactors f = random_factors(2, 3, 4, 2, 1);
  const auto before = cp_reconstruct_call_count();
  cp_reconstruct(f);
  cp_reconstruct(f);
  CHECK(cp_reconstruct_call_count() == before + 2);
}
