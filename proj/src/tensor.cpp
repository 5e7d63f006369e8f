#include "tugs/tensor.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "tugs/layout.hpp"

namespace tugs {

namespace {

std::atomic<std::uint64_t> g_reconstruct_calls{0};

using Eigen::MatrixXd;
using Eigen::VectorXd;
using RowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>;

RowMajorMap slice_map(const DenseTensor3& t, int i) {
  return RowMajorMap(
      t.data.data() + static_cast<std::size_t>(i) * t.shape[1] * t.shape[2],
      t.shape[1], t.shape[2]);
}

constexpr double kRidge = 1e-8;

// Solves X * G = M for X with G symmetric PSD. Near-singular normal
// equations get a small ridge instead of aborting.
MatrixXd solve_gram(const MatrixXd& gram, const MatrixXd& rhs) {
  Eigen::LDLT<MatrixXd> ldlt(gram);
  if (ldlt.info() == Eigen::Success && ldlt.rcond() > 1e-12) {
    MatrixXd x = ldlt.solve(rhs.transpose()).transpose();
    if (x.allFinite()) return x;
  }
  const double scale = std::max(1e-30, gram.diagonal().maxCoeff());
  const MatrixXd ridged =
      gram + (kRidge * scale) * MatrixXd::Identity(gram.rows(), gram.cols());
  return ridged.ldlt().solve(rhs.transpose()).transpose();
}

struct InitFactors {
  MatrixXd medium, number, tmpl;
};

InitFactors random_init(int dim_i, int dim_j, int dim_k, int rank,
                        std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  auto random_matrix = [&](int rows) {
    MatrixXd m(rows, rank);
    for (int a = 0; a < rows; ++a)
      for (int b = 0; b < rank; ++b) m(a, b) = uni(rng);
    return m;
  };
  return {random_matrix(dim_i), random_matrix(dim_j), random_matrix(dim_k)};
}


// Algebraic initialization. Random-init ALS swamps badly on exact-rank
// 2 x N x M tensors (the rank-R medium factor lives in R^2, so its columns
// are maximally collinear); the classic slice-pencil / Leurgans construction
// recovers the number factor and template essentially exactly, and the ALS
// sweeps that follow only polish. For a single slice this degenerates to a
// truncated SVD. Falls back to seeded uniform init when the structure does
// not apply.
InitFactors initial_factors(const DenseTensor3& t, int rank,
                            std::mt19937_64& rng) {
  const int dim_i = t.shape[0];
  const int dim_j = t.shape[1];
  const int dim_k = t.shape[2];
  if (dim_i > 2 || rank > std::min(dim_j, dim_k))
    return random_init(dim_i, dim_j, dim_k, rank, rng);

  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  MatrixXd y1, y2;
  Eigen::Vector2d w1(1.0, 0.0), w2(0.0, 1.0);
  if (dim_i == 2) {
    // Generic slice combinations keep both pencil matrices well conditioned.
    w1 = Eigen::Vector2d(uni(rng), uni(rng)).normalized();
    w2 = Eigen::Vector2d(-w1.y(), w1.x());
    y1 = w1.x() * slice_map(t, 0) + w1.y() * slice_map(t, 1);
    y2 = w2.x() * slice_map(t, 0) + w2.y() * slice_map(t, 1);
  } else {
    y1 = slice_map(t, 0);
  }

  Eigen::BDCSVD<MatrixXd> svd(y1, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  int effective = 0;
  for (int r = 0; r < std::min<int>(rank, sv.size()); ++r)
    if (sv[r] > sv[0] * 1e-10 && sv[r] > 0.0) ++effective;
  if (effective == 0) return random_init(dim_i, dim_j, dim_k, rank, rng);

  const MatrixXd u = svd.matrixU().leftCols(effective);
  const MatrixXd v = svd.matrixV().leftCols(effective);

  InitFactors init;
  init.medium = MatrixXd::Ones(dim_i, rank);
  init.number = MatrixXd(dim_j, rank);
  init.tmpl = MatrixXd(dim_k, rank);

  if (dim_i == 1) {
    init.number.leftCols(effective) =
        u * sv.head(effective).asDiagonal();
    init.tmpl.leftCols(effective) = v;
  } else {
    const MatrixXd t1 = u.transpose() * y1 * v;  // = P D1 Q^T
    const MatrixXd t2 = u.transpose() * y2 * v;  // = P D2 Q^T
    const Eigen::EigenSolver<MatrixXd> eig(t2 * t1.inverse());
    if (eig.info() != Eigen::Success)
      return random_init(dim_i, dim_j, dim_k, rank, rng);
    const MatrixXd p = eig.eigenvectors().real();
    const Eigen::PartialPivLU<MatrixXd> p_lu(p);
    const MatrixXd w = p_lu.solve(t1);  // = D1 Q^T up to eigenvector scale
    if (!p.allFinite() || !w.allFinite())
      return random_init(dim_i, dim_j, dim_k, rank, rng);
    init.number.leftCols(effective) = u * p;
    init.tmpl.leftCols(effective) = v * w.transpose();
  }
  // Surplus columns beyond the numerical rank stay zero; they contribute
  // nothing and the ridge keeps their normal equations solvable.
  init.number.rightCols(rank - effective).setZero();
  init.tmpl.rightCols(rank - effective).setZero();
  return init;
}

}  // namespace

double DenseTensor3::frobenius_norm() const {
  double s = 0.0;
  for (double v : data) s += v * v;
  return std::sqrt(s);
}

CpFactors cp_decompose(const DenseTensor3& tensor, int rank, int max_iters,
                       double tol, std::uint64_t seed,
                       std::vector<double>* error_history) {
  if (rank < 1) throw std::invalid_argument("cp_decompose: rank must be >= 1");
  if (tensor.size() == 0)
    throw std::invalid_argument("cp_decompose: empty tensor");
  for (double v : tensor.data)
    if (!std::isfinite(v))
      throw std::invalid_argument("cp_decompose: tensor has non-finite values");

  const int dim_i = tensor.shape[0];
  const int dim_j = tensor.shape[1];
  const int dim_k = tensor.shape[2];
  const int r = rank;

  std::mt19937_64 rng(seed);
  InitFactors init = initial_factors(tensor, r, rng);
  MatrixXd medium = std::move(init.medium);
  MatrixXd number = std::move(init.number);
  MatrixXd tmpl = std::move(init.tmpl);

  const double x_norm2 = [&] {
    double s = 0.0;
    for (double v : tensor.data) s += v * v;
    return s;
  }();
  const double x_norm = std::sqrt(x_norm2);

  double prev_err = std::numeric_limits<double>::infinity();

  for (int sweep = 0; sweep < max_iters; ++sweep) {
    // Mode 1: medium factor. MTTKRP row i = colsum(number o (S_i * tmpl)).
    {
      MatrixXd rhs(dim_i, r);
      for (int i = 0; i < dim_i; ++i)
        rhs.row(i) =
            (slice_map(tensor, i) * tmpl).cwiseProduct(number).colwise().sum();
      const MatrixXd gram = (tmpl.transpose() * tmpl)
                                .cwiseProduct(number.transpose() * number);
      medium = solve_gram(gram, rhs);
    }
    // Mode 2: number factor.
    {
      MatrixXd rhs = MatrixXd::Zero(dim_j, r);
      for (int i = 0; i < dim_i; ++i)
        rhs += (slice_map(tensor, i) * tmpl) * medium.row(i).asDiagonal();
      const MatrixXd gram = (tmpl.transpose() * tmpl)
                                .cwiseProduct(medium.transpose() * medium);
      number = solve_gram(gram, rhs);
    }
    // Mode 3: Gaussian template.
    {
      MatrixXd rhs = MatrixXd::Zero(dim_k, r);
      for (int i = 0; i < dim_i; ++i)
        rhs += (slice_map(tensor, i).transpose() * number) *
               medium.row(i).asDiagonal();
      const MatrixXd gram = (number.transpose() * number)
                                .cwiseProduct(medium.transpose() * medium);
      tmpl = solve_gram(gram, rhs);
    }

    double err2 = 0.0;
    for (int i = 0; i < dim_i; ++i)
      err2 += (slice_map(tensor, i) -
               number * medium.row(i).asDiagonal() * tmpl.transpose())
                  .squaredNorm();
    const double err =
        x_norm > 0.0 ? std::sqrt(err2) / x_norm : std::sqrt(err2);
    if (error_history) error_history->push_back(err);

    if (prev_err - err < tol * std::max(prev_err, 1e-300)) break;
    prev_err = err;

    // Rebalance: unit-norm columns on the two large factors, magnitudes in
    // the medium factor. Leaves the represented tensor unchanged.
    for (int c = 0; c < r; ++c) {
      const double nn = number.col(c).norm();
      const double nt = tmpl.col(c).norm();
      if (nn > 0.0) number.col(c) /= nn;
      if (nt > 0.0) tmpl.col(c) /= nt;
      medium.col(c) *= nn * nt;
    }
  }

  return CpFactors{std::move(medium), std::move(number), std::move(tmpl)};
}

DenseTensor3 cp_reconstruct(const CpFactors& factors) {
  g_reconstruct_calls.fetch_add(1, std::memory_order_relaxed);
  const int dim_i = static_cast<int>(factors.medium_factor.rows());
  const int dim_j = factors.num_gaussians();
  const int dim_k = factors.params_per_gaussian();
  DenseTensor3 out(dim_i, dim_j, dim_k);
  for (int i = 0; i < dim_i; ++i) {
    const MatrixXd slice =
        factors.number_factor * factors.medium_factor.row(i).asDiagonal() *
        factors.gaussian_template.transpose();
    for (int j = 0; j < dim_j; ++j)
      for (int k = 0; k < dim_k; ++k) out.at(i, j, k) = slice(j, k);
  }
  return out;
}

std::uint64_t cp_reconstruct_call_count() {
  return g_reconstruct_calls.load(std::memory_order_relaxed);
}

Eigen::MatrixXd mode1_slice(const CpFactors& factors, int index) {
  if (index < 0 || index >= factors.medium_factor.rows())
    throw std::invalid_argument("mode1_slice: index out of range");
  return factors.number_factor * factors.medium_factor.row(index).asDiagonal() *
         factors.gaussian_template.transpose();
}

Eigen::VectorXd opacity_vector(const CpFactors& factors, int medium_index) {
  if (medium_index < 0 || medium_index >= factors.medium_factor.rows())
    throw std::invalid_argument("opacity_vector: medium index out of range");
  const VectorXd weights =
      factors.gaussian_template.row(GaussianLayout::kOpacity)
          .cwiseProduct(factors.medium_factor.row(medium_index))
          .transpose();
  return factors.number_factor * weights;
}

CompressionStats compression_stats(std::int64_t n, std::int64_t m,
                                   std::int64_t r) {
  if (n < 1 || m < 1 || r < 1)
    throw std::invalid_argument("compression_stats: N, M, R must be >= 1");
  CompressionStats s;
  s.dense_params = m * n;
  s.compressed_params = (m + n + 2) * r;
  s.reduction_fraction =
      s.compressed_params < s.dense_params
          ? 1.0 - static_cast<double>(s.compressed_params) / s.dense_params
          : 0.0;
  return s;
}

double cp_relative_error(const DenseTensor3& reference,
                         const CpFactors& factors) {
  const int dim_i = reference.shape[0];
  double err2 = 0.0;
  for (int i = 0; i < dim_i; ++i) {
    const MatrixXd slice = mode1_slice(factors, i);
    err2 += (slice_map(reference, i) - slice).squaredNorm();
  }
  const double norm = reference.frobenius_norm();
  return norm > 0.0 ? std::sqrt(err2) / norm : std::sqrt(err2);
}

}  // namespace tugs
