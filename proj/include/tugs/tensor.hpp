#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <vector>

namespace tugs {

// Dense 3-way tensor, row-major: (i, j, k) -> (i * d2 + j) * d3 + k.
struct DenseTensor3 {
  std::array<int, 3> shape{0, 0, 0};
  std::vector<double> data;

  DenseTensor3() = default;
  DenseTensor3(int d1, int d2, int d3)
      : shape{d1, d2, d3},
        data(static_cast<std::size_t>(d1) * d2 * d3, 0.0) {}

  double& at(int i, int j, int k) {
    return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
  }
  double at(int i, int j, int k) const {
    return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
  }
  std::int64_t size() const {
    return static_cast<std::int64_t>(shape[0]) * shape[1] * shape[2];
  }
  double frobenius_norm() const;
};

// Rank-R CP factors of the 2 x N x M Gaussian tensor. The medium factor
// selects the slice (row 0: object, row 1: medium), the number factor indexes
// Gaussians, and the Gaussian template carries the per-parameter profile.
struct CpFactors {
  Eigen::MatrixXd medium_factor;      // 2 x R (1 x R before the init copy)
  Eigen::MatrixXd number_factor;      // N x R
  Eigen::MatrixXd gaussian_template;  // M x R

  int rank() const { return static_cast<int>(number_factor.cols()); }
  int num_gaussians() const { return static_cast<int>(number_factor.rows()); }
  int params_per_gaussian() const {
    return static_cast<int>(gaussian_template.rows());
  }
};

struct CompressionStats {
  std::int64_t dense_params = 0;       // M * N
  std::int64_t compressed_params = 0;  // (M + N + 2) * R
  double reduction_fraction = 0.0;     // 1 - compressed/dense, floored at 0
};

/// Rank-R CP decomposition via alternating least squares with a small ridge
/// on the normal equations. Deterministic for a fixed seed. Stops when the
/// relative improvement of the Frobenius error drops below `tol` or after
/// `max_iters` sweeps. `error_history`, when given, receives the relative
/// error after every sweep.
CpFactors cp_decompose(const DenseTensor3& tensor, int rank,
                       int max_iters = 100, double tol = 1e-9,
                       std::uint64_t seed = 0,
                       std::vector<double>* error_history = nullptr);

/// Materializes the full tensor: entry (i,j,k) = sum_r U1[i,r] U2[j,r] U3[k,r].
/// Calls are counted so tests can assert the densification path never unfolds.
DenseTensor3 cp_reconstruct(const CpFactors& factors);
std::uint64_t cp_reconstruct_call_count();

/// Mode-1 slice computed factor-side as U2 * diag(U1[index,:]) * U3^T,
/// without materializing the tensor.
Eigen::MatrixXd mode1_slice(const CpFactors& factors, int index);

/// Raw (pre-activation) opacity of every Gaussian in the selected slice:
/// result[i] = sum_r U2[i,r] * U3[alpha,r] * U1[medium_index,r], where alpha
/// is the opacity row of the Gaussian template.
Eigen::VectorXd opacity_vector(const CpFactors& factors, int medium_index);

CompressionStats compression_stats(std::int64_t n, std::int64_t m,
                                   std::int64_t r);

/// Relative Frobenius error of the factors against a dense reference
/// (absolute error when the reference is zero).
double cp_relative_error(const DenseTensor3& reference,
                         const CpFactors& factors);

}  // namespace tugs
