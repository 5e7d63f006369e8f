#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "tugs/tensor.hpp"

namespace tugs {

struct TdsConfig {
  double grad_threshold = 1e-3;   // t_g: clone trigger on mean 2D grad norm
  double opacity_threshold = 0.1; // t_o: prune on activated object opacity
  int reset_interval = 1000;      // steps between opacity zeroing
  int densify_until = 10000;      // last step with structural edits
  int interval = 100;             // steps between densify/prune passes
};

// Matrices/vectors whose rows are aligned with number-factor rows (Adam
// moments, gradient accumulators); structural edits keep them in lockstep.
// Cloned rows are appended as zeros, pruned rows are removed.
struct RowState {
  std::vector<Eigen::MatrixXd*> mats;
  std::vector<Eigen::VectorXd*> vecs;
};

/// Appends a copy of the number-factor row for every Gaussian whose averaged
/// positional gradient magnitude exceeds the threshold. Returns the cloned
/// source indices. The medium factor and Gaussian template are untouched.
std::vector<int> densify_clone(CpFactors& factors,
                               const Eigen::VectorXd& grad_norms,
                               double grad_threshold,
                               const RowState& row_state = {});

/// Keeps the rows whose activated object-slice opacity is >= the threshold;
/// survivor order is preserved. When nothing survives, the single
/// highest-opacity row is kept and a warning is emitted. Returns the number
/// of pruned rows.
int prune_low_opacity(CpFactors& factors, double opacity_threshold,
                      const RowState& row_state = {});

/// Zeroes the opacity row of the Gaussian template; every Gaussian's raw
/// opacity becomes 0 (activated 0.5) in both slices.
void reset_opacity(CpFactors& factors);

struct TdsEvent {
  int step = 0;
  int n_before = 0;
  int cloned = 0;
  int pruned = 0;
  int n_after = 0;
  std::int64_t compressed_params = 0;
  bool densify_pass = false;
  bool opacity_reset = false;
};

/// One scheduler tick: at multiples of `interval` up to `densify_until`,
/// clone then prune and clear the accumulators; at multiples of
/// `reset_interval` in the same window, zero opacities. Steps are 1-based.
TdsEvent tds_step(CpFactors& factors, Eigen::VectorXd& grad_accum,
                  Eigen::VectorXd& grad_count, const RowState& row_state,
                  int step, const TdsConfig& cfg);

}  // namespace tugs
