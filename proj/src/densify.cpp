#include "tugs/densify.hpp"

#include <iostream>
#include <stdexcept>

#include "tugs/gaussian.hpp"

namespace tugs {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void append_zero_rows(const RowState& rs, int count) {
  for (MatrixXd* m : rs.mats) {
    m->conservativeResize(m->rows() + count, Eigen::NoChange);
    m->bottomRows(count).setZero();
  }
  for (VectorXd* v : rs.vecs) {
    v->conservativeResize(v->size() + count);
    v->tail(count).setZero();
  }
}

void select_rows(const RowState& rs, const std::vector<int>& keep) {
  for (MatrixXd* m : rs.mats) {
    MatrixXd next(static_cast<int>(keep.size()), m->cols());
    for (int i = 0; i < static_cast<int>(keep.size()); ++i)
      next.row(i) = m->row(keep[i]);
    *m = std::move(next);
  }
  for (VectorXd* v : rs.vecs) {
    VectorXd next(static_cast<int>(keep.size()));
    for (int i = 0; i < static_cast<int>(keep.size()); ++i)
      next[i] = (*v)[keep[i]];
    *v = std::move(next);
  }
}

}  // namespace

std::vector<int> densify_clone(CpFactors& factors,
                               const Eigen::VectorXd& grad_norms,
                               double grad_threshold,
                               const RowState& row_state) {
  if (grad_norms.size() != factors.num_gaussians())
    throw std::invalid_argument("densify_clone: gradient vector size mismatch");
  std::vector<int> cloned;
  for (int i = 0; i < grad_norms.size(); ++i)
    if (grad_norms[i] > grad_threshold) cloned.push_back(i);
  if (cloned.empty()) return cloned;

  const int old_n = factors.num_gaussians();
  factors.number_factor.conservativeResize(
      old_n + static_cast<int>(cloned.size()), Eigen::NoChange);
  for (int i = 0; i < static_cast<int>(cloned.size()); ++i)
    factors.number_factor.row(old_n + i) = factors.number_factor.row(cloned[i]);
  append_zero_rows(row_state, static_cast<int>(cloned.size()));
  return cloned;
}

int prune_low_opacity(CpFactors& factors, double opacity_threshold,
                      const RowState& row_state) {
  const VectorXd raw = opacity_vector(factors, 0);
  std::vector<int> keep;
  keep.reserve(raw.size());
  for (int i = 0; i < raw.size(); ++i)
    if (sigmoid(raw[i]) >= opacity_threshold) keep.push_back(i);

  if (keep.empty()) {
    int best = 0;
    raw.maxCoeff(&best);
    keep.push_back(best);
    std::cerr << "tugs: prune would remove every Gaussian; keeping row "
              << best << "\n";
  }
  const int pruned = factors.num_gaussians() - static_cast<int>(keep.size());
  if (pruned == 0) return 0;

  MatrixXd next(static_cast<int>(keep.size()), factors.rank());
  for (int i = 0; i < static_cast<int>(keep.size()); ++i)
    next.row(i) = factors.number_factor.row(keep[i]);
  factors.number_factor = std::move(next);
  select_rows(row_state, keep);
  return pruned;
}

void reset_opacity(CpFactors& factors) {
  factors.gaussian_template.row(GaussianLayout::kOpacity).setZero();
}

TdsEvent tds_step(CpFactors& factors, Eigen::VectorXd& grad_accum,
                  Eigen::VectorXd& grad_count, const RowState& row_state,
                  int step, const TdsConfig& cfg) {
  TdsEvent ev;
  ev.step = step;
  ev.n_before = factors.num_gaussians();
  ev.n_after = ev.n_before;
  if (step < 1 || step > cfg.densify_until) return ev;

  if (step % cfg.interval == 0) {
    ev.densify_pass = true;
    const Eigen::VectorXd mean_grad =
        grad_accum.cwiseQuotient(grad_count.cwiseMax(1.0));
    const auto cloned =
        densify_clone(factors, mean_grad, cfg.grad_threshold, row_state);
    ev.cloned = static_cast<int>(cloned.size());

    // The accumulators grew with the clone; sized for the pruned set below.
    grad_accum.conservativeResize(factors.num_gaussians());
    grad_accum.tail(ev.cloned).setZero();
    grad_count.conservativeResize(factors.num_gaussians());
    grad_count.tail(ev.cloned).setZero();

    RowState with_accum = row_state;
    with_accum.vecs.push_back(&grad_accum);
    with_accum.vecs.push_back(&grad_count);
    ev.pruned = prune_low_opacity(factors, cfg.opacity_threshold, with_accum);

    grad_accum.setZero();
    grad_count.setZero();
  }
  if (step % cfg.reset_interval == 0) {
    reset_opacity(factors);
    ev.opacity_reset = true;
  }

  ev.n_after = factors.num_gaussians();
  ev.compressed_params =
      compression_stats(factors.num_gaussians(), factors.params_per_gaussian(),
                        factors.rank())
          .compressed_params;
  return ev;
}

}  // namespace tugs
