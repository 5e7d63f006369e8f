#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "tugs/camera.hpp"
#include "tugs/densify.hpp"
#include "tugs/image.hpp"
#include "tugs/losses.hpp"
#include "tugs/medium.hpp"
#include "tugs/tensor.hpp"

namespace tugs {

struct LearningRates {
  double factor_init = 1.6e-4;  // all three factor matrices, one group
  double factor_final = 1.6e-6;
  double medium = 1e-3;  // gamma_inf and the 1x1 conv
};

struct TrainConfig {
  int steps = 20000;
  int rank = 20;
  std::uint64_t seed = 0;
  LearningRates lr;
  LossWeights weights;
  TdsConfig tds;
  bool medium_enabled = true;
  int checkpoint_interval = 1000;
  int cp_max_iters = 100;
  double cp_tol = 1e-9;
};

/// Log-linear decay from lr_init to lr_final over total_steps (the 3DGS
/// position schedule applied to the single factor group).
double factor_lr_schedule(int step, int total_steps, double lr_init,
                          double lr_final);

struct AdamParam {
  Eigen::MatrixXd m, v;
  void reset(Eigen::Index rows, Eigen::Index cols) {
    m = Eigen::MatrixXd::Zero(rows, cols);
    v = Eigen::MatrixXd::Zero(rows, cols);
  }
};

void adam_update(Eigen::Ref<Eigen::MatrixXd> param, AdamParam& state,
                 const Eigen::Ref<const Eigen::MatrixXd>& grad, double lr,
                 int t);

struct TrainerState {
  CpFactors factors;
  MediumParams medium;
  AdamParam opt_medium_factor, opt_number_factor, opt_gaussian_template;
  AdamParam opt_gamma, opt_conv_weight, opt_conv_bias;
  int step = 0;  // completed optimization steps
  Eigen::VectorXd grad_accum;  // per-Gaussian sums of |dL/dmean2d|
  Eigen::VectorXd grad_count;  // views in which the Gaussian rasterized
  int lr_halvings = 0;

  std::int64_t total_param_count() const;  // (M + N + 2) R + 9
};

struct TrainView {
  Camera camera;
  Image image;  // linear rgb ground truth
};

/// 3DGS-style initialization: raw rows from the point cloud (scale from the
/// mean distance to the 3 nearest neighbors, identity rotation, opacity 0.1,
/// SH DC from color), decomposed at the given rank as a 1 x N x M tensor;
/// the single medium-factor row is then copied to form the 2 x R factor.
TrainerState init_from_points(const std::vector<Eigen::Vector3d>& points,
                              const std::vector<Eigen::Vector3d>& colors,
                              int rank, const TrainConfig& cfg);

// One view through the full image-formation model.
struct PipelineImages {
  Image j, z_u, alpha_u;    // object slice render
  Image f_alpha, z_alpha;   // medium slice render
  Image backscatter;        // B
  Image attenuation;        // exp(-relu(F) * z_alpha)
  Image composed;           // I
};
PipelineImages forward_pipeline(const CpFactors& factors,
                                const MediumParams& medium, const Camera& cam,
                                bool medium_enabled);

/// One optimization step: renders both slices, composes, evaluates the loss
/// suite, backpropagates into the CP factors and medium parameters, applies
/// Adam, and runs the densification scheduler. Returns the loss breakdown;
/// fills `event` with the TDS bookkeeping when given.
LossBreakdown train_step(TrainerState& state, const TrainView& view,
                         const TrainConfig& cfg, TdsEvent* event = nullptr);

struct StepRecord {
  int step = 0;
  LossBreakdown loss;
};

struct TrainHooks {
  std::function<void(const TrainerState&, int)> on_checkpoint;
  std::function<void(const TrainerState&, const TdsEvent&)> on_tds_event;
};

struct TrainResult {
  TrainerState state;
  std::vector<StepRecord> history;
  std::vector<TdsEvent> tds_events;
};

struct TrainInputs {
  std::vector<TrainView> views;
  std::vector<Eigen::Vector3d> points;
  std::vector<Eigen::Vector3d> colors;
};

/// Initializes from the point cloud and runs the full loop over
/// seeded-shuffled views.
TrainResult train(const TrainConfig& cfg, const TrainInputs& inputs,
                  const TrainHooks& hooks = {});

struct EvalSummary {
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  std::vector<double> psnr;
  std::vector<double> ssim;
};

EvalSummary evaluate_views(const CpFactors& factors, const MediumParams& medium,
                           const std::vector<TrainView>& views,
                           bool medium_enabled);

}  // namespace tugs
