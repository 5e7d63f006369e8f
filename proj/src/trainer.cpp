#include "tugs/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "tugs/gaussian.hpp"
#include "tugs/metrics.hpp"
#include "tugs/renderer.hpp"

namespace tugs {

namespace {

using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::VectorXd;

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-15;

Eigen::Map<MatrixXd> as_matrix(Vector3d& v) {
  return Eigen::Map<MatrixXd>(v.data(), 3, 1);
}

// Mean distance to the 3 nearest neighbors, brute force; point sets here are
// desk scale.
std::vector<double> knn_mean_distance(const std::vector<Vector3d>& points) {
  const int n = static_cast<int>(points.size());
  std::vector<double> out(n, 0.01);
  if (n < 4) return out;
  std::vector<double> d2(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) d2[j] = (points[i] - points[j]).squaredNorm();
    d2[i] = std::numeric_limits<double>::infinity();
    std::array<double, 3> best{};
    std::partial_sort(d2.begin(), d2.begin() + 3, d2.end());
    for (int k = 0; k < 3; ++k) best[k] = std::sqrt(d2[k]);
    out[i] = std::max(1e-6, (best[0] + best[1] + best[2]) / 3.0);
  }
  return out;
}

struct SliceGrads {
  MatrixXd slice0;  // d loss / d object slice entries
  MatrixXd slice1;  // d loss / d medium slice entries (empty when disabled)
};

void accumulate_factor_grads(const CpFactors& f, const MatrixXd& d_slice,
                             int slice_index, MatrixXd& g_u1, MatrixXd& g_u2,
                             MatrixXd& g_u3) {
  const auto u1_row = f.medium_factor.row(slice_index);
  g_u2 += d_slice * f.gaussian_template * u1_row.asDiagonal();
  g_u3 += d_slice.transpose() * f.number_factor * u1_row.asDiagonal();
  // dL/dU1[i,r] = U2[:,r]^T dS U3[:,r]
  const MatrixXd tmp = f.number_factor.transpose() * d_slice *
                       f.gaussian_template;  // R x R
  g_u1.row(slice_index) += tmp.diagonal().transpose();
}

}  // namespace

double factor_lr_schedule(int step, int total_steps, double lr_init,
                          double lr_final) {
  if (total_steps <= 0) return lr_init;
  const double t =
      std::clamp(static_cast<double>(step) / total_steps, 0.0, 1.0);
  // log-lerp is undefined at zero rates; fall back to linear there
  if (lr_init <= 0.0 || lr_final <= 0.0)
    return (1.0 - t) * lr_init + t * lr_final;
  return std::exp((1.0 - t) * std::log(lr_init) + t * std::log(lr_final));
}

void adam_update(Eigen::Ref<MatrixXd> param, AdamParam& state,
                 const Eigen::Ref<const MatrixXd>& grad, double lr, int t) {
  state.m = kAdamBeta1 * state.m + (1.0 - kAdamBeta1) * grad;
  state.v = kAdamBeta2 * state.v.array().matrix() +
            (1.0 - kAdamBeta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(kAdamBeta1, t);
  const double bc2 = 1.0 - std::pow(kAdamBeta2, t);
  param.array() -= lr * (state.m.array() / bc1) /
                   ((state.v.array() / bc2).sqrt() + kAdamEps);
}

std::int64_t TrainerState::total_param_count() const {
  return compression_stats(factors.num_gaussians(),
                           factors.params_per_gaussian(), factors.rank())
             .compressed_params +
         9;
}

TrainerState init_from_points(const std::vector<Vector3d>& points,
                              const std::vector<Vector3d>& colors,
                              int rank, const TrainConfig& cfg) {
  using L = GaussianLayout;
  if (points.empty())
    throw std::invalid_argument("init_from_points: need at least one point");
  if (points.size() != colors.size())
    throw std::invalid_argument("init_from_points: point/color size mismatch");

  const int n = static_cast<int>(points.size());
  const std::vector<double> nn_dist = knn_mean_distance(points);
  const double opacity_raw = logit(0.1);
  constexpr double kShC0 = 0.28209479177387814;

  DenseTensor3 init(1, n, L::kParamCount);
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < 3; ++a) init.at(0, i, L::kPosition + a) = points[i][a];
    const double log_scale = std::log(nn_dist[i]);
    for (int a = 0; a < 3; ++a) init.at(0, i, L::kLogScale + a) = log_scale;
    init.at(0, i, L::kRotation) = 1.0;  // identity quaternion
    init.at(0, i, L::kOpacity) = opacity_raw;
    for (int c = 0; c < 3; ++c)
      init.at(0, i, L::sh_index(0, c)) = (colors[i][c] - 0.5) / kShC0;
  }

  CpFactors single = cp_decompose(init, rank, cfg.cp_max_iters, cfg.cp_tol,
                                  cfg.seed);

  TrainerState state;
  state.factors.number_factor = std::move(single.number_factor);
  state.factors.gaussian_template = std::move(single.gaussian_template);
  state.factors.medium_factor = MatrixXd(2, rank);
  state.factors.medium_factor.row(0) = single.medium_factor.row(0);
  state.factors.medium_factor.row(1) = single.medium_factor.row(0);
  state.medium = default_medium_params(cfg.seed);

  state.opt_medium_factor.reset(2, rank);
  state.opt_number_factor.reset(n, rank);
  state.opt_gaussian_template.reset(L::kParamCount, rank);
  state.opt_gamma.reset(3, 1);
  state.opt_conv_weight.reset(3, 1);
  state.opt_conv_bias.reset(3, 1);
  state.grad_accum = VectorXd::Zero(n);
  state.grad_count = VectorXd::Zero(n);
  return state;
}

PipelineImages forward_pipeline(const CpFactors& factors,
                                const MediumParams& medium, const Camera& cam,
                                bool medium_enabled) {
  PipelineImages out;
  const RenderOutput object = render(mode1_slice(factors, 0), cam);
  out.j = object.color;
  out.z_u = object.depth;
  out.alpha_u = object.alpha;

  if (!medium_enabled) {
    out.f_alpha = Image::zeros(cam.height, cam.width, 3);
    out.z_alpha = Image::zeros(cam.height, cam.width, 1);
    out.backscatter = Image::zeros(cam.height, cam.width, 3);
    out.attenuation = Image::constant(cam.height, cam.width, 3, 1.0);
    out.composed = out.j;
    return out;
  }

  const RenderOutput med = render(mode1_slice(factors, 1), cam);
  out.f_alpha = med.color;
  out.z_alpha = med.depth;
  out.backscatter = backscatter_image(out.z_alpha, medium);
  out.attenuation = Image(cam.height, cam.width, 3);
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x)
      for (int c = 0; c < 3; ++c)
        out.attenuation(y, x, c) = std::exp(
            -std::max(0.0, out.f_alpha(y, x, c)) * out.z_alpha(y, x));
  out.composed =
      compose_underwater(out.j, out.f_alpha, out.z_alpha, out.backscatter);
  return out;
}

LossBreakdown train_step(TrainerState& state, const TrainView& view,
                         const TrainConfig& cfg, TdsEvent* event) {
  const Camera& cam = view.camera;
  const Image& gt = view.image;
  const LossWeights& w = cfg.weights;

  const MatrixXd slice0 = mode1_slice(state.factors, 0);
  const PipelineImages pipe =
      forward_pipeline(state.factors, state.medium, cam, cfg.medium_enabled);

  Image direct(gt.height(), gt.width(), 3);
  for (std::size_t p = 0; p < direct.size(); ++p)
    direct[p] = gt[p] - pipe.backscatter[p];

  const LossBreakdown breakdown = total_loss(gt, pipe.composed, pipe.j, direct,
                                             pipe.z_u, pipe.z_alpha, w);

  if (!std::isfinite(breakdown.total)) {
    // Abort the step before any update; drop the learning rates once and
    // fail hard if it happens again.
    if (state.lr_halvings >= 1)
      throw std::runtime_error("train_step: non-finite loss recurred");
    state.lr_halvings += 1;
    state.step += 1;
    if (event) {
      *event = TdsEvent{};
      event->step = state.step;
      event->n_before = event->n_after = state.factors.num_gaussians();
    }
    return breakdown;
  }

  // Image-space gradients.
  Image d_i = Image::zeros(gt.height(), gt.width(), 3);
  Image d_j = Image::zeros(gt.height(), gt.width(), 3);
  Image d_d = Image::zeros(gt.height(), gt.width(), 3);
  Image d_zu = Image::zeros(gt.height(), gt.width(), 1);
  Image d_zalpha = Image::zeros(gt.height(), gt.width(), 1);

  // The depth map acts as a fixed weight in the dr loss; letting its
  // gradient reach the rasterizer rewards collapsing the scene (the loss
  // drops when z_u does), so only the TV term drives z_u.
  Image dr_weight_sink = Image::zeros(gt.height(), gt.width(), 1);
  loss_dr_backward(gt, pipe.composed, pipe.z_u, w.dr, d_i, dr_weight_sink);
  if (w.ssim != 0.0) loss_dssim_backward(gt, pipe.composed, w.ssim, d_i);
  if (w.cc != 0.0) loss_cc_backward(pipe.j, direct, w.cc, d_j);
  if (w.bs != 0.0) loss_bs_backward(direct, 1000.0, w.bs, d_d);
  if (w.tv != 0.0) loss_tv_backward(pipe.z_u, pipe.z_alpha, w.tv, d_zu, d_zalpha);

  MatrixXd g_u1 = MatrixXd::Zero(2, state.factors.rank());
  MatrixXd g_u2 =
      MatrixXd::Zero(state.factors.num_gaussians(), state.factors.rank());
  MatrixXd g_u3 = MatrixXd::Zero(state.factors.params_per_gaussian(),
                                 state.factors.rank());
  Vector3d g_gamma = Vector3d::Zero();
  Vector3d g_conv_w = Vector3d::Zero();
  Vector3d g_conv_b = Vector3d::Zero();

  RenderBackwardResult rb0;
  if (cfg.medium_enabled) {
    // D = G - B feeds the bs loss; its gradient arrives at B negated.
    Image d_b_extra = Image::zeros(gt.height(), gt.width(), 3);
    for (std::size_t p = 0; p < d_b_extra.size(); ++p)
      d_b_extra[p] = -d_d[p];
    const AmeGrads ame = ame_backward(pipe.j, pipe.f_alpha, pipe.z_alpha,
                                      state.medium, d_i, d_b_extra);
    for (std::size_t p = 0; p < d_j.size(); ++p) d_j[p] += ame.d_j[p];
    for (std::size_t p = 0; p < d_zalpha.size(); ++p)
      d_zalpha[p] += ame.d_z_alpha[p];
    g_gamma = ame.d_gamma_inf;
    g_conv_w = ame.d_conv_weight;
    g_conv_b = ame.d_conv_bias;

    rb0 = render_backward(slice0, cam, d_j, d_zu);
    const RenderBackwardResult rb1 = render_backward(
        mode1_slice(state.factors, 1), cam, ame.d_f_alpha, d_zalpha);
    accumulate_factor_grads(state.factors, rb0.param_grad, 0, g_u1, g_u2, g_u3);
    accumulate_factor_grads(state.factors, rb1.param_grad, 1, g_u1, g_u2, g_u3);
  } else {
    // I == J: the photometric gradient lands on the object render directly.
    for (std::size_t p = 0; p < d_j.size(); ++p) d_j[p] += d_i[p];
    rb0 = render_backward(slice0, cam, d_j, d_zu);
    accumulate_factor_grads(state.factors, rb0.param_grad, 0, g_u1, g_u2, g_u3);
  }

  // Densification statistics come from the object render.
  state.grad_accum += rb0.pos_grad_norm;
  state.grad_count += rb0.visible;

  const double halve = state.lr_halvings > 0 ? 0.5 : 1.0;
  const double factor_lr = halve * factor_lr_schedule(state.step, cfg.steps,
                                                      cfg.lr.factor_init,
                                                      cfg.lr.factor_final);
  const double medium_lr = halve * cfg.lr.medium;
  const int t = state.step + 1;

  adam_update(state.factors.medium_factor, state.opt_medium_factor, g_u1,
              factor_lr, t);
  adam_update(state.factors.number_factor, state.opt_number_factor, g_u2,
              factor_lr, t);
  adam_update(state.factors.gaussian_template, state.opt_gaussian_template,
              g_u3, factor_lr, t);
  if (cfg.medium_enabled) {
    adam_update(as_matrix(state.medium.gamma_inf), state.opt_gamma,
                as_matrix(g_gamma), medium_lr, t);
    adam_update(as_matrix(state.medium.conv_weight), state.opt_conv_weight,
                as_matrix(g_conv_w), medium_lr, t);
    adam_update(as_matrix(state.medium.conv_bias), state.opt_conv_bias,
                as_matrix(g_conv_b), medium_lr, t);
    state.medium.gamma_inf = state.medium.gamma_inf.cwiseMax(0.0);
  }

  state.step += 1;

  RowState rows;
  rows.mats = {&state.opt_number_factor.m, &state.opt_number_factor.v};
  const TdsEvent ev = tds_step(state.factors, state.grad_accum,
                               state.grad_count, rows, state.step, cfg.tds);
  if (event) *event = ev;
  return breakdown;
}

TrainResult train(const TrainConfig& cfg, const TrainInputs& inputs,
                  const TrainHooks& hooks) {
  if (inputs.views.empty()) throw std::invalid_argument("train: empty dataset");
  if (cfg.steps < 1) throw std::invalid_argument("train: steps must be >= 1");

  TrainResult result;
  result.state = init_from_points(inputs.points, inputs.colors, cfg.rank, cfg);
  result.history.reserve(cfg.steps);

  std::mt19937_64 rng(cfg.seed);
  std::vector<int> order(inputs.views.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();  // force a shuffle on the first step

  for (int s = 0; s < cfg.steps; ++s) {
    if (cursor >= order.size()) {
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    const TrainView& view = inputs.views[order[cursor++]];

    TdsEvent ev;
    const LossBreakdown loss = train_step(result.state, view, cfg, &ev);
    result.history.push_back({result.state.step, loss});
    if (ev.densify_pass || ev.opacity_reset) {
      result.tds_events.push_back(ev);
      if (hooks.on_tds_event) hooks.on_tds_event(result.state, ev);
    }
    if (hooks.on_checkpoint && (result.state.step % cfg.checkpoint_interval ==
                                    0 ||
                                result.state.step == cfg.steps))
      hooks.on_checkpoint(result.state, result.state.step);
  }
  return result;
}

EvalSummary evaluate_views(const CpFactors& factors, const MediumParams& medium,
                           const std::vector<TrainView>& views,
                           bool medium_enabled) {
  EvalSummary s;
  for (const TrainView& v : views) {
    const PipelineImages pipe =
        forward_pipeline(factors, medium, v.camera, medium_enabled);
    s.psnr.push_back(psnr(v.image, pipe.composed));
    s.ssim.push_back(ssim_mean(v.image, pipe.composed));
  }
  for (double v : s.psnr) s.mean_psnr += v;
  for (double v : s.ssim) s.mean_ssim += v;
  if (!views.empty()) {
    s.mean_psnr /= static_cast<double>(views.size());
    s.mean_ssim /= static_cast<double>(views.size());
  }
  return s;
}

}  // namespace tugs
