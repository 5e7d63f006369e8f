#include "tugs/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace tugs {

namespace {

using Eigen::Matrix2d;
using Eigen::Matrix3d;
using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::Vector3d;
using Eigen::Vector4d;
using ProjJacobian = Eigen::Matrix<double, 2, 3>;

double lambda_max(const Matrix2d& c) {
  const double mid = 0.5 * (c(0, 0) + c(1, 1));
  const double disc =
      std::sqrt(0.25 * (c(0, 0) - c(1, 1)) * (c(0, 0) - c(1, 1)) +
                c(0, 1) * c(0, 1));
  return mid + disc;
}

Matrix2d invert2x2(const Matrix2d& c) {
  const double det = c(0, 0) * c(1, 1) - c(0, 1) * c(1, 0);
  Matrix2d inv;
  inv << c(1, 1), -c(0, 1), -c(1, 0), c(0, 0);
  return inv / det;
}

// Everything render and render_backward need per surviving Gaussian.
struct Prepared {
  ScreenGaussian sg;
  int row = 0;
  Matrix2d conic;  // cov2d^-1
  Vector3d p_cam;
  Vector3d position;
  Vector3d scale;
  Vector4d q_unit;
  double q_raw_norm = 0.0;
  bool q_degenerate = false;
  Matrix3d rot3;
  Matrix3d sigma;
  ProjJacobian jproj;
  Vector3d color_raw;  // before the clamp at 0
  Vector3d dir;
  double dir_len = 0.0;
  Eigen::Matrix<double, GaussianLayout::kShCoeffCount, 3> sh;
  int x0 = 0, x1 = -1, y0 = 0, y1 = -1;  // inclusive pixel box
};

struct Projection {
  bool culled = true;
  Prepared p;
};

Projection project_activated(const ActivatedGaussian& g, double q_raw_norm,
                             const Camera& cam) {
  Projection out;
  Prepared& p = out.p;

  p.position = g.position;
  p.scale = g.scale;
  p.q_unit = g.rotation;
  p.q_raw_norm = q_raw_norm;
  p.q_degenerate = q_raw_norm < 1e-12;
  p.sh = g.sh;
  p.sg.alpha_base = g.opacity;

  const Matrix3d w = cam.rotation();
  p.p_cam = w * g.position + cam.translation();
  const double z = p.p_cam.z();
  if (z <= cam.near) return out;
  if (g.opacity < kAlphaSkip) return out;

  p.sg.depth = z;
  p.sg.mean2d =
      Vector2d(cam.fx * p.p_cam.x() / z + cam.cx,
               cam.fy * p.p_cam.y() / z + cam.cy);

  p.jproj << cam.fx / z, 0.0, -cam.fx * p.p_cam.x() / (z * z),
      0.0, cam.fy / z, -cam.fy * p.p_cam.y() / (z * z);

  p.rot3 = quat_to_rotation(g.rotation);
  p.sigma = p.rot3 * g.scale.cwiseProduct(g.scale).asDiagonal() *
            p.rot3.transpose();
  const ProjJacobian m = p.jproj * w;
  p.sg.cov2d = m * p.sigma * m.transpose() +
               kCovDilation * Matrix2d::Identity();
  p.conic = invert2x2(p.sg.cov2d);

  // Radius of the ellipse where per-pixel alpha meets the skip threshold;
  // pixels outside it never composite, so the box is exact, not heuristic.
  const double m_cut = 2.0 * std::log(g.opacity / kAlphaSkip);
  p.sg.cutoff_radius = std::sqrt(std::max(0.0, m_cut) * lambda_max(p.sg.cov2d));

  p.x0 = std::max(0, static_cast<int>(
                         std::ceil(p.sg.mean2d.x() - p.sg.cutoff_radius)));
  p.x1 = std::min(cam.width - 1,
                  static_cast<int>(
                      std::floor(p.sg.mean2d.x() + p.sg.cutoff_radius)));
  p.y0 = std::max(0, static_cast<int>(
                         std::ceil(p.sg.mean2d.y() - p.sg.cutoff_radius)));
  p.y1 = std::min(cam.height - 1,
                  static_cast<int>(
                      std::floor(p.sg.mean2d.y() + p.sg.cutoff_radius)));
  if (p.x0 > p.x1 || p.y0 > p.y1) return out;

  const Vector3d to_gaussian = g.position - cam.center();
  p.dir_len = to_gaussian.norm();
  p.dir = p.dir_len > 0.0 ? Vector3d(to_gaussian / p.dir_len)
                          : Vector3d(0, 0, 1);
  const auto basis = sh_basis(p.dir);
  p.color_raw = Vector3d::Constant(0.5);
  for (int k = 0; k < GaussianLayout::kShCoeffCount; ++k)
    p.color_raw += basis[k] * p.sh.row(k).transpose();
  p.sg.color = p.color_raw.cwiseMax(0.0);

  out.culled = false;
  return out;
}

Projection project_row(const Eigen::Ref<const Eigen::VectorXd>& raw,
                       const Camera& cam) {
  const ActivatedGaussian g = activate(raw);
  return project_activated(
      g, raw.segment<4>(GaussianLayout::kRotation).norm(), cam);
}

std::vector<Prepared> prepare_sorted(const MatrixXd& slice, const Camera& cam) {
  std::vector<Prepared> prepared;
  prepared.reserve(static_cast<std::size_t>(slice.rows()));
  for (int n = 0; n < slice.rows(); ++n) {
    Projection proj = project_row(slice.row(n), cam);
    if (proj.culled) continue;
    proj.p.row = n;
    prepared.push_back(std::move(proj.p));
  }
  std::sort(prepared.begin(), prepared.end(),
            [](const Prepared& a, const Prepared& b) {
              if (a.sg.depth != b.sg.depth) return a.sg.depth < b.sg.depth;
              return a.row < b.row;
            });
  return prepared;
}

// Depth-ordered Gaussian index lists per tile.
std::vector<std::vector<int>> bin_tiles(const std::vector<Prepared>& prepared,
                                        const Camera& cam, int* tiles_x_out) {
  const int tiles_x = (cam.width + kTileSize - 1) / kTileSize;
  const int tiles_y = (cam.height + kTileSize - 1) / kTileSize;
  std::vector<std::vector<int>> tiles(
      static_cast<std::size_t>(tiles_x) * tiles_y);
  for (int i = 0; i < static_cast<int>(prepared.size()); ++i) {
    const Prepared& p = prepared[i];
    const int tx0 = p.x0 / kTileSize, tx1 = p.x1 / kTileSize;
    const int ty0 = p.y0 / kTileSize, ty1 = p.y1 / kTileSize;
    for (int ty = ty0; ty <= ty1; ++ty)
      for (int tx = tx0; tx <= tx1; ++tx)
        tiles[static_cast<std::size_t>(ty) * tiles_x + tx].push_back(i);
  }
  *tiles_x_out = tiles_x;
  return tiles;
}

double pixel_alpha(const Prepared& p, double px, double py, double* gw_out) {
  const Vector2d d(px - p.sg.mean2d.x(), py - p.sg.mean2d.y());
  const double m = d.dot(p.conic * d);
  const double gw = std::exp(-0.5 * m);
  if (gw_out) *gw_out = gw;
  return std::min(kAlphaClamp, p.sg.alpha_base * gw);
}

}  // namespace

std::optional<ScreenGaussian> project(const ActivatedGaussian& g,
                                      const Camera& cam) {
  const Projection proj = project_activated(g, 1.0, cam);
  if (proj.culled) return std::nullopt;
  return proj.p.sg;
}

RenderOutput render(const Eigen::MatrixXd& slice, const Camera& cam) {
  RenderOutput out{Image::zeros(cam.height, cam.width, 3),
                   Image::zeros(cam.height, cam.width, 1),
                   Image::zeros(cam.height, cam.width, 1)};
  const std::vector<Prepared> prepared = prepare_sorted(slice, cam);
  if (prepared.empty()) return out;

  int tiles_x = 0;
  const auto tiles = bin_tiles(prepared, cam, &tiles_x);

  for (std::size_t t = 0; t < tiles.size(); ++t) {
    const auto& list = tiles[t];
    if (list.empty()) continue;
    const int tx = static_cast<int>(t) % tiles_x;
    const int ty = static_cast<int>(t) / tiles_x;
    const int px0 = tx * kTileSize;
    const int py0 = ty * kTileSize;
    const int px1 = std::min(cam.width, px0 + kTileSize);
    const int py1 = std::min(cam.height, py0 + kTileSize);
    for (int y = py0; y < py1; ++y) {
      for (int x = px0; x < px1; ++x) {
        double transmittance = 1.0;
        for (int idx : list) {
          if (transmittance < kMinTransmittance) break;
          const Prepared& p = prepared[idx];
          const double alpha = pixel_alpha(p, x, y, nullptr);
          if (alpha < kAlphaSkip) continue;
          const double w = alpha * transmittance;
          out.color(y, x, 0) += w * p.sg.color[0];
          out.color(y, x, 1) += w * p.sg.color[1];
          out.color(y, x, 2) += w * p.sg.color[2];
          out.depth(y, x) += w * p.sg.depth;
          out.alpha(y, x) += w;
          transmittance *= 1.0 - alpha;
        }
      }
    }
  }
  return out;
}

RenderOutput render_oracle(const Eigen::MatrixXd& slice, const Camera& cam) {
  RenderOutput out{Image::zeros(cam.height, cam.width, 3),
                   Image::zeros(cam.height, cam.width, 1),
                   Image::zeros(cam.height, cam.width, 1)};
  const std::vector<Prepared> prepared = prepare_sorted(slice, cam);

  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      double transmittance = 1.0;
      for (const Prepared& p : prepared) {
        if (transmittance < kMinTransmittance) continue;
        const double alpha = pixel_alpha(p, x, y, nullptr);
        if (alpha < kAlphaSkip) continue;
        const double w = alpha * transmittance;
        out.color(y, x, 0) += w * p.sg.color[0];
        out.color(y, x, 1) += w * p.sg.color[1];
        out.color(y, x, 2) += w * p.sg.color[2];
        out.depth(y, x) += w * p.sg.depth;
        out.alpha(y, x) += w;
        transmittance *= 1.0 - alpha;
      }
    }
  }
  return out;
}

RenderBackwardResult render_backward(const Eigen::MatrixXd& slice,
                                     const Camera& cam, const Image& d_color,
                                     const Image& d_depth) {
  using L = GaussianLayout;
  const int n_rows = static_cast<int>(slice.rows());
  RenderBackwardResult result{MatrixXd::Zero(n_rows, L::kParamCount),
                              Eigen::VectorXd::Zero(n_rows),
                              Eigen::VectorXd::Zero(n_rows)};

  const std::vector<Prepared> prepared = prepare_sorted(slice, cam);
  if (prepared.empty()) return result;

  int tiles_x = 0;
  const auto tiles = bin_tiles(prepared, cam, &tiles_x);

  // Per-Gaussian accumulators over all pixels.
  const int np = static_cast<int>(prepared.size());
  std::vector<Vector2d> g_mean2d(np, Vector2d::Zero());
  std::vector<Matrix2d> g_conic(np, Matrix2d::Zero());
  std::vector<double> g_alpha_base(np, 0.0);
  std::vector<Vector3d> g_color(np, Vector3d::Zero());
  std::vector<double> g_zdepth(np, 0.0);

  struct Contribution {
    int idx;
    double alpha;
    double gw;
    double transmittance;  // before this contribution
  };
  std::vector<Contribution> stack;
  stack.reserve(prepared.size());

  for (std::size_t t = 0; t < tiles.size(); ++t) {
    const auto& list = tiles[t];
    if (list.empty()) continue;
    const int tx = static_cast<int>(t) % tiles_x;
    const int ty = static_cast<int>(t) / tiles_x;
    const int px0 = tx * kTileSize;
    const int py0 = ty * kTileSize;
    const int px1 = std::min(cam.width, px0 + kTileSize);
    const int py1 = std::min(cam.height, py0 + kTileSize);
    for (int y = py0; y < py1; ++y) {
      for (int x = px0; x < px1; ++x) {
        // Forward replay to collect the composited set at this pixel.
        stack.clear();
        double transmittance = 1.0;
        for (int idx : list) {
          if (transmittance < kMinTransmittance) break;
          double gw = 0.0;
          const double alpha = pixel_alpha(prepared[idx], x, y, &gw);
          if (alpha < kAlphaSkip) continue;
          stack.push_back({idx, alpha, gw, transmittance});
          transmittance *= 1.0 - alpha;
        }
        if (stack.empty()) continue;

        const Vector3d gc(d_color(y, x, 0), d_color(y, x, 1), d_color(y, x, 2));
        const double gd = d_depth(y, x);

        // Back-to-front walk with suffix sums of downstream contributions.
        Vector3d suffix_color = Vector3d::Zero();
        double suffix_depth = 0.0;
        for (int i = static_cast<int>(stack.size()) - 1; i >= 0; --i) {
          const Contribution& c = stack[i];
          const Prepared& p = prepared[c.idx];
          const double w = c.alpha * c.transmittance;

          g_color[c.idx] += gc * w;
          g_zdepth[c.idx] += gd * w;

          const double direct = gc.dot(p.sg.color) + gd * p.sg.depth;
          const double downstream =
              gc.dot(suffix_color) + gd * suffix_depth;
          const double d_alpha =
              c.transmittance * direct - downstream / (1.0 - c.alpha);

          suffix_color += w * p.sg.color;
          suffix_depth += w * p.sg.depth;

          // The clamp at kAlphaClamp stops gradient flow into the footprint.
          if (p.sg.alpha_base * c.gw > kAlphaClamp) continue;

          g_alpha_base[c.idx] += d_alpha * c.gw;
          const double d_gw = d_alpha * p.sg.alpha_base;
          const double d_m = -0.5 * c.gw * d_gw;
          const Vector2d d2(x - p.sg.mean2d.x(), y - p.sg.mean2d.y());
          const Vector2d conic_d = p.conic * d2;
          g_mean2d[c.idx] -= d_m * 2.0 * conic_d;
          g_conic[c.idx] += d_m * d2 * d2.transpose();
        }
      }
    }
  }

  // Chain the per-Gaussian accumulators into raw parameter gradients.
  const Matrix3d w_rot = cam.rotation();
  for (int i = 0; i < np; ++i) {
    const Prepared& p = prepared[i];
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(L::kParamCount);
    Vector3d g_pcam = Vector3d::Zero();

    // conic -> cov2d -> (sigma, projection Jacobian)
    const Matrix2d g_cov2d = -p.conic * g_conic[i] * p.conic;
    const ProjJacobian m = p.jproj * w_rot;
    const Matrix3d g_sigma = m.transpose() * g_cov2d * m;
    const ProjJacobian g_m =
        (g_cov2d + g_cov2d.transpose()) * m * p.sigma;
    const ProjJacobian g_j = g_m * w_rot.transpose();

    const double z = p.p_cam.z();
    const double inv_z2 = 1.0 / (z * z);
    const double inv_z3 = inv_z2 / z;
    g_pcam.x() += g_j(0, 2) * (-cam.fx * inv_z2);
    g_pcam.y() += g_j(1, 2) * (-cam.fy * inv_z2);
    g_pcam.z() += g_j(0, 0) * (-cam.fx * inv_z2) +
                  g_j(0, 2) * (2.0 * cam.fx * p.p_cam.x() * inv_z3) +
                  g_j(1, 1) * (-cam.fy * inv_z2) +
                  g_j(1, 2) * (2.0 * cam.fy * p.p_cam.y() * inv_z3);

    // mean2d -> camera point
    g_pcam.x() += g_mean2d[i].x() * cam.fx / z;
    g_pcam.y() += g_mean2d[i].y() * cam.fy / z;
    g_pcam.z() += g_mean2d[i].x() * (-cam.fx * p.p_cam.x() * inv_z2) +
                  g_mean2d[i].y() * (-cam.fy * p.p_cam.y() * inv_z2);

    // composited depth is the camera-space z
    g_pcam.z() += g_zdepth[i];

    Vector3d g_pos = w_rot.transpose() * g_pcam;

    // color: clamp mask, SH coefficients, and view direction
    const auto basis = sh_basis(p.dir);
    const auto basis_grad = sh_basis_gradient(p.dir);
    Vector3d g_raw_color = Vector3d::Zero();
    for (int c = 0; c < 3; ++c)
      g_raw_color[c] = p.color_raw[c] > 0.0 ? g_color[i][c] : 0.0;
    Vector3d g_dir = Vector3d::Zero();
    for (int k = 0; k < L::kShCoeffCount; ++k) {
      for (int c = 0; c < 3; ++c) {
        grad[L::sh_index(k, c)] = g_raw_color[c] * basis[k];
        g_dir += g_raw_color[c] * p.sh(k, c) * basis_grad[k];
      }
    }
    if (p.dir_len > 0.0)
      g_pos += (Matrix3d::Identity() - p.dir * p.dir.transpose()) * g_dir /
               p.dir_len;

    grad.segment<3>(L::kPosition) = g_pos;

    // sigma -> scale (through exp) and quaternion (through normalize)
    const Matrix3d rt_gs_r = p.rot3.transpose() * g_sigma * p.rot3;
    for (int k = 0; k < 3; ++k)
      grad[L::kLogScale + k] =
          2.0 * p.scale[k] * p.scale[k] * rt_gs_r(k, k);

    const Matrix3d g_rot =
        (g_sigma + g_sigma.transpose()) * p.rot3 *
        p.scale.cwiseProduct(p.scale).asDiagonal();
    const double qw = p.q_unit[0], qx = p.q_unit[1], qy = p.q_unit[2],
                 qz = p.q_unit[3];
    Matrix3d dr[4];
    dr[0] << 0, -2 * qz, 2 * qy, 2 * qz, 0, -2 * qx, -2 * qy, 2 * qx, 0;
    dr[1] << 0, 2 * qy, 2 * qz, 2 * qy, -4 * qx, -2 * qw, 2 * qz, 2 * qw,
        -4 * qx;
    dr[2] << -4 * qy, 2 * qx, 2 * qw, 2 * qx, 0, 2 * qz, -2 * qw, 2 * qz,
        -4 * qy;
    dr[3] << -4 * qz, -2 * qw, 2 * qx, 2 * qw, -4 * qz, 2 * qy, 2 * qx,
        2 * qy, 0;
    Vector4d g_q;
    for (int k = 0; k < 4; ++k)
      g_q[k] = (g_rot.cwiseProduct(dr[k])).sum();
    if (!p.q_degenerate) {
      const Vector4d g_qraw =
          (Eigen::Matrix4d::Identity() - p.q_unit * p.q_unit.transpose()) *
          g_q / p.q_raw_norm;
      grad.segment<4>(L::kRotation) = g_qraw;
    }

    grad[L::kOpacity] =
        g_alpha_base[i] * p.sg.alpha_base * (1.0 - p.sg.alpha_base);

    result.param_grad.row(p.row) = grad;
    result.pos_grad_norm[p.row] = g_mean2d[i].norm();
    result.visible[p.row] = 1.0;
  }
  return result;
}

}  // namespace tugs
