#include "tugs/gaussian.hpp"

#include <atomic>
#include <stdexcept>

namespace tugs {

namespace {

std::atomic<std::uint64_t> g_degenerate_quats{0};

constexpr double kShC0 = 0.28209479177387814;
constexpr double kShC1 = 0.4886025119029199;
constexpr double kShC2[5] = {1.0925484305920792, -1.0925484305920792,
                             0.31539156525252005, -1.0925484305920792,
                             0.5462742152960396};
constexpr double kShC3[7] = {-0.5900435899266435, 2.890611442640554,
                             -0.4570457994644658, 0.3731763325901154,
                             -0.4570457994644658, 1.445305721320277,
                             -0.5900435899266435};

}  // namespace

ActivatedGaussian activate(const Eigen::Ref<const Eigen::VectorXd>& raw) {
  using L = GaussianLayout;
  if (raw.size() != L::kParamCount)
    throw std::invalid_argument("activate: raw row must have 59 entries");

  ActivatedGaussian g;
  g.position = raw.segment<3>(L::kPosition);
  g.scale = raw.segment<3>(L::kLogScale).array().exp();
  Eigen::Vector4d q = raw.segment<4>(L::kRotation);
  const double qn = q.norm();
  if (qn < 1e-12) {
    g_degenerate_quats.fetch_add(1, std::memory_order_relaxed);
    g.rotation = Eigen::Vector4d(1, 0, 0, 0);
  } else {
    g.rotation = q / qn;
  }
  g.opacity = sigmoid(raw[L::kOpacity]);
  for (int k = 0; k < L::kShCoeffCount; ++k)
    for (int c = 0; c < 3; ++c) g.sh(k, c) = raw[L::sh_index(k, c)];
  return g;
}

std::uint64_t quaternion_degeneracy_count() {
  return g_degenerate_quats.load(std::memory_order_relaxed);
}

Eigen::Matrix3d quat_to_rotation(const Eigen::Vector4d& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Eigen::Matrix3d r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

Eigen::Matrix3d covariance(const Eigen::Vector3d& scale,
                           const Eigen::Vector4d& unit_quat) {
  const Eigen::Matrix3d r = quat_to_rotation(unit_quat);
  return r * scale.cwiseProduct(scale).asDiagonal() * r.transpose();
}

double eval_gaussian(const Eigen::Vector3d& x, const Eigen::Vector3d& mean,
                     const Eigen::Matrix3d& cov) {
  if (!x.allFinite() || !mean.allFinite() || !cov.allFinite())
    throw std::invalid_argument("eval_gaussian: non-finite input");
  const Eigen::Matrix3d reg =
      cov + 1e-8 * Eigen::Matrix3d::Identity();
  const Eigen::Vector3d d = x - mean;
  const double m = d.dot(reg.ldlt().solve(d));
  return std::exp(-0.5 * m);
}

std::array<double, 16> sh_basis(const Eigen::Vector3d& dir) {
  const double x = dir[0], y = dir[1], z = dir[2];
  const double xx = x * x, yy = y * y, zz = z * z;
  std::array<double, 16> b;
  b[0] = kShC0;
  b[1] = -kShC1 * y;
  b[2] = kShC1 * z;
  b[3] = -kShC1 * x;
  b[4] = kShC2[0] * x * y;
  b[5] = kShC2[1] * y * z;
  b[6] = kShC2[2] * (2.0 * zz - xx - yy);
  b[7] = kShC2[3] * x * z;
  b[8] = kShC2[4] * (xx - yy);
  b[9] = kShC3[0] * y * (3.0 * xx - yy);
  b[10] = kShC3[1] * x * y * z;
  b[11] = kShC3[2] * y * (4.0 * zz - xx - yy);
  b[12] = kShC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
  b[13] = kShC3[4] * x * (4.0 * zz - xx - yy);
  b[14] = kShC3[5] * z * (xx - yy);
  b[15] = kShC3[6] * x * (xx - 3.0 * yy);
  return b;
}

std::array<Eigen::Vector3d, 16> sh_basis_gradient(const Eigen::Vector3d& dir) {
  const double x = dir[0], y = dir[1], z = dir[2];
  const double xx = x * x, yy = y * y, zz = z * z;
  std::array<Eigen::Vector3d, 16> g;
  g[0] = {0, 0, 0};
  g[1] = {0, -kShC1, 0};
  g[2] = {0, 0, kShC1};
  g[3] = {-kShC1, 0, 0};
  g[4] = {kShC2[0] * y, kShC2[0] * x, 0};
  g[5] = {0, kShC2[1] * z, kShC2[1] * y};
  g[6] = {-2.0 * kShC2[2] * x, -2.0 * kShC2[2] * y, 4.0 * kShC2[2] * z};
  g[7] = {kShC2[3] * z, 0, kShC2[3] * x};
  g[8] = {2.0 * kShC2[4] * x, -2.0 * kShC2[4] * y, 0};
  g[9] = {kShC3[0] * 6.0 * x * y, kShC3[0] * (3.0 * xx - 3.0 * yy), 0};
  g[10] = {kShC3[1] * y * z, kShC3[1] * x * z, kShC3[1] * x * y};
  g[11] = {-2.0 * kShC3[2] * x * y, kShC3[2] * (4.0 * zz - xx - 3.0 * yy),
           8.0 * kShC3[2] * y * z};
  g[12] = {-6.0 * kShC3[3] * x * z, -6.0 * kShC3[3] * y * z,
           kShC3[3] * (6.0 * zz - 3.0 * xx - 3.0 * yy)};
  g[13] = {kShC3[4] * (4.0 * zz - 3.0 * xx - yy), -2.0 * kShC3[4] * x * y,
           8.0 * kShC3[4] * x * z};
  g[14] = {2.0 * kShC3[5] * x * z, -2.0 * kShC3[5] * y * z,
           kShC3[5] * (xx - yy)};
  g[15] = {kShC3[6] * (3.0 * xx - 3.0 * yy), -6.0 * kShC3[6] * x * y, 0};
  return g;
}

Eigen::Vector3d sh_color(
    const Eigen::Matrix<double, GaussianLayout::kShCoeffCount, 3>& sh,
    const Eigen::Vector3d& view_dir) {
  const auto basis = sh_basis(view_dir);
  Eigen::Vector3d rgb = Eigen::Vector3d::Constant(0.5);
  for (int k = 0; k < GaussianLayout::kShCoeffCount; ++k)
    rgb += basis[k] * sh.row(k).transpose();
  return rgb.cwiseMax(0.0);
}

}  // namespace tugs
