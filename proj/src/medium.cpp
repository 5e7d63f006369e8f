#include "tugs/medium.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace tugs {

MediumParams default_medium_params(std::uint64_t seed) {
  MediumParams m;
  std::mt19937_64 rng(seed);
  // Small positive rates: backscatter starts near clear water and grows
  // toward the data. Negative weights would park the ReLU in its dead zone
  // (bias starts at 0), freezing the medium forever; large ones start with
  // backscatter above the darkest pixels, and the one-sided direct-signal
  // penalty then crushes the shared geometry before it can adapt.
  std::uniform_real_distribution<double> uni(0.0, 0.1);
  for (int c = 0; c < 3; ++c) m.conv_weight[c] = uni(rng);
  return m;
}

Image backscatter_image(const Image& z_alpha, const MediumParams& m) {
  Image b(z_alpha.height(), z_alpha.width(), 3);
  for (int y = 0; y < b.height(); ++y) {
    for (int x = 0; x < b.width(); ++x) {
      const double z = z_alpha(y, x);
      for (int c = 0; c < 3; ++c) {
        const double pre = m.conv_weight[c] * z + m.conv_bias[c];
        const double rate = pre > 0.0 ? pre : 0.0;
        b(y, x, c) = m.gamma_inf[c] * (1.0 - std::exp(-rate));
      }
    }
  }
  return b;
}

Image compose_underwater(const Image& j, const Image& f_alpha,
                         const Image& z_alpha, const Image& b) {
  if (!j.same_shape(f_alpha) || !j.same_shape(b) || !j.same_extent(z_alpha))
    throw std::invalid_argument("compose_underwater: shape mismatch");
  Image out(j.height(), j.width(), 3);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      const double z = z_alpha(y, x);
      for (int c = 0; c < 3; ++c) {
        const double att = std::max(0.0, f_alpha(y, x, c));
        out(y, x, c) = j(y, x, c) * std::exp(-att * z) + b(y, x, c);
      }
    }
  }
  return out;
}

Image compose_fog(const Image& j, const Image& z,
                  const Eigen::Vector3d& alpha_c,
                  const Eigen::Vector3d& gamma_inf) {
  if (!j.same_extent(z))
    throw std::invalid_argument("compose_fog: shape mismatch");
  Image out(j.height(), j.width(), 3);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        const double a = std::exp(-alpha_c[c] * z(y, x));
        out(y, x, c) = j(y, x, c) * a + gamma_inf[c] * (1.0 - a);
      }
    }
  }
  return out;
}

AmeGrads ame_backward(const Image& j, const Image& f_alpha,
                      const Image& z_alpha, const MediumParams& m,
                      const Image& d_i, const Image& d_b_extra) {
  if (!j.same_shape(d_i))
    throw std::invalid_argument("ame_backward: gradient shape mismatch");
  const bool has_extra = !d_b_extra.empty();
  AmeGrads g;
  g.d_j = Image::zeros(j.height(), j.width(), 3);
  g.d_f_alpha = Image::zeros(j.height(), j.width(), 3);
  g.d_z_alpha = Image::zeros(j.height(), j.width(), 1);

  for (int y = 0; y < j.height(); ++y) {
    for (int x = 0; x < j.width(); ++x) {
      const double z = z_alpha(y, x);
      double dz = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double gi = d_i(y, x, c);
        const double f_raw = f_alpha(y, x, c);
        const double att = f_raw > 0.0 ? f_raw : 0.0;
        const double a = std::exp(-att * z);

        g.d_j(y, x, c) = gi * a;
        const double d_att = gi * j(y, x, c) * a * (-z);
        g.d_f_alpha(y, x, c) = f_raw > 0.0 ? d_att : 0.0;
        dz += gi * j(y, x, c) * a * (-att);

        // Backscatter receives d_i plus whatever arrives from D = G - B.
        const double gb = gi + (has_extra ? d_b_extra(y, x, c) : 0.0);
        const double pre = m.conv_weight[c] * z + m.conv_bias[c];
        const double rate = pre > 0.0 ? pre : 0.0;
        const double e = std::exp(-rate);
        g.d_gamma_inf[c] += gb * (1.0 - e);
        if (pre > 0.0) {
          const double d_rate = gb * m.gamma_inf[c] * e;
          g.d_conv_weight[c] += d_rate * z;
          g.d_conv_bias[c] += d_rate;
          dz += d_rate * m.conv_weight[c];
        }
      }
      g.d_z_alpha(y, x) = dz;
    }
  }
  return g;
}

}  // namespace tugs
