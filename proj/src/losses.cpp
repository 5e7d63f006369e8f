#include "tugs/losses.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace tugs {

namespace {

constexpr double kVarianceFloor = 1e-8;
constexpr int kWindow = 11;
constexpr int kHalfWindow = kWindow / 2;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

struct ChannelStats {
  double mean = 0.0;
  double var = 0.0;
  double std = 0.0;
};

ChannelStats channel_stats(const Image& img, int c) {
  const double count = static_cast<double>(img.height()) * img.width();
  double sum = 0.0, sum2 = 0.0;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const double v = img(y, x, c);
      sum += v;
      sum2 += v * v;
    }
  ChannelStats s;
  s.mean = sum / count;
  s.var = std::max(0.0, sum2 / count - s.mean * s.mean);
  s.std = std::sqrt(std::max(s.var, kVarianceFloor));
  return s;
}

const std::array<double, kWindow>& ssim_window() {
  static const std::array<double, kWindow> w = [] {
    std::array<double, kWindow> g{};
    double total = 0.0;
    for (int i = 0; i < kWindow; ++i) {
      g[i] = std::exp(-(i - kHalfWindow) * (i - kHalfWindow) / (2.0 * 1.5 * 1.5));
      total += g[i];
    }
    for (double& v : g) v /= total;
    return g;
  }();
  return w;
}

// Separable zero-padded 'same' convolution with the SSIM window. The window
// is symmetric, so this is its own transpose.
Image conv_window(const Image& img) {
  const auto& w = ssim_window();
  Image tmp(img.height(), img.width(), img.channels());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c) {
        double acc = 0.0;
        for (int k = -kHalfWindow; k <= kHalfWindow; ++k) {
          const int xx = x + k;
          if (xx < 0 || xx >= img.width()) continue;
          acc += w[k + kHalfWindow] * img(y, xx, c);
        }
        tmp(y, x, c) = acc;
      }
  Image out(img.height(), img.width(), img.channels());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c) {
        double acc = 0.0;
        for (int k = -kHalfWindow; k <= kHalfWindow; ++k) {
          const int yy = y + k;
          if (yy < 0 || yy >= img.height()) continue;
          acc += w[k + kHalfWindow] * tmp(yy, x, c);
        }
        out(y, x, c) = acc;
      }
  return out;
}

Image hadamard(const Image& a, const Image& b) {
  Image out(a.height(), a.width(), a.channels());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

struct SsimMaps {
  Image mu_i, mu_g, sigma_ii, sigma_gg, sigma_ig;  // windowed moments
  Image ssim_map;
};

SsimMaps ssim_maps(const Image& g, const Image& i) {
  SsimMaps m;
  m.mu_i = conv_window(i);
  m.mu_g = conv_window(g);
  const Image c_ii = conv_window(hadamard(i, i));
  const Image c_gg = conv_window(hadamard(g, g));
  const Image c_ig = conv_window(hadamard(i, g));

  m.sigma_ii = Image(i.height(), i.width(), i.channels());
  m.sigma_gg = Image(i.height(), i.width(), i.channels());
  m.sigma_ig = Image(i.height(), i.width(), i.channels());
  m.ssim_map = Image(i.height(), i.width(), i.channels());
  for (std::size_t p = 0; p < i.size(); ++p) {
    m.sigma_ii[p] = c_ii[p] - m.mu_i[p] * m.mu_i[p];
    m.sigma_gg[p] = c_gg[p] - m.mu_g[p] * m.mu_g[p];
    m.sigma_ig[p] = c_ig[p] - m.mu_i[p] * m.mu_g[p];
    const double n1 = 2.0 * m.mu_i[p] * m.mu_g[p] + kC1;
    const double n2 = 2.0 * m.sigma_ig[p] + kC2;
    const double d1 = m.mu_i[p] * m.mu_i[p] + m.mu_g[p] * m.mu_g[p] + kC1;
    const double d2 = m.sigma_ii[p] + m.sigma_gg[p] + kC2;
    m.ssim_map[p] = (n1 * n2) / (d1 * d2);
  }
  return m;
}

}  // namespace

double loss_cc(const Image& j, const Image& d) {
  if (!j.same_shape(d)) throw std::invalid_argument("loss_cc: shape mismatch");
  double total = 0.0;
  for (int c = 0; c < j.channels(); ++c) {
    const ChannelStats sj = channel_stats(j, c);
    const ChannelStats sd = channel_stats(d, c);
    total += (sj.mean - 0.5) * (sj.mean - 0.5) +
             (sj.std - sd.std) * (sj.std - sd.std);
  }
  return total;
}

void loss_cc_backward(const Image& j, const Image& d, double weight,
                      Image& d_j) {
  const double count = static_cast<double>(j.height()) * j.width();
  for (int c = 0; c < j.channels(); ++c) {
    const ChannelStats sj = channel_stats(j, c);
    const ChannelStats sd = channel_stats(d, c);
    const double d_mean = 2.0 * (sj.mean - 0.5) / count;
    const double std_coeff =
        sj.var > kVarianceFloor
            ? 2.0 * (sj.std - sd.std) / (count * sj.std)
            : 0.0;
    for (int y = 0; y < j.height(); ++y)
      for (int x = 0; x < j.width(); ++x)
        d_j(y, x, c) +=
            weight * (d_mean + std_coeff * (j(y, x, c) - sj.mean));
  }
}

double loss_bs(const Image& d, double k) {
  double total = 0.0;
  for (std::size_t p = 0; p < d.size(); ++p) {
    const double v = d[p];
    total += (v > 0.0 ? v : 0.0) + k * (v < 0.0 ? -v : 0.0);
  }
  return total;
}

void loss_bs_backward(const Image& d, double k, double weight, Image& d_d) {
  for (std::size_t p = 0; p < d.size(); ++p) {
    const double v = d[p];
    d_d[p] += weight * (v > 0.0 ? 1.0 : (v < 0.0 ? -k : 0.0));
  }
}

double loss_dr(const Image& g, const Image& i, const Image& z_u) {
  if (!g.same_shape(i) || !g.same_extent(z_u))
    throw std::invalid_argument("loss_dr: shape mismatch");
  double total = 0.0;
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x)
      for (int c = 0; c < g.channels(); ++c)
        total += z_u(y, x) * std::abs(g(y, x, c) - i(y, x, c));
  return total;
}

void loss_dr_backward(const Image& g, const Image& i, const Image& z_u,
                      double weight, Image& d_i, Image& d_z) {
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x) {
      double abs_sum = 0.0;
      for (int c = 0; c < g.channels(); ++c) {
        const double r = g(y, x, c) - i(y, x, c);
        abs_sum += std::abs(r);
        d_i(y, x, c) += weight * z_u(y, x) * (-sign(r));
      }
      d_z(y, x) += weight * abs_sum;
    }
}

namespace {

double tv_one(const Image& z) {
  double total = 0.0;
  for (int y = 0; y + 1 < z.height(); ++y)
    for (int x = 0; x < z.width(); ++x)
      total += std::abs(z(y + 1, x) - z(y, x));
  for (int y = 0; y < z.height(); ++y)
    for (int x = 0; x + 1 < z.width(); ++x)
      total += std::abs(z(y, x + 1) - z(y, x));
  return total;
}

void tv_one_backward(const Image& z, double weight, Image& d_z) {
  for (int y = 0; y + 1 < z.height(); ++y)
    for (int x = 0; x < z.width(); ++x) {
      const double s = sign(z(y + 1, x) - z(y, x));
      d_z(y + 1, x) += weight * s;
      d_z(y, x) -= weight * s;
    }
  for (int y = 0; y < z.height(); ++y)
    for (int x = 0; x + 1 < z.width(); ++x) {
      const double s = sign(z(y, x + 1) - z(y, x));
      d_z(y, x + 1) += weight * s;
      d_z(y, x) -= weight * s;
    }
}

}  // namespace

double loss_tv(const Image& z_u, const Image& z_alpha) {
  if (z_u.height() < 2 || z_u.width() < 2)
    throw std::invalid_argument("loss_tv: maps must be at least 2x2");
  return tv_one(z_u) + tv_one(z_alpha);
}

void loss_tv_backward(const Image& z_u, const Image& z_alpha, double weight,
                      Image& d_z_u, Image& d_z_alpha) {
  tv_one_backward(z_u, weight, d_z_u);
  tv_one_backward(z_alpha, weight, d_z_alpha);
}

double loss_dssim(const Image& g, const Image& i) {
  return (1.0 - ssim_mean(g, i)) / 2.0;
}

double ssim_mean(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("ssim: shape mismatch");
  const SsimMaps m = ssim_maps(a, b);
  double total = 0.0;
  for (std::size_t p = 0; p < m.ssim_map.size(); ++p) total += m.ssim_map[p];
  return total / static_cast<double>(m.ssim_map.size());
}

void loss_dssim_backward(const Image& g, const Image& i, double weight,
                         Image& d_i) {
  const SsimMaps m = ssim_maps(g, i);
  const double scale =
      -weight / (2.0 * static_cast<double>(m.ssim_map.size()));

  // Gradients with respect to the three windowed moments of I.
  Image d_mu(i.height(), i.width(), i.channels());
  Image d_cii(i.height(), i.width(), i.channels());
  Image d_cig(i.height(), i.width(), i.channels());
  for (std::size_t p = 0; p < m.ssim_map.size(); ++p) {
    const double mu_i = m.mu_i[p], mu_g = m.mu_g[p];
    const double n1 = 2.0 * mu_i * mu_g + kC1;
    const double n2 = 2.0 * m.sigma_ig[p] + kC2;
    const double d1 = mu_i * mu_i + mu_g * mu_g + kC1;
    const double d2 = m.sigma_ii[p] + m.sigma_gg[p] + kC2;

    const double ds_dmu = 2.0 * (mu_g * n2 * d1 - mu_i * n1 * n2) / (d1 * d1 * d2);
    const double ds_dsii = -n1 * n2 / (d1 * d2 * d2);
    const double ds_dsig = 2.0 * n1 / (d1 * d2);

    const double gp = scale;  // dL/ds at this pixel
    d_mu[p] = gp * (ds_dmu + ds_dsii * (-2.0 * mu_i) + ds_dsig * (-mu_g));
    d_cii[p] = gp * ds_dsii;
    d_cig[p] = gp * ds_dsig;
  }

  const Image back_mu = conv_window(d_mu);
  const Image back_cii = conv_window(d_cii);
  const Image back_cig = conv_window(d_cig);
  for (std::size_t p = 0; p < d_i.size(); ++p)
    d_i[p] += back_mu[p] + back_cii[p] * 2.0 * i[p] + back_cig[p] * g[p];
}

LossBreakdown total_loss(const Image& g, const Image& i, const Image& j,
                         const Image& d, const Image& z_u,
                         const Image& z_alpha, const LossWeights& w) {
  LossBreakdown b;
  b.dr = loss_dr(g, i, z_u);
  b.ssim = loss_dssim(g, i);
  b.cc = loss_cc(j, d);
  b.bs = loss_bs(d);
  b.tv = loss_tv(z_u, z_alpha);
  b.total = w.dr * b.dr + w.ssim * b.ssim + w.cc * b.cc + w.bs * b.bs +
            w.tv * b.tv;
  return b;
}

}  // namespace tugs
