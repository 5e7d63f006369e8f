#pragma once

#include "tugs/image.hpp"

namespace tugs {

// Weights for (dr, ssim, cc, bs, tv) in the total objective.
struct LossWeights {
  double dr = 0.8;
  double ssim = 0.2;
  double cc = 1.0;
  double bs = 1.0;
  double tv = 1.0;
};

struct LossBreakdown {
  double dr = 0.0;
  double ssim = 0.0;
  double cc = 0.0;
  double bs = 0.0;
  double tv = 0.0;
  double total = 0.0;
};

/// Color-correction loss: per channel, squared distance of the restoration
/// mean from 0.5 plus squared mismatch between the restoration and
/// direct-signal standard deviations. D is treated as a target; gradients
/// flow into J only.
double loss_cc(const Image& j, const Image& d);
void loss_cc_backward(const Image& j, const Image& d, double weight,
                      Image& d_j);

/// Dark-channel-style backscatter loss: sum of relu(D) + k * relu(-D).
double loss_bs(const Image& d, double k = 1000.0);
void loss_bs_backward(const Image& d, double k, double weight, Image& d_d);

/// Depth-weighted L1 reconstruction loss: sum of z_u * |G - I|.
double loss_dr(const Image& g, const Image& i, const Image& z_u);
void loss_dr_backward(const Image& g, const Image& i, const Image& z_u,
                      double weight, Image& d_i, Image& d_z);

/// Anisotropic total variation of both depth maps.
double loss_tv(const Image& z_u, const Image& z_alpha);
void loss_tv_backward(const Image& z_u, const Image& z_alpha, double weight,
                      Image& d_z_u, Image& d_z_alpha);

/// (1 - SSIM) / 2 with the standard 11x11 Gaussian window (sigma 1.5),
/// C1 = 0.01^2, C2 = 0.03^2, zero-padded windows, mean over pixels/channels.
double loss_dssim(const Image& g, const Image& i);
void loss_dssim_backward(const Image& g, const Image& i, double weight,
                         Image& d_i);

/// Mean windowed SSIM value itself (used by the eval metrics).
double ssim_mean(const Image& a, const Image& b);

LossBreakdown total_loss(const Image& g, const Image& i, const Image& j,
                         const Image& d, const Image& z_u,
                         const Image& z_alpha, const LossWeights& w);

}  // namespace tugs
