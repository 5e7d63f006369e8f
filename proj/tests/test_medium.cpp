#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "fd_check.hpp"
#include "tugs/medium.hpp"

using namespace tugs;
using tugs::testing::fd_image_entry;
using tugs::testing::grads_agree;
using Eigen::Vector3d;

namespace {

Image random_image(int h, int w, int c, std::uint64_t seed, double lo,
                   double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(lo, hi);
  Image img(h, w, c);
  for (std::size_t p = 0; p < img.size(); ++p) img[p] = uni(rng);
  return img;
}

MediumParams test_params() {
  MediumParams m;
  m.gamma_inf = Vector3d(0.15, 0.25, 0.35);
  m.conv_weight = Vector3d(0.6, 0.9, 1.2);
  m.conv_bias = Vector3d(0.05, 0.1, -0.02);
  return m;
}

double compose_scalar(const Image& j, const Image& f, const Image& z,
                      const MediumParams& m, int y, int x, int c) {
  const double att = std::max(0.0, f(y, x, c));
  const double pre = m.conv_weight[c] * z(y, x) + m.conv_bias[c];
  const double b = m.gamma_inf[c] * (1.0 - std::exp(-std::max(0.0, pre)));
  return j(y, x, c) * std::exp(-att * z(y, x)) + b;
}

}  // namespace

TEST_CASE("backscatter basics") {
  MediumParams m;
  m.gamma_inf = Vector3d(0.3, 0.3, 0.3);
  m.conv_weight = Vector3d(0.5, 0.5, 0.5);
  m.conv_bias.setZero();

  // zero depth and zero bias -> zero backscatter
  const Image b0 = backscatter_image(Image::zeros(2, 2, 1), m);
  for (std::size_t p = 0; p < b0.size(); ++p) CHECK(b0[p] == 0.0);

  // saturation toward gamma_inf
  const Image bsat = backscatter_image(Image::constant(2, 2, 1, 1e6), m);
  for (std::size_t p = 0; p < bsat.size(); ++p)
    CHECK(bsat[p] == doctest::Approx(0.3).epsilon(1e-9));

  // scalar case: z = 2, w = 0.5, b = 0, gamma = 0.3
  const Image b1 = backscatter_image(Image::constant(1, 1, 1, 2.0), m);
  CHECK(b1(0, 0, 0) == doctest::Approx(0.3 * (1.0 - std::exp(-1.0))));
  CHECK(b1(0, 0, 0) == doctest::Approx(0.18964).epsilon(1e-4));
}

TEST_CASE("backscatter monotone in depth and bounded by gamma_inf") {
  const MediumParams m = test_params();
  double prev[3] = {-1.0, -1.0, -1.0};
  for (double z = 0.0; z <= 8.0; z += 0.25) {
    const Image b = backscatter_image(Image::constant(1, 1, 1, z), m);
    for (int c = 0; c < 3; ++c) {
      CHECK(b(0, 0, c) >= prev[c]);
      CHECK(b(0, 0, c) >= 0.0);
      CHECK(b(0, 0, c) <= m.gamma_inf[c]);
      prev[c] = b(0, 0, c);
    }
  }
}

TEST_CASE("compose_underwater identities") {
  const Image j = random_image(3, 3, 3, 1, 0.0, 1.0);
  const Image z = random_image(3, 3, 1, 2, 0.0, 3.0);
  const Image zero3 = Image::zeros(3, 3, 3);

  // F = 0 and B = 0 -> I = J bitwise
  const Image identity = compose_underwater(j, zero3, z, zero3);
  for (std::size_t p = 0; p < j.size(); ++p) CHECK(identity[p] == j[p]);

  // J = 1, F = 1, z = ln 2, B = 0 -> 0.5
  const Image ones = Image::constant(1, 1, 3, 1.0);
  const Image zl2 = Image::constant(1, 1, 1, std::log(2.0));
  const Image half = compose_underwater(ones, ones, zl2, Image::zeros(1, 1, 3));
  for (int c = 0; c < 3; ++c) CHECK(half(0, 0, c) == doctest::Approx(0.5));

  // far-field limit: saturated B dominates
  const MediumParams m = test_params();
  const Image zfar = Image::constant(1, 1, 1, 1e5);
  const Image far =
      compose_underwater(ones, ones, zfar, backscatter_image(zfar, m));
  for (int c = 0; c < 3; ++c)
    CHECK(far(0, 0, c) == doctest::Approx(m.gamma_inf[c]).epsilon(1e-9));

  CHECK_THROWS_AS(compose_underwater(j, zero3, Image::zeros(2, 2, 1), zero3),
                  std::invalid_argument);
}

TEST_CASE("compose_fog identities") {
  const Image j = random_image(4, 4, 3, 3, 0.0, 1.0);
  const Image z = random_image(4, 4, 1, 4, 0.0, 3.0);

  // alpha_c = 0 -> bitwise identity
  const Image out = compose_fog(j, z, Vector3d::Zero(), Vector3d(0.2, 0.2, 0.2));
  for (std::size_t p = 0; p < j.size(); ++p) CHECK(out[p] == j[p]);

  // far field -> gamma_inf
  const Image far = compose_fog(j, Image::constant(4, 4, 1, 1e6),
                                Vector3d(1, 1, 1), Vector3d(0.2, 0.3, 0.4));
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      CHECK(far(y, x, 0) == doctest::Approx(0.2));
      CHECK(far(y, x, 1) == doctest::Approx(0.3));
      CHECK(far(y, x, 2) == doctest::Approx(0.4));
    }

  // scalar: J=0.8, alpha=1, z=1, gamma=0.2
  const Image one = compose_fog(Image::constant(1, 1, 3, 0.8),
                                Image::constant(1, 1, 1, 1.0),
                                Vector3d(1, 1, 1), Vector3d(0.2, 0.2, 0.2));
  CHECK(one(0, 0, 0) == doctest::Approx(0.8 * std::exp(-1.0) +
                                        0.2 * (1.0 - std::exp(-1.0))));
  CHECK(one(0, 0, 0) == doctest::Approx(0.4207).epsilon(1e-4));
}

TEST_CASE("ame_backward: zero upstream gradient gives zero gradients") {
  const Image j = random_image(3, 3, 3, 5, 0.0, 1.0);
  const Image f = random_image(3, 3, 3, 6, -0.3, 0.8);
  const Image z = random_image(3, 3, 1, 7, 0.0, 3.0);
  const AmeGrads g =
      ame_backward(j, f, z, test_params(), Image::zeros(3, 3, 3));
  for (std::size_t p = 0; p < g.d_j.size(); ++p) CHECK(g.d_j[p] == 0.0);
  for (std::size_t p = 0; p < g.d_f_alpha.size(); ++p)
    CHECK(g.d_f_alpha[p] == 0.0);
  for (std::size_t p = 0; p < g.d_z_alpha.size(); ++p)
    CHECK(g.d_z_alpha[p] == 0.0);
  CHECK(g.d_gamma_inf.norm() == 0.0);
  CHECK(g.d_conv_weight.norm() == 0.0);
  CHECK(g.d_conv_bias.norm() == 0.0);
}

TEST_CASE("gamma gradient vanishes where the exponential term is one") {
  MediumParams m = test_params();
  m.conv_bias.setZero();
  const Image j = random_image(2, 2, 3, 8, 0.0, 1.0);
  const Image f = random_image(2, 2, 3, 9, 0.0, 0.5);
  const Image z = Image::zeros(2, 2, 1);
  const AmeGrads g =
      ame_backward(j, f, z, m, Image::constant(2, 2, 3, 1.0));
  CHECK(g.d_gamma_inf.norm() == 0.0);
}

TEST_CASE("ame gradients match finite differences on random 4x4 images") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Image j = random_image(4, 4, 3, 100 + seed, 0.0, 1.0);
    const Image f = random_image(4, 4, 3, 200 + seed, 0.05, 0.8);
    const Image z = random_image(4, 4, 1, 300 + seed, 0.1, 3.0);
    const Image d_i = random_image(4, 4, 3, 400 + seed, -1.0, 1.0);
    const MediumParams m = test_params();

    const AmeGrads g = ame_backward(j, f, z, m, d_i);

    auto objective = [&](const Image& jj, const Image& ff, const Image& zz,
                         const MediumParams& mm) {
      const Image out = compose_underwater(jj, ff, zz, backscatter_image(zz, mm));
      double acc = 0.0;
      for (std::size_t p = 0; p < out.size(); ++p) acc += d_i[p] * out[p];
      return acc;
    };

    for (std::size_t p = 0; p < j.size(); p += 5) {
      const double fd = fd_image_entry(
          [&](const Image& x) { return objective(x, f, z, m); }, j, p);
      CHECK(grads_agree(g.d_j[p], fd));
    }
    for (std::size_t p = 0; p < f.size(); p += 5) {
      const double fd = fd_image_entry(
          [&](const Image& x) { return objective(j, x, z, m); }, f, p);
      CHECK(grads_agree(g.d_f_alpha[p], fd));
    }
    for (std::size_t p = 0; p < z.size(); p += 3) {
      const double fd = fd_image_entry(
          [&](const Image& x) { return objective(j, f, x, m); }, z, p);
      CHECK(grads_agree(g.d_z_alpha[p], fd));
    }
    const double h = tugs::testing::kFdStep;
    for (int c = 0; c < 3; ++c) {
      MediumParams mp = m, mm = m;
      mp.gamma_inf[c] += h;
      mm.gamma_inf[c] -= h;
      CHECK(grads_agree(g.d_gamma_inf[c],
                        (objective(j, f, z, mp) - objective(j, f, z, mm)) /
                            (2 * h)));
      mp = m;
      mm = m;
      mp.conv_weight[c] += h;
      mm.conv_weight[c] -= h;
      CHECK(grads_agree(g.d_conv_weight[c],
                        (objective(j, f, z, mp) - objective(j, f, z, mm)) /
                            (2 * h)));
      mp = m;
      mm = m;
      mp.conv_bias[c] += h;
      mm.conv_bias[c] -= h;
      CHECK(grads_agree(g.d_conv_bias[c],
                        (objective(j, f, z, mp) - objective(j, f, z, mm)) /
                            (2 * h)));
    }
  }
}

TEST_CASE("dI/dJ equals the attenuation factor") {
  const Image j = random_image(4, 4, 3, 500, 0.0, 1.0);
  const Image f = random_image(4, 4, 3, 501, 0.1, 0.9);
  const Image z = random_image(4, 4, 1, 502, 0.1, 2.0);
  const MediumParams m = test_params();
  const AmeGrads g =
      ame_backward(j, f, z, m, Image::constant(4, 4, 3, 1.0));
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x)
      for (int c = 0; c < 3; ++c)
        CHECK(g.d_j(y, x, c) ==
              doctest::Approx(std::exp(-std::max(0.0, f(y, x, c)) * z(y, x)))
                  .epsilon(1e-12));
}

TEST_CASE("composition matches the per-pixel scalar formula") {
  const Image j = random_image(3, 5, 3, 600, 0.0, 1.0);
  const Image f = random_image(3, 5, 3, 601, -0.2, 0.9);
  const Image z = random_image(3, 5, 1, 602, 0.0, 3.0);
  const MediumParams m = test_params();
  const Image out = compose_underwater(j, f, z, backscatter_image(z, m));
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 5; ++x)
      for (int c = 0; c < 3; ++c)
        CHECK(out(y, x, c) ==
              doctest::Approx(compose_scalar(j, f, z, m, y, x, c))
                  .epsilon(1e-12));
}
