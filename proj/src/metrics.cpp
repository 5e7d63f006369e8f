#include "tugs/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace tugs {

double psnr(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("psnr: shape mismatch");
  double mse = 0.0;
  for (std::size_t p = 0; p < a.size(); ++p) {
    const double d = a[p] - b[p];
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace tugs
