#pragma once

#include <cstddef>
#include <vector>

namespace tugs {

// Row-major H x W x C image of doubles; C is 3 for color, 1 for depth/alpha.
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels)
      : height_(height),
        width_(width),
        channels_(channels),
        data_(static_cast<std::size_t>(height) * width * channels, 0.0) {}

  static Image zeros(int height, int width, int channels) {
    return Image(height, width, channels);
  }
  static Image constant(int height, int width, int channels, double value) {
    Image img(height, width, channels);
    for (double& v : img.data_) v = value;
    return img;
  }

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(int y, int x, int c = 0) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  double operator()(int y, int x, int c = 0) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Image& other) const {
    return height_ == other.height_ && width_ == other.width_ &&
           channels_ == other.channels_;
  }
  bool same_extent(const Image& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

}  // namespace tugs
