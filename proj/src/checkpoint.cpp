#include "tugs/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace tugs {

namespace {

// The format is little-endian; so are all platforms this builds on.
static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

void write_matrix_f32(std::ostream& out, const Eigen::MatrixXd& m) {
  std::vector<float> buf(static_cast<std::size_t>(m.rows()) * m.cols());
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      buf[i++] = static_cast<float>(m(r, c));
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

Eigen::MatrixXd read_matrix_f32(std::istream& in, int rows, int cols) {
  std::vector<float> buf(static_cast<std::size_t>(rows) * cols);
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  Eigen::MatrixXd m(rows, cols);
  std::size_t i = 0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = buf[i++];
  return m;
}

void write_vec3_f32(std::ostream& out, const Eigen::Vector3d& v) {
  for (int c = 0; c < 3; ++c) {
    const float f = static_cast<float>(v[c]);
    out.write(reinterpret_cast<const char*>(&f), sizeof(f));
  }
}

Eigen::Vector3d read_vec3_f32(std::istream& in) {
  Eigen::Vector3d v;
  for (int c = 0; c < 3; ++c) {
    float f = 0.0f;
    in.read(reinterpret_cast<char*>(&f), sizeof(f));
    v[c] = f;
  }
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const CpFactors& factors, const MediumParams& medium) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out)
      throw std::runtime_error("save_checkpoint: cannot open " + tmp.string());
    out.write("TUGS", 4);
    write_u32(out, kCheckpointVersion);
    write_u32(out, static_cast<std::uint32_t>(factors.rank()));
    write_u32(out, static_cast<std::uint32_t>(factors.num_gaussians()));
    write_u32(out, static_cast<std::uint32_t>(factors.params_per_gaussian()));
    write_matrix_f32(out, factors.medium_factor);
    write_matrix_f32(out, factors.number_factor);
    write_matrix_f32(out, factors.gaussian_template);
    write_vec3_f32(out, medium.gamma_inf);
    write_vec3_f32(out, medium.conv_weight);
    write_vec3_f32(out, medium.conv_bias);
    if (!out)
      throw std::runtime_error("save_checkpoint: write failed for " +
                               tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("load_checkpoint: cannot open " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (std::memcmp(magic, "TUGS", 4) != 0)
    throw std::runtime_error("load_checkpoint: bad magic in " + path.string());
  const std::uint32_t version = read_u32(in);
  if (version != kCheckpointVersion)
    throw std::runtime_error("load_checkpoint: unsupported version " +
                             std::to_string(version));
  const int rank = static_cast<int>(read_u32(in));
  const int n = static_cast<int>(read_u32(in));
  const int m = static_cast<int>(read_u32(in));

  Checkpoint ckpt;
  ckpt.factors.medium_factor = read_matrix_f32(in, 2, rank);
  ckpt.factors.number_factor = read_matrix_f32(in, n, rank);
  ckpt.factors.gaussian_template = read_matrix_f32(in, m, rank);
  ckpt.medium.gamma_inf = read_vec3_f32(in);
  ckpt.medium.conv_weight = read_vec3_f32(in);
  ckpt.medium.conv_bias = read_vec3_f32(in);
  if (!in)
    throw std::runtime_error("load_checkpoint: truncated file " +
                             path.string());
  return ckpt;
}

}  // namespace tugs
