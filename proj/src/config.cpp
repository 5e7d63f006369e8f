#include "tugs/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace tugs {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  const auto b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

Eigen::Vector3d parse_vec3(const std::string& value, const std::string& key) {
  Eigen::Vector3d v;
  std::istringstream ss(value);
  std::string part;
  for (int c = 0; c < 3; ++c) {
    if (!std::getline(ss, part, ','))
      throw std::invalid_argument("config: key '" + key +
                                  "' needs 3 comma-separated values");
    v[c] = std::stod(trim(part));
  }
  return v;
}

bool parse_bool(const std::string& value, const std::string& key) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw std::invalid_argument("config: key '" + key + "' is not a boolean");
}

}  // namespace

std::map<std::string, std::string> parse_kv_file(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("config: cannot open " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: " + path.string() + ":" +
                               std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error("config: " + path.string() + ":" +
                               std::to_string(line_no) + ": empty key");
    kv[key] = value;
  }
  return kv;
}

TrainConfig parse_train_config(const std::map<std::string, std::string>& kv) {
  TrainConfig cfg;
  for (const auto& [key, value] : kv) {
    if (key == "steps") cfg.steps = std::stoi(value);
    else if (key == "rank") cfg.rank = std::stoi(value);
    else if (key == "seed") cfg.seed = std::stoull(value);
    else if (key == "factor_lr_init") cfg.lr.factor_init = std::stod(value);
    else if (key == "factor_lr_final") cfg.lr.factor_final = std::stod(value);
    else if (key == "medium_lr") cfg.lr.medium = std::stod(value);
    else if (key == "lambda_dr") cfg.weights.dr = std::stod(value);
    else if (key == "lambda_ssim") cfg.weights.ssim = std::stod(value);
    else if (key == "lambda_cc") cfg.weights.cc = std::stod(value);
    else if (key == "lambda_bs") cfg.weights.bs = std::stod(value);
    else if (key == "lambda_tv") cfg.weights.tv = std::stod(value);
    else if (key == "medium_enabled") cfg.medium_enabled = parse_bool(value, key);
    else if (key == "checkpoint_interval") cfg.checkpoint_interval = std::stoi(value);
    else if (key == "tds_grad_threshold") cfg.tds.grad_threshold = std::stod(value);
    else if (key == "tds_opacity_threshold") cfg.tds.opacity_threshold = std::stod(value);
    else if (key == "tds_reset_interval") cfg.tds.reset_interval = std::stoi(value);
    else if (key == "tds_densify_until") cfg.tds.densify_until = std::stoi(value);
    else if (key == "tds_interval") cfg.tds.interval = std::stoi(value);
    else if (key == "cp_max_iters") cfg.cp_max_iters = std::stoi(value);
    else if (key == "cp_tol") cfg.cp_tol = std::stod(value);
    else
      throw std::invalid_argument("config: unknown training key '" + key + "'");
  }
  return cfg;
}

SyntheticSceneSpec parse_synthetic_spec(
    const std::map<std::string, std::string>& kv) {
  SyntheticSceneSpec spec;
  for (const auto& [key, value] : kv) {
    if (key == "n_gaussians") spec.n_gaussians = std::stoi(value);
    else if (key == "width") spec.width = std::stoi(value);
    else if (key == "height") spec.height = std::stoi(value);
    else if (key == "n_views") spec.n_views = std::stoi(value);
    else if (key == "n_train") spec.n_train = std::stoi(value);
    else if (key == "camera_radius") spec.camera_radius = std::stod(value);
    else if (key == "medium") spec.medium = medium_mode_from_string(value);
    else if (key == "gamma_inf") spec.gamma_inf = parse_vec3(value, key);
    else if (key == "beta_b") spec.beta_b = parse_vec3(value, key);
    else if (key == "f_alpha") spec.f_alpha = parse_vec3(value, key);
    else if (key == "alpha_c") spec.alpha_c = parse_vec3(value, key);
    else if (key == "seed") spec.seed = std::stoull(value);
    else
      throw std::invalid_argument("config: unknown synth key '" + key + "'");
  }
  return spec;
}

}  // namespace tugs
