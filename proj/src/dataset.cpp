#include "tugs/dataset.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "tugs/gaussian.hpp"
#include "tugs/png_io.hpp"
#include "tugs/renderer.hpp"

namespace tugs {

namespace {

using json = nlohmann::json;
using Eigen::Vector3d;

[[noreturn]] void load_error(const std::filesystem::path& file,
                             const std::string& what) {
  throw std::runtime_error("load_dataset: " + file.string() + ": " + what);
}

struct PlyProperty {
  std::string type;
  std::string name;
};

std::size_t ply_type_size(const std::string& type) {
  if (type == "char" || type == "uchar" || type == "int8" || type == "uint8")
    return 1;
  if (type == "short" || type == "ushort" || type == "int16" ||
      type == "uint16")
    return 2;
  if (type == "int" || type == "uint" || type == "int32" || type == "uint32" ||
      type == "float" || type == "float32")
    return 4;
  if (type == "double" || type == "float64") return 8;
  return 0;
}

void read_ply(const std::filesystem::path& path,
              std::vector<Vector3d>& points, std::vector<Vector3d>& colors) {
  std::ifstream in(path, std::ios::binary);
  if (!in) load_error(path, "cannot open");

  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0)
    load_error(path, "not a PLY file (missing 'ply' magic)");

  bool binary = false;
  long vertex_count = -1;
  std::vector<PlyProperty> props;
  bool in_vertex_element = false;

  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "comment" || word == "obj_info") continue;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "ascii")
        binary = false;
      else if (fmt == "binary_little_endian")
        binary = true;
      else
        load_error(path, "unsupported PLY format '" + fmt + "'");
    } else if (word == "element") {
      std::string name;
      long count = 0;
      ls >> name >> count;
      in_vertex_element = (name == "vertex");
      if (in_vertex_element) vertex_count = count;
    } else if (word == "property") {
      if (!in_vertex_element) continue;
      PlyProperty p;
      ls >> p.type;
      if (p.type == "list") load_error(path, "list properties unsupported");
      ls >> p.name;
      if (ply_type_size(p.type) == 0)
        load_error(path, "unknown property type '" + p.type + "'");
      props.push_back(p);
    } else if (word == "end_header") {
      break;
    }
  }
  if (vertex_count < 0) load_error(path, "malformed header: no vertex element");
  if (vertex_count == 0) load_error(path, "empty point cloud");

  int ix = -1, iy = -1, iz = -1, ir = -1, ig = -1, ib = -1;
  for (int i = 0; i < static_cast<int>(props.size()); ++i) {
    const std::string& n = props[i].name;
    if (n == "x") ix = i;
    if (n == "y") iy = i;
    if (n == "z") iz = i;
    if (n == "red") ir = i;
    if (n == "green") ig = i;
    if (n == "blue") ib = i;
  }
  if (ix < 0 || iy < 0 || iz < 0)
    load_error(path, "vertex element lacks x/y/z properties");
  const bool has_color = ir >= 0 && ig >= 0 && ib >= 0;

  points.clear();
  colors.clear();
  points.reserve(vertex_count);
  colors.reserve(vertex_count);

  auto push_vertex = [&](const std::vector<double>& values) {
    points.emplace_back(values[ix], values[iy], values[iz]);
    if (has_color)
      colors.emplace_back(srgb_to_linear(values[ir] / 255.0),
                          srgb_to_linear(values[ig] / 255.0),
                          srgb_to_linear(values[ib] / 255.0));
    else
      colors.emplace_back(0.5, 0.5, 0.5);
  };

  if (binary) {
    for (long v = 0; v < vertex_count; ++v) {
      std::vector<double> values(props.size(), 0.0);
      for (std::size_t p = 0; p < props.size(); ++p) {
        unsigned char buf[8];
        const std::size_t sz = ply_type_size(props[p].type);
        if (!in.read(reinterpret_cast<char*>(buf), sz))
          load_error(path, "truncated vertex data");
        const std::string& t = props[p].type;
        if (t == "float" || t == "float32") {
          float f;
          std::memcpy(&f, buf, 4);
          values[p] = f;
        } else if (t == "double" || t == "float64") {
          double d;
          std::memcpy(&d, buf, 8);
          values[p] = d;
        } else if (t == "uchar" || t == "uint8") {
          values[p] = buf[0];
        } else if (t == "char" || t == "int8") {
          values[p] = static_cast<signed char>(buf[0]);
        } else if (t == "ushort" || t == "uint16") {
          std::uint16_t u;
          std::memcpy(&u, buf, 2);
          values[p] = u;
        } else if (t == "short" || t == "int16") {
          std::int16_t s;
          std::memcpy(&s, buf, 2);
          values[p] = s;
        } else if (t == "uint" || t == "uint32") {
          std::uint32_t u;
          std::memcpy(&u, buf, 4);
          values[p] = u;
        } else {
          std::int32_t s;
          std::memcpy(&s, buf, 4);
          values[p] = s;
        }
      }
      push_vertex(values);
    }
  } else {
    for (long v = 0; v < vertex_count; ++v) {
      std::vector<double> values(props.size(), 0.0);
      for (std::size_t p = 0; p < props.size(); ++p)
        if (!(in >> values[p])) load_error(path, "truncated ascii vertex data");
      push_vertex(values);
    }
  }
}

void write_ply(const std::filesystem::path& path,
               const std::vector<Vector3d>& points,
               const std::vector<Vector3d>& colors) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("write_ply: cannot open " + path.string());
  out << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << points.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "end_header\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (int a = 0; a < 3; ++a) {
      const float f = static_cast<float>(points[i][a]);
      out.write(reinterpret_cast<const char*>(&f), 4);
    }
    for (int a = 0; a < 3; ++a) {
      const double srgb = linear_to_srgb(std::clamp(colors[i][a], 0.0, 1.0));
      const unsigned char b =
          static_cast<unsigned char>(std::lround(srgb * 255.0));
      out.write(reinterpret_cast<const char*>(&b), 1);
    }
  }
}

Camera camera_from_json(const json& view, const std::filesystem::path& file) {
  Camera cam;
  try {
    cam.width = view.at("width").get<int>();
    cam.height = view.at("height").get<int>();
    cam.fx = view.at("fx").get<double>();
    cam.fy = view.at("fy").get<double>();
    cam.cx = view.at("cx").get<double>();
    cam.cy = view.at("cy").get<double>();
    cam.near = view.value("near", 0.01);
    const auto pose = view.at("world_to_camera");
    if (pose.size() != 16)
      load_error(file, "world_to_camera must have 16 entries");
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c)
        cam.world_to_camera(r, c) = pose[r * 4 + c].get<double>();
  } catch (const json::exception& e) {
    load_error(file, std::string("bad view entry: ") + e.what());
  }
  try {
    cam.validate();
  } catch (const std::exception& e) {
    load_error(file, e.what());
  }
  return cam;
}

}  // namespace

std::string to_string(MediumMode mode) {
  switch (mode) {
    case MediumMode::kNone: return "none";
    case MediumMode::kFog: return "fog";
    case MediumMode::kUnderwater: return "underwater";
  }
  return "none";
}

MediumMode medium_mode_from_string(const std::string& s) {
  if (s == "none") return MediumMode::kNone;
  if (s == "fog") return MediumMode::kFog;
  if (s == "underwater") return MediumMode::kUnderwater;
  throw std::invalid_argument("unknown medium mode '" + s + "'");
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  ds.root = dir;

  const std::filesystem::path cam_file = dir / "cameras.json";
  std::ifstream in(cam_file);
  if (!in) load_error(cam_file, "missing file");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    load_error(cam_file, std::string("invalid json: ") + e.what());
  }

  if (!doc.contains("views") || !doc["views"].is_array() ||
      doc["views"].empty())
    load_error(cam_file, "missing or empty 'views' array");

  for (const auto& v : doc["views"]) {
    DatasetView view;
    view.camera = camera_from_json(v, cam_file);
    if (!v.contains("image")) load_error(cam_file, "view lacks 'image'");
    view.image = v["image"].get<std::string>();
    if (!std::filesystem::exists(dir / view.image))
      load_error(dir / view.image, "referenced image does not exist");
    ds.views.push_back(std::move(view));
  }

  const int n_views = static_cast<int>(ds.views.size());
  if (doc.contains("split")) {
    for (const auto& i : doc["split"].value("train", json::array()))
      ds.train_indices.push_back(i.get<int>());
    for (const auto& i : doc["split"].value("eval", json::array()))
      ds.eval_indices.push_back(i.get<int>());
    for (int i : ds.train_indices)
      if (i < 0 || i >= n_views) load_error(cam_file, "train index out of range");
    for (int i : ds.eval_indices)
      if (i < 0 || i >= n_views) load_error(cam_file, "eval index out of range");
  }
  if (ds.train_indices.empty())
    for (int i = 0; i < n_views; ++i) ds.train_indices.push_back(i);

  read_ply(dir / "points.ply", ds.points, ds.colors);
  return ds;
}

Image load_view_image(const Dataset& dataset, int view_index) {
  return read_png(dataset.root / dataset.views.at(view_index).image);
}

std::vector<TrainView> gather_views(const Dataset& dataset,
                                    const std::vector<int>& indices) {
  std::vector<TrainView> out;
  out.reserve(indices.size());
  for (int i : indices)
    out.push_back({dataset.views.at(i).camera, load_view_image(dataset, i)});
  return out;
}

Dataset generate_synthetic(const SyntheticSceneSpec& spec,
                           const std::filesystem::path& out_dir) {
  using L = GaussianLayout;
  if (spec.n_gaussians < 1 || spec.n_views < 1 || spec.n_train < 1 ||
      spec.n_train > spec.n_views)
    throw std::invalid_argument("generate_synthetic: bad counts");

  std::filesystem::create_directories(out_dir / "images");
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  // Seeded opaque Gaussians in a unit box around the origin. Placement is a
  // jittered grid with footprints wide enough to tile the frame from the
  // camera ring: every pixel sees medium-attenuated scene content, the way
  // every pixel of a real underwater photograph does. Holes would show the
  // empty background instead, which no medium model explains.
  const int n = spec.n_gaussians;
  const int grid_cols = static_cast<int>(std::ceil(std::sqrt(n)));
  const int grid_rows = (n + grid_cols - 1) / grid_cols;
  Eigen::MatrixXd slice(n, L::kParamCount);
  slice.setZero();
  std::vector<Vector3d> points(n), colors(n);
  constexpr double kShC0 = 0.28209479177387814;
  for (int i = 0; i < n; ++i) {
    const double gx = (i % grid_cols + 0.5) / grid_cols - 0.5;
    const double gy = (i / grid_cols + 0.5) / grid_rows - 0.5;
    const Vector3d pos(1.5 * gx + 0.12 * (uni(rng) - 0.5),
                       1.5 * gy + 0.12 * (uni(rng) - 0.5),
                       0.5 * (uni(rng) - 0.5));
    // A fifth of the content is near-black. Shadowed regions are what let a
    // dark-channel prior pin the backscatter curve against depth; without
    // them the water color and attenuated scene colors are inseparable.
    const bool dark = uni(rng) < 0.2;
    const Vector3d color = dark
        ? Vector3d(0.01 + 0.04 * uni(rng), 0.01 + 0.04 * uni(rng),
                   0.01 + 0.04 * uni(rng))
        : Vector3d(0.2 + 0.65 * uni(rng), 0.2 + 0.65 * uni(rng),
                   0.2 + 0.65 * uni(rng));
    const double sigma = 0.18 + 0.08 * uni(rng);
    const double opacity = 0.85 + 0.1 * uni(rng);
    Eigen::Vector4d q(0.5 + uni(rng), uni(rng) - 0.5, uni(rng) - 0.5,
                      uni(rng) - 0.5);
    q.normalize();

    points[i] = pos;
    colors[i] = color;
    slice.block<1, 3>(i, L::kPosition) = pos.transpose();
    slice.block<1, 3>(i, L::kLogScale).setConstant(std::log(sigma));
    slice.block<1, 4>(i, L::kRotation) = q.transpose();
    slice(i, L::kOpacity) = logit(opacity);
    for (int c = 0; c < 3; ++c)
      slice(i, L::sh_index(0, c)) = (color[c] - 0.5) / kShC0;
  }

  json cams;
  cams["format"] = "tugs-cameras-v1";
  cams["views"] = json::array();

  for (int v = 0; v < spec.n_views; ++v) {
    const double azimuth = 2.0 * M_PI * v / spec.n_views;
    const double elevation = (58.0 + 8.0 * (v % 2)) * M_PI / 180.0;
    const double radius = spec.camera_radius * (0.9 + 0.12 * (v % 3));
    const Vector3d eye(radius * std::cos(azimuth) * std::cos(elevation),
                       radius * std::sin(azimuth) * std::cos(elevation),
                       radius * std::sin(elevation));
    Camera cam;
    cam.width = spec.width;
    cam.height = spec.height;
    cam.fx = cam.fy = 1.7 * spec.width;
    cam.cx = spec.width / 2.0;
    cam.cy = spec.height / 2.0;
    cam.near = 0.05;
    cam.world_to_camera = look_at(eye, Vector3d::Zero());

    const RenderOutput clean = render(slice, cam);
    Image gt;
    switch (spec.medium) {
      case MediumMode::kNone:
        gt = clean.color;
        break;
      case MediumMode::kFog:
        gt = compose_fog(clean.color, clean.depth, spec.alpha_c,
                         spec.gamma_inf);
        break;
      case MediumMode::kUnderwater: {
        gt = Image(spec.height, spec.width, 3);
        for (int y = 0; y < spec.height; ++y)
          for (int x = 0; x < spec.width; ++x) {
            const double z = clean.depth(y, x);
            for (int c = 0; c < 3; ++c) {
              const double att = std::exp(-spec.f_alpha[c] * z);
              const double back =
                  spec.gamma_inf[c] * (1.0 - std::exp(-spec.beta_b[c] * z));
              gt(y, x, c) = clean.color(y, x, c) * att + back;
            }
          }
        break;
      }
    }

    char name[64];
    std::snprintf(name, sizeof(name), "images/view_%04d.png", v);
    write_png16(out_dir / name, gt);

    json jv;
    jv["image"] = name;
    jv["width"] = cam.width;
    jv["height"] = cam.height;
    jv["fx"] = cam.fx;
    jv["fy"] = cam.fy;
    jv["cx"] = cam.cx;
    jv["cy"] = cam.cy;
    jv["near"] = cam.near;
    json pose = json::array();
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) pose.push_back(cam.world_to_camera(r, c));
    jv["world_to_camera"] = pose;
    cams["views"].push_back(jv);
  }

  json split;
  split["train"] = json::array();
  split["eval"] = json::array();
  for (int v = 0; v < spec.n_train; ++v) split["train"].push_back(v);
  for (int v = spec.n_train; v < spec.n_views; ++v) split["eval"].push_back(v);
  cams["split"] = split;

  {
    std::ofstream out(out_dir / "cameras.json");
    out << cams.dump(2) << "\n";
  }
  write_ply(out_dir / "points.ply", points, colors);
  {
    json truth;
    truth["medium"] = to_string(spec.medium);
    truth["gamma_inf"] = {spec.gamma_inf[0], spec.gamma_inf[1],
                          spec.gamma_inf[2]};
    truth["beta_b"] = {spec.beta_b[0], spec.beta_b[1], spec.beta_b[2]};
    truth["f_alpha"] = {spec.f_alpha[0], spec.f_alpha[1], spec.f_alpha[2]};
    truth["alpha_c"] = {spec.alpha_c[0], spec.alpha_c[1], spec.alpha_c[2]};
    std::ofstream out(out_dir / "medium_truth.json");
    out << truth.dump(2) << "\n";
  }

  return load_dataset(out_dir);
}

SyntheticTruth load_synthetic_truth(const std::filesystem::path& dataset_dir) {
  const std::filesystem::path file = dataset_dir / "medium_truth.json";
  std::ifstream in(file);
  if (!in)
    throw std::runtime_error("load_synthetic_truth: missing " + file.string());
  json doc;
  in >> doc;
  SyntheticTruth t;
  t.medium = medium_mode_from_string(doc.at("medium").get<std::string>());
  for (int c = 0; c < 3; ++c) {
    t.gamma_inf[c] = doc.at("gamma_inf")[c].get<double>();
    t.beta_b[c] = doc.at("beta_b")[c].get<double>();
    t.f_alpha[c] = doc.at("f_alpha")[c].get<double>();
    t.alpha_c[c] = doc.at("alpha_c")[c].get<double>();
  }
  return t;
}

}  // namespace tugs
