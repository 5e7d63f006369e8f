#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "tugs/camera.hpp"
#include "tugs/image.hpp"
#include "tugs/trainer.hpp"

namespace tugs {

struct DatasetView {
  Camera camera;
  std::string image;  // path relative to the dataset root
};

struct Dataset {
  std::filesystem::path root;
  std::vector<DatasetView> views;
  std::vector<Eigen::Vector3d> points;
  std::vector<Eigen::Vector3d> colors;  // linear rgb in [0, 1]
  std::vector<int> train_indices;
  std::vector<int> eval_indices;
};

/// Loads a dataset directory: cameras.json (intrinsics, 4x4 pose, image path,
/// train/eval split), points.ply (ascii or binary little-endian; x,y,z
/// float32, red/green/blue uint8) and the referenced PNG images. Poses are
/// validated orthonormal within 1e-4. Errors carry the offending file.
Dataset load_dataset(const std::filesystem::path& dir);

/// Decodes one view's ground-truth image to linear rgb.
Image load_view_image(const Dataset& dataset, int view_index);

/// Train views (camera + decoded image) for the chosen index list.
std::vector<TrainView> gather_views(const Dataset& dataset,
                                    const std::vector<int>& indices);

enum class MediumMode { kNone, kFog, kUnderwater };

struct SyntheticSceneSpec {
  int n_gaussians = 30;
  int width = 64;
  int height = 64;
  int n_views = 14;
  int n_train = 12;
  double camera_radius = 2.5;
  MediumMode medium = MediumMode::kUnderwater;
  Eigen::Vector3d gamma_inf{0.12, 0.22, 0.32};  // shared by fog and water
  Eigen::Vector3d beta_b{0.9, 1.1, 1.3};        // underwater backscatter rate
  Eigen::Vector3d f_alpha{0.35, 0.25, 0.18};    // underwater attenuation
  Eigen::Vector3d alpha_c{0.4, 0.5, 0.6};       // fog attenuation
  std::uint64_t seed = 0;
};

struct SyntheticTruth {
  MediumMode medium = MediumMode::kNone;
  Eigen::Vector3d gamma_inf = Eigen::Vector3d::Zero();
  Eigen::Vector3d beta_b = Eigen::Vector3d::Zero();
  Eigen::Vector3d f_alpha = Eigen::Vector3d::Zero();
  Eigen::Vector3d alpha_c = Eigen::Vector3d::Zero();
};

/// Renders seeded random opaque Gaussians in a unit box, applies the chosen
/// medium model with the rendered depth maps, and writes a complete dataset
/// directory (cameras.json, points.ply, 16-bit PNGs) plus a
/// medium_truth.json sidecar with the generating parameters.
Dataset generate_synthetic(const SyntheticSceneSpec& spec,
                           const std::filesystem::path& out_dir);

SyntheticTruth load_synthetic_truth(const std::filesystem::path& dataset_dir);

std::string to_string(MediumMode mode);
MediumMode medium_mode_from_string(const std::string& s);

}  // namespace tugs
