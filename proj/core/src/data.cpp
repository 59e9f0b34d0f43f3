// Copyright 2026 The nerfsr Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
#include "nerfsr/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "json.hpp"
#include "nerfsr/checkpoint.hpp"
#include "nerfsr/image.hpp"

namespace nerfsr {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("missing file: " + path.string());
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw FormatError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

Mat4 parse_matrix(const json& m, const fs::path& where) {
  if (!m.is_array() || m.size() < 3)
    throw FormatError("transform_matrix must be a 4x4 array in " + where.string());
  Mat4 out = Mat4::Identity();
  for (int r = 0; r < static_cast<int>(m.size()) && r < 4; ++r) {
    if (!m[r].is_array() || m[r].size() != 4)
      throw FormatError("transform_matrix row " + std::to_string(r) + " malformed in " + where.string());
    for (int c = 0; c < 4; ++c) out(r, c) = m[r][c].get<double>();
  }
  return out;
}

fs::path resolve_image(const fs::path& root, const std::string& file_path) {
  fs::path p = root / file_path;
  if (!p.has_extension()) p += ".png";
  return p.lexically_normal();
}

std::vector<View> load_blender_split(const fs::path& root, const std::string& split,
                                     const Vec3& background, double near, double far, bool required) {
  const fs::path meta_path = root / ("transforms_" + split + ".json");
  if (!fs::exists(meta_path)) {
    if (required) throw FormatError("missing file: " + meta_path.string());
    return {};
  }
  const json meta = read_json(meta_path);
  if (!meta.contains("camera_angle_x") || !meta.contains("frames"))
    throw FormatError(meta_path.string() + " lacks camera_angle_x or frames");
  const double angle = meta["camera_angle_x"].get<double>();
  std::vector<View> views;
  int index = 0;
  for (const auto& frame : meta["frames"]) {
    if (!frame.contains("file_path") || !frame.contains("transform_matrix"))
      throw FormatError("frame " + std::to_string(index) + " of " + meta_path.string() +
                        " lacks file_path or transform_matrix");
    const fs::path image_path = resolve_image(root, frame["file_path"].get<std::string>());
    if (!fs::exists(image_path)) throw FormatError("missing image: " + image_path.string());
    View v;
    v.name = image_path.stem().string();
    v.image = composite_alpha(read_png(image_path), background);
    const double focal = 0.5 * v.image.width / std::tan(0.5 * angle);
    v.camera = CameraModel::centered(v.image.width, v.image.height, focal,
                                     parse_matrix(frame["transform_matrix"], meta_path), near, far);
    try {
      v.camera.validate();
    } catch (const ConfigError& e) {
      throw FormatError(std::string(e.what()) + " (frame " + std::to_string(index) + " of " +
                        meta_path.string() + ")");
    }
    views.push_back(std::move(v));
    ++index;
  }
  return views;
}

Vec3 normalized(const Vec3& v) { return v / v.norm(); }

Mat4 view_matrix(const Vec3& z, const Vec3& up, const Vec3& pos) {
  const Vec3 v2 = normalized(z);
  const Vec3 v0 = normalized(up.cross(v2));
  const Vec3 v1 = normalized(v2.cross(v0));
  Mat4 m = Mat4::Identity();
  m.block<3, 1>(0, 0) = v0;
  m.block<3, 1>(0, 1) = v1;
  m.block<3, 1>(0, 2) = v2;
  m.block<3, 1>(0, 3) = pos;
  return m;
}

std::vector<fs::path> list_images(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::string ext = e.path().extension().string();
    for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (ext == ".png") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::string to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::Blender: return "blender";
    case DatasetKind::LLFF: return "llff";
    case DatasetKind::Toy: return "toy";
  }
  return "unknown";
}

std::uint64_t SceneDataset::fingerprint() const {
  std::uint64_t h = fnv1a(name.data(), name.size());
  for (const auto* split : {&train, &val, &test}) {
    const std::uint64_t count = split->size();
    h = fnv1a(&count, sizeof(count), h);
    for (const View& v : *split) {
      h = fnv1a(v.camera.pose.data(), sizeof(double) * 16, h);
      const double intr[6] = {v.camera.focal_x, v.camera.focal_y, v.camera.principal_x,
                              v.camera.principal_y, v.camera.near, v.camera.far};
      h = fnv1a(intr, sizeof(intr), h);
      h = checksum(v.image.data, h);
    }
  }
  return h;
}

void SceneDataset::validate() const {
  for (const auto* split : {&train, &val, &test}) {
    for (const View& v : *split) {
      v.camera.validate();
      if (v.image.height != v.camera.height || v.image.width != v.camera.width)
        throw ShapeError("view " + v.name + " image and camera resolutions differ");
      if (!split->empty() && !v.image.same_shape(split->front().image))
        throw ShapeError("views within a split must share resolution");
    }
  }
}

SceneDataset load_blender(const fs::path& root, const Vec3& background, double near, double far) {
  if (!fs::is_directory(root)) throw FormatError("dataset directory not found: " + root.string());
  SceneDataset ds;
  ds.kind = DatasetKind::Blender;
  ds.name = root.filename().string();
  ds.background = background;
  ds.train = load_blender_split(root, "train", background, near, far, true);
  ds.val = load_blender_split(root, "val", background, near, far, false);
  ds.test = load_blender_split(root, "test", background, near, far, true);
  ds.validate();
  return ds;
}

void write_blender_dataset(const SceneDataset& dataset, const fs::path& root) {
  fs::create_directories(root);
  for (const auto& [split, views] : {std::pair{std::string("train"), &dataset.train},
                                     std::pair{std::string("val"), &dataset.val},
                                     std::pair{std::string("test"), &dataset.test}}) {
    json meta;
    const double angle =
        views->empty() ? 0.6911112070083618
                       : 2.0 * std::atan(0.5 * views->front().camera.width / views->front().camera.focal_x);
    meta["camera_angle_x"] = angle;
    meta["frames"] = json::array();
    for (const View& v : *views) {
      const std::string rel = "./" + split + "/" + v.name;
      write_png(root / split / (v.name + ".png"), v.image);
      json m = json::array();
      for (int r = 0; r < 4; ++r) m.push_back({v.camera.pose(r, 0), v.camera.pose(r, 1), v.camera.pose(r, 2), v.camera.pose(r, 3)});
      meta["frames"].push_back({{"file_path", rel}, {"transform_matrix", m}});
    }
    std::ofstream out(root / ("transforms_" + split + ".json"));
    out << meta.dump(2) << "\n";
    if (!out) throw FormatError("cannot write " + (root / ("transforms_" + split + ".json")).string());
  }
}

Mat4 llff_pose_to_camera(const Eigen::Matrix<double, 3, 4>& pose) {
  Mat4 out = Mat4::Identity();
  out.block<3, 1>(0, 0) = pose.col(1);
  out.block<3, 1>(0, 1) = -pose.col(0);
  out.block<3, 1>(0, 2) = pose.col(2);
  out.block<3, 1>(0, 3) = pose.col(3);
  return out;
}

SceneDataset load_llff(const fs::path& root, const LlffOptions& options) {
  if (options.downsample < 1) throw ConfigError("LLFF downsample factor must be >= 1");
  const fs::path pb_path = root / "poses_bounds.npy";
  if (!fs::exists(pb_path)) throw FormatError("missing file: " + pb_path.string());
  const NpyArray pb = read_npy(pb_path);
  if (pb.shape.size() != 2 || pb.shape[1] != 17)
    throw FormatError(pb_path.string() + " must have shape N x 17, got " + shape_string(pb.shape));
  const auto n = static_cast<std::size_t>(pb.shape[0]);

  fs::path image_dir = root / ("images_" + std::to_string(options.downsample));
  int extra_downsample = 1;
  if (options.downsample == 1 || !fs::is_directory(image_dir)) {
    image_dir = root / "images";
    extra_downsample = options.downsample;
  }
  if (!fs::is_directory(image_dir)) throw FormatError("missing image directory under " + root.string());
  const std::vector<fs::path> images = list_images(image_dir);
  if (images.size() != n)
    throw FormatError("LLFF image count " + std::to_string(images.size()) + " in " +
                      image_dir.string() + " does not match " + std::to_string(n) + " pose rows");

  std::vector<Mat4> poses(n);
  std::vector<double> nears(n), fars(n);
  std::vector<double> hwf(3);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = &pb.data[i * 17];
    Eigen::Matrix<double, 3, 5> m;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 5; ++c) m(r, c) = row[r * 5 + c];
    poses[i] = llff_pose_to_camera(m.leftCols<4>());
    if (i == 0) hwf = {m(0, 4), m(1, 4), m(2, 4)};
    nears[i] = row[15];
    fars[i] = row[16];
    if (!(nears[i] > 0.0 && nears[i] < fars[i]))
      throw FormatError("LLFF bounds row " + std::to_string(i) + " violates 0 < near < far");
  }

  const double scale = 1.0 / (*std::min_element(nears.begin(), nears.end()) * options.bd_factor);
  for (std::size_t i = 0; i < n; ++i) {
    poses[i].block<3, 1>(0, 3) *= scale;
    nears[i] *= scale;
    fars[i] *= scale;
  }
  if (options.recenter && n > 0) {
    Vec3 center = Vec3::Zero(), z = Vec3::Zero(), up = Vec3::Zero();
    for (const Mat4& p : poses) {
      center += p.block<3, 1>(0, 3);
      z += p.block<3, 1>(0, 2);
      up += p.block<3, 1>(0, 1);
    }
    center /= static_cast<double>(n);
    const Mat4 inv = view_matrix(z, up, center).inverse();
    for (Mat4& p : poses) p = inv * p;
  }

  SceneDataset ds;
  ds.kind = DatasetKind::LLFF;
  ds.name = root.filename().string();
  ds.background = Vec3::Zero();
  if (options.ndc) {
    ds.box.lo = Vec3(-1.5, -1.67, -1.0);
    ds.box.hi = Vec3(1.5, 1.67, 1.0);
  }
  const double full_h = hwf[0], full_w = hwf[1], full_f = hwf[2];
  for (std::size_t i = 0; i < n; ++i) {
    Image img = read_png(images[i]);
    if (img.channels == 4) img = composite_alpha(img, Vec3::Zero());
    if (extra_downsample > 1) img = bilinear_downsample(img, extra_downsample);
    const int w = static_cast<int>(std::lround(full_w / options.downsample));
    const int h = static_cast<int>(std::lround(full_h / options.downsample));
    if (img.width != w || img.height != h)
      throw FormatError("image " + images[i].string() + " is " + std::to_string(img.width) + "x" +
                        std::to_string(img.height) + ", poses declare " + std::to_string(w) + "x" +
                        std::to_string(h) + " after downsampling");
    View v;
    v.name = images[i].stem().string();
    v.image = std::move(img);
    v.camera = CameraModel::centered(w, h, full_f / options.downsample, poses[i], nears[i], fars[i]);
    v.camera.ndc = options.ndc;
    // Re-orthonormalize the rotation against accumulated rounding.
    Eigen::JacobiSVD<Mat3> svd(v.camera.rotation(), Eigen::ComputeFullU | Eigen::ComputeFullV);
    v.camera.pose.block<3, 3>(0, 0) = svd.matrixU() * svd.matrixV().transpose();
    (i % 8 == 0 ? ds.test : ds.train).push_back(std::move(v));
  }
  ds.validate();
  return ds;
}

SceneDataset downsample_dataset(const SceneDataset& dataset, int ratio) {
  if (ratio < 1) throw ConfigError("downsample ratio must be >= 1");
  if (ratio == 1) return dataset;
  SceneDataset out = dataset;
  for (auto* split : {&out.train, &out.val, &out.test})
    for (View& v : *split) {
      v.image = bilinear_downsample(v.image, ratio);
      v.camera = downscale_camera(v.camera, ratio);
    }
  return out;
}

}  // namespace nerfsr
