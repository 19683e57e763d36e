#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cad/core/geometry.hpp"
#include "cad/core/sample.hpp"

namespace cad::io {

namespace fs = std::filesystem;

// KITTI velodyne layout: little-endian float32 x, y, z, intensity per point.
// Throws MalformedFile when the byte count is not a multiple of 16.
PointFrame decode_kitti_bin(std::string_view bytes);
std::string encode_kitti_bin(const PointFrame& frame);
PointFrame read_kitti_bin(const fs::path& path);
void write_kitti_bin(const fs::path& path, const PointFrame& frame);

// Tag sidecar: little-endian int32 object id, int32 flags (bit 0 = dynamic).
std::vector<PointTag> decode_tags(std::string_view bytes);
std::string encode_tags(const std::vector<PointTag>& tags);

// KITTI odometry poses: 12 reals per line, row-major [R | t]. Rotations within
// 1e-6 of orthonormal are projected back onto SO(3).
// Throws MalformedLine or NonOrthonormal.
std::vector<Pose> parse_poses(std::string_view text);
std::string format_poses(const std::vector<Pose>& poses);
std::vector<Pose> read_pose_file(const fs::path& path);
void write_pose_file(const fs::path& path, const std::vector<Pose>& poses);

// Labels carry their grid; readers reject a grid other than `spec`.
std::string label_to_json(const CadProfile& profile, const PolarGridSpec& spec);
CadProfile label_from_json(std::string_view text, const PolarGridSpec& spec);
// Grid header of a label file.
PolarGridSpec label_grid(std::string_view text);
void write_label(const fs::path& path, const CadProfile& profile, const PolarGridSpec& spec);
CadProfile read_label(const fs::path& path, const PolarGridSpec& spec);

enum class Split { LabeledTrain, UnlabeledTrain, Validation };
std::string_view to_string(Split s);

// Paths are relative to the manifest's directory.
struct SampleRecord {
  std::string id;
  std::vector<std::string> frame_paths;  // current first
  std::vector<std::string> tag_paths;    // empty, or one per frame
  std::vector<Pose> poses;
  std::optional<std::string> label_path;
  std::optional<std::string> scene_path;
  Split split = Split::Validation;
};

struct DatasetManifest {
  PolarGridSpec grid;
  int f = 2;
  std::vector<SampleRecord> records;

  // Throws MalformedFile on inconsistent records.
  void validate() const;
  std::vector<const SampleRecord*> in_split(Split s) const;
};

std::string manifest_to_jsonl(const DatasetManifest& m);
DatasetManifest manifest_from_jsonl(std::string_view text);
void write_manifest(const fs::path& path, const DatasetManifest& m);
DatasetManifest read_manifest(const fs::path& path);

struct SplitFractions {
  double labeled = 0.25, unlabeled = 0.5, validation = 0.25;
};

// Deterministic per seed. Sizes are floor(fraction * N) for the two training
// splits; the remainder goes to validation. Labeled-train draws only from
// records that have labels. Throws InsufficientLabels or ConfigError.
DatasetManifest split_dataset(const DatasetManifest& m, const SplitFractions& fractions, std::uint64_t seed);

// Writes frames, tags and the label of `sample` under root and returns the
// record with relative paths.
SampleRecord write_sample(const fs::path& root, const Sample& sample, const PolarGridSpec& spec);
// Loads frames (with poses and tags) and the label, if any.
Sample load_sample(const fs::path& root, const SampleRecord& record, const PolarGridSpec& spec);

std::string read_file(const fs::path& path);
void write_file(const fs::path& path, std::string_view bytes);

}  // namespace cad::io
