#include "cad/io/dataset_io.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cad/core/error.hpp"

namespace cad::io {
namespace {

using nlohmann::json;

constexpr double kReorthoTolerance = 1e-6;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(std::string_view s, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[at + i])) << (8 * i);
  return v;
}

Pose pose_from_values(const std::array<double, 12>& v, const std::string& where) {
  for (double x : v) {
    if (!std::isfinite(x)) fail(ErrorCode::MalformedLine, where + ": non-finite pose entry");
  }
  Matrix3 r;
  r << v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10];
  const Vector3 t(v[3], v[7], v[11]);
  if (!is_orthonormal(r, kReorthoTolerance)) fail(ErrorCode::NonOrthonormal, where + ": rotation is not orthonormal");
  if (!is_orthonormal(r, Pose::kTolerance)) {
    Eigen::JacobiSVD<Matrix3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
    r = svd.matrixU() * svd.matrixV().transpose();
  }
  return Pose(r, t);
}

std::array<double, 12> pose_values(const Pose& p) {
  const Matrix3& r = p.rotation();
  const Vector3& t = p.translation();
  return {r(0, 0), r(0, 1), r(0, 2), t.x(), r(1, 0), r(1, 1), r(1, 2), t.y(), r(2, 0), r(2, 1), r(2, 2), t.z()};
}

json grid_json(const PolarGridSpec& g) {
  return {{"max_radius", g.max_radius}, {"z_min", g.z_min}, {"z_max", g.z_max}, {"n_r", g.n_r}, {"n_phi", g.n_phi}};
}

PolarGridSpec grid_from(const json& j) {
  PolarGridSpec g{j.at("max_radius").get<double>(), j.at("z_min").get<double>(), j.at("z_max").get<double>(),
                  j.at("n_r").get<int>(), j.at("n_phi").get<int>()};
  try {
    g.validate();
  } catch (const Error& e) {
    fail(ErrorCode::MalformedFile, std::string("invalid grid: ") + e.what());
  }
  return g;
}

Split split_from(const std::string& s) {
  if (s == "labeled") return Split::LabeledTrain;
  if (s == "unlabeled") return Split::UnlabeledTrain;
  if (s == "validation") return Split::Validation;
  fail(ErrorCode::MalformedFile, "unknown split '" + s + "'");
}

// Runs a JSON decoding step, mapping library exceptions to MalformedFile.
template <typename F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    fail(ErrorCode::MalformedFile, std::string(what) + ": " + e.what());
  }
}

}  // namespace

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) fail(ErrorCode::Io, "read failed for " + path.string());
  return ss.str();
}

void write_file(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) fail(ErrorCode::Io, "cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::Io, "write failed for " + path.string());
}

// ---------------------------------------------------------------- KITTI

PointFrame decode_kitti_bin(std::string_view bytes) {
  if (bytes.size() % 16 != 0) {
    fail(ErrorCode::MalformedFile, "point cloud size " + std::to_string(bytes.size()) + " is not a multiple of 16");
  }
  PointFrame f;
  f.points.resize(bytes.size() / 16);
  for (std::size_t i = 0; i < f.points.size(); ++i) {
    const std::size_t at = 16 * i;
    f.points[i] = {std::bit_cast<float>(get_u32(bytes, at)), std::bit_cast<float>(get_u32(bytes, at + 4)),
                   std::bit_cast<float>(get_u32(bytes, at + 8)), std::bit_cast<float>(get_u32(bytes, at + 12))};
  }
  return f;
}

std::string encode_kitti_bin(const PointFrame& frame) {
  std::string out;
  out.reserve(frame.points.size() * 16);
  for (const Point3& p : frame.points) {
    for (double v : {p.x, p.y, p.z, p.intensity}) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

PointFrame read_kitti_bin(const fs::path& path) { return decode_kitti_bin(read_file(path)); }

void write_kitti_bin(const fs::path& path, const PointFrame& frame) { write_file(path, encode_kitti_bin(frame)); }

std::vector<PointTag> decode_tags(std::string_view bytes) {
  if (bytes.size() % 8 != 0) fail(ErrorCode::MalformedFile, "tag file size is not a multiple of 8");
  std::vector<PointTag> tags(bytes.size() / 8);
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const std::uint32_t flags = get_u32(bytes, 8 * i + 4);
    if (flags > 1) fail(ErrorCode::MalformedFile, "unknown tag flags");
    tags[i] = {std::bit_cast<std::int32_t>(get_u32(bytes, 8 * i)), flags == 1};
  }
  return tags;
}

std::string encode_tags(const std::vector<PointTag>& tags) {
  std::string out;
  out.reserve(tags.size() * 8);
  for (const PointTag& t : tags) {
    put_u32(out, std::bit_cast<std::uint32_t>(t.object_id));
    put_u32(out, t.dynamic ? 1u : 0u);
  }
  return out;
}

// ---------------------------------------------------------------- poses

std::vector<Pose> parse_poses(std::string_view text) {
  std::vector<Pose> poses;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    const std::string where = "pose line " + std::to_string(line_no);
    std::array<double, 12> v{};
    int n = 0;
    std::size_t i = 0;
    auto space = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
    while (true) {
      while (i < line.size() && space(line[i])) ++i;
      if (i == line.size()) break;
      if (n == 12) fail(ErrorCode::MalformedLine, where + ": more than 12 fields");
      double x = 0;
      const auto [end, ec] = std::from_chars(line.data() + i, line.data() + line.size(), x);
      const std::size_t used = static_cast<std::size_t>(end - line.data());
      if (ec != std::errc() || (used < line.size() && !space(line[used]))) {
        fail(ErrorCode::MalformedLine, where + ": field " + std::to_string(n + 1) + " is not a number");
      }
      v[n++] = x;
      i = used;
    }
    if (n == 0) continue;
    if (n != 12) fail(ErrorCode::MalformedLine, where + ": expected 12 fields, got " + std::to_string(n));
    poses.push_back(pose_from_values(v, where));
  }
  return poses;
}

std::string format_poses(const std::vector<Pose>& poses) {
  std::string out;
  char buf[32];
  for (const Pose& p : poses) {
    const auto v = pose_values(p);
    for (int i = 0; i < 12; ++i) {
      const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v[i]);
      out.append(buf, end);
      out.push_back(i == 11 ? '\n' : ' ');
    }
  }
  return out;
}

std::vector<Pose> read_pose_file(const fs::path& path) { return parse_poses(read_file(path)); }

void write_pose_file(const fs::path& path, const std::vector<Pose>& poses) { write_file(path, format_poses(poses)); }

// ---------------------------------------------------------------- labels

std::string label_to_json(const CadProfile& profile, const PolarGridSpec& spec) {
  profile.validate(spec);
  json j;
  j["format"] = "cad-label";
  j["version"] = 1;
  j["grid"] = grid_json(spec);
  j["labeled"] = profile.labeled;
  j["depth_index"] = profile.depth_index;
  j["confidence"] = profile.confidence;
  if (profile.categories) {
    json cats = json::array();
    for (Category c : *profile.categories) cats.push_back(std::string(to_string(c)));
    j["categories"] = cats;
  } else {
    j["categories"] = nullptr;
  }
  return j.dump() + "\n";
}

CadProfile label_from_json(std::string_view text, const PolarGridSpec& spec) {
  return guarded("label", [&] {
    const json j = json::parse(text);
    if (j.at("format") != "cad-label" || j.at("version") != 1) fail(ErrorCode::MalformedFile, "not a cad-label v1 file");
    const PolarGridSpec grid = grid_from(j.at("grid"));
    if (!(grid == spec)) fail(ErrorCode::SpecMismatch, "label grid does not match the dataset grid");
    CadProfile p;
    p.labeled = j.at("labeled").get<bool>();
    p.depth_index = j.at("depth_index").get<std::vector<int>>();
    p.confidence = j.at("confidence").get<std::vector<double>>();
    if (!j.at("categories").is_null()) {
      std::vector<Category> cats;
      for (const auto& c : j.at("categories")) {
        try {
          cats.push_back(category_from_string(c.get<std::string>()));
        } catch (const Error& e) {
          fail(ErrorCode::MalformedFile, e.what());
        }
      }
      p.categories = std::move(cats);
    }
    p.validate(spec);
    return p;
  });
}

PolarGridSpec label_grid(std::string_view text) {
  return guarded("label", [&] {
    const json j = json::parse(text);
    if (j.at("format") != "cad-label" || j.at("version") != 1) fail(ErrorCode::MalformedFile, "not a cad-label v1 file");
    return grid_from(j.at("grid"));
  });
}

void write_label(const fs::path& path, const CadProfile& profile, const PolarGridSpec& spec) {
  write_file(path, label_to_json(profile, spec));
}

CadProfile read_label(const fs::path& path, const PolarGridSpec& spec) { return label_from_json(read_file(path), spec); }

// ---------------------------------------------------------------- manifest

std::string_view to_string(Split s) {
  switch (s) {
    case Split::LabeledTrain: return "labeled";
    case Split::UnlabeledTrain: return "unlabeled";
    case Split::Validation: return "validation";
  }
  return "validation";
}

void DatasetManifest::validate() const {
  try {
    grid.validate();
  } catch (const Error& e) {
    fail(ErrorCode::MalformedFile, e.what());
  }
  if (f < 0) fail(ErrorCode::MalformedFile, "history frame count must be >= 0");
  std::set<std::string> ids;
  for (const SampleRecord& r : records) {
    if (r.id.empty() || !ids.insert(r.id).second) fail(ErrorCode::MalformedFile, "record ids must be unique and non-empty");
    const std::size_t n = static_cast<std::size_t>(f) + 1;
    if (r.frame_paths.size() != n || r.poses.size() != n) {
      fail(ErrorCode::MalformedFile, "record " + r.id + " must have exactly f+1 frames and poses");
    }
    if (!r.tag_paths.empty() && r.tag_paths.size() != n) fail(ErrorCode::MalformedFile, "record " + r.id + " tag count");
    if (r.split == Split::LabeledTrain && !r.label_path) {
      fail(ErrorCode::MalformedFile, "labeled-train record " + r.id + " has no label");
    }
  }
}

std::vector<const SampleRecord*> DatasetManifest::in_split(Split s) const {
  std::vector<const SampleRecord*> out;
  for (const SampleRecord& r : records) {
    if (r.split == s) out.push_back(&r);
  }
  return out;
}

std::string manifest_to_jsonl(const DatasetManifest& m) {
  m.validate();
  std::string out = json{{"format", "cad-manifest"}, {"version", 1}, {"grid", grid_json(m.grid)}, {"f", m.f}}.dump() + "\n";
  for (const SampleRecord& r : m.records) {
    json poses = json::array();
    for (const Pose& p : r.poses) poses.push_back(pose_values(p));
    json j{{"id", r.id}, {"frames", r.frame_paths}, {"tags", r.tag_paths}, {"poses", poses},
           {"split", std::string(to_string(r.split))}};
    j["label"] = r.label_path ? json(*r.label_path) : json(nullptr);
    j["scene"] = r.scene_path ? json(*r.scene_path) : json(nullptr);
    out += j.dump() + "\n";
  }
  return out;
}

DatasetManifest manifest_from_jsonl(std::string_view text) {
  DatasetManifest m;
  bool header = false;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    const std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string where = "manifest line " + std::to_string(line_no);
    guarded(where.c_str(), [&] {
      const json j = json::parse(line);
      if (!header) {
        if (j.at("format") != "cad-manifest" || j.at("version") != 1) {
          fail(ErrorCode::MalformedFile, "not a cad-manifest v1 file");
        }
        m.grid = grid_from(j.at("grid"));
        m.f = j.at("f").get<int>();
        header = true;
        return 0;
      }
      SampleRecord r;
      r.id = j.at("id").get<std::string>();
      r.frame_paths = j.at("frames").get<std::vector<std::string>>();
      r.tag_paths = j.at("tags").get<std::vector<std::string>>();
      for (const auto& p : j.at("poses")) {
        const auto v = p.get<std::vector<double>>();
        if (v.size() != 12) fail(ErrorCode::MalformedFile, where + ": pose must have 12 values");
        std::array<double, 12> a{};
        std::copy(v.begin(), v.end(), a.begin());
        try {
          r.poses.push_back(pose_from_values(a, where));
        } catch (const Error& e) {
          fail(ErrorCode::MalformedFile, e.what());
        }
      }
      r.split = split_from(j.at("split").get<std::string>());
      if (!j.at("label").is_null()) r.label_path = j.at("label").get<std::string>();
      if (!j.at("scene").is_null()) r.scene_path = j.at("scene").get<std::string>();
      m.records.push_back(std::move(r));
      return 0;
    });
  }
  if (!header) fail(ErrorCode::MalformedFile, "manifest has no header");
  m.validate();
  return m;
}

void write_manifest(const fs::path& path, const DatasetManifest& m) { write_file(path, manifest_to_jsonl(m)); }

DatasetManifest read_manifest(const fs::path& path) { return manifest_from_jsonl(read_file(path)); }

DatasetManifest split_dataset(const DatasetManifest& m, const SplitFractions& fr, std::uint64_t seed) {
  for (double v : {fr.labeled, fr.unlabeled, fr.validation}) {
    if (!(v >= 0) || !std::isfinite(v)) fail(ErrorCode::ConfigError, "split fractions must be non-negative");
  }
  if (fr.labeled + fr.unlabeled + fr.validation > 1 + 1e-9) fail(ErrorCode::ConfigError, "split fractions sum above 1");
  const std::size_t n = m.records.size();
  const auto n_l = static_cast<std::size_t>(std::floor(fr.labeled * static_cast<double>(n) + 1e-9));
  const auto n_u = static_cast<std::size_t>(std::floor(fr.unlabeled * static_cast<double>(n) + 1e-9));

  // Fisher-Yates with a portable index draw.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);

  DatasetManifest out = m;
  std::vector<bool> taken(n, false);
  std::size_t labeled = 0;
  for (std::size_t k = 0; k < n && labeled < n_l; ++k) {
    if (m.records[order[k]].label_path) {
      out.records[order[k]].split = Split::LabeledTrain;
      taken[order[k]] = true;
      ++labeled;
    }
  }
  if (labeled < n_l) {
    fail(ErrorCode::InsufficientLabels, "need " + std::to_string(n_l) + " labeled records, have " + std::to_string(labeled));
  }
  std::size_t unlabeled = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = order[k];
    if (taken[i]) continue;
    out.records[i].split = unlabeled < n_u ? Split::UnlabeledTrain : Split::Validation;
    if (unlabeled < n_u) ++unlabeled;
  }
  out.validate();
  return out;
}

// ---------------------------------------------------------------- samples

SampleRecord write_sample(const fs::path& root, const Sample& sample, const PolarGridSpec& spec) {
  SampleRecord r;
  r.id = sample.id;
  for (const PointFrame& f : sample.frames) {
    const std::string stem = "frames/" + sample.id + "_" + std::to_string(f.frame_index);
    write_kitti_bin(root / (stem + ".bin"), f);
    r.frame_paths.push_back(stem + ".bin");
    r.poses.push_back(f.pose);
    if (f.tags) {
      write_file(root / (stem + ".tags"), encode_tags(*f.tags));
      r.tag_paths.push_back(stem + ".tags");
    }
  }
  if (!r.tag_paths.empty() && r.tag_paths.size() != r.frame_paths.size()) {
    fail(ErrorCode::InvalidArgument, "either all or no frames of a sample carry tags");
  }
  if (sample.label) {
    r.label_path = "labels/" + sample.id + ".json";
    write_label(root / *r.label_path, *sample.label, spec);
  }
  return r;
}

Sample load_sample(const fs::path& root, const SampleRecord& record, const PolarGridSpec& spec) {
  Sample s;
  s.id = record.id;
  for (std::size_t k = 0; k < record.frame_paths.size(); ++k) {
    PointFrame f = read_kitti_bin(root / record.frame_paths[k]);
    f.pose = record.poses.at(k);
    f.frame_index = static_cast<int>(k);
    if (!record.tag_paths.empty()) {
      f.tags = decode_tags(read_file(root / record.tag_paths[k]));
      if (f.tags->size() != f.points.size()) fail(ErrorCode::MalformedFile, "tag count differs from point count");
    }
    s.frames.push_back(std::move(f));
  }
  if (record.label_path) s.label = read_label(root / *record.label_path, spec);
  return s;
}

}  // namespace cad::io
