#include "cad/net/cadnet.hpp"

#include <cmath>

#include <json.hpp>

#include "cad/core/error.hpp"

namespace cad::net {

using nlohmann::json;

void CadNetConfig::validate() const {
  try {
    grid.validate();
  } catch (const Error& e) {
    fail(ErrorCode::ConfigError, e.what());
  }
  if (grid.n_r % 8 || grid.n_phi % 8) fail(ErrorCode::ConfigError, "n_r and n_phi must be multiples of 8");
  if (pillar.widths.empty()) fail(ErrorCode::ConfigError, "pillar MLP needs at least one layer");
  for (int w : pillar.widths) {
    if (w <= 0) fail(ErrorCode::ConfigError, "pillar widths must be positive");
  }
  if (sam.f < 1) fail(ErrorCode::ConfigError, "f must be >= 1");
  if (sam.embed <= 0 || sam.fused <= 0) fail(ErrorCode::ConfigError, "SAM dims must be positive");
  for (int c : backbone.channels) {
    if (c <= 0) fail(ErrorCode::ConfigError, "backbone channels must be positive");
  }
}

std::string config_to_json(const CadNetConfig& cfg) {
  json j;
  j["format"] = "cadnet";
  j["version"] = 1;
  j["grid"] = {{"max_radius", cfg.grid.max_radius}, {"z_min", cfg.grid.z_min}, {"z_max", cfg.grid.z_max},
               {"n_r", cfg.grid.n_r}, {"n_phi", cfg.grid.n_phi}};
  j["pillar"] = {{"augmented", cfg.pillar.augmented}, {"widths", cfg.pillar.widths}};
  j["sam"] = {{"f", cfg.sam.f}, {"embed", cfg.sam.embed}, {"fused", cfg.sam.fused}};
  j["backbone"] = cfg.backbone.channels;
  j["fusion"] = cfg.fusion == Fusion::Sam ? "sam" : "merge";
  j["init_seed"] = cfg.init_seed;
  return j.dump();
}

CadNetConfig config_from_json(std::string_view text) {
  CadNetConfig cfg;
  try {
    const json j = json::parse(text);
    if (j.at("format") != "cadnet" || j.at("version") != 1) fail(ErrorCode::MalformedFile, "not a cadnet v1 header");
    const json& g = j.at("grid");
    cfg.grid = {g.at("max_radius").get<double>(), g.at("z_min").get<double>(), g.at("z_max").get<double>(),
                g.at("n_r").get<int>(), g.at("n_phi").get<int>()};
    cfg.pillar.augmented = j.at("pillar").at("augmented").get<bool>();
    cfg.pillar.widths = j.at("pillar").at("widths").get<std::vector<int>>();
    cfg.sam.f = j.at("sam").at("f").get<int>();
    cfg.sam.embed = j.at("sam").at("embed").get<int>();
    cfg.sam.fused = j.at("sam").at("fused").get<int>();
    cfg.backbone.channels = j.at("backbone").get<std::array<int, 3>>();
    const std::string fusion = j.at("fusion").get<std::string>();
    if (fusion != "sam" && fusion != "merge") fail(ErrorCode::MalformedFile, "unknown fusion '" + fusion + "'");
    cfg.fusion = fusion == "sam" ? Fusion::Sam : Fusion::Merge;
    cfg.init_seed = j.at("init_seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    fail(ErrorCode::MalformedFile, std::string("model header: ") + e.what());
  }
  try {
    cfg.validate();
  } catch (const Error& e) {
    fail(ErrorCode::MalformedFile, std::string("model header: ") + e.what());
  }
  return cfg;
}

ModelInput prepare_input(std::span<const PointFrame> frames, const PolarGridSpec& spec, bool augmented) {
  const int width = augmented ? kAugmentedFeatures : kRawFeatures;
  const double dr = spec.r_width(), dphi = spec.phi_width();
  ModelInput input;
  for (const PointFrame& frame : frames) {
    FrameInput fi;
    std::vector<double> rows;
    for (const Point3& p : frame.points) {
      const auto idx = bin_point(spec, p);
      if (!idx) continue;
      const double r = std::hypot(p.x, p.y);
      double off = azimuth(p.x, p.y) - spec.phi_center(idx->phi_bin);
      off = std::remainder(off, kTwoPi);
      rows.insert(rows.end(), {r * std::cos(off) / spec.max_radius, r * std::sin(off) / spec.max_radius, p.z,
                               p.intensity});
      if (augmented) {
        rows.insert(rows.end(), {(r - (idx->r_bin + 0.5) * dr) / dr, off / dphi, p.z - spec.z_min});
      }
      fi.pillar.push_back(spec.pillar_id(*idx));
    }
    fi.features = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        rows.data(), static_cast<Index>(fi.pillar.size()), width);
    input.frames.push_back(std::move(fi));
  }
  return input;
}

}  // namespace cad::net
