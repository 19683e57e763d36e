#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <random>
#include <span>
#include <tuple>
#include <string>
#include <vector>

#include "cad/ad/checkpoint.hpp"
#include "cad/ad/ops.hpp"
#include "cad/ad/parameters.hpp"
#include "cad/core/geometry.hpp"

namespace cad::net {

using ad::Index;
using ad::Shape;
using ad::Tensor;
using ad::Var;

// Augmented point features: pillar-local x', y' (scaled by R), z, intensity,
// radial offset from the pillar centre (in bins), signed angular offset (in
// bins), z - z_min. Raw mode keeps x', y', z, intensity only.
inline constexpr int kAugmentedFeatures = 7;
inline constexpr int kRawFeatures = 4;

struct PillarEncoderCfg {
  bool augmented = true;
  std::vector<int> widths{16, 32};  // last entry is C_p

  int input_width() const { return augmented ? kAugmentedFeatures : kRawFeatures; }
  int channels() const { return widths.back(); }
};

enum class Fusion { Sam, Merge };

struct SamCfg {
  int f = 2;
  int embed = 16;
  int fused = 32;  // C_a
};

struct BackboneCfg {
  std::array<int, 3> channels{32, 64, 128};
};

struct CadNetConfig {
  PolarGridSpec grid = PolarGridSpec::desk();
  PillarEncoderCfg pillar;
  SamCfg sam;
  BackboneCfg backbone;
  Fusion fusion = Fusion::Sam;
  std::uint64_t init_seed = 0;

  // Throws ConfigError.
  void validate() const;
};

std::string config_to_json(const CadNetConfig& cfg);
// Throws MalformedFile.
CadNetConfig config_from_json(std::string_view text);

// Per-frame point features and pillar ids, computed once per sample.
struct FrameInput {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> features;
  std::vector<int> pillar;
};

struct ModelInput {
  std::vector<FrameInput> frames;  // current first
};

// Frames must be in current-frame coordinates, current first. Points
// outside the grid are dropped.
ModelInput prepare_input(std::span<const PointFrame> frames, const PolarGridSpec& spec, bool augmented = true);

// Distribution Psi (n_r, n_phi) to a profile: argmax over r with ties to the
// nearer bin, confidence = max probability.
template <typename T>
CadProfile profile_from_distribution(const Tensor<T>& psi) {
  const Index n_r = psi.dim(0), n_phi = psi.dim(1);
  CadProfile p;
  p.depth_index.assign(static_cast<std::size_t>(n_phi), 0);
  p.confidence.assign(static_cast<std::size_t>(n_phi), 0.0);
  for (Index j = 0; j < n_phi; ++j) {
    Index best = 0;
    for (Index d = 1; d < n_r; ++d) {
      if (psi[d * n_phi + j] > psi[best * n_phi + j]) best = d;
    }
    p.depth_index[j] = static_cast<int>(best);
    p.confidence[j] = static_cast<double>(psi[best * n_phi + j]);
  }
  return p;
}

template <typename T>
struct Forward {
  Var<T> logits;                  // (n_r, n_phi)
  Var<T> psi;                     // softmax along r
  std::vector<Var<T>> attention;  // SAM: W'_k, (1, n_r/2, n_phi/2) for k = 1..f
};

template <typename T>
class CadNet {
 public:
  explicit CadNet(CadNetConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    std::mt19937_64 rng(cfg_.init_seed);
    int in = cfg_.pillar.input_width();
    for (std::size_t i = 0; i < cfg_.pillar.widths.size(); ++i) {
      const int out = cfg_.pillar.widths[i];
      dense("pillar." + std::to_string(i), out, in, rng);
      in = out;
    }
    const int cp = cfg_.pillar.channels(), ca = cfg_.sam.fused;
    if (cfg_.fusion == Fusion::Sam) {
      conv("sam.key", cfg_.sam.embed, cp, 1, rng);
      conv("sam.query", cfg_.sam.embed, cp, 1, rng);
      conv("sam.weight", 1, cfg_.sam.f, 1, rng);
      conv("sam.fuse", ca, 2 * cp, 3, rng);
    } else {
      conv("merge.fuse", ca, cp, 3, rng);
    }
    const auto& c = cfg_.backbone.channels;
    conv("enc.0", c[0], ca, 3, rng);
    conv("enc.1", c[1], c[0], 3, rng);
    conv("enc.2", c[2], c[1], 3, rng);
    conv("dec.2", c[1], c[2] + c[1], 3, rng);
    conv("dec.1", c[0], c[1] + c[0], 3, rng);
    conv("dec.0", c[0], c[0] + ca, 3, rng);
    conv("head", 1, c[0], 1, rng);
  }

  const CadNetConfig& config() const { return cfg_; }
  const PolarGridSpec& grid() const { return cfg_.grid; }
  ad::ParameterStore<T>& parameters() { return params_; }
  const ad::ParameterStore<T>& parameters() const { return params_; }

  // Shared per-point MLP then channelwise max per pillar: (C_p, n_r, n_phi).
  Var<T> encode_frame(const FrameInput& frame) const {
    const Index cp = cfg_.pillar.channels();
    const PolarGridSpec& g = cfg_.grid;
    const Index n = frame.features.rows();
    if (n == 0) return ad::constant(Tensor<T>(Shape{cp, g.n_r, g.n_phi}));
    if (frame.features.cols() != cfg_.pillar.input_width()) {
      fail(ErrorCode::ShapeMismatch, "point features have " + std::to_string(frame.features.cols()) + " columns");
    }
    Tensor<T> x(Shape{n, frame.features.cols()});
    x.matrix(n, frame.features.cols()) = frame.features.template cast<T>();
    Var<T> h = ad::constant(std::move(x));
    for (std::size_t i = 0; i < cfg_.pillar.widths.size(); ++i) {
      const std::string p = "pillar." + std::to_string(i);
      h = ad::relu(ad::linear(h, params_.get(p + ".w"), params_.get(p + ".b")));
    }
    Var<T> pooled = ad::scatter_max(h, std::span<const int>(frame.pillar), g.n_pillars());
    return ad::reshape(ad::transpose(pooled), Shape{cp, g.n_r, g.n_phi});
  }

  std::vector<Var<T>> encode_pillars(const ModelInput& input) const {
    check_frames(input);
    std::vector<Var<T>> fp;
    for (const FrameInput& f : input.frames) fp.push_back(encode_frame(f));
    return fp;
  }

  // fp: f+1 slices (C_p, n_r, n_phi), current first. Returns F_a and the
  // per-frame attention maps before upsampling.
  std::pair<Var<T>, std::vector<Var<T>>> sam_fuse(const std::vector<Var<T>>& fp) const {
    const int f = cfg_.sam.f;
    if (static_cast<int>(fp.size()) != f + 1) fail(ErrorCode::ShapeMismatch, "sam_fuse expects f+1 frame slices");
    for (const auto& x : fp) {
      if (x.shape() != fp.front().shape() || x.shape().size() != 3 || x.dim(1) % 2 || x.dim(2) % 2) {
        fail(ErrorCode::ShapeMismatch, "sam_fuse: bad slice shape " + ad::shape_str(x.shape()));
      }
    }
    std::vector<Var<T>> keys, queries;
    for (int k = 0; k <= f; ++k) {
      Var<T> down = ad::maxpool2d(fp[k]);
      keys.push_back(conv_apply("sam.key", down));
      queries.push_back(k == 0 ? Var<T>() : conv_apply("sam.query", down));
    }
    const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(cfg_.sam.embed));
    std::vector<Var<T>> weights;
    Var<T> fh;
    for (int k = 1; k <= f; ++k) {
      std::vector<Var<T>> v;
      for (int n = 0; n <= f; ++n) {
        if (n == k) continue;
        v.push_back(ad::scale(ad::sum_axis(ad::mul(queries[k], keys[n]), 0), inv_sqrt));
      }
      Var<T> w = ad::sigmoid(conv_apply("sam.weight", ad::concat(v, 0)));
      weights.push_back(w);
      Var<T> term = ad::scale_channels(fp[k], ad::upsample_nearest(w));
      fh = k == 1 ? term : ad::add(fh, term);
    }
    Var<T> fa = ad::relu(conv_apply("sam.fuse", ad::concat(std::vector<Var<T>>{fp[0], fh}, 0)));
    return {fa, weights};
  }

  // Naive fusion: one pillar encoding of the union of all frames' points.
  Var<T> merge_fuse(const ModelInput& input) const {
    check_frames(input);
    FrameInput all;
    Index rows = 0;
    for (const FrameInput& f : input.frames) rows += f.features.rows();
    all.features.resize(rows, cfg_.pillar.input_width());
    Index at = 0;
    for (const FrameInput& f : input.frames) {
      all.features.middleRows(at, f.features.rows()) = f.features;
      at += f.features.rows();
      all.pillar.insert(all.pillar.end(), f.pillar.begin(), f.pillar.end());
    }
    return ad::relu(conv_apply("merge.fuse", encode_frame(all)));
  }

  // (C_a, n_r, n_phi) -> logits (n_r, n_phi).
  Var<T> backbone(const Var<T>& fa) const {
    const PolarGridSpec& g = cfg_.grid;
    if (fa.shape() != Shape{cfg_.sam.fused, g.n_r, g.n_phi}) {
      fail(ErrorCode::ShapeMismatch, "backbone input " + ad::shape_str(fa.shape()));
    }
    auto cat = [](const Var<T>& a, const Var<T>& b) { return ad::concat(std::vector<Var<T>>{a, b}, 0); };
    Var<T> e1 = ad::relu(conv_apply("enc.0", fa, 2));
    Var<T> e2 = ad::relu(conv_apply("enc.1", e1, 2));
    Var<T> e3 = ad::relu(conv_apply("enc.2", e2, 2));
    Var<T> d2 = ad::relu(conv_apply("dec.2", cat(ad::upsample_nearest(e3), e2)));
    Var<T> d1 = ad::relu(conv_apply("dec.1", cat(ad::upsample_nearest(d2), e1)));
    Var<T> d0 = ad::relu(conv_apply("dec.0", cat(ad::upsample_nearest(d1), fa)));
    return ad::reshape(conv_apply("head", d0), Shape{g.n_r, g.n_phi});
  }

  Forward<T> forward(const ModelInput& input) const {
    Forward<T> out;
    Var<T> fa;
    if (cfg_.fusion == Fusion::Sam) {
      std::tie(fa, out.attention) = sam_fuse(encode_pillars(input));
    } else {
      fa = merge_fuse(input);
    }
    out.logits = backbone(fa);
    out.psi = ad::softmax_axis(out.logits, 0);
    return out;
  }

  ad::Checkpoint checkpoint() const { return {config_to_json(cfg_), ad::export_parameters(params_)}; }

  static CadNet from_checkpoint(const ad::Checkpoint& ck) {
    CadNet net(config_from_json(ck.header));
    ad::import_parameters(net.params_, ck.tensors);
    return net;
  }

  void save(const std::filesystem::path& path) const { ad::write_checkpoint(path, checkpoint()); }
  static CadNet load(const std::filesystem::path& path) { return from_checkpoint(ad::read_checkpoint(path)); }

 private:
  void check_frames(const ModelInput& input) const {
    const std::size_t want = static_cast<std::size_t>(cfg_.sam.f) + 1;
    if (input.frames.size() != want) {
      fail(ErrorCode::ShapeMismatch,
           "model expects " + std::to_string(want) + " frames, got " + std::to_string(input.frames.size()));
    }
  }

  void dense(const std::string& name, int out, int in, std::mt19937_64& rng) {
    params_.add(name + ".w", ad::he_uniform<T>(Shape{out, in}, in, rng));
    params_.add(name + ".b", Tensor<T>(Shape{out}));
  }

  void conv(const std::string& name, int out, int in, int k, std::mt19937_64& rng) {
    params_.add(name + ".w", ad::he_uniform<T>(Shape{out, in, k, k}, in * k * k, rng));
    params_.add(name + ".b", Tensor<T>(Shape{out}));
  }

  Var<T> conv_apply(const std::string& name, const Var<T>& x, Index stride = 1) const {
    return ad::conv2d_polar(x, params_.get(name + ".w"), params_.get(name + ".b"), stride);
  }

  CadNetConfig cfg_;
  ad::ParameterStore<T> params_;
};

struct Prediction {
  CadProfile profile;
  Tensor<double> psi;  // (n_r, n_phi)
};

// Throws SpecMismatch when the model grid differs from spec.
template <typename T>
Prediction predict(const CadNet<T>& model, std::span<const PointFrame> frames, const PolarGridSpec& spec) {
  if (!(model.grid() == spec)) fail(ErrorCode::SpecMismatch, "model grid differs from the input grid");
  const ModelInput input = prepare_input(frames, spec, model.config().pillar.augmented);
  const Forward<T> out = model.forward(input);
  Prediction p;
  p.psi = out.psi.value().template cast<double>();
  p.profile = profile_from_distribution(p.psi);
  return p;
}

}  // namespace cad::net
