#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cad/ad/parameters.hpp"
#include "cad/ad/tensor.hpp"

namespace cad::ad {

// Named-tensor container:
//   "CADCKPT\0" | u32 version | u32 header length | header bytes (UTF-8)
//   | u32 tensor count | per tensor: u32 name length, name, u32 rank,
//   rank x u64 dims, float32 payload
// All integers and floats little-endian.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::string header;
  std::vector<std::pair<std::string, Tensor<float>>> tensors;

  bool operator==(const Checkpoint&) const = default;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
// Throws MalformedFile on any structural problem.
Checkpoint decode_checkpoint(std::string_view bytes);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

template <typename T>
std::vector<std::pair<std::string, Tensor<float>>> export_parameters(const ParameterStore<T>& params) {
  std::vector<std::pair<std::string, Tensor<float>>> out;
  for (const auto& [name, v] : params.entries()) out.emplace_back(name, v.value().template cast<float>());
  return out;
}

template <typename T>
void import_parameters(ParameterStore<T>& params, const std::vector<std::pair<std::string, Tensor<float>>>& tensors) {
  if (tensors.size() != params.size()) {
    fail(ErrorCode::SpecMismatch, "checkpoint holds " + std::to_string(tensors.size()) + " tensors, model expects " +
                                      std::to_string(params.size()));
  }
  for (const auto& [name, t] : tensors) {
    if (!params.contains(name)) fail(ErrorCode::SpecMismatch, "checkpoint tensor '" + name + "' unknown to model");
    Var<T> v = params.get(name);
    if (v.shape() != t.shape()) fail(ErrorCode::SpecMismatch, "checkpoint tensor '" + name + "' has wrong shape");
    v.mutable_value() = t.template cast<T>();
  }
}

}  // namespace cad::ad
