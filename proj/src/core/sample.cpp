#include "cad/core/sample.hpp"

#include "cad/core/error.hpp"

namespace cad {

std::vector<PointFrame> Sample::aligned() const {
  if (frames.empty()) fail(ErrorCode::InvalidArgument, "sample " + id + " has no frames");
  std::vector<PointFrame> out;
  out.reserve(frames.size());
  for (const PointFrame& f : frames) out.push_back(transform_to_current(f, frames.front().pose));
  return out;
}

}  // namespace cad
