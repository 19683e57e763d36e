#include "cad/cli/plot.hpp"

#include <array>
#include <cmath>
#include <cstdio>

namespace cad::cli {

namespace {

constexpr double kSize = 640.0;
constexpr double kMargin = 20.0;
constexpr std::array<const char*, 5> kAgeColors{"#d62728", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b"};

struct Canvas {
  double scale;

  double x(double wx) const { return kSize / 2 + wx * scale; }
  double y(double wy) const { return kSize / 2 - wy * scale; }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

// Closed outline: an arc at the outer edge of each direction's depth bin,
// joined radially between neighbouring directions.
std::string profile_path(const CadProfile& p, const PolarGridSpec& g, const Canvas& c) {
  std::string d;
  for (int j = 0; j < g.n_phi; ++j) {
    const double r = (p.depth_index[j] + 1) * g.r_width();
    const double a0 = j * g.phi_width(), a1 = (j + 1) * g.phi_width();
    d += (j == 0 ? "M" : "L") + num(c.x(r * std::cos(a0))) + "," + num(c.y(r * std::sin(a0)));
    // Screen y points down, so counter-clockwise in the world is sweep 0.
    d += "A" + num(r * c.scale) + "," + num(r * c.scale) + " 0 0 0 " + num(c.x(r * std::cos(a1))) + "," +
         num(c.y(r * std::sin(a1)));
  }
  return d + "Z";
}

}  // namespace

std::string render_svg(const PlotInput& in) {
  const PolarGridSpec& g = in.grid;
  in.profile.validate(g);
  if (in.ground_truth) in.ground_truth->validate(g);
  const Canvas c{(kSize / 2 - kMargin) / g.max_radius};
  const std::string s = num(kSize);

  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + s + "\" height=\"" + s +
                    "\" viewBox=\"0 0 " + s + " " + s + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  out += "<circle cx=\"" + num(c.x(0)) + "\" cy=\"" + num(c.y(0)) + "\" r=\"" + num(g.max_radius * c.scale) +
         "\" fill=\"none\" stroke=\"#bbbbbb\" stroke-dasharray=\"4 4\"/>\n";
  out += "<path id=\"prediction\" d=\"" + profile_path(in.profile, g, c) +
         "\" fill=\"#1f77b4\" fill-opacity=\"0.45\" stroke=\"#1f77b4\" stroke-width=\"1\"/>\n";
  if (in.ground_truth) {
    out += "<path id=\"ground-truth\" d=\"" + profile_path(*in.ground_truth, g, c) +
           "\" fill=\"none\" stroke=\"#000000\" stroke-width=\"1.5\"/>\n";
  }
  for (auto it = in.frames.rbegin(); it != in.frames.rend(); ++it) {
    const char* color = kAgeColors[std::min<std::size_t>(static_cast<std::size_t>(std::max(it->frame_index, 0)),
                                                         kAgeColors.size() - 1)];
    out += "<g fill=\"" + std::string(color) + "\" fill-opacity=\"0.7\">\n";
    for (const Point3& p : it->points) {
      if (!bin_point(g, p)) continue;
      out += "<circle cx=\"" + num(c.x(p.x)) + "\" cy=\"" + num(c.y(p.y)) + "\" r=\"1\"/>\n";
    }
    out += "</g>\n";
  }
  out += "<path d=\"M" + num(c.x(0)) + "," + num(c.y(0)) + "L" + num(c.x(1.0)) + "," + num(c.y(0)) +
         "\" stroke=\"#000000\" stroke-width=\"2\"/>\n";
  out += "</svg>\n";
  return out;
}

}  // namespace cad::cli
