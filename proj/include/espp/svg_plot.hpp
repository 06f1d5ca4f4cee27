// Copyright 2026 The ESPP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ESPP__SVG_PLOT_HPP_
#define ESPP__SVG_PLOT_HPP_

#include "espp/simulator.hpp"
#include "espp/trace_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace espp::plot
{
enum class PlotKind { Trajectory, Steering, Heading, LatAccel, PotentialHeatmap };

inline constexpr std::array<PlotKind, 5> kAllPlotKinds{
  PlotKind::Trajectory, PlotKind::Steering, PlotKind::Heading, PlotKind::LatAccel, PlotKind::PotentialHeatmap};

inline const char * to_string(PlotKind k)
{
  switch (k) {
    case PlotKind::Trajectory:
      return "trajectory";
    case PlotKind::Steering:
      return "steering";
    case PlotKind::Heading:
      return "heading";
    case PlotKind::LatAccel:
      return "lat_accel";
    case PlotKind::PotentialHeatmap:
      return "potential_heatmap";
  }
  return "unknown";
}

inline std::optional<PlotKind> parse_plot_kind(std::string_view name)
{
  for (auto k : kAllPlotKinds) {
    if (name == to_string(k)) {
      return k;
    }
  }
  return std::nullopt;
}

struct Series
{
  std::string label;
  std::string color;
  std::vector<Vec2> points;
  bool markers{false};  // dots instead of a polyline
};

/// Horizontal strip lo <= y <= hi across the whole plot.
struct Band
{
  double lo{0.0};
  double hi{0.0};
  std::string css_class;
  std::string color;
};

/// Horizontal reference line.
struct Level
{
  double y{0.0};
  std::string css_class;
};

/// Heatmap cell centred at (x, y) with the sampled value u.
struct Cell
{
  double x{0.0};
  double y{0.0};
  double u{0.0};
};

struct Heatmap
{
  double cell_w{1.0};
  double cell_h{1.0};
  std::vector<Cell> cells;
  std::optional<double> color_clip;  // values above share the top colour
};

struct Figure
{
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  std::vector<Band> bands;
  std::vector<Level> levels;
  std::optional<Heatmap> heatmap;
};

struct Range
{
  double lo{std::numeric_limits<double>::infinity()};
  double hi{-std::numeric_limits<double>::infinity()};

  void include(double v)
  {
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  /// Adds 5 % padding and widens degenerate ranges.
  Range padded() const
  {
    if (!(lo <= hi)) {
      return {0.0, 1.0};
    }
    const double span = hi - lo;
    const double pad = span > 0.0 ? 0.05 * span : std::max(0.5, 0.05 * std::abs(lo));
    return {lo - pad, hi + pad};
  }
};

namespace detail
{
inline std::string escape(std::string_view text)
{
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

inline std::string num(double v)
{
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

/// Round tick values (1, 2 or 5 times a power of ten) inside [lo, hi].
inline std::vector<double> nice_ticks(double lo, double hi, int target = 6)
{
  const double raw = (hi - lo) / target;
  if (!(raw > 0.0) || !std::isfinite(raw)) {
    return {lo};
  }
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = 10.0 * mag;
  for (double m : {1.0, 2.0, 5.0}) {
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  }
  std::vector<double> ticks;
  for (double k = std::ceil(lo / step); k * step <= hi + 1e-9 * step; k += 1.0) {
    const double v = k * step;
    ticks.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
  }
  return ticks;
}

/// Blue to yellow ramp for t in [0, 1].
inline std::string ramp_color(double t)
{
  t = std::clamp(t, 0.0, 1.0);
  const auto mix = [t](int a, int b) { return static_cast<int>(std::lround(a + t * (b - a))); };
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", mix(0x30, 0xfd), mix(0x12, 0xe7), mix(0x6e, 0x25));
  return buf;
}
}  // namespace detail

inline constexpr double kWidth = 800.0;
inline constexpr double kHeight = 420.0;
inline constexpr double kLeft = 70.0;
inline constexpr double kRight = 20.0;
inline constexpr double kTop = 40.0;
inline constexpr double kBottom = 50.0;

/// Hand-written SVG. The plotted data ranges are exposed as data-x-min,
/// data-x-max, data-y-min and data-y-max attributes of the plot group.
inline std::string render(const Figure & fig)
{
  Range xr;
  Range yr;
  for (const auto & s : fig.series) {
    for (const auto & p : s.points) {
      xr.include(p.x());
      yr.include(p.y());
    }
  }
  for (const auto & b : fig.bands) {
    yr.include(b.lo);
    yr.include(b.hi);
  }
  for (const auto & l : fig.levels) {
    yr.include(l.y);
  }
  if (fig.heatmap) {
    for (const auto & c : fig.heatmap->cells) {
      xr.include(c.x - 0.5 * fig.heatmap->cell_w);
      xr.include(c.x + 0.5 * fig.heatmap->cell_w);
      yr.include(c.y - 0.5 * fig.heatmap->cell_h);
      yr.include(c.y + 0.5 * fig.heatmap->cell_h);
    }
  }
  xr = fig.heatmap ? (xr.lo <= xr.hi ? xr : Range{0.0, 1.0}) : xr.padded();
  yr = fig.heatmap ? (yr.lo <= yr.hi ? yr : Range{0.0, 1.0}) : yr.padded();

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  const auto sx = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  const auto sy = [&](double y) { return kTop + (yr.hi - y) / (yr.hi - yr.lo) * ph; };
  using detail::num;

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text class=\"title\" x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">"
    << detail::escape(fig.title) << "</text>\n";
  o << "<g class=\"plot\" data-x-min=\"" << io::format_double(xr.lo) << "\" data-x-max=\"" << io::format_double(xr.hi)
    << "\" data-y-min=\"" << io::format_double(yr.lo) << "\" data-y-max=\"" << io::format_double(yr.hi) << "\">\n";
  o << "<clipPath id=\"frame\"><rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
    << "\"/></clipPath>\n";
  o << "<g clip-path=\"url(#frame)\">\n";

  if (fig.heatmap) {
    Range ur;
    const double clip = fig.heatmap->color_clip.value_or(std::numeric_limits<double>::infinity());
    const auto level = [clip](double u) { return std::log1p(std::clamp(u, 0.0, clip)); };
    for (const auto & c : fig.heatmap->cells) {
      ur.include(level(c.u));
    }
    const double span = ur.hi > ur.lo ? ur.hi - ur.lo : 1.0;
    const double w = fig.heatmap->cell_w / (xr.hi - xr.lo) * pw;
    const double h = fig.heatmap->cell_h / (yr.hi - yr.lo) * ph;
    for (const auto & c : fig.heatmap->cells) {
      const std::string fill =
        std::isfinite(c.u) ? detail::ramp_color((level(c.u) - ur.lo) / span) : "#808080";
      o << "<rect class=\"cell\" x=\"" << num(sx(c.x - 0.5 * fig.heatmap->cell_w)) << "\" y=\""
        << num(sy(c.y + 0.5 * fig.heatmap->cell_h)) << "\" width=\"" << num(w) << "\" height=\"" << num(h)
        << "\" fill=\"" << fill << "\" shape-rendering=\"crispEdges\" data-x=\"" << io::format_double(c.x) << "\" data-y=\"" << io::format_double(c.y)
        << "\" data-u=\"" << io::format_double(c.u) << "\"/>\n";
    }
  }
  for (const auto & b : fig.bands) {
    o << "<rect class=\"" << b.css_class << "\" x=\"" << kLeft << "\" y=\"" << num(sy(b.hi)) << "\" width=\"" << pw
      << "\" height=\"" << num(sy(b.lo) - sy(b.hi)) << "\" fill=\"" << b.color << "\" fill-opacity=\"0.35\"/>\n";
  }
  for (const auto & l : fig.levels) {
    o << "<line class=\"" << l.css_class << "\" x1=\"" << kLeft << "\" x2=\"" << kLeft + pw << "\" y1=\""
      << num(sy(l.y)) << "\" y2=\"" << num(sy(l.y)) << "\" stroke=\"#555\" stroke-dasharray=\"6 4\"/>\n";
  }
  for (const auto & s : fig.series) {
    if (s.markers) {
      for (const auto & p : s.points) {
        o << "<circle class=\"marker\" data-label=\"" << detail::escape(s.label) << "\" cx=\"" << num(sx(p.x()))
          << "\" cy=\"" << num(sy(p.y())) << "\" r=\"5\" fill=\"" << s.color << "\" stroke=\"white\"/>\n";
      }
      continue;
    }
    o << "<polyline class=\"series\" data-label=\"" << detail::escape(s.label) << "\" fill=\"none\" stroke=\""
      << s.color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto & p : s.points) {
      if (std::isfinite(p.x()) && std::isfinite(p.y())) {
        o << num(sx(p.x())) << ',' << num(sy(p.y())) << ' ';
      }
    }
    o << "\"/>\n";
  }
  o << "</g>\n";

  o << "<rect class=\"frame\" x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double fx : detail::nice_ticks(xr.lo, xr.hi)) {
    o << "<text class=\"tick\" x=\"" << num(sx(fx)) << "\" y=\"" << kTop + ph + 16 << "\" text-anchor=\"middle\">"
      << num(fx) << "</text>\n";
  }
  for (double fy : detail::nice_ticks(yr.lo, yr.hi)) {
    o << "<text class=\"tick\" x=\"" << kLeft - 6 << "\" y=\"" << num(sy(fy) + 4) << "\" text-anchor=\"end\">"
      << num(fy) << "</text>\n";
  }
  o << "<text class=\"xlabel\" x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 10 << "\" text-anchor=\"middle\">"
    << detail::escape(fig.x_label) << "</text>\n";
  o << "<text class=\"ylabel\" transform=\"translate(16," << kTop + ph / 2
    << ") rotate(-90)\" text-anchor=\"middle\">" << detail::escape(fig.y_label) << "</text>\n";
  double legend_x = kLeft + pw;
  for (auto it = fig.series.rbegin(); it != fig.series.rend(); ++it) {
    o << "<text class=\"legend\" x=\"" << num(legend_x) << "\" y=\"" << kTop - 8 << "\" text-anchor=\"end\" fill=\""
      << it->color << "\">" << detail::escape(it->label) << "</text>\n";
    legend_x -= 8.0 * static_cast<double>(it->label.size()) + 16.0;
  }
  o << "</g>\n</svg>\n";
  return o.str();
}

inline constexpr const char * kEgoColor = "#1f77b4";
inline constexpr const char * kObstacleColor = "#d62728";

namespace detail
{
inline Series time_series(const sim::Trace & trace, std::string label, double (*value)(const sim::StepRecord &))
{
  Series s{std::move(label), kEgoColor, {}};
  s.points.reserve(trace.steps.size());
  for (const auto & r : trace.steps) {
    s.points.emplace_back(r.t, value(r));
  }
  return s;
}
}  // namespace detail

/// Both vehicle paths over the road and the emergency stopping lane.
inline Figure trajectory_figure(const sim::Trace & trace)
{
  const auto & sc = trace.scenario;
  Figure f{"Trajectories", "X [m]", "Y [m]", {}, {}, {}, std::nullopt};
  Series ego{"ego", kEgoColor, {}};
  Series obstacle{"obstacle", kObstacleColor, {}};
  for (const auto & r : trace.steps) {
    ego.points.push_back(r.ego.position());
    obstacle.points.push_back(r.obstacle.position());
  }
  f.bands.push_back({sc.road.lower_edge_y, sc.road.upper_edge_y, "road", "#bbbbbb"});
  f.bands.push_back({sc.road.esl_lower_y, sc.road.lower_edge_y, "shoulder", "#e8d9a8"});
  for (double y : sc.road.lane_divider_ys) {
    f.levels.push_back({y, "lane"});
  }
  f.series.push_back(std::move(ego));
  if (sc.with_obstacle) {
    f.series.push_back(std::move(obstacle));
  }
  return f;
}

/// Front steering angle with the actuator limits drawn as reference lines.
inline Figure steering_figure(const sim::Trace & trace)
{
  Figure f{"Steering angle", "t [s]", "delta_f [rad]", {}, {}, {}, std::nullopt};
  f.series.push_back(detail::time_series(trace, "delta_f", [](const sim::StepRecord & r) { return r.delta_f; }));
  f.levels.push_back({trace.scenario.mpc.u_max, "limit"});
  f.levels.push_back({-trace.scenario.mpc.u_max, "limit"});
  return f;
}

inline Figure heading_figure(const sim::Trace & trace)
{
  Figure f{"Heading", "t [s]", "psi [rad]", {}, {}, {}, std::nullopt};
  f.series.push_back(detail::time_series(trace, "psi", [](const sim::StepRecord & r) { return r.ego.psi; }));
  return f;
}

inline Figure lat_accel_figure(const sim::Trace & trace)
{
  Figure f{"Lateral acceleration", "t [s]", "a_y [m/s^2]", {}, {}, {}, std::nullopt};
  Series s{"a_y", kEgoColor, {}};
  for (std::size_t i = 1; i < trace.steps.size(); ++i) {
    s.points.emplace_back(trace.steps[i].t, sim::lateral_acceleration(trace.steps[i - 1], trace.steps[i]));
  }
  f.series.push_back(std::move(s));
  return f;
}

/// Step whose field the heatmap shows: the first emergency step, else the
/// start of the cut-in.
inline std::size_t heatmap_step(const sim::Trace & trace)
{
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    if (trace.steps[i].mode == sim::RunMode::Emergency) {
      return i;
    }
  }
  return sim::cut_in_index(trace.steps);
}

struct HeatmapGrid
{
  double x_behind{10.0};  // [m] behind the ego
  double x_ahead{60.0};   // [m] ahead of the ego
  int nx{140};
  int ny{48};
};

/// Normal-mode total potential sampled at cell centres around the ego.
inline Figure potential_heatmap_figure(const sim::Trace & trace, const HeatmapGrid & grid = {})
{
  if (trace.steps.empty()) {
    throw EsppError("heatmap: empty trace");
  }
  if (grid.nx < 1 || grid.ny < 1 || !(grid.x_behind + grid.x_ahead > 0.0)) {
    throw EsppError("heatmap: invalid grid");
  }
  const auto & sc = trace.scenario;
  const auto & step = trace.steps[heatmap_step(trace)];
  const auto ctx = sim::normal_field(sc, step.ego, step.obstacle);
  const double x0 = step.ego.x - grid.x_behind;
  const double x1 = step.ego.x + grid.x_ahead;
  const double y0 = sc.road.esl_lower_y;
  const double y1 = sc.road.upper_edge_y;
  Heatmap h{(x1 - x0) / grid.nx, (y1 - y0) / grid.ny, {}, std::nullopt};
  h.cells.reserve(static_cast<std::size_t>(grid.nx) * static_cast<std::size_t>(grid.ny));
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      const Vec2 c(x0 + (i + 0.5) * h.cell_w, y0 + (j + 0.5) * h.cell_h);
      h.cells.push_back({c.x(), c.y(), pf::total_potential(c, ctx)});
    }
  }
  for (const auto & c : h.cells) {
    if (c.y > sc.road.lower_edge_y && c.y < sc.road.upper_edge_y && std::isfinite(c.u)) {
      h.color_clip = std::max(h.color_clip.value_or(0.0), c.u);
    }
  }
  Figure f{"Total potential at t = " + detail::num(step.t) + " s", "X [m]", "Y [m]", {}, {}, {}, std::move(h)};
  f.series.push_back({"ego", kEgoColor, {step.ego.position()}, true});
  if (sc.with_obstacle) {
    f.series.push_back({"obstacle", kObstacleColor, {step.obstacle.position()}, true});
  }
  for (double y : sc.road.lane_divider_ys) {
    f.levels.push_back({y, "lane"});
  }
  f.levels.push_back({sc.road.lower_edge_y, "edge"});
  return f;
}

inline Figure make_figure(PlotKind kind, const sim::Trace & trace)
{
  switch (kind) {
    case PlotKind::Trajectory:
      return trajectory_figure(trace);
    case PlotKind::Steering:
      return steering_figure(trace);
    case PlotKind::Heading:
      return heading_figure(trace);
    case PlotKind::LatAccel:
      return lat_accel_figure(trace);
    case PlotKind::PotentialHeatmap:
      return potential_heatmap_figure(trace);
  }
  throw EsppError("unknown plot kind");
}

}  // namespace espp::plot

#endif  // ESPP__SVG_PLOT_HPP_
