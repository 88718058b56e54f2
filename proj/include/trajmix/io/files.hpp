#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "trajmix/scene/snapshot.hpp"
#include "trajmix/sim/metrics.hpp"
#include "trajmix/sim/ring.hpp"

namespace trajmix::io {

/// Malformed input file content.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File cannot be opened, read or written.
class FileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

/// Header `sample_id,mixture,probability,refined,t,x,y,yaw`, one row per point, 12
/// significant digits. t is the point time in seconds, (i + 1) * dt.
void write_trajectory_csv(std::ostream& os, const std::vector<TrajectorySample>& samples);
void write_trajectory_csv_file(const std::string& path,
                               const std::vector<TrajectorySample>& samples);

/// Groups rows by sample_id in order of first appearance. dt is the spacing of t, or t
/// itself for single-point samples. Rows with t = 0 are returned as the start pose.
struct CsvSample {
  TrajectorySample sample;
  bool has_start = false;
  Pose2D start;
};
std::vector<CsvSample> read_trajectory_csv(std::istream& is);
std::vector<CsvSample> read_trajectory_csv_file(const std::string& path);

/// Scene JSON: {"ego_history", "agents", "lanes", "crosswalks"}; each entity is
/// {"values": [[...], ...], "mask": [true, ...]}.
nlohmann::json scene_to_json(const scene::SceneSnapshot& s);
scene::SceneSnapshot scene_from_json(const nlohmann::json& j);

/// Ring dataset JSON: {"scenario": {...}, "samples": [{"history": [[x, y, yaw]...],
/// "future": [[x, y, yaw]...]}]}.
nlohmann::json ring_data_to_json(const sim::RingScenario& sc,
                                 const std::vector<sim::RingSample>& samples);
std::vector<sim::RingSample> ring_data_from_json(const nlohmann::json& j, sim::RingScenario* sc);

nlohmann::json metrics_to_json(const sim::MetricsReport& r);

struct SvgCircle {
  Point2 center;
  double radius = 0.0;
};

/// Static map content of a plot.
struct PlotScene {
  std::vector<SvgCircle> circles;
  std::vector<std::vector<Point2>> polylines;
};

/// Map polylines of a snapshot (lane and crosswalk centre points).
PlotScene plot_scene(const scene::SceneSnapshot& s);

/// One <circle> per circle, one <polyline> per map polyline, per sample (coloured by
/// probability) and for the executed path. Output depends only on the inputs.
std::string render_svg(const PlotScene& scene, const std::vector<TrajectorySample>& samples,
                       const Trajectory& executed);
void emit_svg_plot(const std::string& path, const PlotScene& scene,
                   const std::vector<TrajectorySample>& samples, const Trajectory& executed);

}  // namespace trajmix::io
