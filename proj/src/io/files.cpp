#include "trajmix/io/files.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

namespace trajmix::io {

using nlohmann::json;

namespace {

constexpr const char* kCsvHeader = "sample_id,mixture,probability,refined,t,x,y,yaw";

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string coord(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

double parse_double(const std::string& tok, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw FormatError("line " + std::to_string(line) + ": bad number '" + tok + "'");
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

json rows_to_json(const scene::FeatureRows& f) {
  json values = json::array();
  for (std::size_t r = 0; r < f.rows(); ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < f.width; ++c) {
      const double v = f.at(r, c);
      if (std::isfinite(v)) {
        row.push_back(v);
      } else {
        row.push_back(nullptr);
      }
    }
    values.push_back(row);
  }
  json mask = json::array();
  for (bool m : f.mask) mask.push_back(m);
  return {{"values", values}, {"mask", mask}};
}

scene::FeatureRows rows_from_json(const json& j, std::size_t width, const std::string& where) {
  if (!j.is_object() || !j.contains("values") || !j.contains("mask")) {
    throw FormatError(where + " needs \"values\" and \"mask\"");
  }
  for (const auto& [key, value] : j.items()) {
    if (key != "values" && key != "mask") throw FormatError("unknown key " + where + "." + key);
  }
  const json& values = j.at("values");
  const json& mask = j.at("mask");
  if (!values.is_array() || !mask.is_array() || values.size() != mask.size()) {
    throw FormatError(where + ": values and mask must be arrays of equal length");
  }
  scene::FeatureRows f(width);
  for (std::size_t r = 0; r < values.size(); ++r) {
    const json& row = values[r];
    if (!row.is_array() || row.size() != width) {
      throw FormatError(where + " row " + std::to_string(r) + " must have " +
                        std::to_string(width) + " values");
    }
    std::vector<double> v(width);
    for (std::size_t c = 0; c < width; ++c) {
      if (row[c].is_null()) {
        v[c] = std::numeric_limits<double>::quiet_NaN();
      } else if (row[c].is_number()) {
        v[c] = row[c].get<double>();
      } else {
        throw FormatError(where + " values must be numbers");
      }
    }
    if (!mask[r].is_boolean()) throw FormatError(where + " mask entries must be booleans");
    f.push_row(v, mask[r].get<bool>());
  }
  return f;
}

json poses_to_json(const std::vector<Pose2D>& poses) {
  json a = json::array();
  for (const Pose2D& p : poses) a.push_back({p.x, p.y, p.yaw});
  return a;
}

std::vector<Pose2D> poses_from_json(const json& j, const std::string& where) {
  if (!j.is_array()) throw FormatError(where + " must be an array of [x, y, yaw]");
  std::vector<Pose2D> out;
  for (const json& p : j) {
    if (!p.is_array() || p.size() != 3 || !p[0].is_number() || !p[1].is_number() ||
        !p[2].is_number()) {
      throw FormatError(where + " entries must be [x, y, yaw]");
    }
    out.emplace_back(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
  }
  return out;
}

}  // namespace

std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FileError("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  const std::filesystem::path parent = std::filesystem::path(path).parent_path();
  std::error_code ec;
  if (!parent.empty()) std::filesystem::create_directories(parent, ec);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FileError("cannot write " + path);
  os << text;
  if (!os) throw FileError("write failed for " + path);
}

void write_trajectory_csv(std::ostream& os, const std::vector<TrajectorySample>& samples) {
  os << kCsvHeader << '\n';
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const auto& smp = samples[s];
    const auto& tr = smp.trajectory;
    for (std::size_t i = 0; i < tr.size(); ++i) {
      const Pose2D& p = tr.points[i];
      os << s << ',' << smp.mixture_index << ',' << num(smp.probability) << ','
         << (smp.refined ? 1 : 0) << ',' << num(static_cast<double>(i + 1) * tr.dt) << ','
         << num(p.x) << ',' << num(p.y) << ',' << num(p.yaw) << '\n';
    }
  }
}

void write_trajectory_csv_file(const std::string& path,
                               const std::vector<TrajectorySample>& samples) {
  std::ostringstream os;
  write_trajectory_csv(os, samples);
  write_text_file(path, os.str());
}

std::vector<CsvSample> read_trajectory_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("empty trajectory file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) throw FormatError("unexpected header '" + line + "'");
  std::vector<CsvSample> out;
  std::map<long, std::size_t> index;
  std::vector<std::vector<double>> times;
  std::size_t n = 1;
  while (std::getline(is, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tok = split(line, ',');
    if (tok.size() != 8) throw FormatError("line " + std::to_string(n) + ": expected 8 fields");
    const double id_value = parse_double(tok[0], n);
    const auto id = static_cast<long>(id_value);
    if (static_cast<double>(id) != id_value) throw FormatError("line " + std::to_string(n) + ": bad sample_id");
    auto it = index.find(id);
    if (it == index.end()) {
      it = index.emplace(id, out.size()).first;
      out.emplace_back();
      times.emplace_back();
      CsvSample& c = out.back();
      c.sample.mixture_index = static_cast<std::size_t>(parse_double(tok[1], n));
      c.sample.probability = parse_double(tok[2], n);
      c.sample.refined = parse_double(tok[3], n) != 0.0;
    }
    CsvSample& c = out[it->second];
    const double t = parse_double(tok[4], n);
    const Pose2D p(parse_double(tok[5], n), parse_double(tok[6], n), parse_double(tok[7], n));
    if (t == 0.0) {
      c.has_start = true;
      c.start = p;
    } else {
      c.sample.trajectory.points.push_back(p);
      times[it->second].push_back(t);
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& ts = times[i];
    if (!ts.empty()) {
      out[i].sample.trajectory.dt = ts.size() >= 2 ? ts[1] - ts[0] : ts[0];
      if (!(out[i].sample.trajectory.dt > 0.0)) throw FormatError("times must increase");
    }
  }
  return out;
}

std::vector<CsvSample> read_trajectory_csv_file(const std::string& path) {
  std::istringstream is(read_text_file(path));
  return read_trajectory_csv(is);
}

json scene_to_json(const scene::SceneSnapshot& s) {
  json j;
  j["ego_history"] = rows_to_json(s.ego_history);
  j["agents"] = json::array();
  for (const auto& a : s.agents) j["agents"].push_back(rows_to_json(a));
  j["lanes"] = json::array();
  for (const auto& l : s.lanes) j["lanes"].push_back(rows_to_json(l));
  j["crosswalks"] = json::array();
  for (const auto& c : s.crosswalks) j["crosswalks"].push_back(rows_to_json(c));
  return j;
}

scene::SceneSnapshot scene_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("scene must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key != "ego_history" && key != "agents" && key != "lanes" && key != "crosswalks") {
      throw FormatError("unknown scene key " + key);
    }
  }
  if (!j.contains("ego_history")) throw FormatError("scene needs ego_history");
  scene::SceneSnapshot s;
  s.ego_history = rows_from_json(j.at("ego_history"), scene::kAgentFeatures, "ego_history");
  auto list = [&](const char* key, std::size_t width, std::vector<scene::FeatureRows>& out) {
    if (!j.contains(key)) return;
    const json& a = j.at(key);
    if (!a.is_array()) throw FormatError(std::string(key) + " must be an array");
    for (std::size_t i = 0; i < a.size(); ++i) {
      out.push_back(rows_from_json(a[i], width, std::string(key) + "[" + std::to_string(i) + "]"));
    }
  };
  list("agents", scene::kAgentFeatures, s.agents);
  list("lanes", scene::kLaneFeatures, s.lanes);
  list("crosswalks", scene::kCrossFeatures, s.crosswalks);
  try {
    s.validate();
  } catch (const std::logic_error& e) {
    throw FormatError(std::string("invalid scene: ") + e.what());
  }
  return s;
}

json ring_data_to_json(const sim::RingScenario& sc, const std::vector<sim::RingSample>& samples) {
  json j;
  j["scenario"] = {{"radius", sc.radius},
                   {"speed", sc.speed},
                   {"rate", sc.rate},
                   {"history_frames", sc.history_frames}};
  j["samples"] = json::array();
  for (const auto& s : samples) {
    j["samples"].push_back({{"history", poses_to_json(s.history)},
                            {"future", poses_to_json(s.future.points)}});
  }
  return j;
}

std::vector<sim::RingSample> ring_data_from_json(const json& j, sim::RingScenario* sc) {
  if (!j.is_object() || !j.contains("scenario") || !j.contains("samples")) {
    throw FormatError("ring data needs \"scenario\" and \"samples\"");
  }
  sim::RingScenario scenario;
  try {
    const json& s = j.at("scenario");
    scenario.radius = s.at("radius").get<double>();
    scenario.speed = s.at("speed").get<double>();
    scenario.rate = s.at("rate").get<double>();
    scenario.history_frames = s.at("history_frames").get<std::size_t>();
    scenario.validate();
  } catch (const std::exception& e) {
    throw FormatError(std::string("bad ring scenario: ") + e.what());
  }
  std::vector<sim::RingSample> out;
  for (const json& s : j.at("samples")) {
    if (!s.is_object() || !s.contains("history") || !s.contains("future")) {
      throw FormatError("ring sample needs history and future");
    }
    sim::RingSample r;
    r.history = poses_from_json(s.at("history"), "history");
    r.future.points = poses_from_json(s.at("future"), "future");
    r.future.dt = scenario.dt();
    out.push_back(std::move(r));
  }
  if (sc) *sc = scenario;
  return out;
}

json metrics_to_json(const sim::MetricsReport& r) {
  return {{"offroad_rate", r.offroad_rate},
          {"discomfort_rate", r.discomfort_rate},
          {"l2_error", r.l2_error},
          {"n_rollouts", r.n_rollouts}};
}

PlotScene plot_scene(const scene::SceneSnapshot& s) {
  PlotScene p;
  auto add = [&](const scene::FeatureRows& f) {
    std::vector<Point2> line;
    for (std::size_t r = 0; r < f.rows(); ++r) {
      if (f.mask[r]) line.push_back({f.at(r, 0), f.at(r, 1)});
    }
    if (!line.empty()) p.polylines.push_back(std::move(line));
  };
  for (const auto& l : s.lanes) add(l);
  for (const auto& c : s.crosswalks) add(c);
  return p;
}

std::string render_svg(const PlotScene& scene, const std::vector<TrajectorySample>& samples,
                       const Trajectory& executed) {
  double lo_x = std::numeric_limits<double>::infinity(), lo_y = lo_x;
  double hi_x = -lo_x, hi_y = -lo_x;
  auto grow = [&](double x, double y) {
    lo_x = std::min(lo_x, x);
    hi_x = std::max(hi_x, x);
    lo_y = std::min(lo_y, y);
    hi_y = std::max(hi_y, y);
  };
  for (const auto& c : scene.circles) {
    grow(c.center.x - c.radius, c.center.y - c.radius);
    grow(c.center.x + c.radius, c.center.y + c.radius);
  }
  for (const auto& l : scene.polylines) {
    for (const auto& p : l) grow(p.x, p.y);
  }
  for (const auto& s : samples) {
    for (const auto& p : s.trajectory.points) grow(p.x, p.y);
  }
  for (const auto& p : executed.points) grow(p.x, p.y);
  if (!(lo_x <= hi_x)) {
    lo_x = lo_y = 0.0;
    hi_x = hi_y = 1.0;
  }
  const double margin = 0.05 * std::max({hi_x - lo_x, hi_y - lo_y, 1.0});
  lo_x -= margin;
  lo_y -= margin;
  hi_x += margin;
  hi_y += margin;
  const double width = hi_x - lo_x, height = hi_y - lo_y;
  const double stroke = 0.003 * std::max(width, height);
  // SVG y grows downwards; flip so the plot keeps the world orientation.
  auto px = [&](double x) { return coord(x - lo_x); };
  auto py = [&](double y) { return coord(hi_y - y); };
  auto points = [&](const std::vector<Point2>& pts) {
    std::string s;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i) s += ' ';
      s += px(pts[i].x) + "," + py(pts[i].y);
    }
    return s;
  };
  auto pose_points = [&](const std::vector<Pose2D>& poses) {
    std::vector<Point2> pts;
    for (const auto& p : poses) pts.push_back({p.x, p.y});
    return points(pts);
  };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << coord(width) << ' '
     << coord(height) << "\">\n";
  for (const auto& c : scene.circles) {
    os << "<circle cx=\"" << px(c.center.x) << "\" cy=\"" << py(c.center.y) << "\" r=\""
       << coord(c.radius) << "\" fill=\"none\" stroke=\"#999999\" stroke-width=\""
       << coord(stroke) << "\"/>\n";
  }
  for (const auto& l : scene.polylines) {
    os << "<polyline points=\"" << points(l) << "\" fill=\"none\" stroke=\"#bbbbbb\" stroke-width=\""
       << coord(stroke) << "\"/>\n";
  }
  double max_p = 0.0;
  for (const auto& s : samples) max_p = std::max(max_p, s.probability);
  for (const auto& s : samples) {
    const double f = max_p > 0.0 ? s.probability / max_p : 0.0;
    const int r = static_cast<int>(std::lround(60 + 195 * f));
    const int b = static_cast<int>(std::lround(220 - 180 * f));
    char color[16];
    std::snprintf(color, sizeof color, "#%02x40%02x", r, b);
    os << "<polyline points=\"" << pose_points(s.trajectory.points) << "\" fill=\"none\" stroke=\""
       << color << "\" stroke-width=\"" << coord(stroke) << "\"/>\n";
  }
  if (!executed.empty()) {
    os << "<polyline points=\"" << pose_points(executed.points)
       << "\" fill=\"none\" stroke=\"#000000\" stroke-width=\"" << coord(2.0 * stroke) << "\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void emit_svg_plot(const std::string& path, const PlotScene& scene,
                   const std::vector<TrajectorySample>& samples, const Trajectory& executed) {
  write_text_file(path, render_svg(scene, samples, executed));
}

}  // namespace trajmix::io
