#include "lanemodel/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <string>

#include <fmt/format.h>
#include <fmt/ostream.h>

namespace lanemodel {

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  return fmt::format("{:.17g}", v);
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double to_double(std::string_view text, std::size_t line_no) {
  if (text == "nan") return std::nan("");
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw InputError(fmt::format("line {}: '{}' is not a number", line_no, text));
  }
  return v;
}

int to_int(std::string_view text, std::size_t line_no) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw InputError(fmt::format("line {}: '{}' is not an integer", line_no, text));
  }
  return v;
}

// Calls `row` for each non-empty data line after the header.
template <typename F>
void for_each_row(std::istream& in, std::size_t columns, F&& row) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 || line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != columns) {
      throw InputError(fmt::format("line {}: expected {} columns, got {}", line_no, columns, cells.size()));
    }
    row(cells, line_no);
  }
  if (line_no == 0) throw InputError("empty input file");
}

LaneLabel parse_label(std::string_view text, std::size_t line_no) {
  for (auto label : {LaneLabel::kEgo, LaneLabel::kAdjacent, LaneLabel::kOuter}) {
    if (to_string(label) == text) return label;
  }
  throw InputError(fmt::format("line {}: unknown lane label '{}'", line_no, text));
}

}  // namespace

void write_features(std::ostream& out, std::span<const RecordedFrame> frames) {
  out << "frame_id,x,y,theta,var_x,var_y,var_theta,type,color\n";
  for (const auto& frame : frames) {
    for (const auto& f : frame.features) {
      const auto type = static_cast<MarkingType>(f.attrs.marking.argmax());
      const auto color = static_cast<MarkingColor>(f.attrs.color.argmax());
      fmt::print(out, "{},{},{},{},{},{},{},{},{}\n", frame.frame_id, num(f.x), num(f.y), num(f.theta),
                 num(f.cov(0, 0)), num(f.cov(1, 1)), num(f.cov(2, 2)), to_string(type), to_string(color));
    }
  }
}

void write_odometry(std::ostream& out, std::span<const RecordedFrame> frames) {
  out << "frame_id,dx,dy,dpsi\n";
  for (const auto& frame : frames) {
    fmt::print(out, "{},{},{},{}\n", frame.frame_id, num(frame.odometry.dx), num(frame.odometry.dy),
               num(frame.odometry.dpsi));
  }
}

void write_truth(std::ostream& out, const TruthData& truth) {
  out << "kind,id,x,y,heading\n";
  for (std::size_t k = 0; k < truth.poses.size(); ++k) {
    const auto& p = truth.poses[k];
    fmt::print(out, "pose,{},{},{},{}\n", k, num(p.x), num(p.y), num(p.theta));
  }
  for (std::size_t i = 0; i < truth.lines.size(); ++i) {
    for (const auto& p : truth.lines[i]) fmt::print(out, "point,{},{},{},{}\n", i, num(p.x), num(p.y), num(p.heading));
  }
}

std::vector<RecordedFrame> read_recording(std::istream& features, std::istream& odometry, double attr_confidence) {
  std::vector<RecordedFrame> frames;
  std::map<int, std::size_t> index;
  for_each_row(odometry, 4, [&](const auto& c, std::size_t n) {
    RecordedFrame f;
    f.frame_id = to_int(c[0], n);
    f.odometry = {to_double(c[1], n), to_double(c[2], n), to_double(c[3], n)};
    if (!index.emplace(f.frame_id, frames.size()).second) {
      throw InputError(fmt::format("odometry line {}: duplicate frame {}", n, f.frame_id));
    }
    frames.push_back(std::move(f));
  });
  for_each_row(features, 9, [&](const auto& c, std::size_t n) {
    const int id = to_int(c[0], n);
    const auto it = index.find(id);
    if (it == index.end()) throw InputError(fmt::format("features line {}: frame {} has no odometry", n, id));
    Feature f;
    f.x = to_double(c[1], n);
    f.y = to_double(c[2], n);
    f.theta = to_double(c[3], n);
    f.cov = Eigen::Vector3d(to_double(c[4], n), to_double(c[5], n), to_double(c[6], n)).asDiagonal();
    try {
      f.attrs = AttributeMass::observed(parse_marking_type(c[7]), parse_marking_color(c[8]), attr_confidence);
      validate_feature(f);
    } catch (const std::invalid_argument& e) {
      throw InputError(fmt::format("features line {}: {}", n, e.what()));
    }
    frames[it->second].features.push_back(f);
  });
  return frames;
}

TruthData read_truth(std::istream& in) {
  TruthData truth;
  std::map<int, Pose2> poses;
  std::map<int, std::vector<PathSample>> lines;
  for_each_row(in, 5, [&](const auto& c, std::size_t n) {
    const int id = to_int(c[1], n);
    const double x = to_double(c[2], n);
    const double y = to_double(c[3], n);
    const double h = to_double(c[4], n);
    if (c[0] == "pose") {
      poses[id] = {x, y, h};
    } else if (c[0] == "point") {
      lines[id].push_back({0.0, x, y, h});
    } else {
      throw InputError(fmt::format("truth line {}: unknown record kind '{}'", n, c[0]));
    }
  });
  int expected = 0;
  for (const auto& [id, pose] : poses) {
    if (id != expected++) throw InputError("truth poses must be numbered 0..N-1");
    truth.poses.push_back(pose);
  }
  for (auto& [id, samples] : lines) truth.lines.push_back(std::move(samples));
  return truth;
}

void write_bins(std::ostream& out, std::span<const BinRow> rows) {
  out << "bin_start,bin_end,lane_label,rmse,sample_count\n";
  for (const auto& r : rows) fmt::print(out, "{},{},{},{},{}\n", num(r.start), num(r.end), to_string(r.label), num(r.rmse), r.count);
}

void write_frame_series(std::ostream& out, std::span<const FrameMetrics> frames) {
  out << "frame_id,rmse,max_error,sample_count,model_lines,matched_lines,unmatched_truth,empty_model\n";
  for (const auto& f : frames) {
    fmt::print(out, "{},{},{},{},{},{},{},{}\n", f.frame, num(f.rmse), num(f.max_error), f.samples, f.model_lines,
               f.matched_lines, f.unmatched_truth, f.empty_model ? 1 : 0);
  }
}

void write_deviations(std::ostream& out, std::span<const Deviation> devs) {
  out << "frame_id,lane_label,truth_line,x,deviation\n";
  for (const auto& d : devs) {
    fmt::print(out, "{},{},{},{},{}\n", d.frame, to_string(d.label), d.truth_line, num(d.x), num(d.deviation));
  }
}

std::vector<Deviation> read_deviations(std::istream& in) {
  std::vector<Deviation> out;
  for_each_row(in, 5, [&](const auto& c, std::size_t n) {
    out.push_back({to_int(c[0], n), parse_label(c[1], n), to_int(c[2], n), to_double(c[3], n), to_double(c[4], n)});
  });
  return out;
}

void write_comparison(std::ostream& out, const ComparisonTable& table) {
  out << "frame_id,arclength,straight,rmse_spline,rmse_clothoid\n";
  for (const auto& r : table.rows) {
    fmt::print(out, "{},{},{},{},{}\n", r.frame, num(r.arclength), r.straight ? 1 : 0, num(r.rmse_spline),
               num(r.rmse_clothoid));
  }
}

void write_comparison_summary(std::ostream& out, const ComparisonTable& table) {
  out << "metric,value\n";
  fmt::print(out, "max_rmse_spline,{}\n", num(table.max_rmse_spline));
  fmt::print(out, "max_rmse_clothoid,{}\n", num(table.max_rmse_clothoid));
  fmt::print(out, "max_ratio,{}\n", num(table.max_ratio));
  fmt::print(out, "straight_mean_spline,{}\n", num(table.straight_mean_spline));
  fmt::print(out, "straight_mean_clothoid,{}\n", num(table.straight_mean_clothoid));
  fmt::print(out, "empty_frames_spline,{}\n", table.spline.empty_frames);
  fmt::print(out, "empty_frames_clothoid,{}\n", table.clothoid.empty_frames);
}

void write_metrics(const std::filesystem::path& dir, const MetricsTable& table) {
  std::filesystem::create_directories(dir);
  std::ofstream bins(dir / "bins.csv");
  write_bins(bins, table.bins);
  std::ofstream frames(dir / "frames.csv");
  write_frame_series(frames, table.frames);
  std::ofstream devs(dir / "deviations.csv");
  write_deviations(devs, table.deviations);
}

}  // namespace lanemodel
