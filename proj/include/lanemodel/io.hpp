#pragma once

#include <filesystem>
#include <istream>
#include <ostream>
#include <span>
#include <vector>

#include "lanemodel/evaluation.hpp"
#include "lanemodel/simulator.hpp"

namespace lanemodel {

// Feature records: frame_id,x,y,theta,var_x,var_y,var_theta,type,color
void write_features(std::ostream& out, std::span<const RecordedFrame> frames);
// Odometry records: frame_id,dx,dy,dpsi (motion since the previous frame)
void write_odometry(std::ostream& out, std::span<const RecordedFrame> frames);
// Truth records: kind,id,x,y,heading with kind "pose" (id = frame index) or "point" (id = line index)
void write_truth(std::ostream& out, const TruthData& truth);

/// Joins feature and odometry files into frames, ordered as the odometry
/// file lists them. Attribute columns become masses with `attr_confidence`.
/// Throws InputError on malformed rows or features of unknown frames.
std::vector<RecordedFrame> read_recording(std::istream& features, std::istream& odometry, double attr_confidence);
TruthData read_truth(std::istream& in);

void write_bins(std::ostream& out, std::span<const BinRow> rows);
void write_frame_series(std::ostream& out, std::span<const FrameMetrics> frames);
void write_deviations(std::ostream& out, std::span<const Deviation> devs);
void write_comparison(std::ostream& out, const ComparisonTable& table);
void write_comparison_summary(std::ostream& out, const ComparisonTable& table);

/// Reads back a deviations file (for re-binning checks).
std::vector<Deviation> read_deviations(std::istream& in);

/// Writes bins.csv, frames.csv and deviations.csv into `dir`.
void write_metrics(const std::filesystem::path& dir, const MetricsTable& table);

}  // namespace lanemodel
