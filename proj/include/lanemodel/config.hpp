#pragma once

#include <filesystem>
#include <istream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lanemodel {

struct InitConfig {
  double max_x = 20.0;
  double gap_threshold = 1.0;
  int min_cluster_size = 5;
  double cluster_half_width = 1.0;
};

struct PredictConfig {
  double cull_behind = -5.0;
  double min_segment_span = 0.1;
};

struct AssocConfig {
  double gate_chi2 = 9.21;
  double euclid_gate = 2.0;
  double spawn_min_separation = 1.5;
  double range_decay = 10.0;
  int spawn_grace = 5;
};

struct ModelConfig {
  double max_segment_len = 50.0;
  double min_segment_len = 10.0;
  int max_segments = 0;  // 0: unlimited; 1 gives the single-cubic (clothoid) model
};

struct FitConfig {
  double step_tol = 1e-6;
  int max_iters = 20;
  double damping_init = 1e-6;
  double damping_max = 1e2;
  double cond_limit = 1e12;
  double odo_sigma_y = 0.02;
  double odo_sigma_theta = 0.002;
};

struct AttributeConfig {
  double forget = 0.95;
  double confidence = 0.7;
};

struct EvalConfig {
  double bin_width = 10.0;
  double match_dist = 1.0;
};

struct Config {
  InitConfig init;
  PredictConfig predict;
  AssocConfig assoc;
  ModelConfig model;
  FitConfig fit;
  AttributeConfig attr;
  EvalConfig eval;
  int em_max_iters = 10;
};

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Ordered `section.key = value` entries of an INI-style file. Repeated keys
/// are kept in file order.
class KeyValueFile {
 public:
  static KeyValueFile parse(std::istream& in);
  static KeyValueFile load(const std::filesystem::path& path);

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
  bool has(const std::string& key) const;
  std::vector<std::string> all(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback) const;
  double get(const std::string& key, double fallback) const;
  int get(const std::string& key, int fallback) const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Applies recognized keys on top of defaults; unknown keys raise InputError.
Config load_config(const KeyValueFile& file, Config base = {});

}  // namespace lanemodel
