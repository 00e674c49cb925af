#include "lanemodel/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>

#include <boost/program_options/options_description.hpp>
#include <boost/program_options/parsers.hpp>

namespace lanemodel {

namespace po = boost::program_options;

KeyValueFile KeyValueFile::parse(std::istream& in) {
  KeyValueFile file;
  po::options_description none;
  try {
    const auto parsed = po::parse_config_file(in, none, /*allow_unregistered=*/true);
    for (const auto& opt : parsed.options) {
      file.entries_.emplace_back(opt.string_key, opt.value.empty() ? std::string{} : opt.value.front());
    }
  } catch (const po::error& e) {
    throw InputError(std::string("malformed key=value file: ") + e.what());
  }
  return file;
}

KeyValueFile KeyValueFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return parse(in);
}

bool KeyValueFile::has(const std::string& key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return true;
  }
  return false;
}

std::vector<std::string> KeyValueFile::all(const std::string& key) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : entries_) {
    if (k == key) out.push_back(v);
  }
  return out;
}

std::string KeyValueFile::get(const std::string& key, const std::string& fallback) const {
  // last occurrence wins
  std::string value = fallback;
  for (const auto& [k, v] : entries_) {
    if (k == key) value = v;
  }
  return value;
}

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) {
    throw InputError("key '" + key + "': cannot parse '" + text + "' as a number");
  }
  return value;
}

}  // namespace

double KeyValueFile::get(const std::string& key, double fallback) const {
  if (!has(key)) return fallback;
  return parse_number<double>(key, get(key, std::string{}));
}

int KeyValueFile::get(const std::string& key, int fallback) const {
  if (!has(key)) return fallback;
  return parse_number<int>(key, get(key, std::string{}));
}

Config load_config(const KeyValueFile& file, Config base) {
  Config c = std::move(base);
  std::map<std::string, std::function<void(const std::string&)>> setters;
  auto real = [&](const char* key, double& field) {
    setters[key] = [&field, key](const std::string& v) { field = parse_number<double>(key, v); };
  };
  auto integer = [&](const char* key, int& field) {
    setters[key] = [&field, key](const std::string& v) { field = parse_number<int>(key, v); };
  };
  real("init.max_x", c.init.max_x);
  real("init.gap_threshold", c.init.gap_threshold);
  integer("init.min_cluster_size", c.init.min_cluster_size);
  real("init.cluster_half_width", c.init.cluster_half_width);
  real("predict.cull_behind", c.predict.cull_behind);
  real("predict.min_segment_span", c.predict.min_segment_span);
  real("assoc.gate_chi2", c.assoc.gate_chi2);
  real("assoc.euclid_gate", c.assoc.euclid_gate);
  real("assoc.spawn_min_separation", c.assoc.spawn_min_separation);
  real("assoc.range_decay", c.assoc.range_decay);
  integer("assoc.spawn_grace", c.assoc.spawn_grace);
  real("model.max_segment_len", c.model.max_segment_len);
  real("model.min_segment_len", c.model.min_segment_len);
  integer("model.max_segments", c.model.max_segments);
  real("fit.step_tol", c.fit.step_tol);
  integer("fit.max_iters", c.fit.max_iters);
  real("fit.damping_init", c.fit.damping_init);
  real("fit.damping_max", c.fit.damping_max);
  real("fit.cond_limit", c.fit.cond_limit);
  real("fit.odo_sigma_y", c.fit.odo_sigma_y);
  real("fit.odo_sigma_theta", c.fit.odo_sigma_theta);
  real("attr.forget", c.attr.forget);
  real("attr.confidence", c.attr.confidence);
  real("eval.bin_width", c.eval.bin_width);
  real("eval.match_dist", c.eval.match_dist);
  integer("em.max_iters", c.em_max_iters);

  for (const auto& [key, value] : file.entries()) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw InputError("unknown config key '" + key + "'");
    it->second(value);
  }
  if (c.model.min_segment_len <= 0.0 || c.model.max_segment_len < c.model.min_segment_len) {
    throw InputError("model.max_segment_len must be >= model.min_segment_len > 0");
  }
  if (c.init.max_x <= 0.0) throw InputError("init.max_x must be positive");
  if (c.fit.max_iters < 1 || c.em_max_iters < 1) throw InputError("iteration caps must be >= 1");
  return c;
}

}  // namespace lanemodel
