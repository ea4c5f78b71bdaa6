#include "thermofuse/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "thermofuse/error.hpp"
#include "thermofuse/rng.hpp"

namespace thermofuse {

namespace {

std::string trim(std::string_view s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

bool valid_key(std::string_view k) {
  if (k.empty()) return false;
  return std::all_of(k.begin(), k.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-';
  });
}

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

}  // namespace

ConfigEntries parse_config(const std::string& text) {
  ConfigEntries out;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string s = trim(strip_comment(line));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw Error(ErrorCode::ConfigError, "unterminated section header", line_no);
      section = trim(std::string_view(s).substr(1, s.size() - 2));
      if (!valid_key(section)) throw Error(ErrorCode::ConfigError, "bad section name '" + section + "'", line_no);
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::ConfigError, "expected 'key = value'", line_no);
    const std::string key = trim(std::string_view(s).substr(0, eq));
    const std::string value = trim(std::string_view(s).substr(eq + 1));
    if (!valid_key(key)) throw Error(ErrorCode::ConfigError, "bad key '" + key + "'", line_no);
    if (value.empty()) throw Error(ErrorCode::ConfigError, "missing value for '" + key + "'", line_no);
    const std::string full = section.empty() ? key : section + "." + key;
    if (out.count(full) != 0) throw Error(ErrorCode::ConfigError, "duplicate key '" + full + "'", line_no);
    out[full] = {value, line_no};
  }
  return out;
}

ConfigEntries read_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str());
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.detail(), e.line());
  }
}

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& raw, int line, const std::string& want) {
  const std::string msg = "config key '" + key + "': expected " + want + ", got '" + raw + "'";
  if (line > 0) throw Error(ErrorCode::ConfigError, msg, line);
  throw Error(ErrorCode::ConfigError, msg);
}

std::string unquote(const std::string& raw) {
  if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"') return raw.substr(1, raw.size() - 2);
  return raw;
}

template <typename T>
bool parse_number(const std::string& s, T& out) {
  std::string_view v = s;
  if (!v.empty() && v.front() == '+') v.remove_prefix(1);
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  return res.ec == std::errc{} && res.ptr == v.data() + v.size();
}

std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

struct Binding {
  std::function<void(PipelineConfig&, const std::string& key, const std::string& raw, int line)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

using Table = std::map<std::string, Binding>;

template <typename Ref>
Binding real(Ref ref) {
  return {[ref](PipelineConfig& c, const std::string& k, const std::string& raw, int line) {
            double v = 0.0;
            if (!parse_number(raw, v)) bad_value(k, raw, line, "a number");
            ref(c) = v;
          },
          [ref](const PipelineConfig& c) { return fmt_double(ref(const_cast<PipelineConfig&>(c))); }};
}

template <typename T, typename Ref>
Binding integer(Ref ref) {
  return {[ref](PipelineConfig& c, const std::string& k, const std::string& raw, int line) {
            T v{};
            if (!parse_number(raw, v)) bad_value(k, raw, line, "an integer");
            ref(c) = v;
          },
          [ref](const PipelineConfig& c) { return std::to_string(ref(const_cast<PipelineConfig&>(c))); }};
}

template <typename Ref>
Binding boolean(Ref ref) {
  return {[ref](PipelineConfig& c, const std::string& k, const std::string& raw, int line) {
            if (raw == "true") {
              ref(c) = true;
            } else if (raw == "false") {
              ref(c) = false;
            } else {
              bad_value(k, raw, line, "true or false");
            }
          },
          [ref](const PipelineConfig& c) {
            return std::string(ref(const_cast<PipelineConfig&>(c)) ? "true" : "false");
          }};
}

template <typename Ref>
Binding text(Ref ref) {
  return {[ref](PipelineConfig& c, const std::string&, const std::string& raw, int) { ref(c) = unquote(raw); },
          [ref](const PipelineConfig& c) { return "\"" + ref(const_cast<PipelineConfig&>(c)) + "\""; }};
}

template <typename Ref>
Binding triple(Ref ref) {
  return {[ref](PipelineConfig& c, const std::string& k, const std::string& raw, int line) {
            if (raw.size() < 2 || raw.front() != '[' || raw.back() != ']') bad_value(k, raw, line, "[a, b, c]");
            std::array<double, 3> v{};
            std::istringstream in(raw.substr(1, raw.size() - 2));
            std::string item;
            std::size_t n = 0;
            while (std::getline(in, item, ',')) {
              if (n >= 3 || !parse_number(trim(item), v[n])) bad_value(k, raw, line, "three numbers");
              ++n;
            }
            if (n != 3) bad_value(k, raw, line, "three numbers");
            ref(c) = v;
          },
          [ref](const PipelineConfig& c) {
            const auto& v = ref(const_cast<PipelineConfig&>(c));
            return "[" + fmt_double(v[0]) + ", " + fmt_double(v[1]) + ", " + fmt_double(v[2]) + "]";
          }};
}

const Table& table() {
  static const Table t = [] {
    Table m;
    m["seed"] = integer<std::uint64_t>([](PipelineConfig& c) -> std::uint64_t& { return c.seed; });
    m["threads"] = integer<int>([](PipelineConfig& c) -> int& { return c.threads; });
    m["paths.manifest"] = text([](PipelineConfig& c) -> std::string& { return c.manifest; });
    m["paths.out"] = text([](PipelineConfig& c) -> std::string& { return c.out; });

    m["alignment.min_keypoints"] = integer<int>([](PipelineConfig& c) -> int& { return c.gate.min_keypoints; });
    m["alignment.max_mean_sq_residual"] =
        real([](PipelineConfig& c) -> double& { return c.gate.max_mean_sq_residual; });
    m["alignment.robust_iterations"] =
        integer<int>([](PipelineConfig& c) -> int& { return c.gate.robust_iterations; });
    m["alignment.robust_inlier_px"] = real([](PipelineConfig& c) -> double& { return c.gate.robust_inlier_px; });
    m["alignment.crop_fraction"] = real([](PipelineConfig& c) -> double& { return c.crop_fraction; });
    m["alignment.strict_sensor_dims"] = boolean([](PipelineConfig& c) -> bool& { return c.strict_sensor_dims; });

    m["fusion.rescale"] = {
        [](PipelineConfig& c, const std::string& k, const std::string& raw, int line) {
          try {
            c.fusion.rescale = rescale_from_string(unquote(raw));
          } catch (const Error&) {
            bad_value(k, raw, line, "\"moments\" or \"minmax\"");
          }
        },
        [](const PipelineConfig& c) { return "\"" + std::string(to_string(c.fusion.rescale)) + "\""; }};
    m["fusion.normalize_tir"] = boolean([](PipelineConfig& c) -> bool& { return c.fusion.normalize_tir; });

    m["late.policy"] = {
        [](PipelineConfig& c, const std::string& k, const std::string& raw, int line) {
          try {
            c.policy = policy_from_string(unquote(raw));
          } catch (const Error&) {
            bad_value(k, raw, line, "\"classify_all\" or \"passthrough\"");
          }
        },
        [](const PipelineConfig& c) { return "\"" + std::string(to_string(c.policy)) + "\""; }};
    m["late.label_iou"] = real([](PipelineConfig& c) -> double& { return c.label_iou; });

    m["cart.max_depth"] = integer<int>([](PipelineConfig& c) -> int& { return c.cart.max_depth; });
    m["cart.min_samples_leaf"] = integer<int>([](PipelineConfig& c) -> int& { return c.cart.min_samples_leaf; });
    m["cart.min_impurity_decrease"] =
        real([](PipelineConfig& c) -> double& { return c.cart.min_impurity_decrease; });

    m["eval.iou"] = real([](PipelineConfig& c) -> double& { return c.eval.iou_match_thresh; });
    m["eval.score"] = real([](PipelineConfig& c) -> double& { return c.eval.score_thresh; });

    m["split.train"] = real([](PipelineConfig& c) -> double& { return c.split.train; });
    m["split.val"] = real([](PipelineConfig& c) -> double& { return c.split.val; });
    m["split.test"] = real([](PipelineConfig& c) -> double& { return c.split.test; });

    m["tile.size"] = integer<int>([](PipelineConfig& c) -> int& { return c.tile.options.tile_size; });
    m["tile.overlap"] = integer<int>([](PipelineConfig& c) -> int& { return c.tile.options.overlap; });
    m["tile.min_box_area_frac"] =
        real([](PipelineConfig& c) -> double& { return c.tile.options.min_box_area_frac; });
    m["tile.nms_iou"] = real([](PipelineConfig& c) -> double& { return c.tile.nms_iou; });

    m["scenario.n_images"] = integer<int>([](PipelineConfig& c) -> int& { return c.scenario.n_images; });
    m["scenario.canvas_width"] = integer<int>([](PipelineConfig& c) -> int& { return c.scenario.canvas_width; });
    m["scenario.canvas_height"] = integer<int>([](PipelineConfig& c) -> int& { return c.scenario.canvas_height; });
    m["scenario.objects_per_image"] =
        real([](PipelineConfig& c) -> double& { return c.scenario.objects_per_image; });
    m["scenario.class_priors"] =
        triple([](PipelineConfig& c) -> std::array<double, 3>& { return c.scenario.class_priors; });
    m["scenario.vis_recall"] =
        triple([](PipelineConfig& c) -> std::array<double, 3>& { return c.scenario.vis_recall; });
    m["scenario.tir_recall"] = real([](PipelineConfig& c) -> double& { return c.scenario.tir_recall; });
    m["scenario.vis_fp_rate"] = real([](PipelineConfig& c) -> double& { return c.scenario.vis_fp_rate; });
    m["scenario.tir_fp_rate"] = real([](PipelineConfig& c) -> double& { return c.scenario.tir_fp_rate; });
    m["scenario.jitter_center_px"] = real([](PipelineConfig& c) -> double& { return c.scenario.jitter_center_px; });
    m["scenario.jitter_scale"] = real([](PipelineConfig& c) -> double& { return c.scenario.jitter_scale; });
    m["scenario.tp_score_alpha"] = real([](PipelineConfig& c) -> double& { return c.scenario.tp_score.alpha; });
    m["scenario.tp_score_beta"] = real([](PipelineConfig& c) -> double& { return c.scenario.tp_score.beta; });
    m["scenario.fp_score_alpha"] = real([](PipelineConfig& c) -> double& { return c.scenario.fp_score.alpha; });
    m["scenario.fp_score_beta"] = real([](PipelineConfig& c) -> double& { return c.scenario.fp_score.beta; });
    m["scenario.box_min_side"] = real([](PipelineConfig& c) -> double& { return c.scenario.box_min_side; });
    m["scenario.box_max_side"] = real([](PipelineConfig& c) -> double& { return c.scenario.box_max_side; });
    m["scenario.box_log_aspect"] = real([](PipelineConfig& c) -> double& { return c.scenario.box_log_aspect; });
    m["scenario.max_gt_overlap"] = real([](PipelineConfig& c) -> double& { return c.scenario.max_gt_overlap; });
    m["scenario.placement_attempts"] =
        integer<int>([](PipelineConfig& c) -> int& { return c.scenario.placement_attempts; });
    m["scenario.tir_shrink"] = real([](PipelineConfig& c) -> double& { return c.scenario.tir_shrink; });
    m["scenario.vis_class_confusion"] =
        real([](PipelineConfig& c) -> double& { return c.scenario.vis_class_confusion; });
    m["scenario.correlated_fp"] = boolean([](PipelineConfig& c) -> bool& { return c.scenario.correlated_fp; });
    return m;
  }();
  return t;
}

}  // namespace

void PipelineConfig::set(const std::string& key, const std::string& raw, int line) {
  const auto it = table().find(key);
  if (it == table().end()) {
    if (line > 0) throw Error(ErrorCode::ConfigError, "unknown config key '" + key + "'", line);
    throw Error(ErrorCode::ConfigError, "unknown config key '" + key + "'");
  }
  it->second.set(*this, key, raw, line);
  if (key == "seed") {
    gate.seed = seed;
    scenario.seed = seed;
  }
}

void PipelineConfig::apply(const ConfigEntries& entries) {
  for (const auto& [k, v] : entries) set(k, v.raw, v.line);
}

void PipelineConfig::validate() const {
  if (threads < 1) throw Error(ErrorCode::ConfigError, "threads must be >= 1");
  gate.validate();
  if (!(crop_fraction > 0.0 && crop_fraction <= 1.0)) {
    throw Error(ErrorCode::ConfigError, "alignment.crop_fraction must lie in (0, 1]");
  }
  if (!(label_iou > 0.0 && label_iou <= 1.0)) throw Error(ErrorCode::ConfigError, "late.label_iou must lie in (0, 1]");
  cart.validate();
  eval.validate();
  const double sum = split.train + split.val + split.test;
  if (split.train < 0 || split.val < 0 || split.test < 0 || std::abs(sum - 1.0) > 1e-9) {
    throw Error(ErrorCode::ConfigError, "split ratios must be non-negative and sum to 1");
  }
  if (tile.options.tile_size <= 0 || tile.options.overlap < 0 || tile.options.overlap >= tile.options.tile_size) {
    throw Error(ErrorCode::ConfigError, "tile.size must be positive and tile.overlap in [0, tile.size)");
  }
  if (!(tile.options.min_box_area_frac > 0.0 && tile.options.min_box_area_frac <= 1.0)) {
    throw Error(ErrorCode::ConfigError, "tile.min_box_area_frac must lie in (0, 1]");
  }
  if (!(tile.nms_iou >= 0.0 && tile.nms_iou <= 1.0)) throw Error(ErrorCode::ConfigError, "tile.nms_iou must lie in [0, 1]");
  scenario.validate();
}

std::string PipelineConfig::canonical() const {
  std::string out;
  for (const auto& [k, b] : table()) out += k + " = " + b.get(*this) + "\n";
  return out;
}

std::string PipelineConfig::hash() const {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical())));
  return buf;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& [k, b] : table()) out.push_back(k);
  return out;
}

}  // namespace thermofuse
