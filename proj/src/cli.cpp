#include "thermofuse/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "thermofuse/alignment.hpp"
#include "thermofuse/config.hpp"
#include "thermofuse/detection.hpp"
#include "thermofuse/early_fusion.hpp"
#include "thermofuse/error.hpp"
#include "thermofuse/evaluation.hpp"
#include "thermofuse/late_fusion.hpp"
#include "thermofuse/log.hpp"
#include "thermofuse/parallel.hpp"
#include "thermofuse/rng.hpp"
#include "thermofuse/synth.hpp"

#ifndef THERMOFUSE_VERSION
#define THERMOFUSE_VERSION "0.0.0"
#endif

namespace thermofuse {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

const char* version() { return THERMOFUSE_VERSION; }

namespace {

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
  const fs::path p(path);
  std::error_code ec;
  if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorCode::IoError, "cannot create directory " + dir);
}

std::string parent_dir(const std::string& file) {
  const fs::path p = fs::path(file).parent_path();
  return p.empty() ? "." : p.string();
}

// Common flags shared by every subcommand.
struct CommonOpts {
  std::string config;
  std::string out;
  std::string manifest;
  std::string seed;
  int threads = 0;
  std::vector<std::string> sets;
};

void add_common(CLI::App* sub, CommonOpts& o, bool with_manifest) {
  sub->add_option("--config", o.config, "key-value config file");
  sub->add_option("--out", o.out, "output path");
  if (with_manifest) sub->add_option("--manifest", o.manifest, "manifest (JSON lines)");
  sub->add_option("--seed", o.seed, "top-level seed");
  sub->add_option("--threads", o.threads, "worker threads");
  sub->add_option("--set", o.sets, "override a config key, e.g. --set eval.iou=0.6");
}

PipelineConfig load_config(const CommonOpts& o) {
  PipelineConfig cfg;
  if (!o.config.empty()) cfg.apply(read_config_file(o.config));
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::ConfigError, "--set expects key=value, got '" + s + "'");
    cfg.set(s.substr(0, eq), s.substr(eq + 1));
  }
  if (!o.seed.empty()) cfg.set("seed", o.seed);
  if (o.threads > 0) cfg.threads = o.threads;
  if (!o.manifest.empty()) cfg.manifest = o.manifest;
  if (!o.out.empty()) cfg.out = o.out;
  cfg.gate.seed = cfg.seed;
  cfg.scenario.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

std::string require(const std::string& value, const std::string& flag) {
  if (value.empty()) throw Error(ErrorCode::ConfigError, "missing required " + flag);
  return value;
}

class RunRecord {
 public:
  RunRecord(std::string command, std::vector<std::string> args)
      : command_(std::move(command)), args_(std::move(args)), start_(std::chrono::steady_clock::now()) {}

  void input(const std::string& path) {
    if (!path.empty()) inputs_[path] = digest_path(path);
  }

  void write(const std::string& out_dir, const PipelineConfig& cfg) const {
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    ojson j;
    j["command"] = command_;
    j["args"] = args_;
    j["config_hash"] = cfg.hash();
    j["inputs"] = ojson::object();
    for (const auto& [p, d] : inputs_) j["inputs"][p] = d;
    j["version"] = version();
    j["wall_time_s"] = wall;
    write_file((fs::path(out_dir) / ("run_record_" + command_ + ".json")).string(), j.dump(2) + "\n");
  }

 private:
  std::string command_;
  std::vector<std::string> args_;
  std::map<std::string, std::string> inputs_;
  std::chrono::steady_clock::time_point start_;
};

const ImageDims kCanvasDims{kCanvasWidth, kCanvasHeight};

AnnotationSet load_set(const std::string& path, Taxonomy taxonomy, AnnotationKind kind, const std::string& id,
                       ImageDims dims = kCanvasDims) {
  return read_detections_file(path, taxonomy, dims, kind, id);
}

std::vector<ManifestEntry> entries_for_split(const std::string& manifest, const std::string& split_name) {
  const auto all = read_manifest(manifest);
  if (split_name.empty() || split_name == "all") return all;
  const auto wanted = split_from_string(split_name);
  if (!wanted) throw Error(ErrorCode::ConfigError, "unknown split '" + split_name + "'");
  const bool any_assigned = std::any_of(all.begin(), all.end(), [](const ManifestEntry& e) { return e.split; });
  if (!any_assigned) {
    throw Error(ErrorCode::ConfigError, "manifest " + manifest + " has no split assignments; run `split` first");
  }
  std::vector<ManifestEntry> out;
  for (const auto& e : all) {
    if (e.split == wanted) out.push_back(e);
  }
  return out;
}

std::string relative_to(const std::string& target, const std::string& base_dir) {
  const fs::path t = fs::absolute(target).lexically_normal();
  const fs::path b = fs::absolute(base_dir).lexically_normal();
  const fs::path rel = t.lexically_relative(b);
  return rel.empty() ? t.string() : rel.generic_string();
}

std::vector<fs::path> txt_files(const std::string& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::IoError, "not a directory: " + dir);
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".txt") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

ojson transform_json(const AffineTransform& t) {
  const auto p = t.params();
  return ojson(std::vector<double>(p.begin(), p.end()));
}

// --- align ------------------------------------------------------------------

int cmd_align(const CommonOpts& o, RunRecord& rec, std::ostream& out) {
  const PipelineConfig cfg = load_config(o);
  const std::string manifest = require(cfg.manifest, "--manifest");
  const std::string out_dir = require(cfg.out, "--out");
  rec.input(manifest);
  rec.input(o.config);
  ensure_dir(out_dir);
  const auto entries = read_manifest(manifest);

  std::vector<ojson> lines(entries.size());
  parallel_for(entries.size(), cfg.threads, [&](std::size_t i) {
    const auto& e = entries[i];
    const std::string vis_path = resolve_path(manifest, e.vis_path);
    const std::string tir_path = resolve_path(manifest, e.tir_path);
    const std::string match_path = fs::path(vis_path).replace_extension(".matches").string();
    const auto matches = read_matches_file(match_path);
    const Raster vis = read_raster(vis_path);
    const Raster tir = read_raster(tir_path);
    AlignOptions opts;
    opts.crop_fraction = cfg.crop_fraction;
    opts.strict_sensor_dims = cfg.strict_sensor_dims;
    opts.pair_id = e.image_id;
    opts.vis_source = e.vis_path;
    opts.tir_source = e.tir_path;
    const AlignResult r = align_pair(vis, tir, matches, cfg.gate, opts);

    ojson j;
    j["pair_id"] = e.image_id;
    j["verdict"] = r.outcome.accepted() ? "accept" : "reject";
    j["reason"] = r.outcome.rejection ? ojson(std::string(to_string(*r.outcome.rejection))) : ojson(nullptr);
    j["n_matches"] = r.outcome.stats.n_matches;
    j["n_inliers"] = r.outcome.stats.n_inliers;
    j["mean_sq_residual"] = r.outcome.stats.mean_sq_residual;
    j["transform"] = r.outcome.fitted ? transform_json(*r.outcome.fitted) : ojson(nullptr);
    if (r.pair) {
      write_raster((fs::path(out_dir) / (e.image_id + "_vis.png")).string(), r.pair->vis);
      write_raster((fs::path(out_dir) / (e.image_id + "_tir.tiff")).string(), r.pair->tir);
    }
    lines[i] = std::move(j);
  });

  std::string report;
  std::size_t accepted = 0;
  for (const auto& j : lines) {
    report += j.dump() + "\n";
    accepted += j["verdict"] == "accept" ? 1 : 0;
  }
  write_file((fs::path(out_dir) / "gate_report.jsonl").string(), report);
  out << "aligned " << accepted << " of " << entries.size() << " pairs\n";
  rec.write(out_dir, cfg);
  return kExitOk;
}

// --- fuse-early ---------------------------------------------------------------

int cmd_fuse_early(const CommonOpts& o, const std::string& pairs, bool global_pca, const std::string& rescale,
                   RunRecord& rec, std::ostream& out) {
  PipelineConfig cfg = load_config(o);
  if (!rescale.empty()) cfg.set("fusion.rescale", rescale);
  const std::string out_dir = require(cfg.out, "--out");
  require(pairs, "--pairs");
  // Either the gate report itself or the `align` output directory holding it.
  const bool is_dir = fs::is_directory(pairs);
  const std::string report_path = is_dir ? (fs::path(pairs) / "gate_report.jsonl").string() : pairs;
  const std::string in_dir = is_dir ? pairs : parent_dir(pairs);
  rec.input(report_path);
  rec.input(o.config);
  ensure_dir(out_dir);

  std::vector<std::string> ids;
  {
    std::istringstream in(read_file(report_path));
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        if (j.at("verdict").get<std::string>() == "accept") ids.push_back(j.at("pair_id").get<std::string>());
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedLine, report_path + ": " + e.what(), line_no);
      }
    }
  }

  const auto load_pair = [&](const std::string& id) {
    AlignedPair pair;
    pair.vis = read_raster((fs::path(in_dir) / (id + "_vis.png")).string());
    pair.tir = read_raster((fs::path(in_dir) / (id + "_tir.tiff")).string());
    pair.provenance.pair_id = id;
    pair.validate();
    return pair;
  };

  std::optional<PcaModel> global;
  if (global_pca && !ids.empty()) {
    // One covariance over every accepted pair; accumulation order is fixed.
    PcaAccumulator acc;
    for (const auto& id : ids) {
      const AlignedPair pair = load_pair(id);
      acc.add(pair.vis, cfg.fusion.normalize_tir ? normalize_minmax(pair.tir) : pair.tir);
    }
    global = acc.finish();
  }

  std::vector<std::string> summaries(ids.size());
  parallel_for(ids.size(), cfg.threads, [&](std::size_t i) {
    const std::string& id = ids[i];
    const AlignedPair pair = load_pair(id);
    const FusedImage f = global ? fuse_early(pair, *global, cfg.fusion) : fuse_early(pair, cfg.fusion);
    write_raster((fs::path(out_dir) / (id + "_fused.png")).string(), f.rgb);
    ojson j;
    j["pair_id"] = id;
    j["rescale"] = std::string(to_string(cfg.fusion.rescale));
    j["global_pca"] = global.has_value();
    j["loading"] = f.model.loading;
    j["mean"] = f.model.mean;
    j["eigenvalues"] = f.model.eigenvalues;
    j["explained_variance_ratio"] = f.model.explained_variance_ratio;
    j["luminance_fallback"] = f.luminance_fallback;
    write_file((fs::path(out_dir) / (id + "_fused.json")).string(), j.dump(2) + "\n");
    summaries[i] = j.dump() + "\n";
  });
  std::string all;
  for (const auto& s : summaries) all += s;
  write_file((fs::path(out_dir) / "fusion_report.jsonl").string(), all);
  out << "fused " << ids.size() << " pairs\n";
  rec.write(out_dir, cfg);
  return kExitOk;
}

// --- late fusion ----------------------------------------------------------------

struct ImageSets {
  AnnotationSet vis;
  AnnotationSet tir;
  AnnotationSet gt;
};

ImageSets load_image_sets(const std::string& manifest, const ManifestEntry& e, bool with_gt) {
  ImageSets s;
  s.vis = load_set(detection_path_for(resolve_path(manifest, e.vis_path)), Taxonomy::Vis, AnnotationKind::Predicted,
                   e.image_id);
  s.tir = load_set(detection_path_for(resolve_path(manifest, e.tir_path)), Taxonomy::Tir, AnnotationKind::Predicted,
                   e.image_id);
  if (with_gt) {
    s.gt = load_set(resolve_path(manifest, e.gt_vis_path), Taxonomy::Vis, AnnotationKind::GroundTruth, e.image_id);
  }
  return s;
}

int cmd_train_late(const CommonOpts& o, const std::string& split, const std::string& policy, RunRecord& rec,
                   std::ostream& out) {
  PipelineConfig cfg = load_config(o);
  if (!policy.empty()) cfg.set("late.policy", policy);
  const std::string manifest = require(cfg.manifest, "--manifest");
  const std::string tree_path = require(cfg.out, "--out");
  rec.input(manifest);
  rec.input(o.config);
  const auto entries = entries_for_split(manifest, split);

  std::vector<std::vector<TrainingSample>> per_image(entries.size());
  parallel_for(entries.size(), cfg.threads, [&](std::size_t i) {
    const ImageSets s = load_image_sets(manifest, entries[i], true);
    per_image[i] = build_training_samples(s.vis, s.tir, s.gt, cfg.policy, cfg.label_iou);
  });
  std::vector<TrainingSample> samples;
  for (auto& v : per_image) samples.insert(samples.end(), v.begin(), v.end());
  const auto labeled = to_labeled(samples);
  const CartTree tree = train_cart(labeled, cfg.cart);
  write_file(tree_path, tree.serialize());

  char buf[160];
  std::snprintf(buf, sizeof buf, "trained on %zu samples from %zu images: %zu nodes, depth %d, accuracy %.4f\n",
                samples.size(), entries.size(), tree.nodes().size(), tree.depth(),
                training_accuracy(tree, labeled));
  out << buf;
  rec.write(parent_dir(tree_path), cfg);
  return kExitOk;
}

int cmd_fuse_late(const CommonOpts& o, const std::string& tree_path, const std::string& split,
                  const std::string& policy, RunRecord& rec, std::ostream& out) {
  PipelineConfig cfg = load_config(o);
  if (!policy.empty()) cfg.set("late.policy", policy);
  const std::string manifest = require(cfg.manifest, "--manifest");
  const std::string out_dir = require(cfg.out, "--out");
  require(tree_path, "--tree");
  rec.input(manifest);
  rec.input(tree_path);
  rec.input(o.config);
  CartTree tree;
  try {
    tree = CartTree::from_json(nlohmann::json::parse(read_file(tree_path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, tree_path + ": " + e.what());
  }
  ensure_dir(out_dir);
  const auto entries = entries_for_split(manifest, split);
  std::vector<std::size_t> counts(entries.size());
  parallel_for(entries.size(), cfg.threads, [&](std::size_t i) {
    const ImageSets s = load_image_sets(manifest, entries[i], false);
    const AnnotationSet fused = fuse_late(s.vis, s.tir, tree, cfg.policy);
    write_detections_file((fs::path(out_dir) / (entries[i].image_id + ".txt")).string(), fused);
    counts[i] = fused.detections.size();
  });
  std::size_t total = 0;
  for (auto c : counts) total += c;
  out << "fused " << entries.size() << " images into " << total << " detections\n";
  rec.write(out_dir, cfg);
  return kExitOk;
}

// --- evaluate -------------------------------------------------------------------

int cmd_evaluate(const CommonOpts& o, const std::string& pred_dir, const std::string& gt_dir,
                 const std::string& taxonomy_name, double iou_flag, double score_flag, const std::string& split,
                 RunRecord& rec, std::ostream& out) {
  PipelineConfig cfg = load_config(o);
  if (iou_flag >= 0.0) cfg.eval.iou_match_thresh = iou_flag;
  if (score_flag >= 0.0) cfg.eval.score_thresh = score_flag;
  cfg.validate();
  const std::string csv_path = require(cfg.out, "--out");
  require(pred_dir, "--pred");
  require(gt_dir, "--gt");
  rec.input(pred_dir);
  rec.input(gt_dir);
  rec.input(o.config);
  const Taxonomy pred_tax = taxonomy_from_string(taxonomy_name);
  const Taxonomy gt_tax = pred_tax == Taxonomy::Tir ? Taxonomy::Tir : Taxonomy::Vis;

  std::optional<std::vector<std::string>> keep;
  if (!cfg.manifest.empty()) {
    rec.input(cfg.manifest);
    keep.emplace();
    for (const auto& e : entries_for_split(cfg.manifest, split)) keep->push_back(e.image_id);
    std::sort(keep->begin(), keep->end());
  }

  ConfusionMatrix cm(class_count(gt_tax));
  std::int64_t images = 0;
  for (const auto& gt_file : txt_files(gt_dir)) {
    const std::string id = gt_file.stem().string();
    if (keep && !std::binary_search(keep->begin(), keep->end(), id)) continue;
    const AnnotationSet gt = load_set(gt_file.string(), gt_tax, AnnotationKind::GroundTruth, id);
    const fs::path pred_file = fs::path(pred_dir) / gt_file.filename();
    AnnotationSet pred{id, kCanvasDims, pred_tax, AnnotationKind::Predicted, {}};
    if (fs::exists(pred_file)) {
      pred = load_set(pred_file.string(), pred_tax, AnnotationKind::Predicted, id);
    } else {
      log::warn("no predictions for " + id + "; counting all of its objects as missed");
    }
    cm.add(match_to_gt(pred, gt, cfg.eval));
    ++images;
  }
  const MetricsReport report = macro_metrics(cm, gt_tax, images);
  const std::string text = render_report(report);
  write_file(csv_path, report_csv(report));
  write_file(fs::path(csv_path).replace_extension(".txt").string(), text);
  out << text;
  rec.write(parent_dir(csv_path), cfg);
  return kExitOk;
}

// --- split ----------------------------------------------------------------------

int cmd_split(const CommonOpts& o, RunRecord& rec, std::ostream& out) {
  const PipelineConfig cfg = load_config(o);
  const std::string manifest = require(cfg.manifest, "--manifest");
  const std::string out_path = require(cfg.out, "--out");
  rec.input(manifest);
  rec.input(o.config);
  auto entries = read_manifest(manifest);
  std::vector<AnnotationSet> gts;
  gts.reserve(entries.size());
  for (const auto& e : entries) {
    gts.push_back(load_set(resolve_path(manifest, e.gt_vis_path), Taxonomy::Vis, AnnotationKind::GroundTruth,
                           e.image_id));
  }
  const SplitResult split = stratified_split(gts, cfg.split, cfg.seed);
  const auto assignment = split.assignment(entries.size());
  const std::string out_dir = parent_dir(out_path);
  const auto rebase = [&](const std::string& p) {
    return p.empty() ? p : relative_to(resolve_path(manifest, p), out_dir);
  };
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& e = entries[i];
    e.split = assignment[i];
    e.vis_path = rebase(e.vis_path);
    e.tir_path = rebase(e.tir_path);
    e.gt_vis_path = rebase(e.gt_vis_path);
    e.gt_tir_path = rebase(e.gt_tir_path);
  }
  ensure_dir(out_dir);
  write_manifest(out_path, entries);
  char buf[160];
  std::snprintf(buf, sizeof buf, "train %zu, val %zu, test %zu (max class share deviation %.4f)\n",
                split.train.size(), split.val.size(), split.test.size(), max_class_share_deviation(gts, split));
  out << buf;
  if (!split.stratified) out << "warning: " << split.warning << "\n";
  rec.write(out_dir, cfg);
  return kExitOk;
}

// --- tile -------------------------------------------------------------------------

int cmd_tile(const CommonOpts& o, const std::string& input, const std::string& taxonomy_name, bool merge,
             bool ground_truth, int width, int height, RunRecord& rec, std::ostream& out) {
  const PipelineConfig cfg = load_config(o);
  const std::string out_dir = require(cfg.out, "--out");
  require(input, "--in");
  rec.input(input);
  rec.input(o.config);
  const Taxonomy tax = taxonomy_from_string(taxonomy_name);
  const AnnotationKind kind = ground_truth ? AnnotationKind::GroundTruth : AnnotationKind::Predicted;
  ensure_dir(out_dir);

  if (!merge) {
    std::vector<fs::path> files;
    if (fs::is_directory(input)) {
      files = txt_files(input);
    } else {
      files.push_back(input);
    }
    std::string index;
    std::size_t n_tiles = 0;
    for (const auto& f : files) {
      const std::string id = f.stem().string();
      const AnnotationSet set = load_set(f.string(), tax, kind, id, {width, height});
      for (const auto& t : tile(set, cfg.tile.options)) {
        const std::string name = id + "__" + std::to_string(t.x0) + "_" + std::to_string(t.y0) + ".txt";
        AnnotationSet local{id, {t.width, t.height}, tax, kind, t.detections};
        write_detections_file((fs::path(out_dir) / name).string(), local);
        ojson j;
        j["image_id"] = id;
        j["file"] = name;
        j["x0"] = t.x0;
        j["y0"] = t.y0;
        j["width"] = t.width;
        j["height"] = t.height;
        j["image_width"] = width;
        j["image_height"] = height;
        index += j.dump() + "\n";
        ++n_tiles;
      }
    }
    write_file((fs::path(out_dir) / "tiles.jsonl").string(), index);
    out << "wrote " << n_tiles << " tiles for " << files.size() << " images\n";
  } else {
    const std::string index_path = (fs::path(input) / "tiles.jsonl").string();
    std::vector<std::string> order;
    std::map<std::string, std::vector<Tile>> groups;
    std::istringstream in(read_file(index_path));
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        Tile t;
        t.image_id = j.at("image_id").get<std::string>();
        t.x0 = j.at("x0").get<int>();
        t.y0 = j.at("y0").get<int>();
        t.width = j.at("width").get<int>();
        t.height = j.at("height").get<int>();
        t.image_dims = {j.at("image_width").get<int>(), j.at("image_height").get<int>()};
        t.taxonomy = tax;
        t.kind = kind;
        const std::string file = (fs::path(input) / j.at("file").get<std::string>()).string();
        t.detections = load_set(file, tax, kind, t.image_id, {t.width, t.height}).detections;
        if (groups.count(t.image_id) == 0) order.push_back(t.image_id);
        groups[t.image_id].push_back(std::move(t));
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedLine, index_path + ": " + e.what(), line_no);
      }
    }
    for (const auto& id : order) {
      const AnnotationSet merged = merge_tiles(groups[id], cfg.tile.nms_iou);
      write_detections_file((fs::path(out_dir) / (id + ".txt")).string(), merged);
    }
    out << "merged tiles for " << order.size() << " images\n";
  }
  rec.write(out_dir, cfg);
  return kExitOk;
}

// --- simulate ------------------------------------------------------------------------

ojson metrics_json(const MetricsReport& r) {
  ojson j;
  j["macro_precision"] = r.macro_precision;
  j["macro_recall"] = r.macro_recall;
  j["macro_f1"] = r.macro_f1;
  j["detections"] = r.detections;
  j["false_negatives"] = r.false_negatives;
  j["false_positives"] = r.false_positives;
  ojson per = ojson::object();
  for (const auto& c : r.per_class) per[c.name] = c.f1;
  j["per_class_f1"] = per;
  return j;
}

int cmd_simulate(const CommonOpts& o, bool experiment, RunRecord& rec, std::ostream& out) {
  const PipelineConfig cfg = load_config(o);
  const std::string out_dir = require(cfg.out, "--out");
  rec.input(o.config);
  ensure_dir(out_dir);
  const SyntheticDataset ds = generate(cfg.scenario, cfg.threads);
  write_dataset(ds, out_dir);
  out << "generated " << ds.images.size() << " images\n";
  if (experiment) {
    ExperimentOptions opts;
    opts.ratios = cfg.split;
    opts.cart = cfg.cart;
    opts.policy = cfg.policy;
    opts.eval = cfg.eval;
    opts.label_iou = cfg.label_iou;
    opts.threads = cfg.threads;
    const ExperimentReport r = run_experiment(ds, opts);
    ojson j;
    j["train_images"] = r.train_images;
    j["val_images"] = r.val_images;
    j["test_images"] = r.test_images;
    j["train_samples"] = r.train_samples;
    j["test_fp_samples"] = r.test_fp_samples;
    j["fp_recall"] = r.fp_recall;
    j["vis_only"] = metrics_json(r.vis_only);
    j["late_fusion"] = metrics_json(r.late);
    write_file((fs::path(out_dir) / "experiment.json").string(), j.dump(2) + "\n");
    char buf[200];
    std::snprintf(buf, sizeof buf, "VIS-only macro F1 %.4f, late fusion macro F1 %.4f, FP recall %.4f\n",
                  r.vis_only.macro_f1, r.late.macro_f1, r.fp_recall);
    out << buf;
  }
  rec.write(out_dir, cfg);
  return kExitOk;
}

// --- report ----------------------------------------------------------------------------

std::string pct1(double f) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * f);
  return buf;
}

std::string count_pct(std::int64_t n, std::int64_t whole) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%lld (%.0f%%)", static_cast<long long>(n),
                whole > 0 ? 100.0 * static_cast<double>(n) / static_cast<double>(whole) : 0.0);
  return buf;
}

int cmd_report(const CommonOpts& o, const std::vector<std::string>& csvs, std::vector<std::string> labels,
               RunRecord& rec, std::ostream& out) {
  const PipelineConfig cfg = load_config(o);
  if (csvs.empty()) throw Error(ErrorCode::ConfigError, "report needs at least one --csv");
  if (!labels.empty() && labels.size() != csvs.size()) {
    throw Error(ErrorCode::ConfigError, "--label must be given once per --csv");
  }
  if (labels.empty()) {
    for (const auto& c : csvs) labels.push_back(fs::path(c).stem().string());
  }
  std::vector<MetricsReport> reports;
  for (const auto& c : csvs) {
    rec.input(c);
    try {
      reports.push_back(parse_report_csv(read_file(c)));
    } catch (const Error& e) {
      throw Error(e.code(), c + ": " + e.detail(), e.line());
    }
  }

  std::ostringstream text;
  char line[256];
  std::snprintf(line, sizeof line, "%-16s %10s %16s %16s %15s %18s %9s\n", "", "Detections", "False negatives",
                "False positives", "Average recall", "Average precision", "F1 score");
  text << line;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    std::snprintf(line, sizeof line, "%-16s %10lld %16s %16s %15s %18s %9s\n", labels[i].c_str(),
                  static_cast<long long>(r.detections), count_pct(r.false_negatives, r.ground_truth).c_str(),
                  count_pct(r.false_positives, r.detections).c_str(), pct1(r.macro_recall).c_str(),
                  pct1(r.macro_precision).c_str(), pct1(r.macro_f1).c_str());
    text << line;
  }
  text << "\nF1 score per class\n";
  std::snprintf(line, sizeof line, "%-16s", "");
  text << line;
  for (const auto& c : reports.front().per_class) {
    std::snprintf(line, sizeof line, " %21s", c.name.c_str());
    text << line;
  }
  text << "\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    std::snprintf(line, sizeof line, "%-16s", labels[i].c_str());
    text << line;
    for (const auto& c : reports[i].per_class) {
      std::snprintf(line, sizeof line, " %21s", pct1(c.f1).c_str());
      text << line;
    }
    text << "\n";
  }
  text << "\nFalse negatives are shown as a share of ground-truth objects, false positives as a share of "
          "detections.\n";

  out << text.str();
  if (!cfg.out.empty()) {
    write_file(cfg.out, text.str());
    rec.write(parent_dir(cfg.out), cfg);
  }
  return kExitOk;
}

}  // namespace

std::string digest_path(const std::string& path) {
  const fs::path p(path);
  if (fs::is_regular_file(p)) return hex64(fnv1a64(read_file(path)));
  if (!fs::is_directory(p)) throw Error(ErrorCode::IoError, "input not found: " + path);
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(p)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::uint64_t h = fnv1a64("");
  for (const auto& f : files) {
    const std::string rel = f.lexically_relative(p).generic_string();
    if (rel.rfind("run_record_", 0) == 0) continue;
    h = fnv1a64(rel, h);
    h = fnv1a64(std::string_view("\0", 1), h);
    h = fnv1a64(read_file(f.string()), h);
  }
  return hex64(h);
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  log::init_from_env();
  CLI::App app{"VIS/TIR detection fusion toolkit", "thermofuse"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(version()));

  CommonOpts common;
  std::string in_dir, tree_path, policy, pred_dir, gt_dir, taxonomy = "vis";
  std::string train_split = "train", fuse_split = "test", eval_split = "all";
  double iou = -1.0;
  double score = -1.0;
  bool experiment = false;
  bool global_pca = false;
  std::string rescale;
  bool merge = false;
  bool ground_truth = false;
  int width = kCanvasWidth;
  int height = kCanvasHeight;
  std::vector<std::string> csvs, labels;

  auto* align = app.add_subcommand("align", "gate and warp VIS/TIR pairs onto the common canvas");
  add_common(align, common, true);

  auto* fuse_early_cmd = app.add_subcommand("fuse-early", "PCA luminance fusion of aligned pairs");
  add_common(fuse_early_cmd, common, false);
  fuse_early_cmd->add_option("--pairs", in_dir, "gate report from `align`, or its output directory")->required();
  fuse_early_cmd->add_flag("--global-pca", global_pca, "fit one PCA model over all accepted pairs");
  fuse_early_cmd->add_option("--rescale", rescale, "moments|minmax");

  auto* train = app.add_subcommand("train-late", "train the late-fusion tree");
  add_common(train, common, true);
  train->add_option("--split", train_split, "train|val|test|all")->capture_default_str();
  train->add_option("--policy", policy, "classify_all|passthrough");

  auto* fuse_late_cmd = app.add_subcommand("fuse-late", "apply the late-fusion tree");
  add_common(fuse_late_cmd, common, true);
  fuse_late_cmd->add_option("--tree", tree_path, "tree JSON from train-late")->required();
  fuse_late_cmd->add_option("--split", fuse_split, "train|val|test|all")->capture_default_str();
  fuse_late_cmd->add_option("--policy", policy, "classify_all|passthrough");

  auto* evaluate = app.add_subcommand("evaluate", "confusion matrix and macro metrics");
  add_common(evaluate, common, true);
  evaluate->add_option("--pred", pred_dir, "directory of prediction files")->required();
  evaluate->add_option("--gt", gt_dir, "directory of ground-truth files")->required();
  evaluate->add_option("--taxonomy", taxonomy, "vis|tir|fused")->capture_default_str();
  evaluate->add_option("--iou", iou, "IoU match threshold");
  evaluate->add_option("--score", score, "score threshold");
  evaluate->add_option("--split", eval_split, "with --manifest, evaluate only this split")->capture_default_str();

  auto* split_cmd = app.add_subcommand("split", "stratified train/val/test split of a manifest");
  add_common(split_cmd, common, true);

  auto* tile_cmd = app.add_subcommand("tile", "cut detection files into tiles, or merge tiles back");
  add_common(tile_cmd, common, false);
  tile_cmd->add_option("--in", in_dir, "detection file or directory; tile directory with --merge")->required();
  tile_cmd->add_option("--taxonomy", taxonomy, "vis|tir|fused")->capture_default_str();
  tile_cmd->add_flag("--merge", merge, "merge a tile directory back into full-image files");
  tile_cmd->add_flag("--ground-truth", ground_truth, "files carry no score column");
  tile_cmd->add_option("--width", width, "image width")->capture_default_str();
  tile_cmd->add_option("--height", height, "image height")->capture_default_str();

  auto* simulate = app.add_subcommand("simulate", "generate a synthetic detection dataset");
  add_common(simulate, common, false);
  simulate->add_flag("--experiment", experiment, "also run the VIS-only vs late-fusion comparison");

  auto* report = app.add_subcommand("report", "side-by-side table of evaluation CSVs");
  add_common(report, common, false);
  report->add_option("--csv", csvs, "evaluation CSV (repeatable)")->required();
  report->add_option("--label", labels, "row label per CSV");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    RunRecord rec(sub->get_name(), args);
    if (sub == align) return cmd_align(common, rec, out);
    if (sub == fuse_early_cmd) return cmd_fuse_early(common, in_dir, global_pca, rescale, rec, out);
    if (sub == train) return cmd_train_late(common, train_split, policy, rec, out);
    if (sub == fuse_late_cmd) return cmd_fuse_late(common, tree_path, fuse_split, policy, rec, out);
    if (sub == evaluate) {
      return cmd_evaluate(common, pred_dir, gt_dir, taxonomy, iou, score, eval_split, rec, out);
    }
    if (sub == split_cmd) return cmd_split(common, rec, out);
    if (sub == tile_cmd) return cmd_tile(common, in_dir, taxonomy, merge, ground_truth, width, height, rec, out);
    if (sub == simulate) return cmd_simulate(common, experiment, rec, out);
    if (sub == report) return cmd_report(common, csvs, labels, rec, out);
    return kExitValidation;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.is_io() ? kExitIo : kExitValidation;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}

}  // namespace thermofuse
