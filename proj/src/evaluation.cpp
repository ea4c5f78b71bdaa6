#include "thermofuse/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "thermofuse/error.hpp"

namespace thermofuse {

void EvalConfig::validate() const {
  if (!(iou_match_thresh > 0.0 && iou_match_thresh <= 1.0)) {
    throw Error(ErrorCode::ConfigError, "eval.iou must lie in (0, 1]");
  }
  if (!(score_thresh >= 0.0 && score_thresh < 1.0)) throw Error(ErrorCode::ConfigError, "eval.score must lie in [0, 1)");
}

std::vector<GtMatch> match_to_gt(const AnnotationSet& pred, const AnnotationSet& gt, const EvalConfig& cfg) {
  cfg.validate();
  if (!(pred.dims == gt.dims)) {
    throw Error(ErrorCode::CanvasMismatch, "prediction and ground truth canvases differ for '" + gt.image_id + "'");
  }
  const int k = class_count(gt.taxonomy);
  std::vector<int> order;
  for (std::size_t i = 0; i < pred.detections.size(); ++i) {
    const auto& d = pred.detections[i];
    if (d.score >= cfg.score_thresh && d.class_id >= 0 && d.class_id < k) order.push_back(static_cast<int>(i));
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return pred.detections[static_cast<std::size_t>(a)].score > pred.detections[static_cast<std::size_t>(b)].score;
  });

  std::vector<bool> taken(gt.detections.size(), false);
  std::vector<GtMatch> out;
  for (int pi : order) {
    const auto& p = pred.detections[static_cast<std::size_t>(pi)];
    int best = -1;
    double best_iou = cfg.iou_match_thresh;
    for (std::size_t g = 0; g < gt.detections.size(); ++g) {
      if (taken[g]) continue;
      const double v = iou(p.box, gt.detections[g].box);
      if (v > best_iou || (best < 0 && v >= best_iou)) {
        best = static_cast<int>(g);
        best_iou = v;
      }
    }
    if (best < 0) {
      out.push_back({-1, p.class_id, 0.0, -1, pi});
    } else {
      taken[static_cast<std::size_t>(best)] = true;
      out.push_back({gt.detections[static_cast<std::size_t>(best)].class_id, p.class_id, best_iou, best, pi});
    }
  }
  for (std::size_t g = 0; g < gt.detections.size(); ++g) {
    if (!taken[g]) out.push_back({gt.detections[g].class_id, -1, 0.0, static_cast<int>(g), -1});
  }
  return out;
}

ConfusionMatrix::ConfusionMatrix(int k) : k_(k), counts_(static_cast<std::size_t>((k + 1) * (k + 1)), 0) {
  if (k < 0) throw Error(ErrorCode::InvalidArgument, "class count must be >= 0");
}

std::int64_t ConfusionMatrix::at(int truth, int pred) const {
  return counts_.at(static_cast<std::size_t>(truth * (k_ + 1) + pred));
}

std::int64_t& ConfusionMatrix::at(int truth, int pred) {
  return counts_.at(static_cast<std::size_t>(truth * (k_ + 1) + pred));
}

void ConfusionMatrix::add(std::span<const GtMatch> matches) {
  for (const auto& m : matches) {
    const int t = m.gt_class < 0 ? k_ : m.gt_class;
    const int p = m.pred_class < 0 ? k_ : m.pred_class;
    if (t > k_ || p > k_) throw Error(ErrorCode::UnknownClassIndex, "class index outside the confusion matrix");
    if (t == k_ && p == k_) continue;
    ++at(t, p);
  }
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.k_ != k_) throw Error(ErrorCode::InvalidArgument, "cannot merge confusion matrices of different sizes");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

std::int64_t ConfusionMatrix::row_sum(int truth) const {
  std::int64_t s = 0;
  for (int p = 0; p <= k_; ++p) s += at(truth, p);
  return s;
}

std::int64_t ConfusionMatrix::col_sum(int pred) const {
  std::int64_t s = 0;
  for (int t = 0; t <= k_; ++t) s += at(t, pred);
  return s;
}

std::int64_t ConfusionMatrix::detections() const {
  std::int64_t s = 0;
  for (int p = 0; p < k_; ++p) s += col_sum(p);
  return s;
}

std::int64_t ConfusionMatrix::ground_truth() const {
  std::int64_t s = 0;
  for (int t = 0; t < k_; ++t) s += row_sum(t);
  return s;
}

std::int64_t ConfusionMatrix::false_negatives() const { return col_sum(k_); }
std::int64_t ConfusionMatrix::false_positives() const { return row_sum(k_); }

ConfusionMatrix confusion_matrix(std::span<const GtMatch> matches, int k) {
  ConfusionMatrix cm(k);
  cm.add(matches);
  return cm;
}

double f1_score(double precision, double recall) noexcept {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

double macro_f1(std::span<const double> per_class_f1) {
  if (per_class_f1.empty()) return 0.0;
  return std::accumulate(per_class_f1.begin(), per_class_f1.end(), 0.0) / static_cast<double>(per_class_f1.size());
}

MetricsReport macro_metrics(const ConfusionMatrix& cm, Taxonomy taxonomy, std::int64_t images) {
  MetricsReport r;
  const int k = cm.classes();
  std::vector<double> f1s;
  for (int c = 0; c < k; ++c) {
    ClassMetrics m;
    m.name = c < class_count(taxonomy) ? std::string(class_name(taxonomy, c)) : "class_" + std::to_string(c);
    m.tp = cm.at(c, c);
    const std::int64_t col = cm.col_sum(c);
    const std::int64_t row = cm.row_sum(c);
    m.fp = col - m.tp;
    m.fn = row - m.tp;
    m.precision = col > 0 ? static_cast<double>(m.tp) / static_cast<double>(col) : 0.0;
    m.recall = row > 0 ? static_cast<double>(m.tp) / static_cast<double>(row) : 0.0;
    m.f1 = f1_score(m.precision, m.recall);
    r.macro_precision += m.precision;
    r.macro_recall += m.recall;
    f1s.push_back(m.f1);
    r.per_class.push_back(std::move(m));
  }
  if (k > 0) {
    r.macro_precision /= k;
    r.macro_recall /= k;
  }
  r.macro_f1 = macro_f1(f1s);
  r.detections = cm.detections();
  r.ground_truth = cm.ground_truth();
  r.false_negatives = cm.false_negatives();
  r.false_positives = cm.false_positives();
  r.images = images;
  return r;
}

namespace {

std::string pct_of(std::int64_t part, std::int64_t whole) {
  char buf[32];
  const double p = whole > 0 ? 100.0 * static_cast<double>(part) / static_cast<double>(whole) : 0.0;
  std::snprintf(buf, sizeof buf, "%.0f%%", p);
  return buf;
}

std::string pct(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * fraction);
  return buf;
}

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string render_report(const MetricsReport& r) {
  std::ostringstream out;
  char line[160];
  out << "Images: " << r.images << "\n";
  out << "Detections: " << r.detections << "\n";
  out << "False negatives: " << r.false_negatives << " (" << pct_of(r.false_negatives, r.ground_truth) << ")*\n";
  out << "False positives: " << r.false_positives << " (" << pct_of(r.false_positives, r.detections) << ")*\n";
  out << "Average recall: " << pct(r.macro_recall) << "\n";
  out << "Average precision: " << pct(r.macro_precision) << "\n";
  out << "F1 score: " << pct(r.macro_f1) << "\n\n";
  std::snprintf(line, sizeof line, "%-22s %6s %6s %6s %9s %9s %9s\n", "class", "tp", "fp", "fn", "precision",
                "recall", "f1");
  out << line;
  for (const auto& c : r.per_class) {
    std::snprintf(line, sizeof line, "%-22s %6lld %6lld %6lld %9s %9s %9s\n", c.name.c_str(),
                  static_cast<long long>(c.tp), static_cast<long long>(c.fp), static_cast<long long>(c.fn),
                  pct(c.precision).c_str(), pct(c.recall).c_str(), pct(c.f1).c_str());
    out << line;
  }
  out << "\n* false negatives as a share of the " << r.ground_truth << " ground-truth objects, false positives as a"
      << " share of the " << r.detections << " detections\n";
  return out.str();
}

std::string report_csv(const MetricsReport& r) {
  std::ostringstream out;
  out << "class,tp,fp,fn,precision,recall,f1\n";
  std::int64_t tp = 0;
  for (const auto& c : r.per_class) {
    tp += c.tp;
    out << c.name << ',' << c.tp << ',' << c.fp << ',' << c.fn << ',' << shortest(c.precision) << ','
        << shortest(c.recall) << ',' << shortest(c.f1) << '\n';
  }
  out << "macro,,,," << shortest(r.macro_precision) << ',' << shortest(r.macro_recall) << ','
      << shortest(r.macro_f1) << '\n';
  out << "total," << tp << ',' << r.false_positives << ',' << r.false_negatives << ",,,\n";
  out << "detections," << r.detections << ",,,,,\n";
  out << "ground_truth," << r.ground_truth << ",,,,,\n";
  out << "images," << r.images << ",,,,,\n";
  return out.str();
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

template <typename T>
T parse_num(const std::string& s, int line) {
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw Error(ErrorCode::MalformedLine, "not a number: '" + s + "'", line);
  }
  return v;
}

}  // namespace

MetricsReport parse_report_csv(const std::string& text) {
  MetricsReport r;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    if (f.size() != 7) throw Error(ErrorCode::MalformedLine, "expected 7 columns", line_no);
    if (line_no == 1) {
      if (f[0] != "class") throw Error(ErrorCode::MalformedLine, "missing header", line_no);
      continue;
    }
    const std::string& key = f[0];
    if (key == "macro") {
      r.macro_precision = parse_num<double>(f[4], line_no);
      r.macro_recall = parse_num<double>(f[5], line_no);
      r.macro_f1 = parse_num<double>(f[6], line_no);
    } else if (key == "total") {
      r.false_positives = parse_num<std::int64_t>(f[2], line_no);
      r.false_negatives = parse_num<std::int64_t>(f[3], line_no);
    } else if (key == "detections") {
      r.detections = parse_num<std::int64_t>(f[1], line_no);
    } else if (key == "ground_truth") {
      r.ground_truth = parse_num<std::int64_t>(f[1], line_no);
    } else if (key == "images") {
      r.images = parse_num<std::int64_t>(f[1], line_no);
    } else {
      ClassMetrics c;
      c.name = key;
      c.tp = parse_num<std::int64_t>(f[1], line_no);
      c.fp = parse_num<std::int64_t>(f[2], line_no);
      c.fn = parse_num<std::int64_t>(f[3], line_no);
      c.precision = parse_num<double>(f[4], line_no);
      c.recall = parse_num<double>(f[5], line_no);
      c.f1 = parse_num<double>(f[6], line_no);
      r.per_class.push_back(std::move(c));
    }
  }
  return r;
}

}  // namespace thermofuse
