#include "g2g/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "g2g/dataset.hpp"
#include "g2g/errors.hpp"

namespace g2g {

ConfusionAccumulator::ConfusionAccumulator(int n_cl) : n_cl_(n_cl) {
  if (n_cl < 2) throw InvalidArgument("confusion accumulator needs at least 2 classes");
  n_.assign(static_cast<size_t>(n_cl) * n_cl, 0);
}

void ConfusionAccumulator::add_pixel(int gt, int pred, uint64_t count) {
  if (gt < 0 || gt >= n_cl_ || pred < 0 || pred >= n_cl_)
    throw InvalidLabel("label out of range: gt=" + std::to_string(gt) + " pred=" + std::to_string(pred));
  n_[static_cast<size_t>(gt) * n_cl_ + pred] += count;
}

void ConfusionAccumulator::add(const Raster& gt_mask, const Raster& pred_mask) {
  if (!gt_mask.same_shape(pred_mask))
    throw InvalidArgument("confusion add: mask dimensions differ");
  if (gt_mask.channels != 1)
    throw InvalidArgument("confusion add: masks must be single channel");
  for (size_t i = 0; i < gt_mask.values.size(); ++i) {
    int g = static_cast<int>(std::lround(gt_mask.values[i]));
    int p = static_cast<int>(std::lround(pred_mask.values[i]));
    add_pixel(g, p);
  }
}

void ConfusionAccumulator::merge(const ConfusionAccumulator& other) {
  if (other.n_cl_ != n_cl_) throw InvalidArgument("merge: class counts differ");
  for (size_t i = 0; i < n_.size(); ++i) n_[i] += other.n_[i];
}

uint64_t ConfusionAccumulator::row_sum(int i) const {
  uint64_t s = 0;
  for (int j = 0; j < n_cl_; ++j) s += count(i, j);
  return s;
}

uint64_t ConfusionAccumulator::col_sum(int j) const {
  uint64_t s = 0;
  for (int i = 0; i < n_cl_; ++i) s += count(i, j);
  return s;
}

uint64_t ConfusionAccumulator::total() const {
  uint64_t s = 0;
  for (uint64_t v : n_) s += v;
  return s;
}

ConfusionAccumulator accumulate(ConfusionAccumulator acc, const Raster& pred_mask, const Raster& gt_mask) {
  acc.add(gt_mask, pred_mask);
  return acc;
}

double pixel_accuracy(const ConfusionAccumulator& acc) {
  uint64_t tot = acc.total();
  if (tot == 0) throw UndefinedMetric("pixel accuracy of an empty accumulator");
  uint64_t diag = 0;
  for (int i = 0; i < acc.n_cl(); ++i) diag += acc.count(i, i);
  return static_cast<double>(diag) / static_cast<double>(tot);
}

namespace {

bool class_present(const ConfusionAccumulator& acc, int i) {
  return acc.row_sum(i) > 0 || acc.col_sum(i) > 0;
}

}  // namespace

double mean_accuracy(const ConfusionAccumulator& acc, std::vector<int>* excluded) {
  if (acc.total() == 0) throw UndefinedMetric("mean accuracy of an empty accumulator");
  double sum = 0;
  int used = 0;
  for (int i = 0; i < acc.n_cl(); ++i) {
    if (!class_present(acc, i)) {
      if (excluded) excluded->push_back(i);
      continue;
    }
    uint64_t t = acc.row_sum(i);
    if (t == 0) {
      // Predicted but never true: recall undefined, counts as zero.
      ++used;
      continue;
    }
    sum += static_cast<double>(acc.count(i, i)) / static_cast<double>(t);
    ++used;
  }
  if (used == 0) throw UndefinedMetric("mean accuracy: no class present");
  return sum / used;
}

double iou(const ConfusionAccumulator& acc, int class_id) {
  if (class_id < 0 || class_id >= acc.n_cl()) throw InvalidArgument("iou: class out of range");
  uint64_t t = acc.row_sum(class_id);
  uint64_t c = acc.col_sum(class_id);
  uint64_t nii = acc.count(class_id, class_id);
  uint64_t denom = t + c - nii;
  if (denom == 0) throw UndefinedMetric("iou: class " + std::to_string(class_id) + " absent");
  return static_cast<double>(nii) / static_cast<double>(denom);
}

double mean_iou(const ConfusionAccumulator& acc, std::vector<int>* excluded) {
  if (acc.total() == 0) throw UndefinedMetric("mean iou of an empty accumulator");
  double sum = 0;
  int used = 0;
  for (int i = 0; i < acc.n_cl(); ++i) {
    if (!class_present(acc, i)) {
      if (excluded) excluded->push_back(i);
      continue;
    }
    sum += iou(acc, i);
    ++used;
  }
  if (used == 0) throw UndefinedMetric("mean iou: no class present");
  return sum / used;
}

double fw_iou(const ConfusionAccumulator& acc) {
  uint64_t tot = acc.total();
  if (tot == 0) throw UndefinedMetric("fw iou of an empty accumulator");
  double sum = 0;
  for (int i = 0; i < acc.n_cl(); ++i) {
    uint64_t t = acc.row_sum(i);
    if (t == 0) continue;  // zero weight either way
    sum += static_cast<double>(t) * iou(acc, i);
  }
  return sum / static_cast<double>(tot);
}

double dice(const ConfusionAccumulator& acc, int class_id) {
  if (class_id < 0 || class_id >= acc.n_cl()) throw InvalidArgument("dice: class out of range");
  if (!class_present(acc, class_id))
    throw UndefinedMetric("dice: class " + std::to_string(class_id) + " absent from gt and prediction");
  uint64_t tp = acc.count(class_id, class_id);
  uint64_t fp = acc.col_sum(class_id) - tp;
  uint64_t fn = acc.row_sum(class_id) - tp;
  return 2.0 * static_cast<double>(tp) / static_cast<double>((tp + fp) + (tp + fn));
}

MetricsReport metrics_report(const ConfusionAccumulator& acc) {
  MetricsReport rep;
  rep.pa = pixel_accuracy(acc);
  rep.ma = mean_accuracy(acc, &rep.excluded_classes);
  rep.miou = mean_iou(acc);
  rep.fwiou = fw_iou(acc);
  rep.iou_per_class.resize(static_cast<size_t>(acc.n_cl()), 0.0);
  for (int i = 0; i < acc.n_cl(); ++i)
    if (class_present(acc, i)) rep.iou_per_class[static_cast<size_t>(i)] = iou(acc, i);
  rep.iou_building = acc.n_cl() > 1 && class_present(acc, 1) ? iou(acc, 1) : 0.0;
  rep.dice_building = acc.n_cl() > 1 && class_present(acc, 1) ? dice(acc, 1) : 0.0;
  rep.pixels = acc.total();
  rep.images = 1;
  return rep;
}

Raster binarize_prediction(const Raster& pred, const MaskEncoding& encoding) {
  if (pred.channels != 3)
    throw InvalidArgument("binarize_prediction expects a 3-channel raster");

  // Palette lives in [0,1]; generator output in [-1,1].
  auto to_signed = [](float v) { return v * 2.f - 1.f; };
  float pal[3][3];
  for (int c = 0; c < 3; ++c) {
    pal[0][c] = to_signed(encoding.background_rgb[c]);
    pal[1][c] = to_signed(encoding.building_rgb[c]);
    pal[2][c] = to_signed(encoding.contour_rgb[c]);
  }

  Raster out(pred.width, pred.height, 1);
  for (int y = 0; y < pred.height; ++y)
    for (int x = 0; x < pred.width; ++x) {
      double best_d = 0;
      int best = 0;
      for (int lab = 0; lab < 3; ++lab) {
        double d = 0;
        for (int c = 0; c < 3; ++c) {
          double diff = pred.at(x, y, c) - pal[lab][c];
          d += diff * diff;
        }
        // strict < keeps earlier (smaller) labels on ties, background first
        if (lab == 0 || d < best_d) {
          best_d = d;
          best = lab;
        }
      }
      out.at(x, y, 0) = best == 0 ? 0.f : 1.f;  // contour counts as building
    }
  return out;
}

namespace {

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

ComparisonTable compare_models(const std::vector<std::pair<std::string, MetricsReport>>& reports) {
  if (reports.empty()) throw InvalidArgument("compare_models: need at least one report");
  ComparisonTable t;
  for (const auto& [name, rep] : reports) {
    t.model_names.push_back(name);
    (void)rep;
  }
  const char* row_names[4] = {"Mean pixel accuracy", "Mean accuracy", "Mean IoU", "Mean frequency weighted IU"};
  for (int r = 0; r < 4; ++r) {
    std::vector<std::string> row;
    row.push_back(row_names[r]);
    for (const auto& [name, rep] : reports) {
      (void)name;
      double v = r == 0 ? rep.pa : r == 1 ? rep.ma : r == 2 ? rep.miou : rep.fwiou;
      row.push_back(fmt6(v));
    }
    t.cells.push_back(std::move(row));
  }
  return t;
}

std::string ComparisonTable::to_csv() const {
  std::string out = "Metrics";
  for (const auto& m : model_names) out += "," + m;
  out += "\n";
  for (const auto& row : cells) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) out += ",";
      out += row[i];
    }
    out += "\n";
  }
  return out;
}

std::string ComparisonTable::to_text() const {
  std::vector<size_t> widths;
  widths.push_back(0);
  for (const auto& row : cells) widths[0] = std::max(widths[0], row[0].size());
  widths[0] = std::max(widths[0], std::string("Metrics").size());
  for (size_t m = 0; m < model_names.size(); ++m) {
    size_t w = model_names[m].size();
    for (const auto& row : cells) w = std::max(w, row[m + 1].size());
    widths.push_back(w);
  }
  auto pad = [](const std::string& s, size_t w) {
    std::string out = s;
    out.resize(w, ' ');
    return out;
  };
  std::string out = pad("Metrics", widths[0]);
  for (size_t m = 0; m < model_names.size(); ++m) out += "  " + pad(model_names[m], widths[m + 1]);
  out += "\n";
  for (const auto& row : cells) {
    out += pad(row[0], widths[0]);
    for (size_t m = 1; m < row.size(); ++m) out += "  " + pad(row[m], widths[m]);
    out += "\n";
  }
  return out;
}

std::string metrics_csv(const std::string& model, const MetricsReport& macro, const MetricsReport& micro) {
  std::string out = "model,scope,pa,ma,miou,fwiou,iou_background,iou_building,dice_building,pixels,images\n";
  auto row = [&](const char* scope, const MetricsReport& r) {
    double iou_bg = r.iou_per_class.empty() ? 0.0 : r.iou_per_class[0];
    out += model;
    out += ",";
    out += scope;
    for (double v : {r.pa, r.ma, r.miou, r.fwiou, iou_bg, r.iou_building, r.dice_building})
      out += "," + fmt6(v);
    out += "," + std::to_string(r.pixels) + "," + std::to_string(r.images) + "\n";
  };
  row("macro", macro);
  row("micro", micro);
  return out;
}

std::vector<ParsedMetricsRow> parse_metrics_csv(const std::string& text, const std::string& file_hint) {
  std::vector<ParsedMetricsRow> rows;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      if (line.rfind("model,scope,", 0) != 0)
        throw IoError(file_hint + ": not a metrics.csv (bad header)");
      header = false;
      continue;
    }
    std::vector<std::string> f;
    std::string cur;
    for (char ch : line) {
      if (ch == ',') {
        f.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    f.push_back(cur);
    if (f.size() != 11) throw IoError(file_hint + ": malformed row: " + line);
    ParsedMetricsRow r;
    r.model = f[0];
    r.scope = f[1];
    try {
      r.report.pa = std::stod(f[2]);
      r.report.ma = std::stod(f[3]);
      r.report.miou = std::stod(f[4]);
      r.report.fwiou = std::stod(f[5]);
      r.report.iou_per_class = {std::stod(f[6]), std::stod(f[7])};
      r.report.iou_building = std::stod(f[7]);
      r.report.dice_building = std::stod(f[8]);
      r.report.pixels = static_cast<uint64_t>(std::stoull(f[9]));
      r.report.images = std::stoi(f[10]);
    } catch (const std::exception&) {
      throw IoError(file_hint + ": malformed numeric field in row: " + line);
    }
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw IoError(file_hint + ": no metric rows");
  return rows;
}

}  // namespace g2g
