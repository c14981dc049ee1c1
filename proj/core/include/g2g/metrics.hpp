#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "g2g/raster.hpp"

namespace g2g {

struct MaskEncoding;  // dataset.hpp

// Per-class pixel counts: n(i,j) = pixels of true class i predicted as
// class j. Merge is associative/commutative with the empty accumulator
// as identity, so tiles can be counted in any grouping.
class ConfusionAccumulator {
 public:
  explicit ConfusionAccumulator(int n_cl = 2);

  void add(const Raster& gt_mask, const Raster& pred_mask);
  void add_pixel(int gt, int pred, uint64_t count = 1);
  void merge(const ConfusionAccumulator& other);

  int n_cl() const { return n_cl_; }
  uint64_t count(int i, int j) const { return n_[static_cast<size_t>(i) * n_cl_ + j]; }
  uint64_t row_sum(int i) const;  // t_i: ground-truth pixels of class i
  uint64_t col_sum(int j) const;  // predicted pixels of class j
  uint64_t total() const;

 private:
  int n_cl_;
  std::vector<uint64_t> n_;
};

// Accumulator + masks -> accumulator, contents unchanged elsewhere.
ConfusionAccumulator accumulate(ConfusionAccumulator acc, const Raster& pred_mask, const Raster& gt_mask);

// Classes absent from both ground truth and prediction are excluded from
// the class means and reported through `excluded` when non-null.
double pixel_accuracy(const ConfusionAccumulator& acc);
double mean_accuracy(const ConfusionAccumulator& acc, std::vector<int>* excluded = nullptr);
double mean_iou(const ConfusionAccumulator& acc, std::vector<int>* excluded = nullptr);
double fw_iou(const ConfusionAccumulator& acc);
double iou(const ConfusionAccumulator& acc, int class_id);
double dice(const ConfusionAccumulator& acc, int class_id);

// All metrics of one model over one dataset slice.
struct MetricsReport {
  double pa = 0, ma = 0, miou = 0, fwiou = 0;
  double iou_building = 0, dice_building = 0;
  std::vector<double> iou_per_class;
  std::vector<int> excluded_classes;
  uint64_t pixels = 0;
  int images = 0;
};

MetricsReport metrics_report(const ConfusionAccumulator& acc);

// Maps generator output (RGB in [-1,1]) to evaluation labels by nearest
// palette color; contour pixels count as building. Ties go to background.
Raster binarize_prediction(const Raster& pred, const MaskEncoding& encoding);

// Comparison table in the four-metric layout: one row per metric, one
// column per model, rendered as CSV and as aligned text.
struct ComparisonTable {
  std::vector<std::string> model_names;
  // rows: PA, MA, MIoU, FWIoU; empty cells rendered as "-"
  std::vector<std::vector<std::string>> cells;

  std::string to_csv() const;
  std::string to_text() const;
};

ComparisonTable compare_models(const std::vector<std::pair<std::string, MetricsReport>>& reports);

// metrics.csv schema: model,scope,pa,ma,miou,fwiou,iou_background,iou_building,dice_building,pixels,images
std::string metrics_csv(const std::string& model, const MetricsReport& macro, const MetricsReport& micro);
struct ParsedMetricsRow {
  std::string model;
  std::string scope;
  MetricsReport report;
};
std::vector<ParsedMetricsRow> parse_metrics_csv(const std::string& text, const std::string& file_hint);

}  // namespace g2g
