#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "stainforge/dataset.hpp"

// Binary classifier scoring. Malignant is the positive class.

namespace stainforge {

struct Prediction {
  std::string path;
  Label truth = Label::Benign;
  double score = 0.0;  // predicted malignancy probability
};

using PredictionSet = std::vector<Prediction>;

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

/// nullopt marks a 0/0 ratio.
struct RateMetrics {
  std::optional<double> accuracy;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> precision;
  std::optional<double> f1;
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // scores >= threshold count as malignant
};

struct RocCurve {
  std::vector<RocPoint> points;  // (0,0) first, (1,1) last
  double auc = 0.0;
};

struct EvalReport {
  double threshold = 0.5;
  Confusion confusion;
  RateMetrics rates;
  RocCurve roc;
};

/// Predicted malignant iff score >= threshold. Throws EmptyPredictions.
Confusion confusion(const PredictionSet& preds, double threshold);

RateMetrics metrics(const Confusion& c);

/// Throws SingleClass unless both labels occur.
RocCurve roc_auc(const PredictionSet& preds);

/// CSV with header path,true_label,score.
PredictionSet read_predictions(const std::filesystem::path& path);
PredictionSet parse_predictions(std::istream& in, const std::string& source);

EvalReport evaluate(const PredictionSet& preds, double threshold);
EvalReport evaluate_file(const std::filesystem::path& path, double threshold);

/// Text layout: Test Accuracy, Specificity, Sensitivity, F1 score, Precision, AUC.
std::string format_table(const EvalReport& report);
/// Metric/value rows at `csv_path`; the curve goes to <stem>_roc.csv beside it.
void write_report(const std::filesystem::path& csv_path, const EvalReport& report);
std::filesystem::path roc_path_for(const std::filesystem::path& csv_path);

}  // namespace stainforge
