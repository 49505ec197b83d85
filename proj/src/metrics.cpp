#include "stainforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "stainforge/csv.hpp"
#include "stainforge/error.hpp"
#include "stainforge/text.hpp"

namespace stainforge {

namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

std::string fixed(std::optional<double> v, int digits = 4) {
  if (!v) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, *v);
  return buf;
}

std::string exact(std::optional<double> v) { return v ? text::format_real(*v) : "undefined"; }

}  // namespace

Confusion confusion(const PredictionSet& preds, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "threshold must be in [0,1]");
  }
  if (preds.empty()) throw Error(ErrorCode::EmptyPredictions, "no predictions");
  Confusion c;
  for (const auto& p : preds) {
    const bool positive = p.score >= threshold;
    if (p.truth == Label::Malignant) {
      ++(positive ? c.tp : c.fn);
    } else {
      ++(positive ? c.fp : c.tn);
    }
  }
  return c;
}

RateMetrics metrics(const Confusion& c) {
  RateMetrics m;
  m.accuracy = ratio(c.tp + c.tn, c.total());
  m.sensitivity = ratio(c.tp, c.tp + c.fn);
  m.specificity = ratio(c.tn, c.tn + c.fp);
  m.precision = ratio(c.tp, c.tp + c.fp);
  if (m.precision && m.sensitivity && *m.precision + *m.sensitivity > 0.0) {
    m.f1 = 2.0 * *m.precision * *m.sensitivity / (*m.precision + *m.sensitivity);
  }
  return m;
}

RocCurve roc_auc(const PredictionSet& preds) {
  std::size_t pos = 0, neg = 0;
  for (const auto& p : preds) (p.truth == Label::Malignant ? pos : neg) += 1;
  if (pos == 0 || neg == 0) {
    throw Error(ErrorCode::SingleClass, "ROC needs both benign and malignant rows");
  }
  std::vector<const Prediction*> order;
  order.reserve(preds.size());
  for (const auto& p : preds) order.push_back(&p);
  std::stable_sort(order.begin(), order.end(),
                   [](const Prediction* a, const Prediction* b) { return a->score > b->score; });

  RocCurve roc;
  roc.points.push_back({0.0, 0.0, std::nextafter(1.0, 2.0)});
  std::size_t tp = 0, fp = 0;
  double area2 = 0.0;  // twice the area, in units of pos*neg
  for (std::size_t i = 0; i < order.size();) {
    const double s = order[i]->score;
    const std::size_t tp0 = tp, fp0 = fp;
    for (; i < order.size() && order[i]->score == s; ++i) {
      (order[i]->truth == Label::Malignant ? tp : fp) += 1;
    }
    area2 += static_cast<double>(fp - fp0) * static_cast<double>(tp + tp0);
    roc.points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                          static_cast<double>(tp) / static_cast<double>(pos), s});
  }
  if (roc.points.back().threshold > 0.0) roc.points.push_back({1.0, 1.0, 0.0});
  roc.auc = area2 / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
  return roc;
}

PredictionSet parse_predictions(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  auto where = [&] { return source + ": line " + std::to_string(line_no); };
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, source + ": missing header");
  ++line_no;
  const auto header = csv::parse_line(line, line_no);
  if (header != std::vector<std::string>{"path", "true_label", "score"}) {
    throw Error(ErrorCode::ParseError, where() + ": expected header path,true_label,score");
  }
  PredictionSet preds;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto f = csv::parse_line(line, line_no);
    if (f.size() != 3) throw Error(ErrorCode::ParseError, where() + ": expected 3 fields");
    Prediction p;
    p.path = f[0];
    auto label = parse_label(text::trim(f[1]));
    if (!label) throw Error(ErrorCode::ParseError, where() + ": bad label '" + f[1] + "'");
    p.truth = *label;
    auto score = text::try_parse_real(f[2]);
    if (!score) throw Error(ErrorCode::ParseError, where() + ": score is not a number: '" + f[2] + "'");
    if (!(*score >= 0.0 && *score <= 1.0)) {
      throw Error(ErrorCode::ParseError, where() + ": score " + f[2] + " outside [0,1]");
    }
    p.score = *score;
    preds.push_back(std::move(p));
  }
  if (preds.empty()) throw Error(ErrorCode::EmptyPredictions, source + ": no prediction rows");
  return preds;
}

PredictionSet read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open predictions " + path.string());
  return parse_predictions(in, path.string());
}

EvalReport evaluate(const PredictionSet& preds, double threshold) {
  EvalReport r;
  r.threshold = threshold;
  r.confusion = confusion(preds, threshold);
  r.rates = metrics(r.confusion);
  r.roc = roc_auc(preds);
  return r;
}

EvalReport evaluate_file(const std::filesystem::path& path, double threshold) {
  return evaluate(read_predictions(path), threshold);
}

std::string format_table(const EvalReport& r) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-14s %-12s %-12s %-9s %-9s %-9s\n", "Test Accuracy", "Specificity",
                "Sensitivity", "F1 score", "Precision", "AUC");
  out << line;
  std::snprintf(line, sizeof(line), "%-14s %-12s %-12s %-9s %-9s %-9s\n", fixed(r.rates.accuracy).c_str(),
                fixed(r.rates.specificity).c_str(), fixed(r.rates.sensitivity).c_str(), fixed(r.rates.f1).c_str(),
                fixed(r.rates.precision).c_str(), fixed(r.roc.auc).c_str());
  out << line;
  out << "threshold " << text::format_real(r.threshold) << "  tp " << r.confusion.tp << "  fp " << r.confusion.fp
      << "  fn " << r.confusion.fn << "  tn " << r.confusion.tn << '\n';
  return out.str();
}

std::filesystem::path roc_path_for(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p.replace_filename(csv_path.stem().string() + "_roc.csv");
  return p;
}

void write_report(const std::filesystem::path& csv_path, const EvalReport& r) {
  {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + csv_path.string() + " for writing");
    csv::write_row(out, {"metric", "value"});
    const std::vector<std::pair<std::string, std::string>> rows{
        {"threshold", text::format_real(r.threshold)},
        {"tp", std::to_string(r.confusion.tp)},
        {"fp", std::to_string(r.confusion.fp)},
        {"fn", std::to_string(r.confusion.fn)},
        {"tn", std::to_string(r.confusion.tn)},
        {"accuracy", exact(r.rates.accuracy)},
        {"sensitivity", exact(r.rates.sensitivity)},
        {"specificity", exact(r.rates.specificity)},
        {"precision", exact(r.rates.precision)},
        {"f1", exact(r.rates.f1)},
        {"auc", text::format_real(r.roc.auc)},
    };
    for (const auto& [k, v] : rows) csv::write_row(out, {k, v});
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + csv_path.string());
  }
  const auto roc_file = roc_path_for(csv_path);
  std::ofstream out(roc_file, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + roc_file.string() + " for writing");
  csv::write_row(out, {"threshold", "fpr", "tpr"});
  for (const auto& p : r.roc.points) {
    csv::write_row(out, {text::format_real(p.threshold), text::format_real(p.fpr), text::format_real(p.tpr)});
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + roc_file.string());
}

}  // namespace stainforge
