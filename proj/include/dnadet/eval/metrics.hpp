#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dnadet/core/manifest.hpp"
#include "dnadet/model/checkpoint.hpp"
#include "dnadet/sampler/sampler.hpp"

namespace dnadet::eval {

struct EvalReport {
  std::string split_name;
  LabelSpace labels;
  long long total = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<std::vector<long long>> confusion;  // [truth][prediction]
  std::vector<double> per_class_f1;               // NaN for classes absent from the truth
  std::vector<std::string> absent_classes;        // excluded from macro-F1
  std::optional<std::vector<double>> per_position;
};

/// Accuracy, macro-F1 and confusion from integer truth/prediction pairs.
inline EvalReport evaluate_predictions(const std::vector<int>& truth, const std::vector<int>& pred,
                                       const LabelSpace& labels, const std::string& split_name = "") {
  if (truth.size() != pred.size()) throw InvalidArgument("evaluate: truth and predictions differ in length");
  const int C = labels.size();
  EvalReport r;
  r.split_name = split_name;
  r.labels = labels;
  r.total = static_cast<long long>(truth.size());
  r.confusion.assign(C, std::vector<long long>(C, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= C || pred[i] < 0 || pred[i] >= C) {
      throw InvalidArgument("evaluate: label index out of range");
    }
    ++r.confusion[truth[i]][pred[i]];
  }
  long long diag = 0;
  for (int c = 0; c < C; ++c) diag += r.confusion[c][c];
  r.accuracy = r.total ? static_cast<double>(diag) / static_cast<double>(r.total) : 0.0;

  double sum = 0.0;
  int counted = 0;
  r.per_class_f1.assign(C, std::nan(""));
  for (int c = 0; c < C; ++c) {
    long long row = 0, col = 0;
    for (int k = 0; k < C; ++k) {
      row += r.confusion[c][k];
      col += r.confusion[k][c];
    }
    if (row == 0) {
      r.absent_classes.push_back(labels.name(c));
      continue;
    }
    const long long tp = r.confusion[c][c];
    const double f1 = 2.0 * tp / static_cast<double>(row + col);
    r.per_class_f1[c] = f1;
    sum += f1;
    ++counted;
  }
  r.macro_f1 = counted ? sum / counted : 0.0;
  return r;
}

/// Preprocessed, magnified full views of every record, in manifest order.
inline std::vector<ImageBuffer> load_views(const DatasetManifest& m, SourceKind source,
                                           const sampler::PatchPlan& plan) {
  std::vector<ImageBuffer> out;
  out.reserve(m.size());
  for (const auto& r : m.records) {
    out.push_back(sampler::equalize_then_magnify(sampler::preprocess(load_image(m.resolve(r)), source), plan));
  }
  return out;
}

/// Inference-mode predictions for full views, in batches.
inline std::vector<int> predict_views(model::ModelState<float>& m, const std::vector<ImageBuffer>& views,
                                      int batch = 32) {
  std::vector<int> out;
  out.reserve(views.size());
  for (std::size_t first = 0; first < views.size(); first += batch) {
    const std::size_t n = std::min<std::size_t>(batch, views.size() - first);
    const auto p = model::predict(m, std::span<const ImageBuffer>(views.data() + first, n));
    out.insert(out.end(), p.begin(), p.end());
  }
  m.encoder.release();
  return out;
}

inline void check_labels(const model::ModelState<float>& m, const LabelSpace& labels) {
  if (!(m.labels == labels)) {
    throw InvalidArgument("evaluate: checkpoint label space (" + m.labels.join() +
                          ") does not match the requested one (" + labels.join() + ")");
  }
}

/// Full-image evaluation of a manifest against its class_label column.
inline EvalReport evaluate(model::ModelState<float>& m, const DatasetManifest& manifest, const LabelSpace& labels,
                           SourceKind source, const sampler::PatchPlan& plan, const std::string& split_name = "") {
  check_labels(m, labels);
  std::vector<int> truth;
  for (const auto& r : manifest.records) truth.push_back(labels.index_of(r.class_label));
  return evaluate_predictions(truth, predict_views(m, load_views(manifest, source, plan)), labels, split_name);
}

inline EvalReport evaluate(const std::filesystem::path& checkpoint, const DatasetManifest& manifest,
                           const LabelSpace& labels, SourceKind source, const sampler::PatchPlan& plan,
                           const std::string& split_name = "") {
  auto m = model::load_checkpoint<float>(checkpoint);
  return evaluate(m, manifest, labels, source, plan, split_name);
}

/// One report per named manifest; keys equal the input names.
inline std::map<std::string, EvalReport> cross_test_suite(model::ModelState<float>& m,
                                                          const std::map<std::string, DatasetManifest>& suite,
                                                          const LabelSpace& labels, SourceKind source,
                                                          const sampler::PatchPlan& plan) {
  std::map<std::string, EvalReport> out;
  for (const auto& [name, manifest] : suite) out[name] = evaluate(m, manifest, labels, source, plan, name);
  return out;
}

/// Closed-set (seed-0 held-out records) and cross-seed (seed >= 1 test records)
/// splits of a zoo manifest; empty splits are omitted.
inline std::map<std::string, DatasetManifest> zoo_suite(const DatasetManifest& zoo) {
  std::map<std::string, DatasetManifest> out;
  ManifestFilter closed;
  closed.seed_in = std::vector<long long>{0};
  auto c = filter_split(zoo, Split::val, closed);
  auto c_test = filter_split(zoo, Split::test, closed);
  c.records.insert(c.records.end(), c_test.records.begin(), c_test.records.end());
  if (!c.empty()) out["closed_set"] = c;
  ManifestFilter cross;
  cross.seed_not_in = std::vector<long long>{0};
  auto x = filter_split(zoo, Split::test, cross);
  if (!x.empty()) out["cross_seed"] = x;
  return out;
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j;
  j["split"] = r.split_name;
  j["labels"] = r.labels.names();
  j["total"] = r.total;
  j["accuracy"] = r.accuracy;
  j["macro_f1"] = r.macro_f1;
  j["confusion"] = r.confusion;
  nlohmann::json f1 = nlohmann::json::array();
  for (double v : r.per_class_f1) f1.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
  j["per_class_f1"] = f1;
  j["absent_classes"] = r.absent_classes;
  if (r.per_position) j["per_position"] = *r.per_position;
  return j;
}

inline void write_report(const EvalReport& r, const std::filesystem::path& path) {
  std::ofstream out(path);
  out << to_json(r).dump(2) << '\n';
  if (!out) throw IoError("cannot write report: " + path.string());
}

/// Confusion matrix as CSV with a header row of predicted labels.
inline void write_confusion_csv(const EvalReport& r, const std::filesystem::path& path) {
  std::ofstream out(path);
  out << "truth\\pred";
  for (const auto& n : r.labels.names()) out << ',' << n;
  out << '\n';
  for (int c = 0; c < r.labels.size(); ++c) {
    out << r.labels.name(c);
    for (long long v : r.confusion[c]) out << ',' << v;
    out << '\n';
  }
  if (!out) throw IoError("cannot write confusion: " + path.string());
}

inline EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.split_name = j.at("split").get<std::string>();
  r.labels = LabelSpace(j.at("labels").get<std::vector<std::string>>());
  r.total = j.at("total").get<long long>();
  r.accuracy = j.at("accuracy").get<double>();
  r.macro_f1 = j.at("macro_f1").get<double>();
  r.confusion = j.at("confusion").get<std::vector<std::vector<long long>>>();
  for (const auto& v : j.at("per_class_f1")) r.per_class_f1.push_back(v.is_null() ? std::nan("") : v.get<double>());
  r.absent_classes = j.at("absent_classes").get<std::vector<std::string>>();
  if (j.contains("per_position")) r.per_position = j.at("per_position").get<std::vector<double>>();
  return r;
}

}  // namespace dnadet::eval
