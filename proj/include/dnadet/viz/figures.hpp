#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "dnadet/core/manifest.hpp"
#include "dnadet/model/checkpoint.hpp"
#include "dnadet/model/gradcam.hpp"
#include "dnadet/sampler/sampler.hpp"
#include "dnadet/viz/tsne.hpp"

namespace dnadet::viz {

enum class FigureKind { gradcam_panel, tsne, curves, confusion_heatmap, position_grid };

inline std::string to_string(FigureKind k) {
  switch (k) {
    case FigureKind::gradcam_panel: return "gradcam_panel";
    case FigureKind::tsne: return "tsne";
    case FigureKind::curves: return "curves";
    case FigureKind::confusion_heatmap: return "confusion_heatmap";
    case FigureKind::position_grid: return "position_grid";
  }
  return "?";
}

inline FigureKind parse_figure_kind(const std::string& s) {
  for (auto k : {FigureKind::gradcam_panel, FigureKind::tsne, FigureKind::curves, FigureKind::confusion_heatmap,
                 FigureKind::position_grid}) {
    if (to_string(k) == s) return k;
  }
  throw InvalidArgument("unknown figure kind '" + s + "'");
}

/// Inputs per kind:
///   gradcam_panel      checkpoint, manifest
///   tsne               feature table (label,f0,f1,...)
///   curves             history.csv
///   confusion_heatmap  report JSON
///   position_grid      report JSON with 16 per_position values
struct FigureRequest {
  FigureKind kind = FigureKind::curves;
  std::vector<std::filesystem::path> inputs;
  std::filesystem::path out_path;
  std::uint64_t seed = 0;  // t-SNE initialization
  int max_images = 8;      // gradcam_panel columns
  int layer = 4;           // gradcam_panel encoder block
  int resize_size = 128;   // gradcam_panel view size
};

struct FigureSummary {
  std::filesystem::path path;
  int width = 0;
  int height = 0;
  std::map<std::string, int> series_points;
};

// ---- persisted inputs -------------------------------------------------------

struct History {
  std::vector<std::string> columns;
  std::map<std::string, std::vector<double>> values;  // empty cells are NaN
  std::size_t rows() const { return values.empty() ? 0 : values.begin()->second.size(); }
};

inline History read_history(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read history: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("header", "empty history file " + path.string());
  History h;
  h.columns = dnadet::detail::split_csv_line(line);
  for (const char* need : {"epoch", "l_con", "l_ce", "total", "train_accuracy", "val_accuracy"}) {
    if (std::find(h.columns.begin(), h.columns.end(), need) == h.columns.end()) {
      throw SchemaError(need, "missing column in " + path.string());
    }
  }
  for (const auto& c : h.columns) h.values[c];
  int row = 1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row;
    const auto cells = dnadet::detail::split_csv_line(line);
    if (cells.size() != h.columns.size()) {
      throw SchemaError("row " + std::to_string(row), "expected " + std::to_string(h.columns.size()) + " cells");
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
      double v = std::nan("");
      if (!cells[i].empty()) {
        try {
          std::size_t used = 0;
          v = std::stod(cells[i], &used);
          if (used != cells[i].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
          throw SchemaError(h.columns[i], "row " + std::to_string(row) + " is not a number: '" + cells[i] + "'");
        }
      }
      h.values[h.columns[i]].push_back(v);
    }
  }
  if (h.rows() == 0) throw SchemaError("epoch", "history has no rows");
  return h;
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read report: " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError("json", std::string("not valid JSON: ") + e.what());
  }
}

struct FeatureTable {
  std::vector<std::string> labels;
  Eigen::MatrixXd features;
};

inline void write_feature_table(const FeatureTable& t, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  out << "label";
  for (Eigen::Index j = 0; j < t.features.cols(); ++j) out << ",f" << j;
  out << '\n';
  char buf[32];
  for (Eigen::Index i = 0; i < t.features.rows(); ++i) {
    out << t.labels[i];
    for (Eigen::Index j = 0; j < t.features.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.9g", t.features(i, j));
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("cannot write features: " + path.string());
}

inline FeatureTable read_feature_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read features: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("header", "empty feature table " + path.string());
  const auto header = dnadet::detail::split_csv_line(line);
  if (header.empty() || header[0] != "label") throw SchemaError("label", "first column must be 'label'");
  if (header.size() < 2) throw SchemaError("f0", "no feature columns");
  const std::size_t dim = header.size() - 1;
  FeatureTable t;
  std::vector<double> flat;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = dnadet::detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      throw SchemaError("row " + std::to_string(t.labels.size() + 2),
                        "expected " + std::to_string(header.size()) + " cells");
    }
    t.labels.push_back(cells[0]);
    for (std::size_t j = 1; j < cells.size(); ++j) {
      try {
        flat.push_back(std::stod(cells[j]));
      } catch (const std::exception&) {
        throw SchemaError(header[j], "row " + std::to_string(t.labels.size() + 1) + " is not a number");
      }
    }
  }
  t.features = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      flat.data(), static_cast<Eigen::Index>(t.labels.size()), static_cast<Eigen::Index>(dim));
  return t;
}

/// Pooled encoder features of full views, labelled by their manifest class.
inline FeatureTable extract_features(model::ModelState<float>& m, const DatasetManifest& manifest, SourceKind source,
                                     const sampler::PatchPlan& plan, int batch = 32) {
  FeatureTable t;
  t.features.resize(static_cast<Eigen::Index>(manifest.size()), m.config.feature_dim());
  for (std::size_t first = 0; first < manifest.size(); first += batch) {
    const std::size_t last = std::min(manifest.size(), first + batch);
    std::vector<ImageBuffer> views;
    for (std::size_t i = first; i < last; ++i) {
      const auto& r = manifest.records[i];
      views.push_back(sampler::equalize_then_magnify(sampler::preprocess(load_image(manifest.resolve(r)), source), plan));
      t.labels.push_back(r.class_label);
    }
    const auto f = model::encoder_forward(m, std::span<const ImageBuffer>(views));
    for (Eigen::Index i = 0; i < f.rows(); ++i) {
      for (Eigen::Index j = 0; j < f.cols(); ++j) t.features(static_cast<Eigen::Index>(first) + i, j) = f(i, j);
    }
  }
  m.encoder.release();
  return t;
}

namespace detail {

inline const cv::Scalar kWhite(255, 255, 255);
inline const cv::Scalar kBlack(0, 0, 0);
inline const cv::Scalar kGrey(160, 160, 160);

/// Ten-colour categorical palette (BGR).
inline cv::Scalar palette(std::size_t i) {
  static const cv::Scalar colors[] = {{180, 119, 31}, {14, 127, 255}, {44, 160, 44},   {40, 39, 214},
                                      {189, 103, 148}, {75, 86, 140}, {194, 119, 227}, {127, 127, 127},
                                      {34, 189, 188},  {207, 190, 23}};
  return colors[i % 10];
}

/// Viridis colour for v in [0,1].
inline cv::Scalar heat(double v) {
  static const cv::Mat lut = [] {
    cv::Mat ramp(1, 256, CV_8UC1), out;
    for (int i = 0; i < 256; ++i) ramp.at<uchar>(0, i) = static_cast<uchar>(i);
    cv::applyColorMap(ramp, out, cv::COLORMAP_VIRIDIS);
    return out;
  }();
  const int i = std::clamp(static_cast<int>(std::lround(v * 255.0)), 0, 255);
  const auto c = lut.at<cv::Vec3b>(0, i);
  return {static_cast<double>(c[0]), static_cast<double>(c[1]), static_cast<double>(c[2])};
}

inline void text(cv::Mat& img, const std::string& s, cv::Point org, double scale = 0.45,
                 const cv::Scalar& color = kBlack) {
  cv::putText(img, s, org, cv::FONT_HERSHEY_SIMPLEX, scale, color, 1, cv::LINE_AA);
}

inline void centered_text(cv::Mat& img, const std::string& s, cv::Point center, double scale = 0.45,
                          const cv::Scalar& color = kBlack) {
  int base = 0;
  const auto size = cv::getTextSize(s, cv::FONT_HERSHEY_SIMPLEX, scale, 1, &base);
  text(img, s, {center.x - size.width / 2, center.y + size.height / 2}, scale, color);
}

inline std::string num(double v, const char* format = "%.3g") {
  char buf[32];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

inline std::string clip(const std::string& s, std::size_t n = 12) { return s.size() <= n ? s : s.substr(0, n); }

/// Data-to-pixel mapping for one plot panel with a frame and five ticks per axis.
struct Axes {
  cv::Rect area;
  double x0, x1, y0, y1;

  cv::Point map(double x, double y) const {
    const double fx = x1 > x0 ? (x - x0) / (x1 - x0) : 0.5;
    const double fy = y1 > y0 ? (y - y0) / (y1 - y0) : 0.5;
    return {area.x + static_cast<int>(std::lround(fx * area.width)),
            area.y + area.height - static_cast<int>(std::lround(fy * area.height))};
  }

  void draw(cv::Mat& img, const std::string& title) const {
    cv::rectangle(img, area, kBlack, 1);
    for (int t = 0; t <= 4; ++t) {
      const double fx = x0 + (x1 - x0) * t / 4.0, fy = y0 + (y1 - y0) * t / 4.0;
      const auto px = map(fx, y0), py = map(x0, fy);
      cv::line(img, px, {px.x, px.y + 4}, kBlack, 1);
      cv::line(img, py, {py.x - 4, py.y}, kBlack, 1);
      centered_text(img, num(fx), {px.x, px.y + 14}, 0.35);
      text(img, num(fy), {area.x - 44, py.y + 4}, 0.35);
    }
    text(img, title, {area.x, area.y - 8}, 0.5);
  }
};

/// Padded [min,max] of the finite values; a flat range is widened.
inline std::pair<double, double> range_of(const std::vector<const std::vector<double>*>& series) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto* s : series) {
    for (double v : *s) {
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  if (!std::isfinite(lo)) return {0.0, 1.0};
  if (hi - lo < 1e-12) return {lo - 0.5, hi + 0.5};
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

inline void save_png(const cv::Mat& img, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), img)) throw IoError("cannot write figure: " + path.string());
}

inline void require_inputs(const FigureRequest& req, std::size_t n, const char* what) {
  if (req.inputs.size() != n) {
    throw InvalidArgument(to_string(req.kind) + " needs " + std::to_string(n) + " input(s): " + what);
  }
  for (const auto& p : req.inputs) {
    if (!std::filesystem::exists(p)) throw IoError("figure input not found: " + p.string());
  }
}

inline FigureSummary curves(const FigureRequest& req) {
  require_inputs(req, 1, "history.csv");
  const auto h = read_history(req.inputs[0]);
  const auto& epoch = h.values.at("epoch");
  struct Panel {
    const char* title;
    std::vector<const char*> series;
  };
  const Panel panels[] = {{"contrastive loss", {"l_con"}},
                          {"cross-entropy", {"l_ce"}},
                          {"accuracy", {"train_accuracy", "val_accuracy"}}};
  constexpr int kW = 360, kH = 300, kMargin = 60;
  cv::Mat img(kH + 2 * kMargin, 3 * (kW + kMargin) + kMargin, CV_8UC3, kWhite);
  FigureSummary out;
  const auto [ex0, ex1] = range_of({&epoch});
  for (int p = 0; p < 3; ++p) {
    std::vector<const std::vector<double>*> ys;
    for (const auto* name : panels[p].series) ys.push_back(&h.values.at(name));
    auto [y0, y1] = range_of(ys);
    if (p == 2) {
      y0 = 0.0;
      y1 = 1.0;
    }
    const Axes ax{{kMargin + p * (kW + kMargin), kMargin, kW, kH}, ex0, ex1, y0, y1};
    ax.draw(img, panels[p].title);
    for (std::size_t s = 0; s < ys.size(); ++s) {
      const auto color = palette(s);
      int count = 0;
      std::optional<cv::Point> prev;
      for (std::size_t i = 0; i < epoch.size(); ++i) {
        const double y = (*ys[s])[i];
        if (!std::isfinite(y)) continue;
        const auto pt = ax.map(epoch[i], y);
        if (prev) cv::line(img, *prev, pt, color, 1, cv::LINE_AA);
        cv::circle(img, pt, 3, color, cv::FILLED, cv::LINE_AA);
        prev = pt;
        ++count;
      }
      out.series_points[panels[p].series[s]] = count;
      text(img, panels[p].series[s], {ax.area.x + 8, ax.area.y + 16 + 16 * static_cast<int>(s)}, 0.4, color);
    }
    centered_text(img, "epoch", {ax.area.x + kW / 2, kMargin + kH + 34}, 0.4);
  }
  save_png(img, req.out_path);
  out.path = req.out_path;
  out.width = img.cols;
  out.height = img.rows;
  return out;
}

inline FigureSummary position_grid(const FigureRequest& req) {
  require_inputs(req, 1, "report JSON");
  const auto j = read_json(req.inputs[0]);
  if (!j.contains("per_position")) throw SchemaError("per_position", "missing from " + req.inputs[0].string());
  const auto& pp = j.at("per_position");
  if (!pp.is_array() || pp.size() != 16) throw SchemaError("per_position", "must hold 16 accuracies");
  std::vector<double> acc;
  for (const auto& v : pp) {
    if (!v.is_number() || v.get<double>() < 0.0 || v.get<double>() > 1.0) {
      throw SchemaError("per_position", "values must be accuracies in [0,1]");
    }
    acc.push_back(v.get<double>());
  }
  constexpr int kCell = 100, kMargin = 50;
  cv::Mat img(4 * kCell + 2 * kMargin, 4 * kCell + 2 * kMargin, CV_8UC3, kWhite);
  for (int p = 0; p < 16; ++p) {
    const cv::Rect cell{kMargin + (p % 4) * kCell, kMargin + (p / 4) * kCell, kCell, kCell};
    cv::rectangle(img, cell, heat(acc[p]), cv::FILLED);
    cv::rectangle(img, cell, kWhite, 1);
    const auto ink = acc[p] > 0.6 ? kBlack : kWhite;
    centered_text(img, num(100.0 * acc[p], "%.1f"), {cell.x + kCell / 2, cell.y + kCell / 2}, 0.6, ink);
    text(img, std::to_string(p + 1), {cell.x + 4, cell.y + 14}, 0.35, ink);
  }
  const std::string title = j.value("split", std::string("per-position accuracy (%)"));
  text(img, title.empty() ? "per-position accuracy (%)" : title, {kMargin, kMargin - 14}, 0.5);
  save_png(img, req.out_path);
  return {req.out_path, img.cols, img.rows, {{"per_position", 16}}};
}

inline FigureSummary confusion_heatmap(const FigureRequest& req) {
  require_inputs(req, 1, "report JSON");
  const auto j = read_json(req.inputs[0]);
  for (const char* need : {"labels", "confusion"}) {
    if (!j.contains(need)) throw SchemaError(need, "missing from " + req.inputs[0].string());
  }
  std::vector<std::string> labels;
  std::vector<std::vector<long long>> conf;
  try {
    labels = j.at("labels").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception&) {
    throw SchemaError("labels", "must be a list of names");
  }
  try {
    conf = j.at("confusion").get<std::vector<std::vector<long long>>>();
  } catch (const nlohmann::json::exception&) {
    throw SchemaError("confusion", "must be a matrix of counts");
  }
  const int C = static_cast<int>(labels.size());
  if (C == 0 || static_cast<int>(conf.size()) != C) throw SchemaError("confusion", "row count must equal labels");
  for (const auto& row : conf) {
    if (static_cast<int>(row.size()) != C) throw SchemaError("confusion", "matrix must be square");
  }
  constexpr int kCell = 64, kLeft = 110, kTop = 60, kBottom = 90;
  cv::Mat img(kTop + C * kCell + kBottom, kLeft + C * kCell + 30, CV_8UC3, kWhite);
  for (int t = 0; t < C; ++t) {
    long long row_sum = 0;
    for (auto v : conf[t]) row_sum += v;
    for (int p = 0; p < C; ++p) {
      const double frac = row_sum ? static_cast<double>(conf[t][p]) / static_cast<double>(row_sum) : 0.0;
      const cv::Rect cell{kLeft + p * kCell, kTop + t * kCell, kCell, kCell};
      cv::rectangle(img, cell, heat(frac), cv::FILLED);
      cv::rectangle(img, cell, kWhite, 1);
      centered_text(img, std::to_string(conf[t][p]), {cell.x + kCell / 2, cell.y + kCell / 2}, 0.45,
                    frac > 0.6 ? kBlack : kWhite);
    }
    text(img, clip(labels[t]), {8, kTop + t * kCell + kCell / 2 + 5}, 0.4);
  }
  for (int p = 0; p < C; ++p) {
    centered_text(img, clip(labels[p], 8), {kLeft + p * kCell + kCell / 2, kTop + C * kCell + 16}, 0.35);
  }
  text(img, "truth (rows) vs prediction (columns)", {kLeft, kTop - 20}, 0.45);
  save_png(img, req.out_path);
  return {req.out_path, img.cols, img.rows, {{"cells", C * C}}};
}

inline FigureSummary tsne_scatter(const FigureRequest& req) {
  require_inputs(req, 1, "feature table");
  const auto table = read_feature_table(req.inputs[0]);
  TsneOptions opt;
  opt.seed = req.seed;
  const auto Y = tsne(table.features, opt);
  const std::set<std::string> names(table.labels.begin(), table.labels.end());
  const std::vector<std::string> order(names.begin(), names.end());
  auto color_of = [&](const std::string& l) {
    return palette(static_cast<std::size_t>(std::find(order.begin(), order.end(), l) - order.begin()));
  };
  constexpr int kSide = 560, kMargin = 60, kLegend = 170;
  cv::Mat img(kSide + 2 * kMargin, kSide + 2 * kMargin + kLegend, CV_8UC3, kWhite);
  const std::vector<double> xs(Y.col(0).data(), Y.col(0).data() + Y.rows());
  const std::vector<double> ys(Y.col(1).data(), Y.col(1).data() + Y.rows());
  const auto [x0, x1] = range_of({&xs});
  const auto [y0, y1] = range_of({&ys});
  const Axes ax{{kMargin, kMargin, kSide, kSide}, x0, x1, y0, y1};
  ax.draw(img, "t-SNE of encoder features");
  FigureSummary out;
  for (Eigen::Index i = 0; i < Y.rows(); ++i) {
    cv::circle(img, ax.map(xs[i], ys[i]), 3, color_of(table.labels[i]), cv::FILLED, cv::LINE_AA);
    ++out.series_points[table.labels[i]];
  }
  for (std::size_t k = 0; k < order.size(); ++k) {
    const cv::Point at{kMargin + kSide + 24, kMargin + 12 + 20 * static_cast<int>(k)};
    cv::circle(img, at, 5, palette(k), cv::FILLED, cv::LINE_AA);
    text(img, clip(order[k], 16), {at.x + 12, at.y + 5}, 0.42);
  }
  save_png(img, req.out_path);
  out.path = req.out_path;
  out.width = img.cols;
  out.height = img.rows;
  return out;
}

inline FigureSummary gradcam_panel(const FigureRequest& req) {
  require_inputs(req, 2, "checkpoint, manifest");
  auto m = model::load_checkpoint<float>(req.inputs[0]);
  const auto manifest = load_manifest(req.inputs[1], m.labels);
  if (manifest.empty()) throw SchemaError("records", "manifest has no records");
  const sampler::PatchPlan plan{req.resize_size, req.resize_size, 1, 0};
  const int n = std::min<int>(req.max_images, static_cast<int>(manifest.size()));
  constexpr int kTile = 128, kGap = 8, kCaption = 36;
  cv::Mat img(2 * kTile + 3 * kGap + kCaption, n * (kTile + kGap) + kGap, CV_8UC3, kWhite);
  for (int i = 0; i < n; ++i) {
    const auto& r = manifest.records[i];
    const auto view = sampler::equalize_then_magnify(load_image(manifest.resolve(r)), plan);
    const auto target = m.labels.index_of(r.class_label);
    const auto cam = model::gradcam(m, view, target, req.layer);
    cv::Mat bgr = to_bgr8(view), tile, cam8(cam.height, cam.width, CV_8UC1), colored, overlay;
    for (int y = 0; y < cam.height; ++y) {
      for (int x = 0; x < cam.width; ++x) {
        cam8.at<uchar>(y, x) = static_cast<uchar>(std::lround(cam.at(y, x) * 255.0f));
      }
    }
    cv::applyColorMap(cam8, colored, cv::COLORMAP_JET);
    cv::addWeighted(bgr, 0.5, colored, 0.5, 0.0, overlay);
    const int x = kGap + i * (kTile + kGap);
    cv::resize(bgr, tile, {kTile, kTile}, 0, 0, cv::INTER_AREA);
    tile.copyTo(img(cv::Rect(x, kGap, kTile, kTile)));
    cv::resize(overlay, tile, {kTile, kTile}, 0, 0, cv::INTER_AREA);
    tile.copyTo(img(cv::Rect(x, 2 * kGap + kTile, kTile, kTile)));
    centered_text(img, clip(r.class_label, 14), {x + kTile / 2, 3 * kGap + 2 * kTile + 12}, 0.4);
  }
  m.encoder.release();
  save_png(img, req.out_path);
  return {req.out_path, img.cols, img.rows, {{"images", n}}};
}

}  // namespace detail

/// Renders one figure to a PNG. Inputs are read, never modified; output bytes
/// depend only on the inputs and the request.
inline FigureSummary emit_figure(const FigureRequest& req) {
  if (req.out_path.empty()) throw InvalidArgument("figure: output path is required");
  switch (req.kind) {
    case FigureKind::gradcam_panel: return detail::gradcam_panel(req);
    case FigureKind::tsne: return detail::tsne_scatter(req);
    case FigureKind::curves: return detail::curves(req);
    case FigureKind::confusion_heatmap: return detail::confusion_heatmap(req);
    case FigureKind::position_grid: return detail::position_grid(req);
  }
  throw InvalidArgument("figure: unknown kind");
}

}  // namespace dnadet::viz
