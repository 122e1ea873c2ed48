#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dnadet/core/error.hpp"
#include "dnadet/core/label_space.hpp"

namespace dnadet {

enum class Split { train, val, test };

inline std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

inline std::optional<Split> parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  return std::nullopt;
}

struct ManifestRecord {
  std::string image_path;
  std::string class_label;
  std::string architecture_id;
  std::string model_id;
  long long seed = 0;
  std::string source_dataset;
  Split split = Split::train;

  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

inline constexpr const char* kManifestHeader =
    "image_path,class_label,architecture_id,model_id,seed,source_dataset,split";

/// Image records plus the directory relative paths are resolved against.
struct DatasetManifest {
  std::vector<ManifestRecord> records;
  std::filesystem::path base_dir;

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }

  std::filesystem::path resolve(const ManifestRecord& r) const {
    std::filesystem::path p(r.image_path);
    return p.is_absolute() ? p : base_dir / p;
  }

  /// Number of records per class of `labels`, in label order.
  std::vector<std::size_t> class_counts(const LabelSpace& labels) const {
    std::vector<std::size_t> counts(labels.size(), 0);
    for (const auto& r : records) counts[labels.index_of(r.class_label)]++;
    return counts;
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline void check_field(const std::string& field, const char* name) {
  if (field.find_first_of(",\n\r") != std::string::npos) {
    throw ManifestError(std::string("manifest field ") + name +
                        " contains a delimiter: '" + field + "'");
  }
}

}  // namespace detail

/// Parses manifest text. Paths are checked against `base_dir` when `check_paths`.
/// An empty label space accepts any class label.
inline DatasetManifest parse_manifest(std::istream& in, const LabelSpace& labels,
                                      const std::filesystem::path& base_dir,
                                      bool check_paths = true) {
  DatasetManifest m;
  m.base_dir = base_dir;
  std::string line;
  if (!std::getline(in, line)) throw ManifestError("manifest is empty (missing header)");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kManifestHeader) {
    throw ManifestError("manifest header mismatch: expected '" + std::string(kManifestHeader) +
                        "'");
  }
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = detail::split_csv_line(line);
    const std::string where = "manifest line " + std::to_string(line_no);
    if (f.size() != 7) {
      throw ManifestError(where + ": expected 7 fields, got " + std::to_string(f.size()));
    }
    ManifestRecord r;
    r.image_path = f[0];
    r.class_label = f[1];
    r.architecture_id = f[2];
    r.model_id = f[3];
    try {
      std::size_t pos = 0;
      r.seed = std::stoll(f[4], &pos);
      if (pos != f[4].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ManifestError(where + ": bad seed '" + f[4] + "'");
    }
    r.source_dataset = f[5];
    const auto split = parse_split(f[6]);
    if (!split) throw ManifestError(where + ": bad split '" + f[6] + "'");
    r.split = *split;
    if (labels.size() > 0 && !labels.contains(r.class_label)) {
      throw ManifestError(where + ": unknown label '" + r.class_label + "' (record " +
                          r.image_path + ")");
    }
    if (check_paths && !std::filesystem::exists(m.resolve(r))) {
      throw ManifestError(where + ": unresolvable path '" + r.image_path + "'");
    }
    m.records.push_back(std::move(r));
  }
  return m;
}

inline DatasetManifest load_manifest(const std::filesystem::path& path, const LabelSpace& labels) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path.string());
  return parse_manifest(in, labels, path.parent_path());
}

inline void write_manifest(std::ostream& out, const DatasetManifest& m) {
  out << kManifestHeader << '\n';
  for (const auto& r : m.records) {
    detail::check_field(r.image_path, "image_path");
    detail::check_field(r.class_label, "class_label");
    detail::check_field(r.architecture_id, "architecture_id");
    detail::check_field(r.model_id, "model_id");
    detail::check_field(r.source_dataset, "source_dataset");
    out << r.image_path << ',' << r.class_label << ',' << r.architecture_id << ','
        << r.model_id << ',' << r.seed << ',' << r.source_dataset << ',' << to_string(r.split)
        << '\n';
  }
}

inline void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest: " + path.string());
  write_manifest(out, m);
  if (!out) throw IoError("write failed: " + path.string());
}

/// Conjunction of optional field constraints.
struct ManifestFilter {
  std::optional<Split> split;
  std::optional<std::string> class_label;
  std::optional<std::string> architecture_id;
  std::optional<std::string> model_id;
  std::optional<std::string> source_dataset;
  std::optional<std::vector<long long>> seed_in;
  std::optional<std::vector<long long>> seed_not_in;

  bool matches(const ManifestRecord& r) const {
    if (split && r.split != *split) return false;
    if (class_label && r.class_label != *class_label) return false;
    if (architecture_id && r.architecture_id != *architecture_id) return false;
    if (model_id && r.model_id != *model_id) return false;
    if (source_dataset && r.source_dataset != *source_dataset) return false;
    if (seed_in && std::find(seed_in->begin(), seed_in->end(), r.seed) == seed_in->end()) {
      return false;
    }
    if (seed_not_in &&
        std::find(seed_not_in->begin(), seed_not_in->end(), r.seed) != seed_not_in->end()) {
      return false;
    }
    return true;
  }
};

/// Order-preserving subset. An empty result is legal; callers check `empty()`.
inline DatasetManifest filter_split(const DatasetManifest& m, const ManifestFilter& f) {
  DatasetManifest out;
  out.base_dir = m.base_dir;
  std::copy_if(m.records.begin(), m.records.end(), std::back_inserter(out.records),
               [&](const ManifestRecord& r) { return f.matches(r); });
  return out;
}

inline DatasetManifest filter_split(const DatasetManifest& m, Split split,
                                    ManifestFilter f = {}) {
  f.split = split;
  return filter_split(m, f);
}

}  // namespace dnadet
