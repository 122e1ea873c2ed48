#pragma once

#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dnadet/core/error.hpp"

namespace dnadet {

/// Ordered class names; index 0 is "real" when a real class exists.
class LabelSpace {
 public:
  LabelSpace() = default;

  explicit LabelSpace(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.size() < 2) {
      throw InvalidArgument("LabelSpace: need at least 2 classes");
    }
    std::set<std::string> seen;
    for (const auto& n : names_) {
      if (n.empty()) throw InvalidArgument("LabelSpace: empty class name");
      if (!seen.insert(n).second) {
        throw InvalidArgument("LabelSpace: duplicate class name '" + n + "'");
      }
    }
  }

  /// Labels "0".."n-1"; used for the transform-classification task.
  static LabelSpace numbered(int n) {
    std::vector<std::string> names;
    names.reserve(n);
    for (int i = 0; i < n; ++i) names.push_back(std::to_string(i));
    return LabelSpace(std::move(names));
  }

  /// Parses "a,b,c".
  static LabelSpace parse(const std::string& csv) {
    std::vector<std::string> names;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto b = item.find_first_not_of(" \t");
      const auto e = item.find_last_not_of(" \t");
      names.push_back(b == std::string::npos ? std::string() : item.substr(b, e - b + 1));
    }
    return LabelSpace(std::move(names));
  }

  int size() const noexcept { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::string& name(int index) const { return names_.at(index); }

  std::optional<int> find(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (names_[i] == name) return static_cast<int>(i);
    }
    return std::nullopt;
  }

  int index_of(const std::string& name) const {
    if (auto i = find(name)) return *i;
    throw InvalidArgument("LabelSpace: unknown class '" + name + "'");
  }

  bool contains(const std::string& name) const { return find(name).has_value(); }

  std::string join() const {
    std::string out;
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (i) out += ',';
      out += names_[i];
    }
    return out;
  }

  friend bool operator==(const LabelSpace&, const LabelSpace&) = default;

 private:
  std::vector<std::string> names_;
};

}  // namespace dnadet
