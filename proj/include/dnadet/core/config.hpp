#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "dnadet/core/error.hpp"
#include "dnadet/core/label_space.hpp"
#include "dnadet/core/rng.hpp"

namespace dnadet {

/// How raw images are cut to the 128px working size before magnification.
enum class SourceKind { native, celeba, center };

inline std::string to_string(SourceKind k) {
  switch (k) {
    case SourceKind::native: return "native";
    case SourceKind::celeba: return "celeba";
    case SourceKind::center: return "center";
  }
  return "?";
}

/// Every knob of an experiment. Parsed from flat `key = value` text.
struct ExperimentConfig {
  LabelSpace labels;
  std::string train_manifest;
  std::string val_manifest;
  std::string test_manifest;
  SourceKind source = SourceKind::native;

  int resize_size = 512;
  int patch_size = 64;
  int patches_per_image = 16;
  int low_res_equalize = 0;  // 0 disables the equalizing resize

  double temperature = 0.07;
  double learning_rate = 1e-4;
  double lr_decay_factor = 0.9;
  long long lr_decay_interval = 500;
  int per_class_batch = 32;
  int max_epochs = 20;
  int checkpoint_epoch = 20;
  long long max_iterations = 0;  // 0 = bounded by epochs only
  std::uint64_t rng_seed = 0;

  double encoder_width = 1.0;
  bool pcl = true;
  bool pretrain = true;
  std::string init_checkpoint;
  double val_fraction = 0.1;

  /// Canonical text form; keys sorted, so equal configs give equal text.
  std::string to_text() const {
    std::map<std::string, std::string> kv = to_map();
    std::string out;
    for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
    return out;
  }

  std::uint64_t hash() const { return fnv1a(to_text()); }

  std::map<std::string, std::string> to_map() const {
    auto num = [](double v) {
      std::ostringstream os;
      os.precision(17);
      os << v;
      return os.str();
    };
    return {
        {"labels", labels.size() ? labels.join() : ""},
        {"train_manifest", train_manifest},
        {"val_manifest", val_manifest},
        {"test_manifest", test_manifest},
        {"source", to_string(source)},
        {"resize_size", std::to_string(resize_size)},
        {"patch_size", std::to_string(patch_size)},
        {"patches_per_image", std::to_string(patches_per_image)},
        {"low_res_equalize", std::to_string(low_res_equalize)},
        {"temperature", num(temperature)},
        {"learning_rate", num(learning_rate)},
        {"lr_decay_factor", num(lr_decay_factor)},
        {"lr_decay_interval", std::to_string(lr_decay_interval)},
        {"per_class_batch", std::to_string(per_class_batch)},
        {"max_epochs", std::to_string(max_epochs)},
        {"checkpoint_epoch", std::to_string(checkpoint_epoch)},
        {"max_iterations", std::to_string(max_iterations)},
        {"rng_seed", std::to_string(rng_seed)},
        {"encoder_width", num(encoder_width)},
        {"pcl", pcl ? "true" : "false"},
        {"pretrain", pretrain ? "true" : "false"},
        {"init_checkpoint", init_checkpoint},
        {"val_fraction", num(val_fraction)},
    };
  }

  /// Sets one key; unknown keys and malformed values throw ConfigError.
  void set(const std::string& key, const std::string& value) {
    auto as_int = [&](long long lo) {
      try {
        std::size_t pos = 0;
        long long v = std::stoll(value, &pos);
        if (pos != value.size() || v < lo) throw std::invalid_argument("range");
        return v;
      } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': bad integer '" + value + "'");
      }
    };
    auto as_real = [&]() {
      try {
        std::size_t pos = 0;
        double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return v;
      } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': bad number '" + value + "'");
      }
    };
    auto as_bool = [&]() {
      if (value == "true" || value == "1" || value == "yes") return true;
      if (value == "false" || value == "0" || value == "no") return false;
      throw ConfigError("config key '" + key + "': bad boolean '" + value + "'");
    };

    if (key == "labels") {
      try {
        labels = LabelSpace::parse(value);
      } catch (const Error& e) {
        throw ConfigError("config key 'labels': " + std::string(e.what()));
      }
    } else if (key == "train_manifest") {
      train_manifest = value;
    } else if (key == "val_manifest") {
      val_manifest = value;
    } else if (key == "test_manifest") {
      test_manifest = value;
    } else if (key == "source") {
      if (value == "native") source = SourceKind::native;
      else if (value == "celeba") source = SourceKind::celeba;
      else if (value == "center") source = SourceKind::center;
      else throw ConfigError("config key 'source': expected native|celeba|center");
    } else if (key == "resize_size") {
      resize_size = static_cast<int>(as_int(16));
    } else if (key == "patch_size") {
      patch_size = static_cast<int>(as_int(16));
    } else if (key == "patches_per_image") {
      patches_per_image = static_cast<int>(as_int(1));
    } else if (key == "low_res_equalize") {
      low_res_equalize = static_cast<int>(as_int(0));
    } else if (key == "temperature") {
      temperature = as_real();
    } else if (key == "learning_rate") {
      learning_rate = as_real();
    } else if (key == "lr_decay_factor") {
      lr_decay_factor = as_real();
    } else if (key == "lr_decay_interval") {
      lr_decay_interval = as_int(1);
    } else if (key == "per_class_batch") {
      per_class_batch = static_cast<int>(as_int(1));
    } else if (key == "max_epochs") {
      max_epochs = static_cast<int>(as_int(1));
    } else if (key == "checkpoint_epoch") {
      checkpoint_epoch = static_cast<int>(as_int(1));
    } else if (key == "max_iterations") {
      max_iterations = as_int(0);
    } else if (key == "rng_seed") {
      rng_seed = static_cast<std::uint64_t>(as_int(0));
    } else if (key == "encoder_width") {
      encoder_width = as_real();
    } else if (key == "pcl") {
      pcl = as_bool();
    } else if (key == "pretrain") {
      pretrain = as_bool();
    } else if (key == "init_checkpoint") {
      init_checkpoint = value;
    } else if (key == "val_fraction") {
      val_fraction = as_real();
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }

  /// Checks cross-field invariants.
  void validate() const {
    if (patch_size > resize_size) {
      throw ConfigError("config: patch_size must be <= resize_size");
    }
    if (!(temperature > 0.0)) throw ConfigError("config: temperature must be > 0");
    if (!(learning_rate > 0.0)) throw ConfigError("config: learning_rate must be > 0");
    if (!(lr_decay_factor > 0.0 && lr_decay_factor <= 1.0)) {
      throw ConfigError("config: lr_decay_factor must be in (0,1]");
    }
    if (checkpoint_epoch > max_epochs) {
      throw ConfigError("config: checkpoint_epoch must be <= max_epochs");
    }
    if (!(encoder_width > 0.0 && encoder_width <= 1.0)) {
      throw ConfigError("config: encoder_width must be in (0,1]");
    }
    if (!(val_fraction >= 0.0 && val_fraction < 1.0)) {
      throw ConfigError("config: val_fraction must be in [0,1)");
    }
  }
};

/// Parses `key = value` lines; '#' starts a comment. Unknown keys are rejected.
inline ExperimentConfig parse_config(std::istream& in, ExperimentConfig base = {}) {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    base.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path.string());
  return parse_config(in);
}

/// lr_0 * factor^floor(iteration / interval).
inline double scheduled_lr(const ExperimentConfig& cfg, long long iteration) {
  const long long steps = iteration / cfg.lr_decay_interval;
  return cfg.learning_rate * std::pow(cfg.lr_decay_factor, static_cast<double>(steps));
}

}  // namespace dnadet
