#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "dnadet/core/error.hpp"
#include "dnadet/model/model_state.hpp"

namespace dnadet::model {

// Layout: "DNADETCK" | u32 version | u64 header bytes | JSON header | float32 LE tensors
// in header order. The header carries the encoder config, label space, iteration
// counter, and a (name, shape, kind) table for every tensor.
inline constexpr char kCheckpointMagic[8] = {'D', 'N', 'A', 'D', 'E', 'T', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes little endian");

template <typename Int>
void put(std::ostream& out, Int v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename Int>
Int get(std::istream& in) {
  Int v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw IoError("checkpoint truncated");
  return v;
}

inline nlohmann::json encoder_json(const EncoderConfig& cfg) {
  return {{"channels", std::vector<int>(cfg.channels.begin(), cfg.channels.end())},
          {"leaky_slope", cfg.leaky_slope},
          {"projection_dim", cfg.projection_dim}};
}

inline EncoderConfig encoder_from_json(const nlohmann::json& j) {
  EncoderConfig cfg;
  const auto ch = j.at("channels").get<std::vector<int>>();
  if (ch.size() != cfg.channels.size()) throw IoError("checkpoint: bad encoder channel list");
  std::copy(ch.begin(), ch.end(), cfg.channels.begin());
  cfg.leaky_slope = j.at("leaky_slope").get<double>();
  cfg.projection_dim = j.at("projection_dim").get<int>();
  return cfg;
}

}  // namespace detail

/// Serialized model; `extra` carries free-form run metadata (tags, ablation flags).
template <typename T>
void save_checkpoint(ModelState<T>& state, const std::filesystem::path& path,
                     const nlohmann::json& extra = nlohmann::json::object()) {
  nlohmann::json header;
  header["format"] = "dnadet-checkpoint";
  header["encoder"] = detail::encoder_json(state.config);
  header["labels"] = state.labels.names();
  header["iteration"] = state.iteration;
  header["extra"] = extra;
  nlohmann::json table = nlohmann::json::array();
  std::vector<const std::vector<T>*> blobs;
  for (auto* p : state.params()) {
    table.push_back({{"name", p->name}, {"shape", p->shape}, {"kind", "param"}});
    blobs.push_back(&p->value);
  }
  for (auto* b : state.buffers()) {
    table.push_back({{"name", b->name},
                     {"shape", std::vector<int>{static_cast<int>(b->value.size())}},
                     {"kind", "buffer"}});
    blobs.push_back(&b->value);
  }
  header["tensors"] = table;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path.string());
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put<std::uint32_t>(out, kCheckpointVersion);
  detail::put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto* blob : blobs) {
    std::vector<float> f(blob->begin(), blob->end());
    out.write(reinterpret_cast<const char*>(f.data()),
              static_cast<std::streamsize>(f.size() * sizeof(float)));
  }
  if (!out) throw IoError("checkpoint write failed: " + path.string());
}

struct CheckpointHeader {
  EncoderConfig encoder;
  LabelSpace labels;
  long long iteration = 0;
  nlohmann::json extra;
};

namespace detail {

inline nlohmann::json read_header(std::istream& in, const std::filesystem::path& path) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw IoError("not a checkpoint file: " + path.string());
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto len = get<std::uint64_t>(in);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw IoError("checkpoint truncated: " + path.string());
  return nlohmann::json::parse(text);
}

}  // namespace detail

inline CheckpointHeader read_checkpoint_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  const auto h = detail::read_header(in, path);
  return {detail::encoder_from_json(h.at("encoder")),
          LabelSpace(h.at("labels").get<std::vector<std::string>>()),
          h.at("iteration").get<long long>(), h.value("extra", nlohmann::json::object())};
}

template <typename T>
ModelState<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  const auto h = detail::read_header(in, path);
  ModelState<T> state(detail::encoder_from_json(h.at("encoder")),
                      LabelSpace(h.at("labels").get<std::vector<std::string>>()));
  state.iteration = h.at("iteration").get<long long>();

  std::map<std::string, std::vector<T>*> slots;
  for (auto* p : state.params()) slots[p->name] = &p->value;
  for (auto* b : state.buffers()) slots[b->name] = &b->value;
  std::size_t filled = 0;
  for (const auto& entry : h.at("tensors")) {
    const auto name = entry.at("name").get<std::string>();
    std::size_t count = 1;
    for (int d : entry.at("shape").get<std::vector<int>>()) count *= static_cast<std::size_t>(d);
    std::vector<float> f(count);
    in.read(reinterpret_cast<char*>(f.data()), static_cast<std::streamsize>(count * sizeof(float)));
    if (!in) throw IoError("checkpoint truncated in tensor " + name);
    auto it = slots.find(name);
    if (it == slots.end()) throw IoError("checkpoint: unexpected tensor " + name);
    if (it->second->size() != count) throw IoError("checkpoint: shape mismatch for " + name);
    std::copy(f.begin(), f.end(), it->second->begin());
    ++filled;
  }
  if (filled != slots.size()) throw IoError("checkpoint: missing tensors");
  return state;
}

}  // namespace dnadet::model
