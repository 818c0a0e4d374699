#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dseg/core/error.hpp"
#include "dseg/nn/models.hpp"

namespace dseg::nn {

// Layout: "DSEGCKPT" | u32 version | u64 header length | JSON header |
// float32 little-endian parameter blobs at the offsets listed in the header.
inline constexpr char checkpoint_magic[8] = {'D', 'S', 'E', 'G', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t checkpoint_version = 1;

inline nlohmann::json to_json(const SegmenterConfig& c) {
  return {{"variant", to_string(c.variant)}, {"depth", c.depth}, {"base_channels", c.base_channels},
          {"input_size", c.input_size}};
}
inline nlohmann::json to_json(const DetectorConfig& c) {
  return {{"stride", c.stride}, {"base_channels", c.base_channels}, {"context_layers", c.context_layers}};
}

inline SegmenterConfig segmenter_config_from_json(const nlohmann::json& j) {
  SegmenterConfig c;
  c.variant = parse_segmenter_variant(j.at("variant").get<std::string>());
  c.depth = j.at("depth").get<int>();
  c.base_channels = j.at("base_channels").get<int>();
  c.input_size = j.at("input_size").get<int>();
  return c;
}
inline DetectorConfig detector_config_from_json(const nlohmann::json& j) {
  DetectorConfig c;
  c.stride = j.at("stride").get<int>();
  c.base_channels = j.at("base_channels").get<int>();
  c.context_layers = j.value("context_layers", 1);
  return c;
}

struct CheckpointHeader {
  std::string kind;  // "segmenter" or "detector"
  nlohmann::json config;
  std::uint64_t seed = 0;
  double class_weight = 1.0;
};

namespace detail {

template <typename U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
}

template <typename U>
U get_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return static_cast<U>(v);
}

}  // namespace detail

template <typename T>
std::string encode_checkpoint(const CheckpointHeader& h, const ParameterList<T>& params) {
  nlohmann::json header{{"kind", h.kind}, {"config", h.config}, {"seed", h.seed}, {"class_weight", h.class_weight}};
  auto& plist = header["params"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& p : params) {
    const auto count = static_cast<std::uint64_t>(p.var->size());
    plist.push_back({{"name", p.name}, {"shape", p.var->shape()}, {"offset", offset}, {"count", count}});
    offset += count * 4;
  }
  const std::string hs = header.dump();
  std::string out(checkpoint_magic, sizeof checkpoint_magic);
  detail::put_le<std::uint32_t>(out, checkpoint_version);
  detail::put_le<std::uint64_t>(out, hs.size());
  out += hs;
  for (const auto& p : params)
    for (T v : p.var->value.data) detail::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

/// Parses a checkpoint and copies the blobs into `params`, which must match
/// by name, order and shape. Returns the header.
template <typename T>
CheckpointHeader decode_checkpoint(const std::string& bytes, ParameterList<T>& params) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 20 || std::memcmp(p, checkpoint_magic, 8) != 0) throw load_error("not a checkpoint file");
  const auto version = detail::get_le<std::uint32_t>(p + 8);
  if (version != checkpoint_version) throw load_error("unsupported checkpoint version " + std::to_string(version));
  const auto hlen = detail::get_le<std::uint64_t>(p + 12);
  if (hlen > bytes.size() - 20) throw load_error("truncated checkpoint header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(20, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw load_error(std::string("corrupt checkpoint header: ") + e.what());
  }
  const std::size_t blob0 = 20 + hlen;
  const auto& plist = header.at("params");
  if (plist.size() != params.size()) throw load_error("checkpoint parameter count does not match model");
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& e = plist[k];
    if (e.at("name").get<std::string>() != params[k].name || e.at("shape").get<std::vector<int>>() != params[k].var->shape())
      throw load_error("checkpoint parameter '" + e.at("name").get<std::string>() + "' does not match model");
    const auto off = e.at("offset").get<std::uint64_t>();
    const auto count = e.at("count").get<std::uint64_t>();
    if (count != params[k].var->size() || blob0 + off + count * 4 > bytes.size()) throw load_error("truncated checkpoint data");
    auto& dst = params[k].var->value.data;
    for (std::uint64_t i = 0; i < count; ++i)
      dst[i] = static_cast<T>(std::bit_cast<float>(detail::get_le<std::uint32_t>(p + blob0 + off + 4 * i)));
  }
  return {header.at("kind").get<std::string>(), header.at("config"), header.at("seed").get<std::uint64_t>(),
          header.at("class_weight").get<double>()};
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw load_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline nlohmann::json peek_checkpoint_header(const std::string& bytes) {
  if (bytes.size() < 20 || std::memcmp(bytes.data(), checkpoint_magic, 8) != 0) throw load_error("not a checkpoint file");
  const auto hlen = detail::get_le<std::uint64_t>(reinterpret_cast<const unsigned char*>(bytes.data()) + 12);
  if (hlen > bytes.size() - 20) throw load_error("truncated checkpoint header");
  try {
    return nlohmann::json::parse(bytes.substr(20, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw load_error(std::string("corrupt checkpoint header: ") + e.what());
  }
}

template <typename T>
std::string encode(const BasicSegmenter<T>& m, std::uint64_t seed, double class_weight) {
  return encode_checkpoint({"segmenter", to_json(m.config()), seed, class_weight}, m.parameters());
}
template <typename T>
std::string encode(const BasicDetector<T>& m, std::uint64_t seed) {
  return encode_checkpoint({"detector", to_json(m.config()), seed, 1.0}, m.parameters());
}

template <typename T = float>
std::pair<BasicSegmenter<T>, CheckpointHeader> load_segmenter(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  const auto j = peek_checkpoint_header(bytes);
  if (j.value("kind", "") != "segmenter") throw load_error(path.string() + " is not a segmenter checkpoint");
  BasicSegmenter<T> m(segmenter_config_from_json(j.at("config")), 0);
  auto h = decode_checkpoint(bytes, m.parameters());
  return {std::move(m), std::move(h)};
}

template <typename T = float>
std::pair<BasicDetector<T>, CheckpointHeader> load_detector(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  const auto j = peek_checkpoint_header(bytes);
  if (j.value("kind", "") != "detector") throw load_error(path.string() + " is not a detector checkpoint");
  BasicDetector<T> m(detector_config_from_json(j.at("config")), 0);
  auto h = decode_checkpoint(bytes, m.parameters());
  return {std::move(m), std::move(h)};
}

}  // namespace dseg::nn
