#pragma once

// Frame/batch trace records and their JSON Lines serialization.
//
// Line 1 of a trace is the header {"format":"gamorra-trace","version":1};
// every following line is one frame. Shader sources live next to the trace
// as a directory of <shader-id>.il files.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gamorra/error.hpp"

namespace gamorra {

struct BatchRecord {
  std::uint64_t ia_bytes = 0;
  std::uint64_t vertex_count = 0;
  std::uint64_t attr_count = 0;
  std::optional<std::string> vs_shader;
  std::optional<std::string> hs_shader;
  std::optional<std::string> pcf_shader;
  std::optional<std::string> ds_shader;
  std::optional<std::string> gs_shader;
  std::optional<std::string> ps_shader;
  std::optional<std::string> cs_shader;
  std::uint64_t patch_count = 0;
  std::vector<std::uint64_t> tess_points_per_patch;
  std::uint64_t ds_vertex_count = 0;
  std::uint64_t gs_vertex_count = 0;
  std::uint64_t fragment_count = 0;
  std::uint64_t rt_width = 0;
  std::uint64_t rt_height = 0;
  std::uint64_t cs_input_count = 0;

  bool operator==(const BatchRecord&) const = default;
};

struct FrameRecord {
  std::uint64_t frame_index = 0;
  std::vector<BatchRecord> batches;

  bool operator==(const FrameRecord&) const = default;
};

// Shader id -> IL source text.
using ShaderStore = std::map<std::string, std::string>;

struct FrameSequence {
  std::vector<FrameRecord> frames;
  ShaderStore shader_store;

  bool operator==(const FrameSequence&) const = default;
};

inline constexpr std::string_view kTraceFormat = "gamorra-trace";
inline constexpr int kTraceVersion = 1;

namespace detail {

inline bool valid_shader_id(const std::string& id) {
  if (id.empty() || id == "." || id == "..") return false;
  for (char c : id) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
              c == '_' || c == '-' || c == '.';
    if (!ok) return false;
  }
  return true;
}

template <typename Fn>
void for_each_shader_ref(const BatchRecord& b, Fn&& fn) {
  fn("vs_shader", b.vs_shader);
  fn("hs_shader", b.hs_shader);
  fn("pcf_shader", b.pcf_shader);
  fn("ds_shader", b.ds_shader);
  fn("gs_shader", b.gs_shader);
  fn("ps_shader", b.ps_shader);
  fn("cs_shader", b.cs_shader);
}

}  // namespace detail

// Throws InvariantError naming the first violated batch invariant.
inline void validate_batch(const BatchRecord& b) {
  if (b.tess_points_per_patch.size() != b.patch_count) {
    throw InvariantError("tess list length mismatch: patch_count=" + std::to_string(b.patch_count) +
                         " but " + std::to_string(b.tess_points_per_patch.size()) + " entries");
  }
  if (b.fragment_count > 0 && (b.rt_width < 1 || b.rt_height < 1)) {
    throw InvariantError("fragments present but render target is empty");
  }
  if (b.hs_shader && (!b.pcf_shader || !b.ds_shader)) {
    throw InvariantError("hs_shader requires pcf_shader and ds_shader");
  }
  detail::for_each_shader_ref(b, [](std::string_view field, const std::optional<std::string>& id) {
    if (id && !detail::valid_shader_id(*id)) {
      throw InvariantError(std::string(field) + " is present but empty or not a valid id");
    }
  });
}

inline void validate_sequence(const FrameSequence& seq) {
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    const FrameRecord& f = seq.frames[i];
    if (i > 0 && f.frame_index <= seq.frames[i - 1].frame_index) {
      throw InvariantError("frame_index not strictly increasing at frame " +
                           std::to_string(f.frame_index));
    }
    for (const BatchRecord& b : f.batches) {
      validate_batch(b);
      detail::for_each_shader_ref(b, [&](std::string_view field, const std::optional<std::string>& id) {
        if (id && !seq.shader_store.contains(*id)) {
          throw MissingDataError("unresolved shader id '" + *id + "' (" + std::string(field) +
                                 ", frame " + std::to_string(f.frame_index) + ")");
        }
      });
    }
  }
}

namespace detail {

using ordered_json = nlohmann::ordered_json;

inline std::uint64_t read_count(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) return 0;
  if (!it->is_number_unsigned()) {
    throw InvariantError(std::string(key) + " must be a non-negative integer");
  }
  return it->get<std::uint64_t>();
}

inline std::optional<std::string> read_shader(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) return std::nullopt;
  if (!it->is_string()) throw InvariantError(std::string(key) + " must be a string");
  return it->get<std::string>();
}

inline BatchRecord batch_from_json(const nlohmann::json& j) {
  static const std::vector<std::string> known = {
      "ia_bytes",   "vertex_count", "attr_count",      "vs_shader",       "hs_shader",
      "pcf_shader", "ds_shader",    "gs_shader",       "ps_shader",       "cs_shader",
      "patch_count", "tess_points_per_patch", "ds_vertex_count", "gs_vertex_count",
      "fragment_count", "rt_width", "rt_height",       "cs_input_count"};
  if (!j.is_object()) throw InvariantError("batch must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw InvariantError("unknown batch field '" + key + "'");
    }
  }
  BatchRecord b;
  b.ia_bytes = read_count(j, "ia_bytes");
  b.vertex_count = read_count(j, "vertex_count");
  b.attr_count = read_count(j, "attr_count");
  b.vs_shader = read_shader(j, "vs_shader");
  b.hs_shader = read_shader(j, "hs_shader");
  b.pcf_shader = read_shader(j, "pcf_shader");
  b.ds_shader = read_shader(j, "ds_shader");
  b.gs_shader = read_shader(j, "gs_shader");
  b.ps_shader = read_shader(j, "ps_shader");
  b.cs_shader = read_shader(j, "cs_shader");
  b.patch_count = read_count(j, "patch_count");
  if (auto it = j.find("tess_points_per_patch"); it != j.end()) {
    if (!it->is_array()) throw InvariantError("tess_points_per_patch must be an array");
    b.tess_points_per_patch.reserve(it->size());
    for (const auto& v : *it) {
      if (!v.is_number_unsigned()) {
        throw InvariantError("tess_points_per_patch entries must be non-negative integers");
      }
      b.tess_points_per_patch.push_back(v.get<std::uint64_t>());
    }
  }
  b.ds_vertex_count = read_count(j, "ds_vertex_count");
  b.gs_vertex_count = read_count(j, "gs_vertex_count");
  b.fragment_count = read_count(j, "fragment_count");
  b.rt_width = read_count(j, "rt_width");
  b.rt_height = read_count(j, "rt_height");
  b.cs_input_count = read_count(j, "cs_input_count");
  return b;
}

inline ordered_json batch_to_json(const BatchRecord& b) {
  ordered_json j;
  j["ia_bytes"] = b.ia_bytes;
  j["vertex_count"] = b.vertex_count;
  j["attr_count"] = b.attr_count;
  for_each_shader_ref(b, [&](std::string_view field, const std::optional<std::string>& id) {
    if (id) j[std::string(field)] = *id;
  });
  j["patch_count"] = b.patch_count;
  j["tess_points_per_patch"] = b.tess_points_per_patch;
  j["ds_vertex_count"] = b.ds_vertex_count;
  j["gs_vertex_count"] = b.gs_vertex_count;
  j["fragment_count"] = b.fragment_count;
  j["rt_width"] = b.rt_width;
  j["rt_height"] = b.rt_height;
  j["cs_input_count"] = b.cs_input_count;
  return j;
}

}  // namespace detail

// Parses a JSON Lines trace. Shader references are resolved against `store`,
// which becomes the sequence's shader_store. An empty stream is an empty
// sequence; otherwise line 1 must be the header.
inline FrameSequence parse_trace(std::istream& in, ShaderStore store = {}) {
  FrameSequence seq;
  seq.shader_store = std::move(store);
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!header_seen) {
      if (!j.is_object() || j.value("format", "") != kTraceFormat || !j.contains("version")) {
        throw ParseError(line_no, "missing gamorra-trace header");
      }
      if (j["version"] != kTraceVersion) {
        throw ParseError(line_no, "unsupported trace version " + j["version"].dump());
      }
      header_seen = true;
      continue;
    }
    try {
      if (!j.is_object()) throw InvariantError("frame must be an object");
      for (const auto& [key, _] : j.items()) {
        if (key != "frame_index" && key != "batches") {
          throw InvariantError("unknown frame field '" + key + "'");
        }
      }
      FrameRecord f;
      if (!j.contains("frame_index") || !j["frame_index"].is_number_unsigned()) {
        throw InvariantError("frame_index must be a non-negative integer");
      }
      f.frame_index = j["frame_index"].get<std::uint64_t>();
      if (auto it = j.find("batches"); it != j.end()) {
        if (!it->is_array()) throw InvariantError("batches must be an array");
        for (const auto& bj : *it) {
          f.batches.push_back(detail::batch_from_json(bj));
          validate_batch(f.batches.back());
        }
      }
      if (!seq.frames.empty() && f.frame_index <= seq.frames.back().frame_index) {
        throw InvariantError("frame_index not strictly increasing");
      }
      seq.frames.push_back(std::move(f));
    } catch (const InvariantError& e) {
      throw ParseError(line_no, e.what());
    }
  }
  validate_sequence(seq);
  return seq;
}

// Writes the header plus one line per frame; returns the byte count.
inline std::size_t write_trace(const FrameSequence& seq, std::ostream& out) {
  std::size_t bytes = 0;
  auto emit = [&](const std::string& s) {
    out << s << '\n';
    bytes += s.size() + 1;
  };
  detail::ordered_json header;
  header["format"] = kTraceFormat;
  header["version"] = kTraceVersion;
  emit(header.dump());
  for (const FrameRecord& f : seq.frames) {
    detail::ordered_json j;
    j["frame_index"] = f.frame_index;
    j["batches"] = detail::ordered_json::array();
    for (const BatchRecord& b : f.batches) j["batches"].push_back(detail::batch_to_json(b));
    emit(j.dump());
  }
  if (!out) throw Error("trace sink write failed");
  return bytes;
}

inline ShaderStore load_shader_store(const std::filesystem::path& dir) {
  ShaderStore store;
  if (!std::filesystem::is_directory(dir)) {
    throw MissingDataError("shader directory not found: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".il") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& p : files) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    store.emplace(p.stem().string(), ss.str());
  }
  return store;
}

inline void save_shader_store(const ShaderStore& store, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [id, text] : store) {
    std::ofstream out(dir / (id + ".il"), std::ios::binary);
    out << text;
    if (!out) throw Error("cannot write shader " + (dir / (id + ".il")).string());
  }
}

inline FrameSequence load_trace(const std::filesystem::path& trace_path,
                                const std::filesystem::path& shader_dir) {
  std::ifstream in(trace_path);
  if (!in) throw MissingDataError("cannot open trace: " + trace_path.string());
  return parse_trace(in, load_shader_store(shader_dir));
}

}  // namespace gamorra
