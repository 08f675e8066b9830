#pragma once

// Static opcode histograms of IL shader assembly, and the per-stage
// complexity C = sum_j op_j * x_j built from them.

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gamorra/error.hpp"
#include "gamorra/stage.hpp"

namespace gamorra {

struct ShaderProgram {
  std::string id;
  std::map<std::string, std::uint64_t> histogram;  // opcode -> static occurrences
  std::uint64_t total_ops = 0;

  bool operator==(const ShaderProgram&) const = default;

  // Sums another program's histogram into this one.
  void merge(const ShaderProgram& other) {
    for (const auto& [op, n] : other.histogram) histogram[op] += n;
    total_ops += other.total_ops;
  }
};

// Per-stage cost of one execution of each opcode, in milliseconds.
struct OpcodeCostTable {
  Stage stage = Stage::kVS;
  std::map<std::string, double> cost;

  bool operator==(const OpcodeCostTable&) const = default;

  bool empty() const noexcept { return cost.empty(); }
};

namespace detail {

inline bool is_ident_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

// Shader-model header lines such as "vs_5_0" or "ps_4_1".
inline bool is_profile_line(std::string_view tok) {
  if (tok.size() != 6 || tok[2] != '_' || tok[4] != '_') return false;
  std::string_view kind = tok.substr(0, 2);
  bool known = kind == "vs" || kind == "hs" || kind == "ds" || kind == "gs" || kind == "ps" ||
               kind == "cs";
  return known && tok[3] >= '0' && tok[3] <= '9' && tok[5] >= '0' && tok[5] <= '9';
}

}  // namespace detail

// Extracts the opcode of one instruction line, or "" for blank/comment
// lines. Trailing "(...)" qualifiers and a "_sat" modifier are dropped, so
// "sample_l(texture2d)(float,float,float,float)" counts as "sample_l".
// Throws ParseError on a malformed opcode token.
inline std::string extract_opcode(std::string_view line, std::size_t line_no) {
  if (auto semi = line.find(';'); semi != std::string_view::npos) line = line.substr(0, semi);
  std::size_t begin = line.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return {};
  line = line.substr(begin);
  std::size_t end = 0;
  while (end < line.size() && line[end] != ' ' && line[end] != '\t' && line[end] != '\r') ++end;
  std::string_view tok = line.substr(0, end);
  if (auto paren = tok.find('('); paren != std::string_view::npos) {
    if (tok.back() != ')') throw ParseError(line_no, "unbalanced qualifier in '" + std::string(tok) + "'");
    tok = tok.substr(0, paren);
  }
  if (tok.empty() || (tok[0] >= '0' && tok[0] <= '9')) {
    throw ParseError(line_no, "malformed opcode token '" + std::string(line.substr(0, end)) + "'");
  }
  for (char c : tok) {
    if (!detail::is_ident_char(c)) {
      throw ParseError(line_no, "malformed opcode token '" + std::string(line.substr(0, end)) + "'");
    }
  }
  std::string op(tok);
  for (char& c : op) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  if (op.size() > 4 && op.ends_with("_sat")) op.resize(op.size() - 4);
  return op;
}

// Counts every executable opcode once per textual occurrence. Declaration
// lines (dcl_*), shader-model headers and comments contribute nothing. When
// `vocabulary` is given, opcodes outside it are reported in `warnings` but
// still counted; costing them later is the error.
inline ShaderProgram parse_program(std::string_view text, std::string id = {},
                                   const std::set<std::string>* vocabulary = nullptr,
                                   std::vector<std::string>* warnings = nullptr) {
  ShaderProgram prog;
  prog.id = std::move(id);
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    ++line_no;
    pos = nl + 1;
    std::string op = extract_opcode(line, line_no);
    if (op.empty() || op.starts_with("dcl_") || detail::is_profile_line(op)) continue;
    if (vocabulary && !vocabulary->contains(op) && warnings) {
      warnings->push_back("line " + std::to_string(line_no) + ": unknown opcode '" + op + "'");
    }
    ++prog.histogram[op];
    ++prog.total_ops;
  }
  return prog;
}

// C = sum_j op_j * x_j. Throws MissingDataError naming the opcode and stage
// when the table has no cost for an opcode in the histogram.
inline double complexity(const ShaderProgram& program, const OpcodeCostTable& costs) {
  double c = 0.0;
  for (const auto& [op, count] : program.histogram) {
    auto it = costs.cost.find(op);
    if (it == costs.cost.end()) {
      throw MissingDataError("no cost for opcode '" + op + "' in stage " +
                             std::string(stage_name(costs.stage)) +
                             (program.id.empty() ? "" : " (shader " + program.id + ")"));
    }
    c += it->second * static_cast<double>(count);
  }
  return c;
}

}  // namespace gamorra
