#pragma once

// Graph document reader/writer (JSON).

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "ducg/graph.hpp"

namespace ducg {

namespace detail {

// Shortest "%.Ng" (N >= 9) that parses back to exactly the same double.
inline std::string format_double(double v) {
  char buf[64];
  for (int p = 9; p <= 17; ++p) {
    std::snprintf(buf, sizeof buf, "%.*g", p, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  std::string s = buf;
  // keep the token a JSON number that still reads as floating point
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

inline std::size_t line_of_offset(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  std::size_t line = 1;
  for (std::size_t i = 0; i < offset; ++i)
    if (text[i] == '\n') ++line;
  return line;
}

class DocReader {
 public:
  using json = nlohmann::json;

  Graph read(const json& doc) {
    if (!doc.is_object()) fail("", "top level must be an object");
    reject_unknown(doc, "", {"variables", "links"});
    if (!doc.contains("variables")) fail("variables", "missing field");
    if (!doc.contains("links")) fail("links", "missing field");
    const auto& vars = doc.at("variables");
    const auto& links = doc.at("links");
    if (!vars.is_array()) fail("variables", "expected array");
    if (!links.is_array()) fail("links", "expected array");

    std::vector<Variable> variables;
    for (std::size_t i = 0; i < vars.size(); ++i)
      variables.push_back(read_variable(vars[i], "variables[" + std::to_string(i) + "]"));
    std::vector<CausalLink> out_links;
    for (std::size_t i = 0; i < links.size(); ++i)
      out_links.push_back(read_link(links[i], "links[" + std::to_string(i) + "]"));
    return Graph(std::move(variables), std::move(out_links));
  }

 private:
  [[noreturn]] static void fail(const std::string& field, const std::string& msg) {
    throw ParseError(msg, 0, field);
  }

  static void reject_unknown(const json& obj, const std::string& path, std::set<std::string> allowed) {
    for (const auto& [key, value] : obj.items())
      if (!allowed.contains(key)) fail(path.empty() ? key : path + "." + key, "unknown key");
  }

  static int read_int(const json& obj, const std::string& key, const std::string& path) {
    const auto& v = obj.at(key);
    if (!v.is_number_integer()) fail(path + "." + key, "expected integer");
    const auto x = v.get<long long>();
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
      fail(path + "." + key, "integer out of range");
    return static_cast<int>(x);
  }

  static double read_number(const json& v, const std::string& path) {
    if (!v.is_number()) fail(path, "expected number");
    return v.get<double>();
  }

  static Variable read_variable(const json& obj, const std::string& path) {
    if (!obj.is_object()) fail(path, "expected object");
    reject_unknown(obj, path, {"id", "kind", "states", "prior", "observed"});
    for (const char* key : {"id", "kind", "states"})
      if (!obj.contains(key)) fail(path + "." + key, "missing field");
    Variable v;
    v.id = read_int(obj, "id", path);
    const auto& kind = obj.at("kind");
    if (!kind.is_string()) fail(path + ".kind", "expected string");
    const auto k = kind.get<std::string>();
    if (k == "B") v.kind = VarKind::B;
    else if (k == "X") v.kind = VarKind::X;
    else if (k == "D") v.kind = VarKind::D;
    else fail(path + ".kind", "expected \"B\", \"X\" or \"D\", got \"" + k + "\"");
    v.states = read_int(obj, "states", path);
    if (obj.contains("prior")) {
      const auto& prior = obj.at("prior");
      if (!prior.is_array()) fail(path + ".prior", "expected array");
      for (std::size_t i = 0; i < prior.size(); ++i)
        v.prior.push_back(read_number(prior[i], path + ".prior[" + std::to_string(i) + "]"));
    }
    if (obj.contains("observed")) v.observed = read_int(obj, "observed", path);
    return v;
  }

  static CausalLink read_link(const json& obj, const std::string& path) {
    if (!obj.is_object()) fail(path, "expected object");
    reject_unknown(obj, path, {"child", "parent", "r", "matrix"});
    for (const char* key : {"child", "parent", "r", "matrix"})
      if (!obj.contains(key)) fail(path + "." + key, "missing field");
    CausalLink l;
    l.child = read_int(obj, "child", path);
    l.parent = read_int(obj, "parent", path);
    l.r = read_number(obj.at("r"), path + ".r");
    const auto& m = obj.at("matrix");
    if (!m.is_array() || m.empty()) fail(path + ".matrix", "expected non-empty array of rows");
    std::vector<std::vector<double>> rows;
    for (std::size_t r = 0; r < m.size(); ++r) {
      const std::string rp = path + ".matrix[" + std::to_string(r) + "]";
      if (!m[r].is_array()) fail(rp, "expected array");
      if (r > 0 && m[r].size() != rows[0].size()) fail(rp, "ragged matrix row");
      std::vector<double> row;
      for (std::size_t c = 0; c < m[r].size(); ++c)
        row.push_back(read_number(m[r][c], rp + "[" + std::to_string(c) + "]"));
      rows.push_back(std::move(row));
    }
    l.matrix = Matrix::from_rows(rows);
    return l;
  }
};

}  // namespace detail

// Parses without validating; structural problems are reported by ParseError.
inline Graph parse_graph(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    std::string msg = e.what();
    if (const auto pos = msg.find("syntax error"); pos != std::string::npos) msg = msg.substr(pos);
    throw ParseError(msg, detail::line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0), "");
  }
  return detail::DocReader().read(doc);
}

inline Graph load_graph(std::string_view text, const ValidationOptions& opts = {}) {
  Graph g = parse_graph(text);
  validate_or_throw(g, opts);
  return g;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Graph load_graph_file(const std::string& path, const ValidationOptions& opts = {}) {
  return load_graph(read_file(path), opts);
}

inline std::string serialize(const Graph& g) {
  std::string out = "{\n  \"variables\": [\n";
  for (std::size_t i = 0; i < g.variables().size(); ++i) {
    const auto& v = g.variables()[i];
    out += "    {\"id\": " + std::to_string(v.id) + ", \"kind\": \"" + to_string(v.kind) +
           "\", \"states\": " + std::to_string(v.states);
    if (v.kind == VarKind::B || !v.prior.empty()) {
      out += ", \"prior\": [";
      for (std::size_t s = 0; s < v.prior.size(); ++s) {
        if (s) out += ", ";
        out += detail::format_double(v.prior[s]);
      }
      out += "]";
    }
    if (v.observed) out += ", \"observed\": " + std::to_string(*v.observed);
    out += i + 1 < g.variables().size() ? "},\n" : "}\n";
  }
  out += "  ],\n  \"links\": [\n";
  for (std::size_t i = 0; i < g.links().size(); ++i) {
    const auto& l = g.links()[i];
    out += "    {\"child\": " + std::to_string(l.child) + ", \"parent\": " + std::to_string(l.parent) +
           ", \"r\": " + detail::format_double(l.r) + ", \"matrix\": [";
    for (int r = 0; r < l.matrix.rows(); ++r) {
      out += r ? ", [" : "[";
      for (int c = 0; c < l.matrix.cols(); ++c) {
        if (c) out += ", ";
        out += detail::format_double(l.matrix(r, c));
      }
      out += "]";
    }
    out += i + 1 < g.links().size() ? "]},\n" : "]}\n";
  }
  out += "  ]\n}\n";
  return out;
}

// Returns g with the given evidence written into the variables' `observed`
// fields (other observations are cleared).
inline Graph with_observations(const Graph& g, const Evidence& e) {
  auto vars = g.variables();
  for (auto& v : vars) {
    const auto it = e.find(v.id);
    v.observed = it == e.end() ? std::nullopt : std::optional<int>(it->second);
  }
  return Graph(std::move(vars), g.links());
}

}  // namespace ducg
