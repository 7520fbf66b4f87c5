#include "lerp/checkpoint.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "lerp/errors.hpp"

namespace lerp {

namespace {

std::vector<const Parameter*> all_parameters(const Model& model) {
  auto& mutable_model = const_cast<Model&>(model);
  std::vector<const Parameter*> out;
  for (Parameter* p : mutable_model.parameters()) out.push_back(p);
  return out;
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  std::string text;
  text.reserve(1 << 20);
  char buf[64];
  text += "lerp-checkpoint " + std::to_string(kCheckpointVersion) + "\n";
  text += "config " + config_to_json(model.config) + "\n";
  std::snprintf(buf, sizeof buf, "%016" PRIx64, model.graph_fingerprint);
  text += std::string("fingerprint ") + buf + "\n";
  text += "relations " + std::to_string(model.relation_names.size()) + "\n";
  for (const auto& name : model.relation_names) text += name + "\n";
  const auto params = all_parameters(model);
  text += "params " + std::to_string(params.size()) + "\n";
  for (const Parameter* p : params) {
    text += "param " + p->name + " " + std::to_string(p->value.rows()) + " " + std::to_string(p->value.cols()) + "\n";
    bool first = true;
    for (double x : p->value.values()) {
      std::snprintf(buf, sizeof buf, "%.17g", x);
      if (!first) text += ' ';
      text += buf;
      first = false;
    }
    text += "\n";
  }
  text += "end\n";
  write_file_atomic(path, text);
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  const std::string source = path.string();
  std::size_t line_no = 0;
  std::string line;
  auto next = [&]() -> std::string& {
    if (!std::getline(in, line)) throw ParseError(source, line_no + 1, "unexpected end of checkpoint");
    ++line_no;
    return line;
  };
  auto expect_prefix = [&](const std::string& prefix) {
    next();
    if (line.rfind(prefix, 0) != 0) throw ParseError(source, line_no, "expected '" + prefix + "'");
    return line.substr(prefix.size());
  };
  auto to_count = [&](const std::string& s) {
    try {
      std::size_t pos = 0;
      const auto v = std::stoull(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      throw ParseError(source, line_no, "bad count '" + s + "'");
    }
  };

  if (expect_prefix("lerp-checkpoint ") != std::to_string(kCheckpointVersion))
    throw ParseError(source, line_no, "unsupported checkpoint version");
  Model model;
  try {
    model.config = parse_config(expect_prefix("config "));
  } catch (const ConfigError& e) {
    throw ParseError(source, line_no, e.what());
  }
  const std::string hex = expect_prefix("fingerprint ");
  try {
    model.graph_fingerprint = std::stoull(hex, nullptr, 16);
  } catch (const std::exception&) {
    throw ParseError(source, line_no, "bad fingerprint");
  }
  const std::size_t num_rel = to_count(expect_prefix("relations "));
  if (num_rel % 2 != 1) throw ParseError(source, line_no, "relation count must be odd (raw, reverse, identity)");
  for (std::size_t i = 0; i < num_rel; ++i) model.relation_names.push_back(next());

  const auto& c = model.config;
  model.lerp = LerpParams(c.T, c.m, num_rel);
  const std::size_t targets = num_rel - 1;
  for (RelationId r = 0; r < targets; ++r)
    model.rules.banks.emplace_back(r, c.rules_per_relation, c.K, num_rel, c.m + 1, c.constrain_head);

  std::map<std::string, Parameter*> by_name;
  for (Parameter* p : model.parameters()) by_name[p->name] = p;
  const std::size_t count = to_count(expect_prefix("params "));
  if (count != by_name.size())
    throw ParseError(source, line_no, "expected " + std::to_string(by_name.size()) + " parameters, found " +
                                          std::to_string(count));
  for (std::size_t i = 0; i < count; ++i) {
    std::istringstream head(expect_prefix("param "));
    std::string name;
    std::size_t rows = 0, cols = 0;
    if (!(head >> name >> rows >> cols)) throw ParseError(source, line_no, "malformed param line");
    auto it = by_name.find(name);
    if (it == by_name.end()) throw ParseError(source, line_no, "unknown parameter " + name);
    Parameter& p = *it->second;
    if (p.value.rows() != rows || p.value.cols() != cols)
      throw ParseError(source, line_no, "shape mismatch for " + name);
    const std::string& values = next();
    const char* s = values.c_str();
    for (auto& x : p.value.values()) {
      char* end = nullptr;
      x = std::strtod(s, &end);
      if (end == s) throw ParseError(source, line_no, "too few values for " + name);
      s = end;
    }
    while (*s == ' ') ++s;
    if (*s != '\0') throw ParseError(source, line_no, "too many values for " + name);
    by_name.erase(it);
  }
  if (expect_prefix("end") != "") throw ParseError(source, line_no, "trailing data after end");
  return model;
}

}  // namespace lerp
