#include "kbe/pretrained.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <memory>

#include "kbe/errors.hpp"

namespace kbe {

namespace {

std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const auto start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

bool parse_int(std::string_view s, long long& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace

PretrainedVectors load_pretrained_vectors(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");

  PretrainedVectors out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto fields = split_spaces(line);
    if (fields.empty()) continue;

    long long count = 0, dim = 0;
    if (lineno == 1 && fields.size() == 2 && parse_int(fields[0], count) && parse_int(fields[1], dim)) {
      if (dim < 1) throw ParseError(path, lineno, "header dimension must be positive");
      out.dim = static_cast<std::int32_t>(dim);
      continue;
    }

    const auto d = static_cast<std::int32_t>(fields.size() - 1);
    if (d < 1) throw ParseError(path, lineno, "token without values");
    if (out.dim == 0) out.dim = d;
    if (d != out.dim) {
      throw ParseError(path, lineno, "expected " + std::to_string(out.dim) + " values, got " + std::to_string(d));
    }
    Eigen::VectorXd v(d);
    for (std::int32_t i = 0; i < d; ++i) {
      if (!parse_double(fields[static_cast<std::size_t>(i) + 1], v(i))) {
        throw ParseError(path, lineno, "bad number '" + std::string(fields[static_cast<std::size_t>(i) + 1]) + "'");
      }
    }
    out.vectors.insert_or_assign(std::string(fields[0]), std::move(v));
  }
  return out;
}

TokenMap load_token_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  auto map = std::make_shared<std::unordered_map<std::string, std::string>>();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(path, lineno, "expected entity<TAB>token");
    (*map)[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return [map](const std::string& name) -> std::optional<std::string> {
    if (auto it = map->find(name); it != map->end()) return it->second;
    return std::nullopt;
  };
}

namespace {

void require_dim(const ModelParams& params, const PretrainedVectors& vectors) {
  if (vectors.dim != params.dim()) {
    throw ConfigError("pretrained vector dimension " + std::to_string(vectors.dim) + " does not match entity_dim " +
                      std::to_string(params.dim()) + "; train with --dim " + std::to_string(vectors.dim));
  }
}

std::optional<std::string> token_for(const TokenMap& tokens, const std::string& name) {
  if (tokens) return tokens(name);
  return name;
}

}  // namespace

std::int32_t init_from_pretrained_entity_vectors(ModelParams& params, const NameIndex& entities,
                                                 const PretrainedVectors& vectors, const TokenMap& tokens) {
  require_dim(params, vectors);
  if (entities.size() != params.entity_count()) throw ContractViolation("vocabulary does not match entity table");

  std::int32_t initialized = 0;
  for (std::int32_t e = 0; e < entities.size(); ++e) {
    const auto token = token_for(tokens, entities.name(e));
    if (!token) continue;
    const auto* v = vectors.find(*token);
    if (v == nullptr) continue;
    Eigen::VectorXd row = *v;
    if (params.normalizes_entities()) {
      const double norm = row.norm();
      if (norm == 0.0) continue;
      row /= norm;
    }
    params.entities.row(e) = row.transpose();
    ++initialized;
  }
  return initialized;
}

std::vector<std::string> entity_words(std::string_view name) {
  std::vector<std::string> words;
  std::string current;
  for (char c : name) {
    if (c == '_' || std::isspace(static_cast<unsigned char>(c))) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

std::int32_t init_word_averaged(ModelParams& params, const NameIndex& entities, const PretrainedVectors& words,
                                const TokenMap& names) {
  require_dim(params, words);
  if (entities.size() != params.entity_count()) throw ContractViolation("vocabulary does not match entity table");

  // Out-of-file words draw from their own stream, in order of first use.
  Rng rng(derive_seed(params.hyper.seed, 3));
  const double scale = init_scale(params.dim());
  std::unordered_map<std::string, Eigen::VectorXd> unknown;

  std::int32_t initialized = 0;
  for (std::int32_t e = 0; e < entities.size(); ++e) {
    const auto text = token_for(names, entities.name(e));
    if (!text) continue;
    const auto ws = entity_words(*text);
    if (ws.empty()) continue;

    Eigen::VectorXd sum = Eigen::VectorXd::Zero(params.dim());
    for (const auto& w : ws) {
      if (const auto* v = words.find(w)) {
        sum += *v;
        continue;
      }
      auto [it, inserted] = unknown.try_emplace(w);
      if (inserted) {
        it->second.resize(params.dim());
        for (Eigen::Index i = 0; i < it->second.size(); ++i) it->second(i) = rng.uniform(-scale, scale);
      }
      sum += it->second;
    }
    params.entities.row(e) = (sum / static_cast<double>(ws.size())).transpose();
    ++initialized;
  }
  return initialized;
}

}  // namespace kbe
