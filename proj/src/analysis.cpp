#include "kbe/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "kbe/errors.hpp"

namespace kbe {

RelationDistanceKind distance_kind(ModelKind kind) {
  return kind == ModelKind::TransE || kind == ModelKind::BilinearDiag ? RelationDistanceKind::Euclidean
                                                                      : RelationDistanceKind::Frobenius;
}

double relation_distance(const ModelParams& params, RelationId r1, RelationId r2) {
  const auto count = params.relation_count();
  if (r1 < 0 || r1 >= count || r2 < 0 || r2 >= count) throw ContractViolation("relation id out of range");
  const auto& a = params.relations[static_cast<std::size_t>(r1)];
  const auto& b = params.relations[static_cast<std::size_t>(r2)];
  if (a.index() != b.index()) throw ContractViolation("relations have different parameter variants");

  const auto ba = blocks(a);
  const auto bb = blocks(b);
  double sum = 0.0;
  for (std::size_t i = 0; i < ba.size(); ++i) {
    if (ba[i].size() != bb[i].size()) throw ContractViolation("relation parameter shapes differ");
    for (std::size_t j = 0; j < ba[i].size(); ++j) {
      const double d = ba[i][j] - bb[i][j];
      sum += d * d;
    }
  }
  return std::sqrt(sum);
}

std::vector<Neighbor> nearest_relations(const ModelParams& params, const NameIndex& relations, RelationId r,
                                        std::int32_t k) {
  const auto count = params.relation_count();
  if (k < 0 || k >= count) throw ContractViolation("k must be in [0, |R|)");
  if (relations.size() != count) throw ContractViolation("relation vocabulary does not match parameters");

  std::vector<Neighbor> all;
  for (RelationId other = 0; other < count; ++other) {
    if (other == r) continue;
    all.push_back({other, relations.name(other), relation_distance(params, r, other)});
  }
  const auto closer = [](const Neighbor& a, const Neighbor& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.relation < b.relation);
  };
  std::partial_sort(all.begin(), all.begin() + k, all.end(), closer);
  all.resize(static_cast<std::size_t>(k));
  return all;
}

namespace {

void write_number(std::ostream& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  out.write(buf, ptr - buf);
}

void write_row(std::ostream& out, const std::string& name, std::span<const std::span<const double>> parts) {
  out << name;
  for (auto part : parts) {
    for (double v : part) {
      out << '\t';
      write_number(out, v);
    }
  }
  out << '\n';
}

}  // namespace

void export_embeddings(const ModelParams& params, const Vocabulary& vocab, const std::string& path, ExportWhat what) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");

  std::size_t width = 0;
  if (what == ExportWhat::Entities) {
    if (vocab.entities.size() != params.entity_count()) throw ContractViolation("entity vocabulary mismatch");
    width = static_cast<std::size_t>(params.dim());
  } else {
    if (vocab.relations.size() != params.relation_count()) throw ContractViolation("relation vocabulary mismatch");
    if (!params.relations.empty()) width = parameter_count(params.relations.front());
  }
  out << "name";
  for (std::size_t i = 0; i < width; ++i) out << "\tv" << i;
  out << '\n';

  if (what == ExportWhat::Entities) {
    for (std::int32_t e = 0; e < params.entity_count(); ++e) {
      const std::span<const double> row(params.entities.row(e).data(), width);
      write_row(out, vocab.entities.name(e), std::span(&row, 1));
    }
  } else {
    for (std::int32_t r = 0; r < params.relation_count(); ++r) {
      const auto parts = blocks(params.relations[static_cast<std::size_t>(r)]);
      write_row(out, vocab.relations.name(r), parts);
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<EmbeddingRow> load_embeddings_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<EmbeddingRow> rows;
  std::string line;
  std::size_t lineno = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (;;) {
      const auto tab = line.find('\t', start);
      fields.push_back(std::string_view(line).substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (lineno == 1) {
      if (fields.front() != "name") throw ParseError(path, lineno, "missing header");
      width = fields.size() - 1;
      continue;
    }
    if (fields.size() - 1 != width) throw ParseError(path, lineno, "row width does not match header");
    EmbeddingRow row{std::string(fields.front()), std::vector<double>(width)};
    for (std::size_t i = 0; i < width; ++i) {
      const auto f = fields[i + 1];
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), row.values[i]);
      if (ec != std::errc{} || ptr != f.data() + f.size()) throw ParseError(path, lineno, "bad number");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

std::vector<std::string> close_matches(const NameIndex& names, const std::string& query, std::size_t limit) {
  std::vector<std::pair<std::size_t, std::string>> scored;
  const std::size_t cutoff = std::max<std::size_t>(3, query.size() / 2);
  for (const auto& n : names.names()) {
    const bool contains = !query.empty() && n.find(query) != std::string::npos;
    const auto d = contains ? 0 : edit_distance(query, n);
    if (d <= cutoff) scored.emplace_back(d, n);
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(limit, scored.size()); ++i) out.push_back(scored[i].second);
  return out;
}

}  // namespace kbe
