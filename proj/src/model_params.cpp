#include "kbe/model_params.hpp"

#include <cmath>
#include <string>

#include "kbe/errors.hpp"

namespace kbe {

void Hyperparams::validate() const {
  if (entity_dim < 1) throw ConfigError("entity_dim must be >= 1");
  if (relation_dim < 1) throw ConfigError("relation_dim must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be >= 0");
  if (!(l2_reg >= 0.0) || !std::isfinite(l2_reg)) throw ConfigError("l2_reg must be >= 0");
  if (!std::isfinite(margin)) throw ConfigError("margin must be finite");
  if (minibatch_count < 1) throw ConfigError("minibatch_count must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
}

RelationParams make_relation_params(ModelKind kind, std::int32_t n, std::int32_t m) {
  switch (kind) {
    case ModelKind::TransE: return TranslationVector{Eigen::VectorXd::Zero(n)};
    case ModelKind::BilinearDiag: return DiagonalBilinear{Eigen::VectorXd::Zero(n)};
    case ModelKind::Bilinear: return FullBilinear{Eigen::MatrixXd::Zero(n, n)};
    case ModelKind::Distance:
      return LinearPair{Eigen::MatrixXd::Zero(m, n), Eigen::MatrixXd::Zero(m, n), Eigen::VectorXd()};
    case ModelKind::SingleLayer:
      return LinearPair{Eigen::MatrixXd::Zero(m, n), Eigen::MatrixXd::Zero(m, n), Eigen::VectorXd::Zero(m)};
    case ModelKind::BilinearLinear:
    case ModelKind::NTN:
      return TensorPlusLinear{Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(n) * m), Eigen::MatrixXd::Zero(m, n),
                              Eigen::MatrixXd::Zero(m, n), Eigen::VectorXd::Zero(m)};
  }
  throw ContractViolation("unhandled model kind");
}

namespace {

template <typename Span, typename P>
std::vector<Span> blocks_impl(P& p) {
  const auto view = [](auto& x) { return Span(x.data(), static_cast<std::size_t>(x.size())); };
  return std::visit(
      [&](auto& r) -> std::vector<Span> {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, TranslationVector>) {
          return {view(r.v)};
        } else if constexpr (std::is_same_v<T, DiagonalBilinear>) {
          return {view(r.d)};
        } else if constexpr (std::is_same_v<T, FullBilinear>) {
          return {view(r.m)};
        } else if constexpr (std::is_same_v<T, LinearPair>) {
          return {view(r.q1), view(r.q2), view(r.u)};
        } else {
          return {view(r.t), view(r.q1), view(r.q2), view(r.u)};
        }
      },
      p);
}

}  // namespace

std::vector<std::span<double>> blocks(RelationParams& p) { return blocks_impl<std::span<double>>(p); }

std::vector<std::span<const double>> blocks(const RelationParams& p) {
  return blocks_impl<std::span<const double>>(p);
}

std::vector<std::string_view> block_names(const RelationParams& p) {
  switch (p.index()) {
    case 0: return {"V"};
    case 1: return {"diag"};
    case 2: return {"M"};
    case 3: return {"Q1", "Q2", "u"};
    default: return {"T", "Q1", "Q2", "u"};
  }
}

std::size_t parameter_count(const RelationParams& p) {
  std::size_t total = 0;
  for (const auto& b : blocks(p)) total += b.size();
  return total;
}

std::size_t ModelParams::parameter_count() const {
  auto total = static_cast<std::size_t>(entities.size());
  for (const auto& r : relations) total += kbe::parameter_count(r);
  return total;
}

double init_scale(std::int32_t entity_dim) { return 6.0 / std::sqrt(static_cast<double>(entity_dim)); }

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed ^ (stream * 0x9E3779B97F4A7C15ULL);
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

ModelParams init_random(ModelKind kind, const Hyperparams& hyper, std::int32_t entity_count,
                        std::int32_t relation_count) {
  hyper.validate();
  if (entity_count < 1 || relation_count < 1) throw ContractViolation("entity and relation counts must be >= 1");

  ModelParams p;
  p.kind = kind;
  p.hyper = hyper;
  const auto n = hyper.entity_dim;
  const auto m = hyper.relation_dim;
  const double scale = init_scale(n);

  Rng rng(hyper.seed);
  p.entities.resize(entity_count, n);
  for (Eigen::Index i = 0; i < p.entities.size(); ++i) p.entities.data()[i] = rng.uniform(-scale, scale);

  p.relations.reserve(static_cast<std::size_t>(relation_count));
  p.relation_accum.reserve(static_cast<std::size_t>(relation_count));
  for (std::int32_t r = 0; r < relation_count; ++r) {
    auto rel = make_relation_params(kind, n, m);
    for (auto block : blocks(rel)) {
      for (auto& x : block) x = rng.uniform(-scale, scale);
    }
    p.relation_accum.push_back(make_relation_params(kind, n, m));
    p.relations.push_back(std::move(rel));
  }

  renormalize_rows(p.entities, rng);
  p.entity_accum = EmbeddingTable::Zero(entity_count, n);
  return p;
}

void renormalize_rows(EmbeddingTable& table, Rng& rng) {
  for (Eigen::Index i = 0; i < table.rows(); ++i) {
    auto row = table.row(i);
    double norm = row.norm();
    while (norm == 0.0 || !std::isfinite(norm)) {
      for (Eigen::Index j = 0; j < row.size(); ++j) row(j) = rng.uniform(-1.0, 1.0);
      norm = row.norm();
    }
    row /= norm;
  }
}

void renormalize_entities(ModelParams& params, Rng& rng) { renormalize_rows(params.entities, rng); }

void check_consistency(const ModelParams& params) {
  const auto n = params.hyper.entity_dim;
  const auto m = params.hyper.relation_dim;
  if (params.entities.cols() != n) throw ContractViolation("entity table width does not match entity_dim");
  if (params.relation_accum.size() != params.relations.size() || params.entity_accum.rows() != params.entities.rows() ||
      params.entity_accum.cols() != params.entities.cols()) {
    throw ContractViolation("accumulator shape does not match parameters");
  }
  const auto expected = make_relation_params(params.kind, n, m);
  const auto expected_sizes = blocks(expected);
  for (std::size_t r = 0; r < params.relations.size(); ++r) {
    for (const auto* rel : {&params.relations[r], &params.relation_accum[r]}) {
      if (rel->index() != expected.index()) {
        throw ContractViolation("relation " + std::to_string(r) + " has the wrong parameter variant for " +
                                std::string(model_kind_name(params.kind)));
      }
      const auto got = blocks(*rel);
      for (std::size_t b = 0; b < got.size(); ++b) {
        if (got[b].size() != expected_sizes[b].size()) {
          throw ContractViolation("relation " + std::to_string(r) + " block " + std::string(block_names(*rel)[b]) +
                                  " has the wrong shape");
        }
      }
    }
  }
}

}  // namespace kbe
