#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "kbe/model_kind.hpp"
#include "kbe/rng.hpp"

namespace kbe {

struct Hyperparams {
  std::int32_t entity_dim = 100;   // n
  std::int32_t relation_dim = 1;   // m, for kinds that have one
  double margin = 1.0;
  double learning_rate = 0.1;
  double l2_reg = 1e-4;
  std::int32_t minibatch_count = 10;
  std::int32_t epochs = 100;
  Activation activation = Activation::Identity;
  std::uint64_t seed = 1;

  /// Throws ConfigError when a field is out of range.
  void validate() const;

  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

/// Row-major so each entity's vector is contiguous.
using EmbeddingTable = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Relation parameter variants. Block order within each variant is the order of
// blocks() below; it fixes the initialization draw order, the checkpoint layout
// and the flattened export layout. Matrices are column-major.

/// TransE: V_r.
struct TranslationVector {
  Eigen::VectorXd v;
};

/// Bilinear-diag / DistMult: the diagonal of M_r.
struct DiagonalBilinear {
  Eigen::VectorXd d;
};

/// Bilinear: M_r (n x n).
struct FullBilinear {
  Eigen::MatrixXd m;
};

/// Single Layer and Distance: Q_r1, Q_r2 (m x n) and u_r (m). Distance leaves u empty.
struct LinearPair {
  Eigen::MatrixXd q1;
  Eigen::MatrixXd q2;
  Eigen::VectorXd u;
};

/// NTN and Bilinear+Linear. The tensor is stored as m contiguous n x n slices:
/// `t` is n x (n*m) and slice k is t.middleCols(k * n, n).
struct TensorPlusLinear {
  Eigen::MatrixXd t;
  Eigen::MatrixXd q1;
  Eigen::MatrixXd q2;
  Eigen::VectorXd u;

  Eigen::Index slices() const { return u.size(); }
  auto slice(Eigen::Index k) const { return t.middleCols(k * t.rows(), t.rows()); }
  auto slice(Eigen::Index k) { return t.middleCols(k * t.rows(), t.rows()); }
};

using RelationParams = std::variant<TranslationVector, DiagonalBilinear, FullBilinear, LinearPair, TensorPlusLinear>;

/// Zero-filled relation parameters of the shape `kind` needs.
RelationParams make_relation_params(ModelKind kind, std::int32_t entity_dim, std::int32_t relation_dim);

/// Flat views of every block, in layout order.
std::vector<std::span<double>> blocks(RelationParams& p);
std::vector<std::span<const double>> blocks(const RelationParams& p);
std::vector<std::string_view> block_names(const RelationParams& p);
std::size_t parameter_count(const RelationParams& p);

/// All learnable parameters plus their AdaGrad accumulators.
struct ModelParams {
  ModelKind kind = ModelKind::BilinearDiag;
  Hyperparams hyper;
  EmbeddingTable entities;
  std::vector<RelationParams> relations;

  EmbeddingTable entity_accum;
  std::vector<RelationParams> relation_accum;

  std::int32_t entity_count() const { return static_cast<std::int32_t>(entities.rows()); }
  std::int32_t relation_count() const { return static_cast<std::int32_t>(relations.size()); }
  std::int32_t dim() const { return static_cast<std::int32_t>(entities.cols()); }

  /// Learnable parameters only (accumulators excluded).
  std::size_t parameter_count() const;

  /// Whether entity rows are kept at unit L2 norm (identity projection only).
  bool normalizes_entities() const { return hyper.activation == Activation::Identity; }
};

/// Half-width of the uniform initialization interval: 6 / sqrt(n).
double init_scale(std::int32_t entity_dim);

/// Deterministic initialization from hyper.seed. Draw order: entity table
/// row-major, then relations in id order with blocks in layout order, then any
/// replacement draws for zero rows during the final normalization.
ModelParams init_random(ModelKind kind, const Hyperparams& hyper, std::int32_t entity_count,
                        std::int32_t relation_count);

/// Divides every entity row by its L2 norm; zero rows become a random unit vector.
void renormalize_entities(ModelParams& params, Rng& rng);
void renormalize_rows(EmbeddingTable& table, Rng& rng);

/// Throws ContractViolation unless the relation variants and shapes match kind/hyper.
void check_consistency(const ModelParams& params);

/// Derives an independent seed for a named stream (splitmix64 of seed ^ stream).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace kbe
