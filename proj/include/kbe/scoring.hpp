#pragma once

#include <Eigen/Dense>

#include "kbe/model_params.hpp"
#include "kbe/triplet_store.hpp"

namespace kbe {

using VecRef = Eigen::Ref<const Eigen::VectorXd>;

/// y = f(W x_e): the activation applied to entity e's row.
Eigen::VectorXd project_entity(const ModelParams& params, EntityId e);

/// A1 y1 + A2 y2, i.e. A^T (y1; y2) with A split into its two blocks.
Eigen::VectorXd linear_form(const Eigen::MatrixXd& a1, const Eigen::MatrixXd& a2, const VecRef& y1, const VecRef& y2);

/// y1^T B y2.
double bilinear_form(const Eigen::MatrixXd& b, const VecRef& y1, const VecRef& y2);
/// y1^T diag(d) y2.
double bilinear_form_diagonal(const VecRef& d, const VecRef& y1, const VecRef& y2);
/// Component k is y1^T T[:,:,k] y2; `tensor` holds m slices side by side (n x n*m).
Eigen::VectorXd bilinear_form_tensor(const Eigen::MatrixXd& tensor, const VecRef& y1, const VecRef& y2);

/// u^T h(y1^T T y2 + Q1 y1 + Q2 y2). NTN uses h = tanh, Bilinear+Linear the identity.
double tensor_layer_score(const TensorPlusLinear& rel, const VecRef& y1, const VecRef& y2, Activation hidden);

/// Score of a relation applied to already-projected entity vectors. Higher is
/// more plausible for every kind (TransE returns the negated squared distance).
double score_projected(ModelKind kind, const RelationParams& rel, const VecRef& y1, const VecRef& y2);

double score(const ModelParams& params, const Triplet& t);

/// Gradient of score(t) with respect to the two entity rows (through f) and the
/// relation's parameters. When subject == object the two row gradients both apply
/// to the same row.
struct ScoreGradients {
  Triplet triplet;
  double score = 0.0;
  Eigen::VectorXd subject_row;
  Eigen::VectorXd object_row;
  RelationParams relation;
};

ScoreGradients score_gradients(const ModelParams& params, const Triplet& t);

/// Scores every entity substituted on one side of a (fixed entity, relation) pair,
/// using batched products over a cached projection of the entity table.
///
/// Holds a reference to `params`; rebuild after the parameters change.
class CandidateScorer {
 public:
  explicit CandidateScorer(const ModelParams& params);
  explicit CandidateScorer(ModelParams&&) = delete;

  /// side == Object: fixed is the subject and candidate i is the object.
  Eigen::VectorXd score_all(EntityId fixed, RelationId r, Side side) const;

  const EmbeddingTable& projected() const noexcept { return projected_; }
  const ModelParams& params() const noexcept { return params_; }

 private:
  const ModelParams& params_;
  EmbeddingTable projected_;
};

Eigen::VectorXd score_all_candidates(const ModelParams& params, EntityId fixed, RelationId r, Side side);

}  // namespace kbe
