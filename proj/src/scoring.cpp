#include "kbe/scoring.hpp"

#include <string>

#include "kbe/errors.hpp"

namespace kbe {

namespace {

void check_entity(const ModelParams& params, EntityId e) {
  if (e < 0 || e >= params.entity_count()) throw ContractViolation("entity id out of range: " + std::to_string(e));
}

const RelationParams& relation_at(const ModelParams& params, RelationId r) {
  if (r < 0 || r >= params.relation_count()) throw ContractViolation("relation id out of range: " + std::to_string(r));
  return params.relations[static_cast<std::size_t>(r)];
}

template <typename T>
const T& expect(const RelationParams& rel, ModelKind kind) {
  if (const auto* p = std::get_if<T>(&rel)) return *p;
  throw ContractViolation(std::string("relation parameters do not match model kind ") +
                          std::string(model_kind_name(kind)));
}

void check_vectors(const VecRef& y1, const VecRef& y2, Eigen::Index n) {
  if (y1.size() != n || y2.size() != n) throw ContractViolation("entity vector has the wrong dimension");
}

/// Pre-activation of the tensor layer: y1^T T y2 + Q1 y1 + Q2 y2.
Eigen::VectorXd tensor_preactivation(const TensorPlusLinear& rel, const VecRef& y1, const VecRef& y2) {
  return bilinear_form_tensor(rel.t, y1, y2) + rel.q1 * y1 + rel.q2 * y2;
}

}  // namespace

Eigen::VectorXd project_entity(const ModelParams& params, EntityId e) {
  check_entity(params, e);
  Eigen::VectorXd y = params.entities.row(e).transpose();
  if (params.hyper.activation == Activation::Tanh) y = y.array().tanh().matrix();
  return y;
}

Eigen::VectorXd linear_form(const Eigen::MatrixXd& a1, const Eigen::MatrixXd& a2, const VecRef& y1, const VecRef& y2) {
  if (a1.rows() != a2.rows() || a1.cols() != y1.size() || a2.cols() != y2.size()) {
    throw ContractViolation("linear_form: shape mismatch");
  }
  return a1 * y1 + a2 * y2;
}

double bilinear_form(const Eigen::MatrixXd& b, const VecRef& y1, const VecRef& y2) {
  if (b.rows() != y1.size() || b.cols() != y2.size()) throw ContractViolation("bilinear_form: shape mismatch");
  return y1.dot(b * y2);
}

double bilinear_form_diagonal(const VecRef& d, const VecRef& y1, const VecRef& y2) {
  if (d.size() != y1.size() || d.size() != y2.size()) throw ContractViolation("bilinear_form: shape mismatch");
  return (y1.array() * d.array() * y2.array()).sum();
}

Eigen::VectorXd bilinear_form_tensor(const Eigen::MatrixXd& tensor, const VecRef& y1, const VecRef& y2) {
  const auto n = tensor.rows();
  if (n == 0 || tensor.cols() % n != 0 || y1.size() != n || y2.size() != n) {
    throw ContractViolation("bilinear_form: tensor shape mismatch");
  }
  const auto m = tensor.cols() / n;
  // Row k of (y1^T [T_1 ... T_m]) reshaped: component k = (y1^T T_k) y2.
  const Eigen::RowVectorXd left = y1.transpose() * tensor;
  Eigen::VectorXd out(m);
  for (Eigen::Index k = 0; k < m; ++k) out(k) = left.segment(k * n, n).dot(y2);
  return out;
}

double tensor_layer_score(const TensorPlusLinear& rel, const VecRef& y1, const VecRef& y2, Activation hidden) {
  check_vectors(y1, y2, rel.t.rows());
  Eigen::VectorXd z = tensor_preactivation(rel, y1, y2);
  if (hidden == Activation::Tanh) z = z.array().tanh().matrix();
  return rel.u.dot(z);
}

double score_projected(ModelKind kind, const RelationParams& rel, const VecRef& y1, const VecRef& y2) {
  switch (kind) {
    case ModelKind::Distance: {
      const auto& p = expect<LinearPair>(rel, kind);
      check_vectors(y1, y2, p.q1.cols());
      return -(p.q1 * y1 - p.q2 * y2).lpNorm<1>();
    }
    case ModelKind::SingleLayer: {
      const auto& p = expect<LinearPair>(rel, kind);
      check_vectors(y1, y2, p.q1.cols());
      return p.u.dot(linear_form(p.q1, p.q2, y1, y2).array().tanh().matrix());
    }
    case ModelKind::TransE: {
      const auto& p = expect<TranslationVector>(rel, kind);
      check_vectors(y1, y2, p.v.size());
      return -(y1 - y2 + p.v).squaredNorm();
    }
    case ModelKind::Bilinear: return bilinear_form(expect<FullBilinear>(rel, kind).m, y1, y2);
    case ModelKind::BilinearDiag: return bilinear_form_diagonal(expect<DiagonalBilinear>(rel, kind).d, y1, y2);
    case ModelKind::BilinearLinear:
      return tensor_layer_score(expect<TensorPlusLinear>(rel, kind), y1, y2, Activation::Identity);
    case ModelKind::NTN: return tensor_layer_score(expect<TensorPlusLinear>(rel, kind), y1, y2, Activation::Tanh);
  }
  throw ContractViolation("unhandled model kind");
}

double score(const ModelParams& params, const Triplet& t) {
  const auto& rel = relation_at(params, t.relation);
  return score_projected(params.kind, rel, project_entity(params, t.subject), project_entity(params, t.object));
}

ScoreGradients score_gradients(const ModelParams& params, const Triplet& t) {
  const auto& rel = relation_at(params, t.relation);
  const Eigen::VectorXd y1 = project_entity(params, t.subject);
  const Eigen::VectorXd y2 = project_entity(params, t.object);
  const auto kind = params.kind;

  ScoreGradients g;
  g.triplet = t;
  g.relation = make_relation_params(kind, params.hyper.entity_dim, params.hyper.relation_dim);
  Eigen::VectorXd dy1, dy2;

  switch (kind) {
    case ModelKind::Distance: {
      const auto& p = expect<LinearPair>(rel, kind);
      auto& d = std::get<LinearPair>(g.relation);
      const Eigen::VectorXd z = p.q1 * y1 - p.q2 * y2;
      const Eigen::VectorXd sg = z.unaryExpr([](double x) { return double((x > 0) - (x < 0)); });
      g.score = -z.lpNorm<1>();
      d.q1 = -sg * y1.transpose();
      d.q2 = sg * y2.transpose();
      dy1 = -p.q1.transpose() * sg;
      dy2 = p.q2.transpose() * sg;
      break;
    }
    case ModelKind::SingleLayer: {
      const auto& p = expect<LinearPair>(rel, kind);
      auto& d = std::get<LinearPair>(g.relation);
      const Eigen::VectorXd h = (p.q1 * y1 + p.q2 * y2).array().tanh().matrix();
      const Eigen::VectorXd delta = (p.u.array() * (1.0 - h.array().square())).matrix();
      g.score = p.u.dot(h);
      d.u = h;
      d.q1 = delta * y1.transpose();
      d.q2 = delta * y2.transpose();
      dy1 = p.q1.transpose() * delta;
      dy2 = p.q2.transpose() * delta;
      break;
    }
    case ModelKind::TransE: {
      const auto& p = expect<TranslationVector>(rel, kind);
      const Eigen::VectorXd e = y1 - y2 + p.v;
      g.score = -e.squaredNorm();
      std::get<TranslationVector>(g.relation).v = -2.0 * e;
      dy1 = -2.0 * e;
      dy2 = 2.0 * e;
      break;
    }
    case ModelKind::Bilinear: {
      const auto& p = expect<FullBilinear>(rel, kind);
      const Eigen::VectorXd my2 = p.m * y2;
      g.score = y1.dot(my2);
      std::get<FullBilinear>(g.relation).m = y1 * y2.transpose();
      dy1 = my2;
      dy2 = p.m.transpose() * y1;
      break;
    }
    case ModelKind::BilinearDiag: {
      const auto& p = expect<DiagonalBilinear>(rel, kind);
      g.score = bilinear_form_diagonal(p.d, y1, y2);
      std::get<DiagonalBilinear>(g.relation).d = y1.cwiseProduct(y2);
      dy1 = p.d.cwiseProduct(y2);
      dy2 = p.d.cwiseProduct(y1);
      break;
    }
    case ModelKind::BilinearLinear:
    case ModelKind::NTN: {
      const auto& p = expect<TensorPlusLinear>(rel, kind);
      auto& d = std::get<TensorPlusLinear>(g.relation);
      const auto n = p.t.rows();
      const Eigen::VectorXd z = tensor_preactivation(p, y1, y2);
      Eigen::VectorXd h = z, delta = p.u;
      if (kind == ModelKind::NTN) {
        h = z.array().tanh().matrix();
        delta = (p.u.array() * (1.0 - h.array().square())).matrix();
      }
      g.score = p.u.dot(h);
      d.u = h;
      d.q1 = delta * y1.transpose();
      d.q2 = delta * y2.transpose();
      const Eigen::MatrixXd outer = y1 * y2.transpose();
      dy1 = p.q1.transpose() * delta;
      dy2 = p.q2.transpose() * delta;
      for (Eigen::Index k = 0; k < p.slices(); ++k) {
        d.t.middleCols(k * n, n) = delta(k) * outer;
        dy1 += delta(k) * (p.slice(k) * y2);
        dy2 += delta(k) * (p.slice(k).transpose() * y1);
      }
      break;
    }
  }

  if (params.hyper.activation == Activation::Tanh) {
    // dy/dw = 1 - tanh(w)^2 = 1 - y^2
    dy1 = (dy1.array() * (1.0 - y1.array().square())).matrix();
    dy2 = (dy2.array() * (1.0 - y2.array().square())).matrix();
  }
  g.subject_row = std::move(dy1);
  g.object_row = std::move(dy2);
  return g;
}

CandidateScorer::CandidateScorer(const ModelParams& params) : params_(params), projected_(params.entities) {
  if (params.hyper.activation == Activation::Tanh) projected_ = projected_.array().tanh().matrix();
}

Eigen::VectorXd CandidateScorer::score_all(EntityId fixed, RelationId r, Side side) const {
  check_entity(params_, fixed);
  const auto& rel = relation_at(params_, r);
  const auto kind = params_.kind;
  const auto& Y = projected_;
  const Eigen::VectorXd y = Y.row(fixed).transpose();
  const bool object_side = side == Side::Object;

  switch (kind) {
    case ModelKind::Distance: {
      const auto& p = expect<LinearPair>(rel, kind);
      // object side: z_i = Q1 y - Q2 y_i ; subject side: z_i = Q1 y_i - Q2 y
      const Eigen::MatrixXd Z = Y * (object_side ? p.q2 : p.q1).transpose();
      const Eigen::VectorXd c = object_side ? Eigen::VectorXd(p.q1 * y) : Eigen::VectorXd(p.q2 * y);
      return -(Z.rowwise() - c.transpose()).cwiseAbs().rowwise().sum();
    }
    case ModelKind::SingleLayer: {
      const auto& p = expect<LinearPair>(rel, kind);
      Eigen::MatrixXd Z = Y * (object_side ? p.q2 : p.q1).transpose();
      const Eigen::VectorXd c = object_side ? Eigen::VectorXd(p.q1 * y) : Eigen::VectorXd(p.q2 * y);
      Z.rowwise() += c.transpose();
      return Z.array().tanh().matrix() * p.u;
    }
    case ModelKind::TransE: {
      const auto& p = expect<TranslationVector>(rel, kind);
      // object side: -||(y + V) - y_i||^2 ; subject side: -||y_i - (y - V)||^2
      const Eigen::VectorXd anchor = object_side ? Eigen::VectorXd(y + p.v) : Eigen::VectorXd(y - p.v);
      return -(Y.rowwise() - anchor.transpose()).rowwise().squaredNorm();
    }
    case ModelKind::Bilinear: {
      const auto& p = expect<FullBilinear>(rel, kind);
      const Eigen::VectorXd w = object_side ? Eigen::VectorXd(p.m.transpose() * y) : Eigen::VectorXd(p.m * y);
      return Y * w;
    }
    case ModelKind::BilinearDiag: {
      const auto& p = expect<DiagonalBilinear>(rel, kind);
      return Y * y.cwiseProduct(p.d);
    }
    case ModelKind::BilinearLinear:
    case ModelKind::NTN: {
      const auto& p = expect<TensorPlusLinear>(rel, kind);
      const auto n = p.t.rows();
      const auto m = p.slices();
      // Column k of B is the linear functional applied to the candidate vector.
      Eigen::MatrixXd B(n, m);
      for (Eigen::Index k = 0; k < m; ++k) {
        if (object_side) {
          B.col(k) = p.slice(k).transpose() * y + p.q2.row(k).transpose();
        } else {
          B.col(k) = p.slice(k) * y + p.q1.row(k).transpose();
        }
      }
      const Eigen::VectorXd c = object_side ? Eigen::VectorXd(p.q1 * y) : Eigen::VectorXd(p.q2 * y);
      Eigen::MatrixXd Z = Y * B;
      Z.rowwise() += c.transpose();
      if (kind == ModelKind::NTN) Z = Z.array().tanh().matrix();
      return Z * p.u;
    }
  }
  throw ContractViolation("unhandled model kind");
}

Eigen::VectorXd score_all_candidates(const ModelParams& params, EntityId fixed, RelationId r, Side side) {
  return CandidateScorer(params).score_all(fixed, r, side);
}

}  // namespace kbe
