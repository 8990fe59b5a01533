#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "kbe/model_params.hpp"
#include "kbe/rng.hpp"
#include "kbe/scoring.hpp"
#include "kbe/triplet_store.hpp"

namespace kbe {

/// Optimizer settings not covered by Hyperparams. Each positive triple always
/// gets two negatives: one corrupted subject, one corrupted object.
struct TrainConfig {
  double adagrad_epsilon = 1e-8;
  bool shuffle = true;
  std::int32_t max_negative_draws = 100;
  std::int32_t checkpoint_every = 0;  // epochs, 0 disables
  std::string checkpoint_dir;

  void validate() const;
};

struct EpochStats {
  std::int32_t epoch = 0;            // 1-based
  double mean_loss = 0.0;            // mean hinge value over all hinge terms
  std::int64_t hinge_terms = 0;
  std::int64_t active_hinges = 0;    // terms with a nonzero hinge
  std::int64_t forced_negatives = 0; // draws accepted after max_negative_draws rejections
  double seconds = 0.0;

  double active_fraction() const {
    return hinge_terms == 0 ? 0.0 : static_cast<double>(active_hinges) / static_cast<double>(hinge_terms);
  }
};

struct LossTrace {
  std::vector<EpochStats> epochs;
};

/// One line per epoch: "epoch=<e> mean_loss=<l> active_fraction=<f> forced_negatives=<k> seconds=<s>".
std::string format_epoch(const EpochStats& e);

struct NegativePair {
  Triplet corrupted_subject;
  Triplet corrupted_object;
};

/// Replaces the subject, then the object, with uniformly drawn entities, redrawing
/// while the corrupted triple is a training triple. After `max_draws` draws the
/// last one is kept and `forced` is incremented.
NegativePair sample_negatives(const Triplet& t, const TripletStore& store, Rng& rng, std::int32_t max_draws = 100,
                              std::int64_t* forced = nullptr);

/// max(s_neg - s_pos + margin, 0)
inline double margin_loss(double s_pos, double s_neg, double margin = 1.0) {
  const double v = s_neg - s_pos + margin;
  return v > 0.0 ? v : 0.0;
}

/// Per coordinate: G += g^2; theta -= lr * g / sqrt(G + eps).
void adagrad_update(std::span<double> accum, std::span<double> param, std::span<const double> grad,
                    double learning_rate, double epsilon);

/// Sparse gradient of a mini-batch objective, keyed by entity row and relation id.
struct GradientBuffer {
  std::map<EntityId, Eigen::VectorXd> entity_rows;
  std::map<RelationId, RelationParams> relations;

  void clear() {
    entity_rows.clear();
    relations.clear();
  }
  void add_score_gradient(const ModelParams& params, const ScoreGradients& g, double weight);
};

struct BatchStats {
  double hinge_sum = 0.0;
  std::int64_t hinge_terms = 0;
  std::int64_t active_hinges = 0;
};

/// Adds the gradient of sum over pairs of the margin loss (without regularization).
/// Pairs whose hinge is inactive contribute nothing.
BatchStats accumulate_hinge_gradient(const ModelParams& params, std::span<const Triplet> positives,
                                     std::span<const NegativePair> negatives, GradientBuffer& grad);

/// Adds 2 * l2_reg * theta for every relation's parameters; returns l2_reg * sum ||theta||^2.
double accumulate_l2_gradient(const ModelParams& params, GradientBuffer& grad);

/// Hinge sum plus the L2 term: the quantity whose gradient the two functions above build.
double minibatch_objective(const ModelParams& params, std::span<const Triplet> positives,
                           std::span<const NegativePair> negatives);

/// Applies one AdaGrad step per touched coordinate. Returns the entity rows whose values changed.
std::vector<EntityId> apply_gradient(ModelParams& params, const GradientBuffer& grad, double epsilon);

using EpochCallback = std::function<void(const EpochStats&, const ModelParams&)>;

struct TrainResult {
  ModelParams params;
  LossTrace trace;
};

/// Mini-batch AdaGrad on the margin ranking loss. Each epoch shuffles the training
/// triples and splits them into hyper.minibatch_count batches of ceil(N / count).
/// Negatives, shuffling and zero-row repair draw from Rng(derive_seed(seed, 1)).
/// Entity rows that move are renormalized after every step unless f = tanh.
/// Throws NumericError naming the epoch and batch on a non-finite loss or parameter.
TrainResult train(const TripletStore& store, const TrainConfig& config, ModelParams init,
                  const EpochCallback& on_epoch = {});

}  // namespace kbe
