#include "kbe/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>

#include "kbe/checkpoint.hpp"
#include "kbe/errors.hpp"

namespace kbe {

void TrainConfig::validate() const {
  if (!(adagrad_epsilon > 0.0)) throw ConfigError("adagrad_epsilon must be > 0");
  if (max_negative_draws < 1) throw ConfigError("max_negative_draws must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  if (checkpoint_every > 0 && checkpoint_dir.empty()) throw ConfigError("checkpoint_every needs a checkpoint directory");
}

std::string format_epoch(const EpochStats& e) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "epoch=%d mean_loss=%.9g active_fraction=%.6f forced_negatives=%lld seconds=%.3f",
                e.epoch, e.mean_loss, e.active_fraction(), static_cast<long long>(e.forced_negatives), e.seconds);
  return buf;
}

NegativePair sample_negatives(const Triplet& t, const TripletStore& store, Rng& rng, std::int32_t max_draws,
                              std::int64_t* forced) {
  const auto n = static_cast<std::uint64_t>(store.entity_count());
  if (n < 2) throw ContractViolation("negative sampling needs at least two entities");

  const auto corrupt = [&](Side side) {
    Triplet c = t;
    for (std::int32_t draw = 0;; ++draw) {
      c = with_entity(t, side, static_cast<EntityId>(rng.below(n)));
      if (!store.in_train(c) && c != t) return c;
      if (draw + 1 >= max_draws) {
        if (forced) ++*forced;
        if (c == t) {
          const auto current = static_cast<std::uint64_t>(side == Side::Subject ? t.subject : t.object);
          c = with_entity(t, side, static_cast<EntityId>((current + 1) % n));
        }
        return c;
      }
    }
  };
  NegativePair out;
  out.corrupted_subject = corrupt(Side::Subject);
  out.corrupted_object = corrupt(Side::Object);
  return out;
}

void adagrad_update(std::span<double> accum, std::span<double> param, std::span<const double> grad,
                    double learning_rate, double epsilon) {
  if (accum.size() != param.size() || grad.size() != param.size()) {
    throw ContractViolation("adagrad_update: shape mismatch");
  }
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    if (g == 0.0) continue;
    accum[i] += g * g;
    param[i] -= learning_rate * g / std::sqrt(accum[i] + epsilon);
  }
}

namespace {

void axpy(std::span<double> y, std::span<const double> x, double a) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

void add_relation(const ModelParams& params, GradientBuffer& grad, RelationId r, const RelationParams& g,
                  double weight) {
  auto [it, inserted] = grad.relations.try_emplace(r);
  if (inserted) it->second = make_relation_params(params.kind, params.hyper.entity_dim, params.hyper.relation_dim);
  auto dst = blocks(it->second);
  const auto src = blocks(g);
  for (std::size_t b = 0; b < dst.size(); ++b) axpy(dst[b], src[b], weight);
}

void add_row(GradientBuffer& grad, EntityId e, const Eigen::VectorXd& g, double weight) {
  auto [it, inserted] = grad.entity_rows.try_emplace(e);
  if (inserted) it->second = Eigen::VectorXd::Zero(g.size());
  it->second += weight * g;
}

bool all_finite(std::span<const double> xs) {
  for (double x : xs) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

void GradientBuffer::add_score_gradient(const ModelParams& params, const ScoreGradients& g, double weight) {
  add_row(*this, g.triplet.subject, g.subject_row, weight);
  add_row(*this, g.triplet.object, g.object_row, weight);
  add_relation(params, *this, g.triplet.relation, g.relation, weight);
}

BatchStats accumulate_hinge_gradient(const ModelParams& params, std::span<const Triplet> positives,
                                     std::span<const NegativePair> negatives, GradientBuffer& grad) {
  if (positives.size() != negatives.size()) throw ContractViolation("one negative pair per positive required");
  BatchStats stats;
  for (std::size_t i = 0; i < positives.size(); ++i) {
    const auto pos = score_gradients(params, positives[i]);
    for (const auto& neg_triplet : {negatives[i].corrupted_subject, negatives[i].corrupted_object}) {
      ++stats.hinge_terms;
      const double s_neg = score(params, neg_triplet);
      const double loss = margin_loss(pos.score, s_neg, params.hyper.margin);
      stats.hinge_sum += loss;
      if (loss <= 0.0) continue;
      ++stats.active_hinges;
      // d/dtheta (s_neg - s_pos + margin)
      grad.add_score_gradient(params, pos, -1.0);
      grad.add_score_gradient(params, score_gradients(params, neg_triplet), 1.0);
    }
  }
  return stats;
}

double accumulate_l2_gradient(const ModelParams& params, GradientBuffer& grad) {
  const double lambda = params.hyper.l2_reg;
  if (lambda == 0.0) return 0.0;
  double penalty = 0.0;
  for (std::size_t r = 0; r < params.relations.size(); ++r) {
    add_relation(params, grad, static_cast<RelationId>(r), params.relations[r], 2.0 * lambda);
    for (auto b : blocks(params.relations[r])) {
      for (double x : b) penalty += x * x;
    }
  }
  return lambda * penalty;
}

double minibatch_objective(const ModelParams& params, std::span<const Triplet> positives,
                           std::span<const NegativePair> negatives) {
  double total = 0.0;
  for (std::size_t i = 0; i < positives.size(); ++i) {
    const double s_pos = score(params, positives[i]);
    total += margin_loss(s_pos, score(params, negatives[i].corrupted_subject), params.hyper.margin);
    total += margin_loss(s_pos, score(params, negatives[i].corrupted_object), params.hyper.margin);
  }
  double penalty = 0.0;
  for (const auto& rel : params.relations) {
    for (auto b : blocks(rel)) {
      for (double x : b) penalty += x * x;
    }
  }
  return total + params.hyper.l2_reg * penalty;
}

std::vector<EntityId> apply_gradient(ModelParams& params, const GradientBuffer& grad, double epsilon) {
  const double lr = params.hyper.learning_rate;
  const auto n = static_cast<std::size_t>(params.dim());
  std::vector<EntityId> changed;
  Eigen::VectorXd before;
  for (const auto& [e, g] : grad.entity_rows) {
    std::span<double> row(params.entities.row(e).data(), n);
    std::span<double> acc(params.entity_accum.row(e).data(), n);
    before = params.entities.row(e).transpose();
    adagrad_update(acc, row, std::span<const double>(g.data(), n), lr, epsilon);
    if (before != params.entities.row(e).transpose()) changed.push_back(e);
  }
  for (const auto& [r, g] : grad.relations) {
    auto dst = blocks(params.relations[static_cast<std::size_t>(r)]);
    auto acc = blocks(params.relation_accum[static_cast<std::size_t>(r)]);
    const auto src = blocks(g);
    for (std::size_t b = 0; b < dst.size(); ++b) adagrad_update(acc[b], dst[b], src[b], lr, epsilon);
  }
  return changed;
}

TrainResult train(const TripletStore& store, const TrainConfig& config, ModelParams init,
                  const EpochCallback& on_epoch) {
  config.validate();
  init.hyper.validate();
  check_consistency(init);
  if (store.train().empty()) throw DataError("training split is empty");
  if (init.entity_count() != store.entity_count() || init.relation_count() != store.relation_count()) {
    throw ContractViolation("model parameters do not match the dataset vocabulary");
  }

  TrainResult result{std::move(init), {}};
  ModelParams& params = result.params;
  const auto& hyper = params.hyper;
  Rng rng(derive_seed(hyper.seed, 1));

  if (params.normalizes_entities()) {
    for (Eigen::Index i = 0; i < params.entities.rows(); ++i) {
      if (std::abs(params.entities.row(i).norm() - 1.0) > 1e-9) {
        EmbeddingTable row = params.entities.row(i);
        renormalize_rows(row, rng);
        params.entities.row(i) = row;
      }
    }
  }

  const auto& train_triples = store.train();
  std::vector<std::size_t> order(train_triples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch_size =
      (train_triples.size() + static_cast<std::size_t>(hyper.minibatch_count) - 1) / static_cast<std::size_t>(hyper.minibatch_count);

  std::vector<Triplet> positives;
  std::vector<NegativePair> negatives;
  GradientBuffer grad;

  for (std::int32_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    if (config.shuffle) rng.shuffle(std::span<std::size_t>(order));

    EpochStats stats;
    stats.epoch = epoch;
    double hinge_total = 0.0;
    std::int32_t batch_index = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), begin + batch_size);
      positives.clear();
      negatives.clear();
      for (std::size_t i = begin; i < end; ++i) {
        const auto& t = train_triples[order[i]];
        positives.push_back(t);
        negatives.push_back(sample_negatives(t, store, rng, config.max_negative_draws, &stats.forced_negatives));
      }

      grad.clear();
      const auto batch = accumulate_hinge_gradient(params, positives, negatives, grad);
      accumulate_l2_gradient(params, grad);
      if (!std::isfinite(batch.hinge_sum)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index + 1));
      }
      hinge_total += batch.hinge_sum;
      stats.hinge_terms += batch.hinge_terms;
      stats.active_hinges += batch.active_hinges;

      const auto moved = apply_gradient(params, grad, config.adagrad_epsilon);

      const auto fail = [&](const std::string& what) {
        throw NumericError("non-finite " + what + " after epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index + 1));
      };
      for (auto e : moved) {
        if (!params.entities.row(e).allFinite()) fail("entity row " + store.vocab().entities.name(e));
      }
      for (const auto& [r, _] : grad.relations) {
        for (auto b : blocks(params.relations[static_cast<std::size_t>(r)])) {
          if (!all_finite(b)) fail("parameters of relation " + store.vocab().relations.name(r));
        }
      }

      if (params.normalizes_entities()) {
        for (auto e : moved) {
          EmbeddingTable row = params.entities.row(e);
          renormalize_rows(row, rng);
          params.entities.row(e) = row;
        }
      }
    }

    stats.mean_loss = stats.hinge_terms == 0 ? 0.0 : hinge_total / static_cast<double>(stats.hinge_terms);
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.trace.epochs.push_back(stats);

    if (config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0) {
      std::filesystem::create_directories(config.checkpoint_dir);
      char name[64];
      std::snprintf(name, sizeof name, "epoch-%04d.ckpt", epoch);
      save_checkpoint(params, store.vocab().hash(),
                      (std::filesystem::path(config.checkpoint_dir) / name).string());
    }
    if (on_epoch) on_epoch(stats, params);
  }
  return result;
}

}  // namespace kbe
