#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "kbe/relation_categories.hpp"
#include "kbe/scoring.hpp"
#include "kbe/triplet_store.hpp"
#include "kbe/type_index.hpp"

namespace kbe {

struct EvalSetting {
  bool filtered = true;           // drop known-positive competitors (train, valid and test)
  bool type_constrained = false;  // restrict candidates to the relation's observed side-set
  bool compute_map = false;
  std::vector<std::int32_t> hits_k{10};
  std::int32_t workers = 0;       // 0 = hardware concurrency

  void validate() const;
};

/// For each (fixed entity, relation, predicted side), the entities that complete
/// a known triple in any split.
class KnownPositiveIndex {
 public:
  explicit KnownPositiveIndex(const TripletStore& store);

  /// Sorted counterparts on `side` given the other argument `fixed`.
  std::span<const EntityId> counterparts(EntityId fixed, RelationId r, Side side) const;

 private:
  static std::uint64_t key(EntityId fixed, RelationId r, Side side) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(fixed)) << 32) |
           (static_cast<std::uint64_t>(static_cast<std::uint32_t>(r)) << 1) | (side == Side::Object ? 1u : 0u);
  }

  std::unordered_map<std::uint64_t, std::vector<EntityId>> map_;
};

/// The data a ranking needs besides the model. `types` may be null unless the
/// setting is type-constrained.
struct RankingContext {
  const TripletStore& store;
  const KnownPositiveIndex& known;
  const TypeConstraintIndex* types = nullptr;
};

/// Rank of the true entity on `side` of `t` among precomputed candidate scores:
/// 1 + (candidates scoring strictly higher) + (equal-scoring candidates with a
/// lower id), after filtering and type restriction. The true entity is always kept.
std::int64_t rank_in_scores(const Eigen::VectorXd& scores, const Triplet& t, Side side, const EvalSetting& setting,
                            const RankingContext& ctx);

std::int64_t rank_entity(const CandidateScorer& model, const Triplet& t, Side side, const EvalSetting& setting,
                         const RankingContext& ctx);

struct QueryResult {
  Triplet triplet;
  Side side = Side::Object;  // the side being predicted
  std::int64_t rank = 0;
};

struct CategoryCell {
  std::int64_t queries = 0;
  std::int64_t hits = 0;

  /// Empty when the cell has no queries.
  std::optional<double> percent() const {
    if (queries == 0) return std::nullopt;
    return 100.0 * static_cast<double>(hits) / static_cast<double>(queries);
  }
};

/// HITS@k per relation category (rows) and predicted side (column 0 subject, 1 object).
struct CategoryTable {
  std::int32_t k = 10;
  std::array<std::array<CategoryCell, 2>, 4> cells{};

  const CategoryCell& at(RelationCategory c, Side side) const {
    return cells[static_cast<std::size_t>(c)][side == Side::Subject ? 0 : 1];
  }
};

CategoryTable category_breakdown(std::span<const QueryResult> queries, const RelationCategoryTable& categories,
                                 std::int32_t k);

struct MapResult {
  double map_percent = 0.0;
  std::int64_t queries = 0;
  std::int64_t skipped_empty = 0;  // queries with no type-compatible candidate
};

/// Average precision of one ranked list: `relevant_flags[i]` marks position i (best first).
double average_precision(const std::vector<bool>& relevant_flags, std::int64_t relevant_total);

/// Type-checked MAP. Queries are the distinct (fixed entity, relation, side) groups
/// of the test triples; the relevant set is every entity completing a known triple
/// in any split; candidates are the relation's side-set ranked by descending score
/// (ties by id). Returned as a percentage.
MapResult mean_average_precision(const CandidateScorer& model, const TripletStore& store,
                                 const TypeConstraintIndex& types, const KnownPositiveIndex& known,
                                 std::int32_t workers = 0);

struct EvalReport {
  EvalSetting setting;
  std::int64_t query_count = 0;
  double mrr = 0.0;
  std::vector<std::pair<std::int32_t, double>> hits_at_k;  // (k, percent)
  std::optional<MapResult> map;
  std::vector<CategoryTable> by_category;  // one per k when categories were supplied
  std::vector<QueryResult> queries;        // subject-side then object-side query per test triple

  double hits(std::int32_t k) const;
};

/// Ranks both sides of every test triple.
EvalReport evaluate(const CandidateScorer& model, const TripletStore& store, const EvalSetting& setting,
                    const RelationCategoryTable* categories = nullptr, const TypeConstraintIndex* types = nullptr);

/// Human-readable table, preceded by a header describing the protocol.
std::string format_report_text(const EvalReport& report);

/// One JSON object per line: one per metric and one per category cell.
std::string format_report_records(const EvalReport& report);

}  // namespace kbe
