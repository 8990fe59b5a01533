#include "kbe/evaluator.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "kbe/errors.hpp"

namespace kbe {

namespace {

std::int32_t resolve_workers(std::int32_t requested) {
  if (requested > 0) return requested;
  return static_cast<std::int32_t>(std::max(1u, std::thread::hardware_concurrency()));
}

/// Runs body(i) for i in [0, n) over contiguous chunks; each i is handled exactly once.
template <typename Body>
void parallel_for(std::size_t n, std::int32_t workers, Body&& body) {
  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(resolve_workers(workers)), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w * chunk; i < std::min(n, (w + 1) * chunk); ++i) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

EntityId entity_on(const Triplet& t, Side side) { return side == Side::Subject ? t.subject : t.object; }
EntityId fixed_for(const Triplet& t, Side side) { return side == Side::Subject ? t.object : t.subject; }

}  // namespace

void EvalSetting::validate() const {
  for (auto k : hits_k) {
    if (k < 1) throw ConfigError("hits@k requires k >= 1");
  }
}

KnownPositiveIndex::KnownPositiveIndex(const TripletStore& store) {
  for (auto s : {Split::Train, Split::Valid, Split::Test}) {
    for (const auto& t : store.split(s)) {
      map_[key(t.subject, t.relation, Side::Object)].push_back(t.object);
      map_[key(t.object, t.relation, Side::Subject)].push_back(t.subject);
    }
  }
  for (auto& [_, v] : map_) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
}

std::span<const EntityId> KnownPositiveIndex::counterparts(EntityId fixed, RelationId r, Side side) const {
  if (auto it = map_.find(key(fixed, r, side)); it != map_.end()) return it->second;
  return {};
}

std::int64_t rank_in_scores(const Eigen::VectorXd& scores, const Triplet& t, Side side, const EvalSetting& setting,
                            const RankingContext& ctx) {
  const EntityId truth = entity_on(t, side);
  if (truth < 0 || truth >= scores.size()) throw ContractViolation("true entity outside the score vector");
  const double s_true = scores(truth);
  const auto outranks = [&](EntityId e) {
    const double s = scores(e);
    return s > s_true || (s == s_true && e < truth);
  };

  std::int64_t ahead = 0;
  if (setting.type_constrained) {
    if (ctx.types == nullptr) throw ContractViolation("type-constrained ranking needs a type index");
    for (EntityId e : ctx.types->allowed(t.relation, side)) {
      if (e != truth && outranks(e)) ++ahead;
    }
  } else {
    for (EntityId e = 0; e < static_cast<EntityId>(scores.size()); ++e) {
      if (e != truth && outranks(e)) ++ahead;
    }
  }

  if (setting.filtered) {
    for (EntityId c : ctx.known.counterparts(fixed_for(t, side), t.relation, side)) {
      if (c == truth || !outranks(c)) continue;
      if (setting.type_constrained && !ctx.types->allows(t.relation, side, c)) continue;
      --ahead;
    }
  }
  return 1 + ahead;
}

std::int64_t rank_entity(const CandidateScorer& model, const Triplet& t, Side side, const EvalSetting& setting,
                         const RankingContext& ctx) {
  const auto scores = model.score_all(fixed_for(t, side), t.relation, side);
  return rank_in_scores(scores, t, side, setting, ctx);
}

CategoryTable category_breakdown(std::span<const QueryResult> queries, const RelationCategoryTable& categories,
                                 std::int32_t k) {
  CategoryTable table;
  table.k = k;
  for (const auto& q : queries) {
    auto& cell = table.cells[static_cast<std::size_t>(categories.category(q.triplet.relation))]
                            [q.side == Side::Subject ? 0 : 1];
    ++cell.queries;
    if (q.rank <= k) ++cell.hits;
  }
  return table;
}

double average_precision(const std::vector<bool>& relevant_flags, std::int64_t relevant_total) {
  if (relevant_total <= 0) return 0.0;
  double sum = 0.0;
  std::int64_t found = 0;
  for (std::size_t i = 0; i < relevant_flags.size(); ++i) {
    if (!relevant_flags[i]) continue;
    ++found;
    sum += static_cast<double>(found) / static_cast<double>(i + 1);
  }
  return sum / static_cast<double>(relevant_total);
}

MapResult mean_average_precision(const CandidateScorer& model, const TripletStore& store,
                                 const TypeConstraintIndex& types, const KnownPositiveIndex& known,
                                 std::int32_t workers) {
  struct Query {
    EntityId fixed;
    RelationId relation;
    Side side;
  };
  std::vector<Query> queries;
  {
    std::unordered_map<std::uint64_t, bool> seen;
    for (const auto& t : store.test()) {
      for (Side side : {Side::Subject, Side::Object}) {
        const auto fixed = fixed_for(t, side);
        const auto k = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(fixed)) << 32) |
                       (static_cast<std::uint64_t>(static_cast<std::uint32_t>(t.relation)) << 1) |
                       (side == Side::Object ? 1u : 0u);
        if (seen.emplace(k, true).second) queries.push_back({fixed, t.relation, side});
      }
    }
  }

  std::vector<double> ap(queries.size(), 0.0);
  std::vector<char> skipped(queries.size(), 0);
  parallel_for(queries.size(), workers, [&](std::size_t qi) {
    const auto& q = queries[qi];
    const auto candidates = types.allowed(q.relation, q.side);
    if (candidates.empty()) {
      skipped[qi] = 1;
      return;
    }
    const auto scores = model.score_all(q.fixed, q.relation, q.side);
    std::vector<EntityId> order(candidates.begin(), candidates.end());
    std::sort(order.begin(), order.end(), [&](EntityId a, EntityId b) {
      return scores(a) > scores(b) || (scores(a) == scores(b) && a < b);
    });
    const auto relevant = known.counterparts(q.fixed, q.relation, q.side);
    std::vector<bool> flags_vec(order.size());
    std::int64_t relevant_in_candidates = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
      flags_vec[i] = std::binary_search(relevant.begin(), relevant.end(), order[i]);
      if (flags_vec[i]) ++relevant_in_candidates;
    }
    ap[qi] = average_precision(flags_vec, relevant_in_candidates);
  });

  MapResult out;
  double sum = 0.0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (skipped[i]) {
      ++out.skipped_empty;
      continue;
    }
    sum += ap[i];
    ++out.queries;
  }
  out.map_percent = out.queries == 0 ? 0.0 : 100.0 * sum / static_cast<double>(out.queries);
  return out;
}

double EvalReport::hits(std::int32_t k) const {
  for (const auto& [kk, v] : hits_at_k) {
    if (kk == k) return v;
  }
  throw ContractViolation("HITS@" + std::to_string(k) + " was not computed");
}

EvalReport evaluate(const CandidateScorer& model, const TripletStore& store, const EvalSetting& setting,
                    const RelationCategoryTable* categories, const TypeConstraintIndex* types) {
  setting.validate();
  if (store.test().empty()) throw DataError("test split is empty");

  std::optional<TypeConstraintIndex> owned_types;
  if ((setting.type_constrained || setting.compute_map) && types == nullptr) {
    owned_types.emplace(store);
    types = &*owned_types;
  }
  const KnownPositiveIndex known(store);
  const RankingContext ctx{store, known, types};

  EvalReport report;
  report.setting = setting;
  const auto& test = store.test();
  report.queries.resize(test.size() * 2);
  parallel_for(test.size(), setting.workers, [&](std::size_t i) {
    const auto& t = test[i];
    for (Side side : {Side::Subject, Side::Object}) {
      auto& q = report.queries[2 * i + (side == Side::Subject ? 0 : 1)];
      q.triplet = t;
      q.side = side;
      q.rank = rank_entity(model, t, side, setting, ctx);
    }
  });

  report.query_count = static_cast<std::int64_t>(report.queries.size());
  double rr = 0.0;
  for (const auto& q : report.queries) rr += 1.0 / static_cast<double>(q.rank);
  report.mrr = rr / static_cast<double>(report.query_count);
  for (auto k : setting.hits_k) {
    const auto hits = std::count_if(report.queries.begin(), report.queries.end(),
                                    [k](const QueryResult& q) { return q.rank <= k; });
    report.hits_at_k.emplace_back(k, 100.0 * static_cast<double>(hits) / static_cast<double>(report.query_count));
    if (categories) report.by_category.push_back(category_breakdown(report.queries, *categories, k));
  }
  if (setting.compute_map) report.map = mean_average_precision(model, store, *types, known, setting.workers);
  return report;
}

namespace {

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

}  // namespace

std::string format_report_text(const EvalReport& r) {
  std::ostringstream os;
  os << "# link prediction: " << (r.setting.filtered ? "filtered" : "raw")
     << (r.setting.type_constrained ? ", type-constrained candidates" : ", all entities as candidates") << '\n'
     << "# ties: equal scores ranked by ascending entity id\n";
  if (r.map) {
    os << "# MAP: queries = distinct (fixed entity, relation, side) of test triples; relevant = entities completing a\n"
          "#      triple in any split; candidates = the relation's observed side-set; ranked by score, ties by id\n";
  }
  os << "queries   " << r.query_count << '\n' << "MRR       " << fixed(r.mrr, 4) << '\n';
  for (const auto& [k, v] : r.hits_at_k) os << "HITS@" << k << (k < 10 ? "    " : "   ") << fixed(v, 2) << '\n';
  if (r.map) {
    os << "MAP       " << fixed(r.map->map_percent, 2) << "  (" << r.map->queries << " queries, "
       << r.map->skipped_empty << " skipped)\n";
  }
  for (const auto& table : r.by_category) {
    os << "\nHITS@" << table.k << " by relation category\n";
    os << "          ";
    for (auto c : kAllCategories) os << "  S:" << category_name(c);
    for (auto c : kAllCategories) os << "  O:" << category_name(c);
    os << "\n          ";
    for (Side side : {Side::Subject, Side::Object}) {
      for (auto c : kAllCategories) {
        const auto p = table.at(c, side).percent();
        std::string cell = p ? fixed(*p, 1) : "-";
        os << std::string(cell.size() < 10 ? 10 - cell.size() : 1, ' ') << cell;
      }
    }
    os << '\n';
  }
  return os.str();
}

std::string format_report_records(const EvalReport& r) {
  std::ostringstream os;
  const std::string setting = r.setting.filtered ? "filtered" : "raw";
  const auto emit = [&](nlohmann::json j) {
    j["setting"] = setting;
    j["type_constrained"] = r.setting.type_constrained;
    os << j.dump() << '\n';
  };
  emit({{"metric", "queries"}, {"value", r.query_count}});
  emit({{"metric", "mrr"}, {"value", r.mrr}});
  for (const auto& [k, v] : r.hits_at_k) emit({{"metric", "hits@" + std::to_string(k)}, {"value", v}});
  if (r.map) {
    emit({{"metric", "map"}, {"value", r.map->map_percent}, {"queries", r.map->queries},
          {"skipped_empty", r.map->skipped_empty}});
  }
  for (const auto& table : r.by_category) {
    for (Side side : {Side::Subject, Side::Object}) {
      for (auto c : kAllCategories) {
        const auto& cell = table.at(c, side);
        nlohmann::json j = {{"metric", "hits@" + std::to_string(table.k)},
                            {"predict", side == Side::Subject ? "subject" : "object"},
                            {"category", category_name(c)},
                            {"queries", cell.queries}};
        if (auto p = cell.percent()) {
          j["value"] = *p;
        } else {
          j["value"] = nullptr;
        }
        emit(std::move(j));
      }
    }
  }
  return os.str();
}

}  // namespace kbe
