#include "kbe/relation_categories.hpp"

#include <unordered_map>
#include <unordered_set>

#include "kbe/errors.hpp"

namespace kbe {

std::string_view category_name(RelationCategory c) {
  switch (c) {
    case RelationCategory::OneToOne: return "1-to-1";
    case RelationCategory::OneToMany: return "1-to-n";
    case RelationCategory::ManyToOne: return "n-to-1";
    case RelationCategory::ManyToMany: return "n-to-n";
  }
  return "?";
}

namespace {

struct PairCounts {
  std::unordered_map<EntityId, std::unordered_set<EntityId>> objects_of;
  std::unordered_map<EntityId, std::unordered_set<EntityId>> subjects_of;

  bool empty() const { return objects_of.empty(); }

  void add(const Triplet& t) {
    objects_of[t.subject].insert(t.object);
    subjects_of[t.object].insert(t.subject);
  }

  static double mean_size(const std::unordered_map<EntityId, std::unordered_set<EntityId>>& m) {
    std::size_t total = 0;
    for (const auto& [_, s] : m) total += s.size();
    return static_cast<double>(total) / static_cast<double>(m.size());
  }
};

}  // namespace

RelationCategoryTable classify_relations(const TripletStore& store, double threshold) {
  if (!(threshold > 1.0)) throw ContractViolation("category threshold must exceed 1");

  const auto n = static_cast<std::size_t>(store.relation_count());
  std::vector<PairCounts> train_counts(n);
  for (const auto& t : store.train()) train_counts[static_cast<std::size_t>(t.relation)].add(t);

  std::vector<RelationCategoryInfo> info(n);
  for (std::size_t r = 0; r < n; ++r) {
    PairCounts fallback;
    const PairCounts* counts = &train_counts[r];
    if (counts->empty()) {
      for (auto s : {Split::Train, Split::Valid, Split::Test}) {
        for (const auto& t : store.split(s)) {
          if (static_cast<std::size_t>(t.relation) == r) fallback.add(t);
        }
      }
      if (fallback.empty()) {
        throw DataError("relation '" + store.vocab().relations.name(static_cast<RelationId>(r)) +
                        "' has no triples to classify");
      }
      counts = &fallback;
    }

    auto& out = info[r];
    out.mean_objects_per_subject = PairCounts::mean_size(counts->objects_of);
    out.mean_subjects_per_object = PairCounts::mean_size(counts->subjects_of);
    const bool many_objects = out.mean_objects_per_subject >= threshold;
    const bool many_subjects = out.mean_subjects_per_object >= threshold;
    if (many_objects) {
      out.category = many_subjects ? RelationCategory::ManyToMany : RelationCategory::OneToMany;
    } else {
      out.category = many_subjects ? RelationCategory::ManyToOne : RelationCategory::OneToOne;
    }
  }
  return RelationCategoryTable(std::move(info));
}

}  // namespace kbe
