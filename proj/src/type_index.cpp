#include "kbe/type_index.hpp"

#include <algorithm>

namespace kbe {

TypeConstraintIndex::TypeConstraintIndex(const TripletStore& store) {
  if (store.size() == 0) return;
  const auto n = static_cast<std::size_t>(store.relation_count());
  subjects_.resize(n);
  objects_.resize(n);
  for (auto s : {Split::Train, Split::Valid, Split::Test}) {
    for (const auto& t : store.split(s)) {
      subjects_[static_cast<std::size_t>(t.relation)].push_back(t.subject);
      objects_[static_cast<std::size_t>(t.relation)].push_back(t.object);
    }
  }
  for (auto* sets : {&subjects_, &objects_}) {
    for (auto& v : *sets) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    }
  }
}

std::span<const EntityId> TypeConstraintIndex::allowed(RelationId r, Side side) const {
  const auto idx = static_cast<std::size_t>(r);
  const auto& sets = side == Side::Subject ? subjects_ : objects_;
  if (idx >= sets.size()) return {};
  return sets[idx];
}

bool TypeConstraintIndex::allows(RelationId r, Side side, EntityId e) const {
  const auto set = allowed(r, side);
  return std::binary_search(set.begin(), set.end(), e);
}

}  // namespace kbe
