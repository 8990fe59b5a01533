#pragma once

#include <span>
#include <vector>

#include "kbe/triplet_store.hpp"

namespace kbe {

/// Per relation, the entities observed as its subject and as its object over
/// train, valid and test.
class TypeConstraintIndex {
 public:
  TypeConstraintIndex() = default;
  explicit TypeConstraintIndex(const TripletStore& store);

  /// Sorted, duplicate-free entity ids allowed on `side` of `r`.
  std::span<const EntityId> allowed(RelationId r, Side side) const;
  bool allows(RelationId r, Side side, EntityId e) const;

  std::size_t relation_count() const noexcept { return subjects_.size(); }
  bool empty() const noexcept { return subjects_.empty(); }

 private:
  std::vector<std::vector<EntityId>> subjects_;
  std::vector<std::vector<EntityId>> objects_;
};

inline TypeConstraintIndex build_type_index(const TripletStore& store) { return TypeConstraintIndex(store); }

}  // namespace kbe
