#pragma once

#include <array>
#include <string_view>
#include <vector>

#include "kbe/triplet_store.hpp"

namespace kbe {

/// "OneToMany" means one subject relates to many objects.
enum class RelationCategory { OneToOne = 0, OneToMany = 1, ManyToOne = 2, ManyToMany = 3 };

inline constexpr std::array<RelationCategory, 4> kAllCategories{
    RelationCategory::OneToOne, RelationCategory::OneToMany, RelationCategory::ManyToOne,
    RelationCategory::ManyToMany};

std::string_view category_name(RelationCategory c);

struct RelationCategoryInfo {
  RelationCategory category = RelationCategory::OneToOne;
  double mean_objects_per_subject = 1.0;  // distinct objects per distinct subject
  double mean_subjects_per_object = 1.0;  // distinct subjects per distinct object
};

class RelationCategoryTable {
 public:
  explicit RelationCategoryTable(std::vector<RelationCategoryInfo> info) : info_(std::move(info)) {}

  const RelationCategoryInfo& operator[](RelationId r) const { return info_.at(static_cast<std::size_t>(r)); }
  RelationCategory category(RelationId r) const { return (*this)[r].category; }
  std::size_t size() const noexcept { return info_.size(); }

 private:
  std::vector<RelationCategoryInfo> info_;
};

inline constexpr double kDefaultCategoryThreshold = 1.5;

/// Classifies every relation from its training triples. A relation with no
/// training triples falls back to all splits; one with no triples at all is a DataError.
RelationCategoryTable classify_relations(const TripletStore& store, double threshold = kDefaultCategoryThreshold);

}  // namespace kbe
