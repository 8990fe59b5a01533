#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_set>
#include <vector>

#include "kbe/vocabulary.hpp"

namespace kbe {

struct Triplet {
  EntityId subject = 0;
  RelationId relation = 0;
  EntityId object = 0;

  friend bool operator==(const Triplet&, const Triplet&) = default;
  friend auto operator<=>(const Triplet&, const Triplet&) = default;
};

struct TripletHash {
  std::size_t operator()(const Triplet& t) const noexcept {
    std::uint64_t h = static_cast<std::uint32_t>(t.subject);
    h = h * 0x9E3779B97F4A7C15ULL + static_cast<std::uint32_t>(t.relation);
    h = h * 0x9E3779B97F4A7C15ULL + static_cast<std::uint32_t>(t.object);
    return static_cast<std::size_t>(h ^ (h >> 29));
  }
};

using TripletSet = std::unordered_set<Triplet, TripletHash>;

enum class Split { Train, Valid, Test };

/// Which argument of a triple is being replaced or predicted.
enum class Side { Subject, Object };

/// `t` with the argument on `side` replaced by `e`.
inline Triplet with_entity(Triplet t, Side side, EntityId e) {
  (side == Side::Subject ? t.subject : t.object) = e;
  return t;
}

/// Train/valid/test triples over one vocabulary, with membership indices.
///
/// Immutable after construction. Splits must be disjoint as sets.
class TripletStore {
 public:
  TripletStore() = default;
  TripletStore(Vocabulary vocab, std::vector<Triplet> train, std::vector<Triplet> valid,
               std::vector<Triplet> test);

  const Vocabulary& vocab() const noexcept { return vocab_; }
  std::int32_t entity_count() const noexcept { return vocab_.entities.size(); }
  std::int32_t relation_count() const noexcept { return vocab_.relations.size(); }

  const std::vector<Triplet>& train() const noexcept { return train_; }
  const std::vector<Triplet>& valid() const noexcept { return valid_; }
  const std::vector<Triplet>& test() const noexcept { return test_; }
  const std::vector<Triplet>& split(Split s) const noexcept;
  std::size_t size() const noexcept { return train_.size() + valid_.size() + test_.size(); }

  /// True iff `t` appears in any split.
  bool contains(const Triplet& t) const { return all_.contains(t); }
  bool in_train(const Triplet& t) const { return train_set_.contains(t); }

  /// Number of training triples per relation id.
  const std::vector<std::int64_t>& per_relation_counts() const noexcept { return per_relation_counts_; }

 private:
  Vocabulary vocab_;
  std::vector<Triplet> train_, valid_, test_;
  TripletSet all_, train_set_;
  std::vector<std::int64_t> per_relation_counts_;
};

enum class VocabMode {
  Extend,  // unseen names are added in first-seen order
  Fixed,   // unseen names are a VocabularyError
};

/// Reads "subject<TAB>relation<TAB>object" lines; blank lines are skipped.
std::vector<Triplet> load_triplets(const std::string& path, Vocabulary& vocab, VocabMode mode);

/// Loads three split files, building the vocabulary over train, valid, test in that order.
TripletStore load_store(const std::string& train_path, const std::string& valid_path,
                        const std::string& test_path);

/// Same, resolving names against a fixed vocabulary.
TripletStore load_store(const std::string& train_path, const std::string& valid_path,
                        const std::string& test_path, Vocabulary vocab);

void save_triplets(const std::vector<Triplet>& triples, const Vocabulary& vocab, const std::string& path);

/// Keeps triples (in every split) whose relation has at least `min_train_count`
/// training examples, then re-densifies both vocabularies preserving relative order.
/// Entities left without any triple are dropped.
TripletStore filter_frequent_relations(const TripletStore& store, std::int64_t min_train_count);

}  // namespace kbe
