#include "kbe/triplet_store.hpp"

#include <fstream>
#include <string_view>

#include "kbe/errors.hpp"

namespace kbe {

TripletStore::TripletStore(Vocabulary vocab, std::vector<Triplet> train, std::vector<Triplet> valid,
                           std::vector<Triplet> test)
    : vocab_(std::move(vocab)), train_(std::move(train)), valid_(std::move(valid)), test_(std::move(test)) {
  per_relation_counts_.assign(static_cast<std::size_t>(vocab_.relations.size()), 0);

  const auto check = [&](const Triplet& t) {
    if (t.subject < 0 || t.subject >= entity_count() || t.object < 0 || t.object >= entity_count() ||
        t.relation < 0 || t.relation >= relation_count()) {
      throw ContractViolation("triplet id outside vocabulary");
    }
  };

  for (const auto& t : train_) {
    check(t);
    train_set_.insert(t);
    all_.insert(t);
    ++per_relation_counts_[static_cast<std::size_t>(t.relation)];
  }
  for (const auto* split : {&valid_, &test_}) {
    TripletSet seen;
    for (const auto& t : *split) {
      check(t);
      seen.insert(t);
      if (train_set_.contains(t)) throw DataError("triplet appears in both train and an evaluation split");
    }
    for (const auto& t : seen) {
      if (!all_.insert(t).second) throw DataError("triplet appears in both valid and test splits");
    }
  }
}

const std::vector<Triplet>& TripletStore::split(Split s) const noexcept {
  switch (s) {
    case Split::Train: return train_;
    case Split::Valid: return valid_;
    case Split::Test: break;
  }
  return test_;
}

std::vector<Triplet> load_triplets(const std::string& path, Vocabulary& vocab, VocabMode mode) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");

  std::vector<Triplet> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::string_view fields[3];
    std::size_t count = 0, start = 0;
    for (;;) {
      const auto tab = line.find('\t', start);
      const auto piece = std::string_view(line).substr(start, tab == std::string::npos ? std::string::npos : tab - start);
      if (count < 3) fields[count] = piece;
      ++count;
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (count != 3) {
      throw ParseError(path, lineno, "expected 3 tab-separated fields, got " + std::to_string(count));
    }

    Triplet t;
    if (mode == VocabMode::Extend) {
      t.subject = vocab.entities.intern(fields[0]);
      t.relation = vocab.relations.intern(fields[1]);
      t.object = vocab.entities.intern(fields[2]);
    } else {
      const auto s = vocab.entities.find(fields[0]);
      const auto r = vocab.relations.find(fields[1]);
      const auto o = vocab.entities.find(fields[2]);
      if (!s || !o) {
        throw VocabularyError(path + ":" + std::to_string(lineno) + ": unknown entity '" +
                              std::string(s ? fields[2] : fields[0]) + "'");
      }
      if (!r) {
        throw VocabularyError(path + ":" + std::to_string(lineno) + ": unknown relation '" +
                              std::string(fields[1]) + "'");
      }
      t = {*s, *r, *o};
    }
    out.push_back(t);
  }
  return out;
}

TripletStore load_store(const std::string& train_path, const std::string& valid_path,
                        const std::string& test_path) {
  Vocabulary vocab;
  auto train = load_triplets(train_path, vocab, VocabMode::Extend);
  auto valid = load_triplets(valid_path, vocab, VocabMode::Extend);
  auto test = load_triplets(test_path, vocab, VocabMode::Extend);
  return TripletStore(std::move(vocab), std::move(train), std::move(valid), std::move(test));
}

TripletStore load_store(const std::string& train_path, const std::string& valid_path,
                        const std::string& test_path, Vocabulary vocab) {
  auto train = load_triplets(train_path, vocab, VocabMode::Fixed);
  auto valid = load_triplets(valid_path, vocab, VocabMode::Fixed);
  auto test = load_triplets(test_path, vocab, VocabMode::Fixed);
  return TripletStore(std::move(vocab), std::move(train), std::move(valid), std::move(test));
}

void save_triplets(const std::vector<Triplet>& triples, const Vocabulary& vocab, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  for (const auto& t : triples) {
    out << vocab.entities.name(t.subject) << '\t' << vocab.relations.name(t.relation) << '\t'
        << vocab.entities.name(t.object) << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

TripletStore filter_frequent_relations(const TripletStore& store, std::int64_t min_train_count) {
  if (min_train_count < 1) throw ContractViolation("min_train_count must be >= 1");

  const auto& counts = store.per_relation_counts();
  const auto keep = [&](const Triplet& t) { return counts[static_cast<std::size_t>(t.relation)] >= min_train_count; };

  std::vector<std::int32_t> entity_map(static_cast<std::size_t>(store.entity_count()), -1);
  std::vector<std::int32_t> relation_map(static_cast<std::size_t>(store.relation_count()), -1);
  for (auto s : {Split::Train, Split::Valid, Split::Test}) {
    for (const auto& t : store.split(s)) {
      if (!keep(t)) continue;
      entity_map[static_cast<std::size_t>(t.subject)] = 0;
      entity_map[static_cast<std::size_t>(t.object)] = 0;
      relation_map[static_cast<std::size_t>(t.relation)] = 0;
    }
  }

  // Renumber survivors in original id order.
  Vocabulary vocab;
  for (std::int32_t e = 0; e < store.entity_count(); ++e) {
    if (entity_map[static_cast<std::size_t>(e)] == 0) {
      entity_map[static_cast<std::size_t>(e)] = vocab.entities.intern(store.vocab().entities.name(e));
    }
  }
  for (std::int32_t r = 0; r < store.relation_count(); ++r) {
    if (relation_map[static_cast<std::size_t>(r)] == 0) {
      relation_map[static_cast<std::size_t>(r)] = vocab.relations.intern(store.vocab().relations.name(r));
    }
  }

  const auto remap = [&](const std::vector<Triplet>& in) {
    std::vector<Triplet> out;
    for (const auto& t : in) {
      if (!keep(t)) continue;
      out.push_back({entity_map[static_cast<std::size_t>(t.subject)], relation_map[static_cast<std::size_t>(t.relation)],
                     entity_map[static_cast<std::size_t>(t.object)]});
    }
    return out;
  };
  return TripletStore(std::move(vocab), remap(store.train()), remap(store.valid()), remap(store.test()));
}

}  // namespace kbe
