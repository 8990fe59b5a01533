#pragma once

// Test fixtures: temporary files, random stores and random parameters.

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <string>

#include "kbe/model_params.hpp"
#include "kbe/triplet_store.hpp"

namespace kbe::test {

inline constexpr std::array<ModelKind, 7> kAllKinds{ModelKind::Distance,     ModelKind::SingleLayer,
                                                    ModelKind::TransE,       ModelKind::Bilinear,
                                                    ModelKind::BilinearDiag, ModelKind::BilinearLinear,
                                                    ModelKind::NTN};

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 gen{std::random_device{}()};
    path_ = std::filesystem::temp_directory_path() / ("kbe-test-" + std::to_string(gen()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Builds a store from name triples; each split gets its own list.
inline TripletStore make_store(const std::vector<std::array<std::string, 3>>& train,
                               const std::vector<std::array<std::string, 3>>& valid = {},
                               const std::vector<std::array<std::string, 3>>& test = {}) {
  Vocabulary vocab;
  const auto conv = [&](const auto& list) {
    std::vector<Triplet> out;
    for (const auto& [s, r, o] : list) {
      out.push_back({vocab.entities.intern(s), vocab.relations.intern(r), vocab.entities.intern(o)});
    }
    return out;
  };
  auto tr = conv(train);
  auto va = conv(valid);
  auto te = conv(test);
  return TripletStore(std::move(vocab), std::move(tr), std::move(va), std::move(te));
}

/// Random store: distinct triples dealt round-robin 70/15/15 into the splits.
/// Every entity and relation gets a name; ids follow name order.
inline TripletStore random_store(std::int32_t entities, std::int32_t relations, std::size_t triples,
                                 std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::set<std::array<std::int32_t, 3>> seen;
  Vocabulary vocab;
  for (std::int32_t e = 0; e < entities; ++e) vocab.entities.intern("e" + std::to_string(e));
  for (std::int32_t r = 0; r < relations; ++r) vocab.relations.intern("r" + std::to_string(r));
  std::vector<Triplet> train, valid, test;
  const auto cap = static_cast<std::size_t>(entities) * static_cast<std::size_t>(entities) *
                   static_cast<std::size_t>(relations);
  triples = std::min(triples, cap);
  while (seen.size() < triples) {
    const std::array<std::int32_t, 3> t{static_cast<std::int32_t>(gen() % static_cast<std::uint64_t>(entities)),
                                        static_cast<std::int32_t>(gen() % static_cast<std::uint64_t>(relations)),
                                        static_cast<std::int32_t>(gen() % static_cast<std::uint64_t>(entities))};
    if (!seen.insert(t).second) continue;
    const Triplet tt{t[0], t[1], t[2]};
    const auto slot = seen.size() % 20;
    if (slot < 14) {
      train.push_back(tt);
    } else if (slot < 17) {
      valid.push_back(tt);
    } else {
      test.push_back(tt);
    }
  }
  return TripletStore(std::move(vocab), std::move(train), std::move(valid), std::move(test));
}

/// Parameters with every entry uniform in [-scale, scale], entity rows not normalized.
inline ModelParams random_params(ModelKind kind, std::int32_t entities, std::int32_t relations, std::int32_t n,
                                 std::int32_t m, std::uint64_t seed, Activation act = Activation::Identity,
                                 double scale = 1.0) {
  Hyperparams h;
  h.entity_dim = n;
  h.relation_dim = m;
  h.activation = act;
  h.seed = seed;
  auto p = init_random(kind, h, entities, relations);
  std::mt19937_64 gen(seed * 7919 + 17);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (Eigen::Index i = 0; i < p.entities.size(); ++i) p.entities.data()[i] = u(gen);
  for (auto& r : p.relations) {
    for (auto b : blocks(r)) {
      for (auto& x : b) x = u(gen);
    }
  }
  return p;
}

}  // namespace kbe::test
