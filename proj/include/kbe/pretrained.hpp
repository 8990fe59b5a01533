#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "kbe/model_params.hpp"
#include "kbe/vocabulary.hpp"

namespace kbe {

/// Text vectors: optional "count dim" first line, then "token v1 ... vd" per line.
struct PretrainedVectors {
  std::int32_t dim = 0;
  std::unordered_map<std::string, Eigen::VectorXd> vectors;

  const Eigen::VectorXd* find(const std::string& token) const {
    auto it = vectors.find(token);
    return it == vectors.end() ? nullptr : &it->second;
  }
};

PretrainedVectors load_pretrained_vectors(const std::string& path);

/// Maps an entity name to the token to look up. The default is the name itself.
using TokenMap = std::function<std::optional<std::string>(const std::string& entity_name)>;

/// Reads "entity<TAB>token" lines into a TokenMap (unlisted entities map to nothing).
TokenMap load_token_map(const std::string& path);

/// Copies the vector of each entity whose token is present, unit-normalized
/// unless the projection is tanh. Returns how many rows were set.
std::int32_t init_from_pretrained_entity_vectors(ModelParams& params, const NameIndex& entities,
                                                 const PretrainedVectors& vectors, const TokenMap& tokens = {});

/// Lowercased words of an entity name, split on '_' and whitespace.
std::vector<std::string> entity_words(std::string_view name);

/// Sets each entity row to the mean of its word vectors. Words missing from the
/// file get a random vector drawn on first use and cached. Entities without
/// words keep their row. Returns how many rows were set.
std::int32_t init_word_averaged(ModelParams& params, const NameIndex& entities, const PretrainedVectors& words,
                                const TokenMap& names = {});

}  // namespace kbe
