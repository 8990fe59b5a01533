#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kbe {

using EntityId = std::int32_t;
using RelationId = std::int32_t;

/// Bidirectional name <-> dense id map. Ids are assigned in insertion order.
class NameIndex {
 public:
  /// Returns the id of `name`, inserting it if unseen.
  std::int32_t intern(std::string_view name);

  std::optional<std::int32_t> find(std::string_view name) const;

  /// Throws VocabularyError for unknown names.
  std::int32_t id(std::string_view name) const;

  const std::string& name(std::int32_t id) const;

  std::int32_t size() const noexcept { return static_cast<std::int32_t>(names_.size()); }
  bool empty() const noexcept { return names_.empty(); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  friend bool operator==(const NameIndex& a, const NameIndex& b) { return a.names_ == b.names_; }

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept { return std::hash<std::string_view>{}(s); }
  };

  std::vector<std::string> names_;
  std::unordered_map<std::string, std::int32_t, Hash, std::equal_to<>> ids_;
};

struct Vocabulary {
  NameIndex entities;
  NameIndex relations;

  /// FNV-1a over all names in id order; identifies the vocabulary in checkpoints.
  std::uint64_t hash() const;

  friend bool operator==(const Vocabulary&, const Vocabulary&) = default;
};

/// Writes "id<TAB>name" lines.
void save_name_index(const NameIndex& index, const std::string& path);
NameIndex load_name_index(const std::string& path);

}  // namespace kbe
