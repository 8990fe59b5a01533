#include "kbe/vocabulary.hpp"

#include <charconv>
#include <fstream>

#include "kbe/errors.hpp"

namespace kbe {

std::int32_t NameIndex::intern(std::string_view name) {
  if (auto it = ids_.find(name); it != ids_.end()) return it->second;
  const auto id = static_cast<std::int32_t>(names_.size());
  names_.emplace_back(name);
  ids_.emplace(names_.back(), id);
  return id;
}

std::optional<std::int32_t> NameIndex::find(std::string_view name) const {
  if (auto it = ids_.find(name); it != ids_.end()) return it->second;
  return std::nullopt;
}

std::int32_t NameIndex::id(std::string_view name) const {
  if (auto found = find(name)) return *found;
  throw VocabularyError("unknown name '" + std::string(name) + "'");
}

const std::string& NameIndex::name(std::int32_t id) const {
  if (id < 0 || id >= size()) throw ContractViolation("name index out of range: " + std::to_string(id));
  return names_[static_cast<std::size_t>(id)];
}

namespace {

void fnv_mix(std::uint64_t& h, std::string_view bytes) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
}

}  // namespace

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& n : entities.names()) {
    fnv_mix(h, n);
    fnv_mix(h, std::string_view("\n", 1));
  }
  fnv_mix(h, std::string_view("\x1f", 1));
  for (const auto& n : relations.names()) {
    fnv_mix(h, n);
    fnv_mix(h, std::string_view("\n", 1));
  }
  return h;
}

void save_name_index(const NameIndex& index, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  for (std::int32_t i = 0; i < index.size(); ++i) out << i << '\t' << index.name(i) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

NameIndex load_name_index(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  NameIndex index;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(path, lineno, "expected id<TAB>name");
    std::int32_t id = -1;
    auto [ptr, ec] = std::from_chars(line.data(), line.data() + tab, id);
    if (ec != std::errc{} || ptr != line.data() + tab) throw ParseError(path, lineno, "bad id");
    if (id != index.size()) throw ParseError(path, lineno, "ids must be dense and in order");
    const auto name = std::string_view(line).substr(tab + 1);
    if (index.find(name)) throw ParseError(path, lineno, "duplicate name '" + std::string(name) + "'");
    index.intern(name);
  }
  return index;
}

}  // namespace kbe
