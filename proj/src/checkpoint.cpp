#include "kbe/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "kbe/errors.hpp"

namespace kbe {

namespace {

constexpr std::string_view kMagic = "KBE-CHECKPOINT";

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

std::uint64_t parse_hex64(const std::string& s, const char* field) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used, 16);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw CheckpointError(std::string("checkpoint field '") + field + "' is not a hex value");
  }
}

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xFF) << (8 * (7 - i));
    return r;
  }
  return v;
}

/// Collects every payload span in layout order.
template <typename Span, typename Params>
std::vector<Span> payload_spans(Params& p) {
  std::vector<Span> out;
  out.emplace_back(p.entities.data(), static_cast<std::size_t>(p.entities.size()));
  for (auto& r : p.relations) {
    for (auto b : blocks(r)) out.emplace_back(b.data(), b.size());
  }
  out.emplace_back(p.entity_accum.data(), static_cast<std::size_t>(p.entity_accum.size()));
  for (auto& r : p.relation_accum) {
    for (auto b : blocks(r)) out.emplace_back(b.data(), b.size());
  }
  return out;
}

struct Fnv {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  void add(const unsigned char* bytes, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  }
};

template <typename T>
T get_field(const nlohmann::json& j, const char* field) {
  if (!j.contains(field)) throw CheckpointError(std::string("checkpoint header is missing field '") + field + "'");
  try {
    return j.at(field).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw CheckpointError(std::string("checkpoint field '") + field + "' has the wrong type");
  }
}

}  // namespace

void save_checkpoint(const ModelParams& params, std::uint64_t vocabulary_hash, const std::string& path) {
  check_consistency(params);
  const auto& h = params.hyper;

  const auto spans = payload_spans<std::span<const double>>(params);
  std::size_t total = 0;
  Fnv fnv;
  std::vector<unsigned char> payload;
  for (auto s : spans) total += s.size();
  payload.reserve(total * 8);
  for (auto s : spans) {
    for (double x : s) {
      const auto bits = to_little(std::bit_cast<std::uint64_t>(x));
      unsigned char buf[8];
      std::memcpy(buf, &bits, 8);
      payload.insert(payload.end(), buf, buf + 8);
    }
  }
  fnv.add(payload.data(), payload.size());

  nlohmann::json blocks_json = nlohmann::json::array();
  if (!params.relations.empty()) {
    const auto& r0 = params.relations.front();
    const auto names = block_names(r0);
    const auto sizes = blocks(r0);
    for (std::size_t i = 0; i < names.size(); ++i) {
      blocks_json.push_back({{"name", names[i]}, {"size", sizes[i].size()}});
    }
  }

  nlohmann::json header = {
      {"format_version", kCheckpointVersion},
      {"model_kind", model_kind_name(params.kind)},
      {"activation", activation_name(h.activation)},
      {"entity_dim", h.entity_dim},
      {"relation_dim", h.relation_dim},
      {"margin", h.margin},
      {"learning_rate", h.learning_rate},
      {"l2_reg", h.l2_reg},
      {"minibatch_count", h.minibatch_count},
      {"epochs", h.epochs},
      {"seed", h.seed},
      {"entity_count", params.entity_count()},
      {"relation_count", params.relation_count()},
      {"vocabulary_hash", hex64(vocabulary_hash)},
      {"init", "uniform(-6/sqrt(n), 6/sqrt(n)); entity rows unit L2; mt19937_64"},
      {"tensor_layout", "m slices of n x n, column-major"},
      {"relation_blocks", blocks_json},
      {"payload_doubles", total},
      {"payload_fnv1a", hex64(fnv.h)},
  };

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp + "' for writing");
    out << kMagic << ' ' << kCheckpointVersion << '\n' << header.dump() << '\n';
    out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    if (!out) throw IoError("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw IoError("cannot move checkpoint into place: " + path);
}

ModelParams load_checkpoint(const std::string& path, std::optional<std::uint64_t> expected_vocabulary_hash,
                            CheckpointInfo* info) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");

  std::string magic_line, header_line;
  if (!std::getline(in, magic_line)) throw CheckpointError("checkpoint is empty");
  if (magic_line.rfind(std::string(kMagic) + ' ', 0) != 0) throw CheckpointError("not a checkpoint file (bad magic)");
  const auto version_text = magic_line.substr(kMagic.size() + 1);
  if (version_text != std::to_string(kCheckpointVersion)) {
    throw CheckpointError("checkpoint field 'format_version' is " + version_text + ", expected " +
                          std::to_string(kCheckpointVersion));
  }
  if (!std::getline(in, header_line)) throw CheckpointError("checkpoint header is truncated");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  if (get_field<int>(header, "format_version") != kCheckpointVersion) {
    throw CheckpointError("checkpoint field 'format_version' does not match");
  }

  const auto stored_hash = parse_hex64(get_field<std::string>(header, "vocabulary_hash"), "vocabulary_hash");
  if (expected_vocabulary_hash && *expected_vocabulary_hash != stored_hash) {
    throw CheckpointError("checkpoint field 'vocabulary_hash' is " + hex64(stored_hash) + " but the dataset has " +
                          hex64(*expected_vocabulary_hash));
  }
  if (info) info->vocabulary_hash = stored_hash;

  Hyperparams h;
  ModelKind kind;
  try {
    kind = parse_model_kind(get_field<std::string>(header, "model_kind"));
    h.activation = parse_activation(get_field<std::string>(header, "activation"));
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint field: ") + e.what());
  }
  h.entity_dim = get_field<std::int32_t>(header, "entity_dim");
  h.relation_dim = get_field<std::int32_t>(header, "relation_dim");
  h.margin = get_field<double>(header, "margin");
  h.learning_rate = get_field<double>(header, "learning_rate");
  h.l2_reg = get_field<double>(header, "l2_reg");
  h.minibatch_count = get_field<std::int32_t>(header, "minibatch_count");
  h.epochs = get_field<std::int32_t>(header, "epochs");
  h.seed = get_field<std::uint64_t>(header, "seed");
  try {
    h.validate();
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint hyperparameters invalid: ") + e.what());
  }
  const auto entity_count = get_field<std::int32_t>(header, "entity_count");
  const auto relation_count = get_field<std::int32_t>(header, "relation_count");
  if (entity_count < 0 || relation_count < 0) throw CheckpointError("checkpoint field 'entity_count' is negative");

  ModelParams p;
  p.kind = kind;
  p.hyper = h;
  p.entities.resize(entity_count, h.entity_dim);
  p.entity_accum.resize(entity_count, h.entity_dim);
  for (std::int32_t r = 0; r < relation_count; ++r) {
    p.relations.push_back(make_relation_params(kind, h.entity_dim, h.relation_dim));
    p.relation_accum.push_back(make_relation_params(kind, h.entity_dim, h.relation_dim));
  }

  const auto spans = payload_spans<std::span<double>>(p);
  std::size_t total = 0;
  for (auto s : spans) total += s.size();
  if (get_field<std::size_t>(header, "payload_doubles") != total) {
    throw CheckpointError("checkpoint field 'payload_doubles' does not match the declared shapes");
  }

  std::vector<unsigned char> payload(total * 8);
  in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (static_cast<std::size_t>(in.gcount()) != payload.size()) {
    throw CheckpointError("checkpoint payload is truncated (" + std::to_string(in.gcount()) + " of " +
                          std::to_string(payload.size()) + " bytes)");
  }
  if (in.peek() != std::char_traits<char>::eof()) throw CheckpointError("checkpoint has trailing bytes");
  Fnv fnv;
  fnv.add(payload.data(), payload.size());
  if (parse_hex64(get_field<std::string>(header, "payload_fnv1a"), "payload_fnv1a") != fnv.h) {
    throw CheckpointError("checkpoint field 'payload_fnv1a' does not match the payload");
  }

  std::size_t offset = 0;
  for (auto s : spans) {
    for (double& x : s) {
      std::uint64_t bits;
      std::memcpy(&bits, payload.data() + offset, 8);
      x = std::bit_cast<double>(to_little(bits));
      offset += 8;
    }
  }
  return p;
}

}  // namespace kbe
