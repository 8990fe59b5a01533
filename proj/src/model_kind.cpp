#include "kbe/model_kind.hpp"

#include <array>
#include <utility>

#include "kbe/errors.hpp"

namespace kbe {

namespace {

constexpr std::array<std::pair<std::string_view, ModelKind>, 12> kKindNames{{
    {"distance", ModelKind::Distance},
    {"single-layer", ModelKind::SingleLayer},
    {"transe", ModelKind::TransE},
    {"bilinear", ModelKind::Bilinear},
    {"bilinear-diag", ModelKind::BilinearDiag},
    {"bilinear-linear", ModelKind::BilinearLinear},
    {"ntn", ModelKind::NTN},
    // aliases
    {"distadd", ModelKind::TransE},
    {"distmult", ModelKind::BilinearDiag},
    {"singlelayer", ModelKind::SingleLayer},
    {"bilinear+linear", ModelKind::BilinearLinear},
    {"rescal", ModelKind::Bilinear},
}};

}  // namespace

std::string_view model_kind_name(ModelKind kind) {
  for (const auto& [name, k] : kKindNames) {
    if (k == kind) return name;
  }
  return "?";
}

std::string_view activation_name(Activation a) { return a == Activation::Tanh ? "tanh" : "identity"; }

ModelKind parse_model_kind(std::string_view name) {
  for (const auto& [n, k] : kKindNames) {
    if (n == name) return k;
  }
  throw ConfigError("unknown model kind '" + std::string(name) + "'");
}

Activation parse_activation(std::string_view name) {
  if (name == "identity" || name == "linear") return Activation::Identity;
  if (name == "tanh") return Activation::Tanh;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

ModelSpec parse_model_spec(std::string_view name) {
  constexpr std::string_view suffix = "-tanh";
  if (name.size() > suffix.size() && name.substr(name.size() - suffix.size()) == suffix) {
    return {parse_model_kind(name.substr(0, name.size() - suffix.size())), Activation::Tanh};
  }
  return {parse_model_kind(name), Activation::Identity};
}

std::int32_t default_relation_dim(ModelKind kind, std::int32_t entity_dim) {
  switch (kind) {
    case ModelKind::NTN:
    case ModelKind::SingleLayer: return 4;
    case ModelKind::Distance: return entity_dim;
    default: return 1;
  }
}

bool uses_relation_dim(ModelKind kind) {
  return kind == ModelKind::Distance || kind == ModelKind::SingleLayer || kind == ModelKind::BilinearLinear ||
         kind == ModelKind::NTN;
}

}  // namespace kbe
