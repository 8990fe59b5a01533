#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace kbe {

/// The scoring-function families. Distance, SingleLayer, BilinearLinear and NTN
/// take an extra width m (Hyperparams::relation_dim); for NTN it is the slice count.
enum class ModelKind { Distance, SingleLayer, TransE, Bilinear, BilinearDiag, BilinearLinear, NTN };

/// Entity projection nonlinearity f in y = f(W x).
enum class Activation { Identity, Tanh };

std::string_view model_kind_name(ModelKind kind);
std::string_view activation_name(Activation a);

/// Parses a canonical name or an alias ("distmult", "distadd", "bilinear-diag", ...).
ModelKind parse_model_kind(std::string_view name);
Activation parse_activation(std::string_view name);

/// A model name as accepted on the command line: "<kind>" or "<kind>-tanh".
struct ModelSpec {
  ModelKind kind;
  Activation activation;
};
ModelSpec parse_model_spec(std::string_view name);

/// Default m for `kind` at entity dimension n.
std::int32_t default_relation_dim(ModelKind kind, std::int32_t entity_dim);

/// Whether the kind's relation parameters have an m dimension at all.
bool uses_relation_dim(ModelKind kind);

}  // namespace kbe
