#pragma once

#include <string>
#include <vector>

#include "kbe/model_params.hpp"
#include "kbe/vocabulary.hpp"

namespace kbe {

enum class RelationDistanceKind {
  Euclidean,  // vector parameters (TransE, DistMult diagonal)
  Frobenius,  // matrices; multi-part variants use the norm of all parts concatenated
};

RelationDistanceKind distance_kind(ModelKind kind);

/// Norm of the difference of two relations' parameters, over every block.
double relation_distance(const ModelParams& params, RelationId r1, RelationId r2);

struct Neighbor {
  RelationId relation = 0;
  std::string name;
  double distance = 0.0;
};

/// The k closest other relations, ascending by distance, ties by id. Requires k < |R|.
std::vector<Neighbor> nearest_relations(const ModelParams& params, const NameIndex& relations, RelationId r,
                                        std::int32_t k);

enum class ExportWhat { Entities, Relations };

/// TSV with a header row ("name", "v0", "v1", ...), then one row per item: its
/// name followed by its raw parameters flattened in layout order (entity row;
/// relation blocks in order, matrices column-major), each printed with 17
/// significant digits.
void export_embeddings(const ModelParams& params, const Vocabulary& vocab, const std::string& path, ExportWhat what);

struct EmbeddingRow {
  std::string name;
  std::vector<double> values;
};

/// Parses a file written by export_embeddings.
std::vector<EmbeddingRow> load_embeddings_tsv(const std::string& path);

/// Names within a small edit distance of `query`, closest first.
std::vector<std::string> close_matches(const NameIndex& names, const std::string& query, std::size_t limit = 5);

}  // namespace kbe
