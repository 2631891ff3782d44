#pragma once

#include "vqknn/rng.hpp"
#include "vqknn/types.hpp"

#include <nlohmann/json_fwd.hpp>

#include <vector>

namespace vqknn {

// M code vectors of dimension D, one per row, plus a shared temperature
// stored as log(tau) so tau stays positive under gradient updates.
struct Codebook {
  Mat codes;  // M x D
  Real log_temperature = 0.0;

  int size() const { return static_cast<int>(codes.rows()); }
  int dim() const { return static_cast<int>(codes.cols()); }
  Real temperature() const { return std::exp(log_temperature); }

  // Rows drawn uniformly on the unit sphere, so every code has unit norm and
  // cosine logits are well defined from the start.
  static Codebook random_unit(int m, int d, Rng& rng);

  void validate() const;
};

// G independent codebooks over contiguous sub-vectors; group g quantizes
// columns [offset(g), offset(g) + dim_g).
struct ProductCodebook {
  std::vector<Codebook> groups;

  int total_dim() const {
    int d = 0;
    for (const auto& g : groups) d += g.dim();
    return d;
  }
  int group_offset(int g) const {
    int at = 0;
    for (int i = 0; i < g; ++i) at += groups[i].dim();
    return at;
  }

  static ProductCodebook random_unit(int groups, int m_per_group, int total_dim, Rng& rng);
};

// Checkpoint container: {"m", "d", "log_temperature", "q"} with q the
// row-major flattening of the M x D code matrix (code vectors contiguous).
// The layout is stable; readers should reject unknown "format" values.
nlohmann::json codebook_to_json(const Codebook& cb);
Codebook codebook_from_json(const nlohmann::json& j);

}  // namespace vqknn
