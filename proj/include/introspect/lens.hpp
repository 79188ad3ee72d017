#pragma once

#include "introspect/forward.hpp"
#include "introspect/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace introspect {

struct lens_entry {
    std::uint32_t token_id = 0;
    std::string token;
    double probability = 0.0;
};

struct lens_cell {
    std::size_t layer = 0;
    std::size_t column = 0;        // generated step this cell belongs to
    std::size_t seq_position = 0;  // sequence position that was decoded
    std::vector<lens_entry> top;   // descending probability, ties toward low id
};

// Layer x generated-step grid of decoded tokens. Row L's top-1 tokens equal
// the generated sequence: the same head computation decides both.
struct lens_grid {
    std::size_t k = 0;
    std::size_t prompt_len = 0;               // prompt/generated boundary
    std::vector<std::string> column_tokens;   // generated token per column
    std::vector<std::vector<lens_cell>> cells; // (L+1) rows x n_steps columns
    std::string bundle_hash;

    std::size_t n_rows() const { return cells.size(); }
    std::size_t n_cols() const { return cells.empty() ? 0 : cells[0].size(); }
};

// Decode one residual state through the final norm + unembedding and return
// the k most probable tokens.
std::vector<lens_entry> lens_topk(const model_bundle & bundle, const double * state,
                                  std::size_t d, std::size_t k);
std::vector<lens_entry> lens_topk(const model_bundle & bundle,
                                  const std::vector<double> & state, std::size_t k);

lens_grid make_lens_grid(const model_bundle & bundle, const generation & gen, std::size_t k);

} // namespace introspect
