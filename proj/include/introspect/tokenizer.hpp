#pragma once

#include "introspect/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace introspect {

struct token_seq {
    std::vector<std::uint32_t> ids;
    // Half-open byte spans into the source text, contiguous and non-overlapping.
    std::vector<std::pair<std::size_t, std::size_t>> byte_offsets;

    std::size_t size() const { return ids.size(); }
    bool empty() const { return ids.empty(); }
};

// Greedy longest-match over the vocabulary. Total over the vocabulary's
// alphabet; a byte not covered by any token is a validation_error.
token_seq tokenize(const model_bundle & bundle, const std::string & text);

std::string detokenize(const model_bundle & bundle, const std::vector<std::uint32_t> & ids);
std::string detokenize(const model_bundle & bundle, const token_seq & seq);

} // namespace introspect
