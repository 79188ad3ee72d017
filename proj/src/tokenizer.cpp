#include "introspect/tokenizer.hpp"

#include "introspect/errors.hpp"

#include <algorithm>
#include <array>

namespace introspect {

namespace {

// Tokens grouped by first byte, longest first, so greedy longest-match is a
// short scan per position.
struct match_table {
    std::array<std::vector<std::uint32_t>, 256> by_first_byte;

    explicit match_table(const std::vector<std::string> & vocab) {
        for (std::uint32_t id = 0; id < vocab.size(); ++id) {
            if (vocab[id].empty()) continue;
            by_first_byte[static_cast<unsigned char>(vocab[id][0])].push_back(id);
        }
        for (auto & bucket : by_first_byte) {
            std::sort(bucket.begin(), bucket.end(), [&](std::uint32_t a, std::uint32_t b) {
                if (vocab[a].size() != vocab[b].size()) return vocab[a].size() > vocab[b].size();
                return a < b;
            });
        }
    }
};

} // namespace

token_seq tokenize(const model_bundle & bundle, const std::string & text) {
    const match_table table(bundle.vocab);
    token_seq out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const unsigned char first = static_cast<unsigned char>(text[pos]);
        std::uint32_t matched = 0;
        std::size_t matched_len = 0;
        for (std::uint32_t id : table.by_first_byte[first]) {
            const std::string & tok = bundle.vocab[id];
            if (tok.size() <= text.size() - pos &&
                text.compare(pos, tok.size(), tok) == 0) {
                matched = id;
                matched_len = tok.size();
                break; // buckets are longest-first
            }
        }
        if (matched_len == 0)
            throw validation_error("tokenize: byte 0x" + [&] {
                static const char * hex = "0123456789abcdef";
                std::string s;
                s += hex[first >> 4];
                s += hex[first & 0xf];
                return s;
            }() + " at offset " + std::to_string(pos) + " is not covered by the vocabulary");
        out.ids.push_back(matched);
        out.byte_offsets.emplace_back(pos, pos + matched_len);
        pos += matched_len;
    }
    return out;
}

std::string detokenize(const model_bundle & bundle, const std::vector<std::uint32_t> & ids) {
    std::string out;
    for (std::uint32_t id : ids) {
        if (id >= bundle.vocab.size())
            throw validation_error("detokenize: token id " + std::to_string(id) +
                                   " out of range");
        out += bundle.vocab[id];
    }
    return out;
}

std::string detokenize(const model_bundle & bundle, const token_seq & seq) {
    return detokenize(bundle, seq.ids);
}

} // namespace introspect
