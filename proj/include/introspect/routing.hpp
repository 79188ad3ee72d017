#pragma once

#include "introspect/lens.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace introspect {

struct lexicon_entry {
    std::vector<std::string> exact;    // lowercase-normalized English forms
    std::vector<std::string> synonyms; // disjoint from exact
};

struct lexicon {
    std::string language; // target language the entry keys belong to
    std::map<std::string, lexicon_entry> entries;
    std::vector<std::string> flagged_terms;
};

struct word_span {
    std::string surface;
    std::size_t start = 0; // half-open range; grid columns for annotations,
    std::size_t end = 0;   // byte offsets for segmenter output
    std::string pos_tag;   // universal POS label, empty when unannotated
};

struct segmenter {
    enum class mode_t { whitespace, dictionary };
    mode_t mode = mode_t::whitespace;
    std::vector<std::string> dictionary; // required for dictionary mode

    static segmenter whitespace() { return {}; }
    static segmenter with_dictionary(std::vector<std::string> words);
};

// Whitespace mode splits on whitespace and strips edge punctuation;
// dictionary mode greedily takes the longest dictionary word, with single
// codepoints as fallback. Spans are byte offsets into `text`.
std::vector<word_span> segment_words(const std::string & text, const segmenter & seg);

// Lowercases ASCII and strips edge whitespace/punctuation; the normal form
// used for every lexicon comparison.
std::string normalize_form(const std::string & s);

struct routing_verdict {
    bool routed = false;
    bool homograph = false;
    int score = 1; // 1, 4 or 5
    std::optional<std::string> matched_token;
    std::optional<std::string> matched_form;
    std::optional<std::size_t> matched_layer;
    std::optional<std::size_t> matched_column;
    // Earliest column before the word where its English form already shows up
    // (advance planning); metadata only, never affects the buckets.
    std::optional<std::size_t> advance_column;
};

struct layer_range {
    std::size_t lo = 0;
    std::size_t hi = static_cast<std::size_t>(-1); // clamped to the grid
};

// Examines the lens cells in the word's own prediction columns. A decoded
// token scores 5 on an exact-form hit, 4 on a synonym or a >=3-char prefix
// of an exact form. routed: some hit's form differs from the word itself;
// homograph: hits exist but every hitting form equals the word's surface.
routing_verdict classify_word_routing(const word_span & word, const lens_grid & grid,
                                      const lexicon & lex, const layer_range & layers);

struct routing_bucket {
    std::size_t n_words = 0;
    std::size_t n_routed = 0;
    std::size_t n_homograph = 0;
    double proportion = 0.0; // n_routed / n_words
    double std_error = 0.0;  // sqrt(p (1-p) / n)
};

struct routing_report {
    std::map<std::string, routing_bucket> per_pos;
    routing_bucket overall;
};

struct routing_run {
    const lens_grid * grid = nullptr;
    std::vector<word_span> words; // every word needs a POS tag
};

routing_report make_routing_report(const std::vector<routing_run> & runs, const lexicon & lex,
                                   const layer_range & layers);

struct flagged_report {
    std::size_t matched_cells = 0;
    std::size_t total_cells = 0;
    double percentage = 0.0;
};

// Percentage of cells whose top-1 token exactly matches a flagged term.
flagged_report make_flagged_report(const std::vector<const lens_grid *> & grids,
                                   const std::vector<std::string> & flagged_terms);

} // namespace introspect
