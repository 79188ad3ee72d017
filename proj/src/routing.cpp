#include "introspect/routing.hpp"

#include "introspect/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace introspect {

namespace {

bool is_edge_trim(unsigned char c) {
    return std::isspace(c) || std::ispunct(c);
}

std::size_t codepoint_len(unsigned char lead) {
    if (lead < 0x80) return 1;
    if ((lead >> 5) == 0x6) return 2;
    if ((lead >> 4) == 0xe) return 3;
    if ((lead >> 3) == 0x1e) return 4;
    return 1; // stray continuation byte: step one byte
}

} // namespace

std::string normalize_form(const std::string & s) {
    std::size_t b = 0, e = s.size();
    while (b < e && is_edge_trim(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && is_edge_trim(static_cast<unsigned char>(s[e - 1]))) --e;
    std::string out = s.substr(b, e - b);
    for (auto & c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

segmenter segmenter::with_dictionary(std::vector<std::string> words) {
    segmenter s;
    s.mode = mode_t::dictionary;
    s.dictionary = std::move(words);
    return s;
}

std::vector<word_span> segment_words(const std::string & text, const segmenter & seg) {
    std::vector<word_span> out;

    if (seg.mode == segmenter::mode_t::whitespace) {
        std::size_t i = 0;
        while (i < text.size()) {
            while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
            std::size_t j = i;
            while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
            if (j > i) {
                std::size_t b = i, e = j;
                while (b < e && std::ispunct(static_cast<unsigned char>(text[b]))) ++b;
                while (e > b && std::ispunct(static_cast<unsigned char>(text[e - 1]))) --e;
                if (e > b) out.push_back({text.substr(b, e - b), b, e, ""});
            }
            i = j;
        }
        return out;
    }

    if (seg.dictionary.empty())
        throw validation_error("segment_words: dictionary mode needs a non-empty word list");
    // longest first so the greedy scan can stop at the first hit
    std::vector<const std::string *> dict;
    for (const auto & w : seg.dictionary)
        if (!w.empty()) dict.push_back(&w);
    std::sort(dict.begin(), dict.end(), [](const std::string * a, const std::string * b) {
        if (a->size() != b->size()) return a->size() > b->size();
        return *a < *b;
    });

    std::size_t i = 0;
    while (i < text.size()) {
        if (std::isspace(static_cast<unsigned char>(text[i]))) {
            ++i;
            continue;
        }
        std::size_t matched = 0;
        for (const std::string * w : dict) {
            if (w->size() <= text.size() - i && text.compare(i, w->size(), *w) == 0) {
                matched = w->size();
                break;
            }
        }
        if (matched == 0) matched = codepoint_len(static_cast<unsigned char>(text[i]));
        out.push_back({text.substr(i, matched), i, i + matched, ""});
        i += matched;
    }
    return out;
}

routing_verdict classify_word_routing(const word_span & word, const lens_grid & grid,
                                      const lexicon & lex, const layer_range & layers) {
    if (word.start >= word.end || word.end > grid.n_cols())
        throw validation_error("classify_word_routing: word '" + word.surface +
                               "' spans columns [" + std::to_string(word.start) + ", " +
                               std::to_string(word.end) + ") outside a grid with " +
                               std::to_string(grid.n_cols()) + " columns");

    routing_verdict verdict;
    const std::string surface = normalize_form(word.surface);
    const auto entry_it = lex.entries.find(surface);
    if (entry_it == lex.entries.end()) return verdict;
    const lexicon_entry & entry = entry_it->second;

    const std::size_t lo = layers.lo;
    const std::size_t hi = std::min(layers.hi, grid.n_rows() - 1);
    if (lo > hi)
        throw validation_error("classify_word_routing: empty layer range");

    // (score, form) for one decoded token, or score 0 when it misses
    auto match_token = [&](const std::string & raw) -> std::pair<int, std::string> {
        const std::string tok = normalize_form(raw);
        if (tok.empty()) return {0, ""};
        for (const auto & f : entry.exact)
            if (tok == f) return {5, f};
        for (const auto & f : entry.synonyms)
            if (tok == f) return {4, f};
        if (tok.size() >= 3)
            for (const auto & f : entry.exact)
                if (f.size() > tok.size() && f.compare(0, tok.size(), tok) == 0)
                    return {4, f};
        return {0, ""};
    };

    bool saw_homograph = false;
    std::optional<std::string> homograph_token;
    std::optional<std::size_t> homograph_layer, homograph_column;

    for (std::size_t l = lo; l <= hi; ++l) {
        for (std::size_t c = word.start; c < word.end; ++c) {
            for (const lens_entry & e : grid.cells[l][c].top) {
                const auto [score, form] = match_token(e.token);
                if (score == 0) continue;
                verdict.score = std::max(verdict.score, score);
                if (form == surface) {
                    if (!saw_homograph) {
                        saw_homograph = true;
                        homograph_token = normalize_form(e.token);
                        homograph_layer = l;
                        homograph_column = c;
                    }
                } else if (!verdict.routed) {
                    verdict.routed = true;
                    verdict.matched_token = normalize_form(e.token);
                    verdict.matched_form = form;
                    verdict.matched_layer = l;
                    verdict.matched_column = c;
                }
            }
        }
    }
    if (!verdict.routed && saw_homograph) {
        verdict.homograph = true;
        verdict.matched_token = homograph_token;
        verdict.matched_form = surface;
        verdict.matched_layer = homograph_layer;
        verdict.matched_column = homograph_column;
    }

    // advance-planning metadata: same matcher over the columns before the word
    for (std::size_t c = 0; c < word.start && !verdict.advance_column; ++c)
        for (std::size_t l = lo; l <= hi && !verdict.advance_column; ++l)
            for (const lens_entry & e : grid.cells[l][c].top) {
                const auto [score, form] = match_token(e.token);
                if (score >= 4 && form != surface) {
                    verdict.advance_column = c;
                    break;
                }
            }
    return verdict;
}

routing_report make_routing_report(const std::vector<routing_run> & runs, const lexicon & lex,
                                   const layer_range & layers) {
    routing_report report;

    auto finish = [](routing_bucket & b) {
        if (b.n_words == 0) return;
        const double p = static_cast<double>(b.n_routed) / static_cast<double>(b.n_words);
        b.proportion = p;
        b.std_error = std::sqrt(p * (1.0 - p) / static_cast<double>(b.n_words));
    };

    for (const auto & run : runs) {
        if (run.grid == nullptr) throw validation_error("routing_report: run without a grid");
        for (const auto & word : run.words) {
            if (word.pos_tag.empty())
                throw validation_error("routing_report: word '" + word.surface +
                                       "' has no POS annotation");
            const routing_verdict v = classify_word_routing(word, *run.grid, lex, layers);
            auto & bucket = report.per_pos[word.pos_tag];
            bucket.n_words += 1;
            report.overall.n_words += 1;
            if (v.routed) {
                bucket.n_routed += 1;
                report.overall.n_routed += 1;
            } else if (v.homograph) {
                bucket.n_homograph += 1;
                report.overall.n_homograph += 1;
            }
        }
    }
    for (auto & [pos, bucket] : report.per_pos) finish(bucket);
    finish(report.overall);
    return report;
}

flagged_report make_flagged_report(const std::vector<const lens_grid *> & grids,
                                   const std::vector<std::string> & flagged_terms) {
    if (flagged_terms.empty())
        throw validation_error("flagged_term_report: flagged term list is absent");
    std::vector<std::string> flagged;
    for (const auto & t : flagged_terms) flagged.push_back(normalize_form(t));

    flagged_report rep;
    for (const lens_grid * grid : grids) {
        if (grid == nullptr) throw validation_error("flagged_term_report: null grid");
        for (const auto & row : grid->cells) {
            for (const auto & cell : row) {
                rep.total_cells += 1;
                if (cell.top.empty()) continue;
                const std::string top = normalize_form(cell.top[0].token);
                if (std::find(flagged.begin(), flagged.end(), top) != flagged.end())
                    rep.matched_cells += 1;
            }
        }
    }
    if (rep.total_cells > 0)
        rep.percentage = 100.0 * static_cast<double>(rep.matched_cells) /
                         static_cast<double>(rep.total_cells);
    return rep;
}

} // namespace introspect
