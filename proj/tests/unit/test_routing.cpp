#include <doctest.h>

#include "introspect/errors.hpp"
#include "introspect/routing.hpp"

#include <cmath>

using namespace introspect;

namespace {

// grid filled with unique junk tokens nothing in the lexicon matches
lens_grid make_grid(std::size_t n_rows, std::size_t n_cols, std::size_t k = 2) {
    lens_grid g;
    g.k = k;
    g.prompt_len = 1;
    g.bundle_hash = "feedfeedfeedfeed";
    g.cells.assign(n_rows, std::vector<lens_cell>(n_cols));
    std::uint32_t id = 0;
    for (std::size_t l = 0; l < n_rows; ++l)
        for (std::size_t c = 0; c < n_cols; ++c) {
            auto & cell = g.cells[l][c];
            cell.layer = l;
            cell.column = c;
            for (std::size_t i = 0; i < k; ++i)
                cell.top.push_back({id, "junk" + std::to_string(id++), 0.5 / (i + 1.0)});
        }
    for (std::size_t c = 0; c < n_cols; ++c) g.column_tokens.push_back("t" + std::to_string(c));
    return g;
}

void plant(lens_grid & g, std::size_t layer, std::size_t col, const std::string & token) {
    g.cells[layer][col].top[0].token = token;
}

lexicon dutch_lexicon() {
    lexicon lex;
    lex.language = "dutch";
    lex.entries["water"] = {{"water"}, {}};
    lex.entries["hond"] = {{"dog"}, {}};
    lex.entries["kat"] = {{"cat"}, {}};
    lex.entries["boom"] = {{"tree"}, {}};
    lex.entries["huis"] = {{"house"}, {"home"}};
    lex.entries["brood"] = {{"bread"}, {}};
    lex.entries["goede"] = {{"good"}, {}};
    lex.entries["eau"] = {{"water"}, {}};
    lex.flagged_terms = {"zulu", "yankee"};
    return lex;
}

} // namespace

TEST_CASE("segment_words") {
    SUBCASE("whitespace splits the paper's Dutch prompt into 4 words") {
        const auto words = segment_words("Ze telen hun eigen", segmenter::whitespace());
        REQUIRE(words.size() == 4);
        CHECK(words[0].surface == "Ze");
        CHECK(words[3].surface == "eigen");
    }
    SUBCASE("whitespace strips edge punctuation and keeps offsets") {
        const auto words = segment_words("  They adopted a cat.  ", segmenter::whitespace());
        REQUIRE(words.size() == 4);
        CHECK(words[3].surface == "cat");
        CHECK(words[3].start == 17);
        CHECK(words[3].end == 20);
    }
    SUBCASE("empty input gives an empty list") {
        CHECK(segment_words("", segmenter::whitespace()).empty());
        CHECK(segment_words("...", segmenter::whitespace()).empty());
    }
    SUBCASE("dictionary mode prefers the longest word") {
        const auto seg = segmenter::with_dictionary({"水果", "水"});
        const auto words = segment_words("水果", seg);
        REQUIRE(words.size() == 1);
        CHECK(words[0].surface == "水果");
    }
    SUBCASE("dictionary fallback is a single codepoint") {
        const auto seg = segmenter::with_dictionary({"水果"});
        const auto words = segment_words("水果园", seg);
        REQUIRE(words.size() == 2);
        CHECK(words[0].surface == "水果");
        CHECK(words[1].surface == "园");
    }
    SUBCASE("dictionary mode requires a word list") {
        CHECK_THROWS_AS(segment_words("abc", segmenter::with_dictionary({})),
                        validation_error);
    }
}

TEST_CASE("classify_word_routing") {
    auto lex = dutch_lexicon();
    auto grid = make_grid(4, 6);

    SUBCASE("exact English form routes with score 5") {
        plant(grid, 2, 0, " dog");
        const auto v = classify_word_routing({"hond", 0, 1, "NOUN"}, grid, lex, {});
        CHECK(v.routed);
        CHECK_FALSE(v.homograph);
        CHECK(v.score == 5);
        CHECK(v.matched_token == "dog");
        CHECK(v.matched_layer == 2);
    }
    SUBCASE("a homograph surface fills the homograph bucket, not routed") {
        plant(grid, 2, 1, "water");
        const auto v = classify_word_routing({"water", 1, 2, "NOUN"}, grid, lex, {});
        CHECK_FALSE(v.routed);
        CHECK(v.homograph);
        CHECK(v.score == 5);
    }
    SUBCASE("no lexicon hits means score 1") {
        const auto v = classify_word_routing({"vis", 2, 3, "NOUN"}, grid, lex, {});
        CHECK_FALSE(v.routed);
        CHECK_FALSE(v.homograph);
        CHECK(v.score == 1);
        CHECK_FALSE(v.matched_token.has_value());
    }
    SUBCASE("synonym scores 4") {
        plant(grid, 1, 2, "home");
        const auto v = classify_word_routing({"huis", 2, 3, "NOUN"}, grid, lex, {});
        CHECK(v.routed);
        CHECK(v.score == 4);
        CHECK(v.matched_form == "home");
    }
    SUBCASE("a >=3-char prefix of an exact form scores 4") {
        plant(grid, 3, 2, " tre");
        const auto v = classify_word_routing({"boom", 2, 3, "NOUN"}, grid, lex, {});
        CHECK(v.routed);
        CHECK(v.score == 4);
        CHECK(v.matched_form == "tree");
    }
    SUBCASE("a 2-char fragment does not match") {
        plant(grid, 3, 2, "tr");
        const auto v = classify_word_routing({"boom", 2, 3, "NOUN"}, grid, lex, {});
        CHECK_FALSE(v.routed);
        CHECK(v.score == 1);
    }
    SUBCASE("matching is case-insensitive with edge punctuation ignored") {
        plant(grid, 1, 4, " Dog,");
        const auto v = classify_word_routing({"hond", 4, 5, "NOUN"}, grid, lex, {});
        CHECK(v.routed);
    }
    SUBCASE("the French eau -> water example routes") {
        plant(grid, 2, 3, " water");
        const auto v = classify_word_routing({"eau", 3, 4, "NOUN"}, grid, lex, {});
        CHECK(v.routed);
        CHECK(v.score == 5);
    }
    SUBCASE("layer range restricts the scan") {
        plant(grid, 0, 5, " dog");
        CHECK(classify_word_routing({"hond", 5, 6, "NOUN"}, grid, lex, {0, 3}).routed);
        CHECK_FALSE(classify_word_routing({"hond", 5, 6, "NOUN"}, grid, lex, {1, 3}).routed);
    }
    SUBCASE("enlarging the layer range never un-routes a word") {
        plant(grid, 1, 0, " dog");
        plant(grid, 3, 0, "hond"); // higher-layer junk that matches nothing
        for (std::size_t hi = 0; hi < 4; ++hi) {
            const bool narrow =
                classify_word_routing({"hond", 0, 1, "NOUN"}, grid, lex, {0, hi}).routed;
            const bool wide =
                classify_word_routing({"hond", 0, 1, "NOUN"}, grid, lex, {0, hi + 1}).routed;
            REQUIRE((narrow ? wide : true)); // routed is monotone in the range
        }
    }
    SUBCASE("genuine evidence wins over a homograph hit of the same word") {
        lex.entries["water"].synonyms = {"aqua"};
        plant(grid, 1, 5, "water");
        plant(grid, 2, 5, "aqua");
        const auto v = classify_word_routing({"water", 5, 6, "NOUN"}, grid, lex, {});
        CHECK(v.routed);
        CHECK_FALSE(v.homograph);
    }
    SUBCASE("advance planning shows up as metadata only") {
        plant(grid, 2, 0, " dog");
        const auto v = classify_word_routing({"hond", 3, 4, "NOUN"}, grid, lex, {});
        CHECK_FALSE(v.routed);
        REQUIRE(v.advance_column.has_value());
        CHECK(*v.advance_column == 0);
    }
    SUBCASE("a word outside the grid is rejected") {
        CHECK_THROWS_WITH_AS(classify_word_routing({"hond", 5, 9, "NOUN"}, grid, lex, {}),
                             doctest::Contains("outside"), validation_error);
    }
}

TEST_CASE("routing_report on the 10-word fixture") {
    const auto lex = dutch_lexicon();
    auto grid = make_grid(4, 12);
    plant(grid, 2, 0, " dog");   // hond    NOUN routed
    plant(grid, 1, 1, "cat");    // kat     NOUN routed
    plant(grid, 2, 2, "water");  // water   NOUN homograph
    plant(grid, 3, 3, "tre");    // boom    NOUN routed (prefix)
    plant(grid, 1, 4, "home");   // huis    NOUN routed (synonym)
    plant(grid, 0, 5, "bread");  // brood   NOUN routed
    plant(grid, 2, 6, "good");   // goede   ADJ  routed
    // en / de / vis stay unmatched
    routing_run run;
    run.grid = &grid;
    run.words = {
        {"hond", 0, 1, "NOUN"}, {"kat", 1, 2, "NOUN"},  {"water", 2, 3, "NOUN"},
        {"boom", 3, 4, "NOUN"}, {"huis", 4, 5, "NOUN"}, {"brood", 5, 6, "NOUN"},
        {"goede", 6, 7, "ADJ"}, {"en", 7, 8, "CCONJ"},  {"de", 8, 9, "DET"},
        {"vis", 9, 10, "NOUN"},
    };

    const auto rep = make_routing_report({run}, lex, {});

    SUBCASE("overall matches the planted counts") {
        CHECK(rep.overall.n_words == 10);
        CHECK(rep.overall.n_routed == 6);
        CHECK(rep.overall.n_homograph == 1);
        CHECK(rep.overall.proportion == doctest::Approx(0.6).epsilon(1e-12));
        CHECK(rep.overall.std_error == doctest::Approx(std::sqrt(0.024)).epsilon(1e-12));
    }
    SUBCASE("per-POS counts sum to the overall counts") {
        std::size_t words = 0, routed = 0, homograph = 0;
        for (const auto & [pos, b] : rep.per_pos) {
            words += b.n_words;
            routed += b.n_routed;
            homograph += b.n_homograph;
        }
        CHECK(words == rep.overall.n_words);
        CHECK(routed == rep.overall.n_routed);
        CHECK(homograph == rep.overall.n_homograph);
        CHECK(rep.per_pos.at("NOUN").n_words == 7);
        CHECK(rep.per_pos.at("NOUN").n_routed == 5);
        CHECK(rep.per_pos.at("NOUN").n_homograph == 1);
        CHECK(rep.per_pos.at("ADJ").n_routed == 1);
        CHECK(rep.per_pos.at("CCONJ").n_routed == 0);
    }
    SUBCASE("zero words give an empty report without dividing by zero") {
        routing_run empty;
        empty.grid = &grid;
        const auto r = make_routing_report({empty}, lex, {});
        CHECK(r.overall.n_words == 0);
        CHECK(r.overall.proportion == 0.0);
        CHECK(r.per_pos.empty());
    }
    SUBCASE("an all-homograph run keeps the buckets exclusive") {
        auto g2 = make_grid(4, 2);
        plant(g2, 1, 0, "water");
        plant(g2, 2, 1, "water");
        routing_run r2;
        r2.grid = &g2;
        r2.words = {{"water", 0, 1, "NOUN"}, {"water", 1, 2, "NOUN"}};
        const auto r = make_routing_report({r2}, lex, {});
        CHECK(r.overall.proportion == 0.0);
        CHECK(r.overall.n_homograph == 2);
    }
    SUBCASE("a word without a POS tag is a named error") {
        routing_run bad;
        bad.grid = &grid;
        bad.words = {{"hond", 0, 1, ""}};
        CHECK_THROWS_WITH_AS(make_routing_report({bad}, lex, {}),
                             doctest::Contains("hond"), validation_error);
    }
}

TEST_CASE("flagged_term_report") {
    const auto lex = dutch_lexicon();
    auto grid = make_grid(4, 12); // wait: sized below for the 50-cell case
    SUBCASE("counted fixture: 2 matching cells of 50 is exactly 4 percent") {
        auto g = make_grid(5, 10);
        plant(g, 0, 0, "zulu");
        plant(g, 4, 9, " Yankee");
        const auto rep = make_flagged_report({&g}, lex.flagged_terms);
        CHECK(rep.total_cells == 50);
        CHECK(rep.matched_cells == 2);
        CHECK(rep.percentage == doctest::Approx(4.0).epsilon(1e-12));
    }
    SUBCASE("no matches is 0") {
        const auto rep = make_flagged_report({&grid}, lex.flagged_terms);
        CHECK(rep.matched_cells == 0);
        CHECK(rep.percentage == 0.0);
    }
    SUBCASE("matching is case-insensitive after normalization") {
        auto g = make_grid(2, 2);
        plant(g, 0, 0, "ZuLu");
        CHECK(make_flagged_report({&g}, lex.flagged_terms).matched_cells == 1);
    }
    SUBCASE("only the top-1 token counts") {
        auto g = make_grid(2, 2);
        g.cells[0][0].top[1].token = "zulu"; // rank 2, ignored
        CHECK(make_flagged_report({&g}, lex.flagged_terms).matched_cells == 0);
    }
    SUBCASE("an absent term list is an error") {
        CHECK_THROWS_AS(make_flagged_report({&grid}, {}), validation_error);
    }
}
