#include <doctest.h>

#include "introspect/bundle_io.hpp"
#include "introspect/datasets.hpp"
#include "introspect/errors.hpp"
#include "introspect/heatmap.hpp"
#include "introspect/report.hpp"
#include "introspect/tokenizer.hpp"

#include "../support/test_util.hpp"

#include <filesystem>
#include <fstream>

using namespace introspect;

namespace {
const std::string FIX = INTROSPECT_FIXTURE_DIR;
std::string fixture(const std::string & leaf) { return FIX + "/" + leaf; }
} // namespace

TEST_CASE("load_insight accepts the bundled fixture") {
    const auto ds = load_insight(fixture("insight_toy.json"));
    REQUIRE(ds.entries.size() == 4);
    CHECK(ds.languages == std::vector<std::string>{"english", "dutch"});

    SUBCASE("pair good <-> bad resolves symmetrically") {
        const auto & good = ds.entry("good");
        CHECK(good.pair_id == "bad");
        const auto negs = ds.negative_sentences(good, "english");
        CHECK(negs == ds.entry("bad").languages.at("english").sentences);
    }
    SUBCASE("counter-set words get the shared sentences attached") {
        const auto & thermo = ds.entry("thermodynamics");
        REQUIRE(thermo.uses_counter_set);
        REQUIRE(thermo.counter_sentences.count("dutch") == 1);
        CHECK(thermo.counter_sentences.at("dutch") == ds.counter_sentences.at("dutch"));
        CHECK(ds.negative_sentences(thermo, "english") == ds.counter_sentences.at("english"));
    }
    SUBCASE("every record carries exactly 10 sentences and 10 prompts") {
        for (const auto & e : ds.entries)
            for (const auto & [lang, rec] : e.languages) {
                REQUIRE(rec.sentences.size() == 10);
                REQUIRE(rec.prompts.size() == 10);
            }
    }
}

TEST_CASE("load_facts and probe construction") {
    const auto ds = load_facts(fixture("facts_toy.json"));
    REQUIRE(ds.entries.size() == 3);

    SUBCASE("the Canada entry matches the documented example") {
        const auto & canada = ds.entry("canada");
        const auto [prompt, span] = fact_prompt(canada, "english");
        CHECK(prompt == "The capital of Canada is");
        CHECK(prompt.substr(span.first, span.second - span.first) == "Canada");
        CHECK(canada.languages.at("english").answers == std::vector<std::string>{"Ottawa"});
    }
    SUBCASE("the subject span resolves to the country token") {
        const auto bundle = make_fact_bundle(2024);
        const auto probe = make_fact_probe(bundle, ds.entry("canada"), "english");
        const auto tokens = tokenize(bundle, probe.prompt);
        REQUIRE(probe.subject_end == probe.subject_begin + 1);
        CHECK(bundle.vocab[tokens.ids[probe.subject_begin]] == " Canada");
        CHECK(bundle.vocab[probe.answer_token] == " Ottawa");
    }
    SUBCASE("dutch France uses its own surface") {
        const auto [prompt, span] = fact_prompt(ds.entry("france"), "dutch");
        CHECK(prompt == "De hoofdstad van Frankrijk is");
        CHECK(prompt.substr(span.first, span.second - span.first) == "Frankrijk");
    }
}

TEST_CASE("load_lexicon normalizes and round-trips") {
    const auto lex = load_lexicon(fixture("lexicon_fr.json"));
    CHECK(lex.language == "french");
    REQUIRE(lex.entries.count("eau") == 1);
    CHECK(lex.entries.at("eau").exact == std::vector<std::string>{"water"});

    SUBCASE("load/serialize/load is the identity") {
        testutil::temp_dir tmp("lexicon_rt");
        write_lexicon(lex, tmp.path("lex.json"));
        const auto again = load_lexicon(tmp.path("lex.json"));
        CHECK(again.language == lex.language);
        REQUIRE(again.entries.size() == lex.entries.size());
        for (const auto & [word, entry] : lex.entries) {
            REQUIRE(again.entries.count(word) == 1);
            CHECK(again.entries.at(word).exact == entry.exact);
            CHECK(again.entries.at(word).synonyms == entry.synonyms);
        }
        // and the serialized bytes are stable
        write_lexicon(again, tmp.path("lex2.json"));
        std::ifstream a(tmp.path("lex.json")), b(tmp.path("lex2.json"));
        const std::string sa((std::istreambuf_iterator<char>(a)), {});
        const std::string sb((std::istreambuf_iterator<char>(b)), {});
        CHECK(sa == sb);
    }
    SUBCASE("forms are lowercase-normalized at load") {
        const auto nl = load_lexicon(fixture("lexicon_nl.json"));
        for (const auto & [word, entry] : nl.entries)
            for (const auto & f : entry.exact)
                for (char c : f) REQUIRE_FALSE(std::isupper(static_cast<unsigned char>(c)));
    }
}

TEST_CASE("wordlists and annotations load") {
    const auto wl = load_wordlist(fixture("wordlist_en.json"));
    CHECK(wl.label == "english");
    CHECK(wl.words.size() == 12);

    const auto ann = load_annotations(fixture("annotations_toy.json"));
    REQUIRE(ann.size() == 2);
    CHECK(ann[0].surface == "Parijs");
    CHECK(ann[0].pos_tag == "PROPN");
    CHECK(ann[0].start == 0);
    CHECK(ann[0].end == 1);
}

TEST_CASE("every malformed fixture is rejected with a named error") {
    const std::string dir = fixture("malformed");
    // file -> validator that should reject it
    const std::vector<std::pair<std::string, void (*)(const std::string &)>> cases = {
        {"insight_9prompts.json", [](const std::string & p) { load_insight(p); }},
        {"insight_missing_form.json", [](const std::string & p) { load_insight(p); }},
        {"insight_asym_pair.json", [](const std::string & p) { load_insight(p); }},
        {"insight_both_pair_and_counter.json",
         [](const std::string & p) { load_insight(p); }},
        {"insight_no_counter_for_lang.json",
         [](const std::string & p) { load_insight(p); }},
        {"insight_missing_language.json", [](const std::string & p) { load_insight(p); }},
        {"insight_wrong_kind.json", [](const std::string & p) { load_insight(p); }},
        {"facts_missing_answer.json", [](const std::string & p) { load_facts(p); }},
        {"facts_bad_template.json", [](const std::string & p) { load_facts(p); }},
        {"facts_two_slots.json", [](const std::string & p) { load_facts(p); }},
        {"lexicon_overlap.json", [](const std::string & p) { load_lexicon(p); }},
        {"lexicon_dup.json", [](const std::string & p) { load_lexicon(p); }},
        {"lexicon_no_language.json", [](const std::string & p) { load_lexicon(p); }},
        {"wordlist_empty.json", [](const std::string & p) { load_wordlist(p); }},
        {"annotations_no_pos.json", [](const std::string & p) { load_annotations(p); }},
        {"annotations_empty_span.json", [](const std::string & p) { load_annotations(p); }},
        {"report_unknown_kind.json", [](const std::string & p) { read_report(p); }},
        {"report_missing_hash.json", [](const std::string & p) { read_report(p); }},
        {"report_bad_version.json", [](const std::string & p) { read_report(p); }},
    };
    REQUIRE(cases.size() >= 12);
    for (const auto & [leaf, fn] : cases) {
        INFO("fixture: " << leaf);
        REQUIRE(std::filesystem::exists(dir + "/" + leaf));
        CHECK_THROWS_AS(fn(dir + "/" + leaf), validation_error);
    }
}

TEST_CASE("report read/write round-trip") {
    testutil::temp_dir tmp("report_rt");
    report r;
    r.kind = "geometry";
    r.metadata = {{"bundle_hash", "abcd"}, {"command", "geometry"},
                  {"args", {{"beta", 1.0}}}, {"seeds", nlohmann::json::array()}};
    r.payload = geometry_payload({{0.5}, std::nullopt, {1.0}}, nullptr, 0.0);

    SUBCASE("round-trip equality and byte stability") {
        write_report(r, tmp.path("r.json"));
        const auto back = read_report(tmp.path("r.json"));
        CHECK(back == r);
        write_report(back, tmp.path("r2.json"));
        std::ifstream a(tmp.path("r.json")), b(tmp.path("r2.json"));
        const std::string sa((std::istreambuf_iterator<char>(a)), {});
        const std::string sb((std::istreambuf_iterator<char>(b)), {});
        CHECK(sa == sb);
    }
    SUBCASE("undefined cosine layers serialize as null, not 0") {
        CHECK(r.payload["cosine"][1].is_null());
        CHECK(r.payload["cosine"][0].get<double>() == 0.5);
    }
    SUBCASE("unknown kind and missing hash are rejected at write time too") {
        report bad = r;
        bad.kind = "mystery";
        CHECK_THROWS_AS(report_to_string(bad), validation_error);
        bad = r;
        bad.metadata.erase("bundle_hash");
        CHECK_THROWS_AS(report_to_string(bad), validation_error);
    }
}

TEST_CASE("lens and trace payloads survive the render path") {
    const auto bundle = testutil::toy_bundle(101);
    const auto gen = generate(bundle, "The sun", 4);
    const auto grid = make_lens_grid(bundle, gen, 3);

    const auto payload = lens_payload(grid, gen.prompt_text, gen.generated_text,
                                      {{1, 0, "english-match"}});
    const auto data = lens_from_payload(payload);
    REQUIRE(data.grid.n_rows() == grid.n_rows());
    REQUIRE(data.grid.n_cols() == grid.n_cols());
    CHECK(data.highlights.size() == 1);
    CHECK(data.grid.cells[2][1].top[0].token == grid.cells[2][1].top[0].token);

    SUBCASE("probabilities are rounded to 6 decimals in the payload") {
        for (const auto & row : payload["rows"])
            for (const auto & cell : row)
                for (const auto & e : cell) {
                    const double p = e["p"].get<double>();
                    CHECK(p == doctest::Approx(std::round(p * 1e6) / 1e6).epsilon(1e-15));
                }
    }
}

TEST_CASE("heatmap rendering is deterministic and structured") {
    const auto bundle = testutil::toy_bundle(102);
    const auto gen = generate(bundle, "The sun", 5);
    const auto grid = make_lens_grid(bundle, gen, 2);
    lens_render_data data;
    data.grid = grid;
    data.prompt = gen.prompt_text;
    data.generated = gen.generated_text;
    data.highlights = {{1, 0, "english-match"}, {0, 1, "flagged"}};

    render_options opt;
    SUBCASE("same input renders byte-identical SVG") {
        CHECK(render_lens_svg(data, opt) == render_lens_svg(data, opt));
    }
    SUBCASE("a 5x6-style grid draws one rect per cell") {
        const auto svg = render_lens_svg(data, opt);
        std::size_t rects = 0;
        for (std::size_t pos = svg.find("<rect"); pos != std::string::npos;
             pos = svg.find("<rect", pos + 1))
            ++rects;
        CHECK(rects == grid.n_rows() * grid.n_cols());
        CHECK(svg.find("english-match") != std::string::npos);
    }
    SUBCASE("flagged cells are masked when the option is set") {
        const auto plain = render_lens_svg(data, opt);
        render_options masked = opt;
        masked.mask_flagged = true;
        const auto hidden = render_lens_svg(data, masked);
        CHECK(plain != hidden);
        // the masked cell's token text is absent from the masked render
        const auto & tok = grid.cells[0][1].top[0].token;
        (void)tok;
        CHECK(hidden.find("class=\"flagged\"") != std::string::npos);
    }
    SUBCASE("trace SVG renders and is deterministic") {
        trace_grid_result tg;
        tg.aie = mat(3, 4);
        tg.aie.at(0, 1) = 0.8;
        tg.aie.at(2, 3) = -0.5;
        tg.p_clean = 0.9;
        tg.p_corrupted_mean = 0.1;
        tg.sigma = 1.5;
        tg.n_seeds = 4;
        tg.probe.prompt = "The capital of Canada is";
        tg.probe.subject_begin = 1;
        tg.probe.subject_end = 2;
        tg.prompt_tokens = {"The", " capital", " of", " Canada"};
        const auto svg = render_trace_svg(tg, opt);
        CHECK(svg == render_trace_svg(tg, opt));
        CHECK(svg.find("#ff3333") != std::string::npos); // 0.8 -> red shade
        CHECK(svg.find("p_clean=0.900000") != std::string::npos);
    }
    SUBCASE("empty grids are rejected") {
        lens_render_data empty;
        CHECK_THROWS_AS(render_lens_svg(empty, opt), validation_error);
    }
}

TEST_CASE("bundle files round-trip byte-lossless through load/write") {
    testutil::temp_dir tmp("bundle_bytes");
    const auto bundle = make_fact_bundle(5);
    write_bundle(bundle, tmp.path("b1"));
    const auto loaded = load_bundle(tmp.path("b1"));
    write_bundle(loaded, tmp.path("b2"));
    for (const char * f : {"config.json", "vocab.json", "weights.bin"}) {
        std::ifstream a(tmp.path("b1") + "/" + f, std::ios::binary);
        std::ifstream b(tmp.path("b2") + "/" + f, std::ios::binary);
        const std::string sa((std::istreambuf_iterator<char>(a)), {});
        const std::string sb((std::istreambuf_iterator<char>(b)), {});
        REQUIRE(sa == sb);
    }
}
