#include "introspect/datasets.hpp"

#include "introspect/errors.hpp"
#include "introspect/tokenizer.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>

namespace introspect {

using nlohmann::json;

namespace {

json read_json(const std::string & path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception & e) {
        throw validation_error(path + ": " + e.what());
    }
    return j;
}

void require_kind(const json & j, const std::string & kind, const std::string & path) {
    if (j.value("version", 0) != 1)
        throw validation_error(path + ": unsupported or missing version");
    if (j.value("kind", "") != kind)
        throw validation_error(path + ": expected kind '" + kind + "', got '" +
                               j.value("kind", "") + "'");
}

std::vector<std::string> string_array(const json & j, const std::string & where) {
    if (!j.is_array()) throw validation_error(where + ": expected an array of strings");
    std::vector<std::string> out;
    for (const auto & e : j) {
        if (!e.is_string()) throw validation_error(where + ": expected an array of strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

std::string lower(std::string s) {
    for (auto & c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

bool contains_ci(const std::string & haystack, const std::string & needle) {
    return !needle.empty() && lower(haystack).find(lower(needle)) != std::string::npos;
}

} // namespace

// ---- insight ----

const insight_entry & insight_dataset::entry(const std::string & word_id) const {
    for (const auto & e : entries)
        if (e.word_id == word_id) return e;
    throw validation_error("insight: unknown word '" + word_id + "'");
}

std::vector<std::string> insight_dataset::negative_sentences(const insight_entry & e,
                                                             const std::string & language) const {
    if (!e.pair_id.empty()) {
        const insight_entry & pair = entry(e.pair_id);
        auto it = pair.languages.find(language);
        if (it == pair.languages.end())
            throw validation_error("insight: pair word '" + e.pair_id + "' has no language '" +
                                   language + "'");
        return it->second.sentences;
    }
    auto it = e.counter_sentences.find(language);
    if (it == e.counter_sentences.end())
        throw validation_error("insight: word '" + e.word_id +
                               "' has no counter sentences for language '" + language + "'");
    return it->second;
}

insight_dataset load_insight(const std::string & path) {
    const json j = read_json(path);
    require_kind(j, "insight", path);

    insight_dataset ds;
    ds.languages = string_array(j.value("languages", json::array()), path + ": languages");
    if (ds.languages.empty()) throw validation_error(path + ": no languages declared");

    if (j.contains("counter_sentences")) {
        if (!j["counter_sentences"].is_object())
            throw validation_error(path + ": counter_sentences must be an object");
        for (const auto & [lang, arr] : j["counter_sentences"].items())
            ds.counter_sentences[lang] =
                string_array(arr, path + ": counter_sentences." + lang);
    }

    if (!j.contains("entries") || !j["entries"].is_array())
        throw validation_error(path + ": missing entries array");

    for (const auto & ej : j["entries"]) {
        insight_entry e;
        e.word_id = ej.value("word_id", "");
        if (e.word_id.empty()) throw validation_error(path + ": entry without word_id");
        e.pair_id = ej.value("pair_id", "");
        e.uses_counter_set = ej.value("uses_counter_set", false);
        if (!e.pair_id.empty() && e.uses_counter_set)
            throw validation_error(path + ": word '" + e.word_id +
                                   "' declares both pair_id and uses_counter_set");

        if (!ej.contains("languages") || !ej["languages"].is_object())
            throw validation_error(path + ": word '" + e.word_id + "' has no languages");

        for (const auto & lang : ds.languages) {
            if (!ej["languages"].contains(lang))
                throw validation_error(path + ": word '" + e.word_id +
                                       "' is missing language '" + lang + "'");
            const json & lj = ej["languages"][lang];
            insight_language_record rec;
            const std::string where = path + ": word '" + e.word_id + "' [" + lang + "]";
            rec.forms = string_array(lj.value("forms", json::array()), where + " forms");
            rec.sentences =
                string_array(lj.value("sentences", json::array()), where + " sentences");
            rec.sentence_forms = string_array(lj.value("sentence_forms", json::array()),
                                              where + " sentence_forms");
            rec.prompts = string_array(lj.value("prompts", json::array()), where + " prompts");
            rec.prompt_forms =
                string_array(lj.value("prompt_forms", json::array()), where + " prompt_forms");

            if (rec.forms.empty()) throw validation_error(where + ": no surface forms");
            if (rec.sentences.size() != 10)
                throw validation_error(where + ": has " + std::to_string(rec.sentences.size()) +
                                       " sentences, expected 10");
            if (rec.prompts.size() != 10)
                throw validation_error(where + ": has " + std::to_string(rec.prompts.size()) +
                                       " prompts, expected 10");
            if (rec.sentence_forms.size() != rec.sentences.size())
                throw validation_error(where + ": sentence_forms count mismatch");
            if (rec.prompt_forms.size() != rec.prompts.size())
                throw validation_error(where + ": prompt_forms count mismatch");
            for (std::size_t i = 0; i < rec.sentences.size(); ++i)
                if (!contains_ci(rec.sentences[i], rec.sentence_forms[i]))
                    throw validation_error(where + ": sentence " + std::to_string(i) +
                                           " does not contain its recorded form '" +
                                           rec.sentence_forms[i] + "'");
            e.languages[lang] = std::move(rec);
        }
        ds.entries.push_back(std::move(e));
    }

    // pair symmetry and counter-set resolution need the full entry list
    for (auto & e : ds.entries) {
        if (!e.pair_id.empty()) {
            auto it = std::find_if(ds.entries.begin(), ds.entries.end(),
                                   [&](const insight_entry & o) { return o.word_id == e.pair_id; });
            if (it == ds.entries.end())
                throw validation_error(path + ": word '" + e.word_id + "' pairs with unknown '" +
                                       e.pair_id + "'");
            if (it->pair_id != e.word_id)
                throw validation_error(path + ": asymmetric pair " + e.word_id + " -> " +
                                       e.pair_id);
        }
        if (e.uses_counter_set) {
            for (const auto & lang : ds.languages) {
                auto it = ds.counter_sentences.find(lang);
                if (it == ds.counter_sentences.end() || it->second.empty())
                    throw validation_error(path + ": word '" + e.word_id +
                                           "' uses the counter set but language '" + lang +
                                           "' has no counter sentences");
                e.counter_sentences[lang] = it->second;
            }
        }
    }
    return ds;
}

// ---- facts ----

const fact_entry & fact_dataset::entry(const std::string & id) const {
    for (const auto & e : entries)
        if (e.id == id) return e;
    throw validation_error("facts: unknown entry '" + id + "'");
}

fact_dataset load_facts(const std::string & path) {
    const json j = read_json(path);
    require_kind(j, "facts", path);

    fact_dataset ds;
    ds.languages = string_array(j.value("languages", json::array()), path + ": languages");
    if (ds.languages.empty()) throw validation_error(path + ": no languages declared");
    if (!j.contains("entries") || !j["entries"].is_array())
        throw validation_error(path + ": missing entries array");

    for (const auto & ej : j["entries"]) {
        fact_entry e;
        e.id = ej.value("id", "");
        if (e.id.empty()) throw validation_error(path + ": entry without id");
        for (const auto & lang : ds.languages) {
            const std::string where = path + ": fact '" + e.id + "' [" + lang + "]";
            if (!ej.contains("languages") || !ej["languages"].contains(lang))
                throw validation_error(where + ": missing language record");
            const json & lj = ej["languages"][lang];
            fact_language_record rec;
            rec.country = lj.value("country", "");
            rec.prompt_template = lj.value("template", "");
            rec.answers = string_array(lj.value("answers", json::array()), where + " answers");
            if (rec.country.empty()) throw validation_error(where + ": missing country");
            if (rec.answers.empty()) throw validation_error(where + ": missing answers");
            const std::size_t slot = rec.prompt_template.find("{country}");
            if (slot == std::string::npos ||
                rec.prompt_template.find("{country}", slot + 1) != std::string::npos)
                throw validation_error(where +
                                       ": template must contain exactly one {country} slot");
            e.languages[lang] = std::move(rec);
        }
        ds.entries.push_back(std::move(e));
    }
    return ds;
}

std::pair<std::string, std::pair<std::size_t, std::size_t>>
fact_prompt(const fact_entry & entry, const std::string & language) {
    auto it = entry.languages.find(language);
    if (it == entry.languages.end())
        throw validation_error("facts: entry '" + entry.id + "' has no language '" + language +
                               "'");
    const fact_language_record & rec = it->second;
    const std::size_t slot = rec.prompt_template.find("{country}");
    std::string prompt = rec.prompt_template;
    prompt.replace(slot, 9, rec.country);
    return {prompt, {slot, slot + rec.country.size()}};
}

fact_probe make_fact_probe(const model_bundle & bundle, const fact_entry & entry,
                           const std::string & language) {
    const auto [prompt, span] = fact_prompt(entry, language);
    const token_seq tokens = tokenize(bundle, prompt);

    fact_probe probe;
    probe.prompt = prompt;
    bool found = false;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        const auto [b, e] = tokens.byte_offsets[t];
        if (b < span.second && e > span.first) { // overlaps the country bytes
            if (!found) probe.subject_begin = t;
            probe.subject_end = t + 1;
            found = true;
        }
    }
    if (!found)
        throw validation_error("facts: country surface does not map to any token in '" +
                               prompt + "'");

    const fact_language_record & rec = entry.languages.at(language);
    const std::string continued = prompt + " " + rec.answers[0];
    const token_seq full = tokenize(bundle, continued);
    probe.answer_token = static_cast<std::uint32_t>(-1);
    for (std::size_t t = 0; t < full.size(); ++t) {
        if (full.byte_offsets[t].first >= prompt.size()) {
            probe.answer_token = full.ids[t];
            break;
        }
        if (full.byte_offsets[t].first < prompt.size() &&
            full.byte_offsets[t].second > prompt.size())
            throw validation_error("facts: answer tokenization straddles the prompt boundary "
                                   "for '" + rec.answers[0] + "'");
    }
    if (probe.answer_token == static_cast<std::uint32_t>(-1))
        throw validation_error("facts: empty answer continuation for '" + entry.id + "'");
    return probe;
}

// ---- lexicon ----

lexicon load_lexicon(const std::string & path) {
    const json j = read_json(path);
    require_kind(j, "lexicon", path);

    lexicon lex;
    lex.language = j.value("language", "");
    if (lex.language.empty()) throw validation_error(path + ": missing language label");
    if (!j.contains("entries") || !j["entries"].is_array())
        throw validation_error(path + ": missing entries array");

    for (const auto & ej : j["entries"]) {
        const std::string word = normalize_form(ej.value("word", ""));
        if (word.empty()) throw validation_error(path + ": entry without word");
        if (lex.entries.count(word))
            throw validation_error(path + ": duplicate entry for word '" + word + "'");
        lexicon_entry entry;
        for (const auto & f :
             string_array(ej.value("exact", json::array()), path + ": " + word + " exact"))
            entry.exact.push_back(normalize_form(f));
        for (const auto & f : string_array(ej.value("synonyms", json::array()),
                                           path + ": " + word + " synonyms"))
            entry.synonyms.push_back(normalize_form(f));
        if (entry.exact.empty())
            throw validation_error(path + ": word '" + word + "' has no exact forms");
        for (const auto & f : entry.synonyms)
            if (std::find(entry.exact.begin(), entry.exact.end(), f) != entry.exact.end())
                throw validation_error(path + ": word '" + word + "' lists '" + f +
                                       "' as both exact and synonym");
        lex.entries[word] = std::move(entry);
    }
    if (j.contains("flagged_terms"))
        for (const auto & f : string_array(j["flagged_terms"], path + ": flagged_terms"))
            lex.flagged_terms.push_back(normalize_form(f));
    return lex;
}

void write_lexicon(const lexicon & lex, const std::string & path) {
    json entries = json::array();
    for (const auto & [word, entry] : lex.entries)
        entries.push_back(
            {{"word", word}, {"exact", entry.exact}, {"synonyms", entry.synonyms}});
    json j = {{"version", 1},
              {"kind", "lexicon"},
              {"language", lex.language},
              {"entries", entries}};
    if (!lex.flagged_terms.empty()) j["flagged_terms"] = lex.flagged_terms;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

// ---- wordlists and annotations ----

language_lexicon load_wordlist(const std::string & path) {
    const json j = read_json(path);
    require_kind(j, "wordlist", path);
    language_lexicon lex;
    lex.label = j.value("language", "");
    if (lex.label.empty()) throw validation_error(path + ": missing language label");
    lex.words = string_array(j.value("words", json::array()), path + ": words");
    if (lex.words.empty()) throw validation_error(path + ": empty word list");
    return lex;
}

std::vector<word_span> load_annotations(const std::string & path) {
    const json j = read_json(path);
    require_kind(j, "annotations", path);
    if (!j.contains("words") || !j["words"].is_array())
        throw validation_error(path + ": missing words array");
    std::vector<word_span> out;
    for (const auto & wj : j["words"]) {
        word_span w;
        w.surface = wj.value("surface", "");
        if (w.surface.empty()) throw validation_error(path + ": word without surface");
        if (!wj.contains("pos"))
            throw validation_error(path + ": word '" + w.surface + "' has no pos field");
        w.pos_tag = wj["pos"].get<std::string>();
        if (!wj.contains("start") || !wj.contains("end"))
            throw validation_error(path + ": word '" + w.surface + "' has no token span");
        w.start = wj["start"].get<std::size_t>();
        w.end = wj["end"].get<std::size_t>();
        if (w.start >= w.end)
            throw validation_error(path + ": word '" + w.surface + "' has an empty span");
        out.push_back(std::move(w));
    }
    return out;
}

} // namespace introspect
