#pragma once

#include "introspect/interpolation.hpp"
#include "introspect/model.hpp"
#include "introspect/routing.hpp"
#include "introspect/tracing.hpp"

#include <map>
#include <string>
#include <vector>

namespace introspect {

// ---- word/steering dataset ----

struct insight_language_record {
    std::vector<std::string> forms;           // accepted surface forms
    std::vector<std::string> sentences;       // exactly 10
    std::vector<std::string> sentence_forms;  // form used in each sentence
    std::vector<std::string> prompts;         // exactly 10
    std::vector<std::string> prompt_forms;    // target form per prompt
};

struct insight_entry {
    std::string word_id;
    std::string pair_id;        // empty when the word has no opposing pair
    bool uses_counter_set = false;
    std::map<std::string, insight_language_record> languages;
    // resolved at load for counter-set entries: the shared general sentences
    std::map<std::string, std::vector<std::string>> counter_sentences;
};

struct insight_dataset {
    std::vector<std::string> languages;
    std::map<std::string, std::vector<std::string>> counter_sentences; // per language
    std::vector<insight_entry> entries;

    const insight_entry & entry(const std::string & word_id) const;
    // The steering-contrast set: the pair word's sentences, or the shared
    // counter set for unpaired words.
    std::vector<std::string> negative_sentences(const insight_entry & e,
                                                const std::string & language) const;
};

insight_dataset load_insight(const std::string & path);

// ---- capital-city facts ----

struct fact_language_record {
    std::string country;
    std::string prompt_template; // contains exactly one {country} slot
    std::vector<std::string> answers;
};

struct fact_entry {
    std::string id;
    std::map<std::string, fact_language_record> languages;
};

struct fact_dataset {
    std::vector<std::string> languages;
    std::vector<fact_entry> entries;

    const fact_entry & entry(const std::string & id) const;
};

fact_dataset load_facts(const std::string & path);

// Prompt text with the slot substituted, plus the byte range of the country.
std::pair<std::string, std::pair<std::size_t, std::size_t>>
fact_prompt(const fact_entry & entry, const std::string & language);

// Tokenizes the prompt, maps the country's byte range to a token span, and
// resolves the answer token as the first token after the prompt boundary of
// "<prompt> <answer>".
fact_probe make_fact_probe(const model_bundle & bundle, const fact_entry & entry,
                           const std::string & language);

// ---- translation lexicon and friends ----

lexicon load_lexicon(const std::string & path);
void write_lexicon(const lexicon & lex, const std::string & path);

language_lexicon load_wordlist(const std::string & path);

// One record per word: surface, POS tag, half-open grid-column span.
std::vector<word_span> load_annotations(const std::string & path);

} // namespace introspect
