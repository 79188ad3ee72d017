#pragma once

#include "introspect/forward.hpp"
#include "introspect/model.hpp"
#include "introspect/routing.hpp"

#include <map>
#include <string>
#include <vector>

namespace introspect {

// Word list used for output-language identification by majority vote.
struct language_lexicon {
    std::string label;
    std::vector<std::string> words;
};

// "ambiguous" on a tie, "other" on zero hits.
std::string classify_language(const std::string & text,
                              const std::vector<language_lexicon> & lexicons,
                              const segmenter & seg);

struct interpolation_spec {
    std::string prompt_a;
    std::string prompt_b;
    std::size_t layer = 0;
    std::vector<double> alphas;          // each in [0, 1]
    enum class host_t { A, B } host = host_t::A;
    // language label -> accepted answer surface forms (either language counts)
    std::map<std::string, std::vector<std::string>> answer_sets;
    std::string instruction_prefix;      // prepended to both prompts when set
};

struct interpolation_point {
    double alpha = 0.0;
    std::string output_text;
    bool correct = false;
    std::string answer_language; // label, "ambiguous" or "other"
};

// alpha * state_a + (1 - alpha) * state_b at (layer, final position) of the
// respective traces.
std::vector<double> interpolate_state(const forward_trace & trace_a,
                                      const forward_trace & trace_b, std::size_t layer,
                                      double alpha);

// For each alpha: blend the two prompts' states, patch the blend into the
// host prompt's forward at (layer, final prompt position), greedy-generate,
// then judge correctness (accepted-form containment) and output language.
std::vector<interpolation_point> interpolation_curve(
    const model_bundle & bundle, const interpolation_spec & spec, std::size_t max_steps,
    const std::vector<language_lexicon> & lexicons, const segmenter & seg);

// Fraction of points classified into each language label.
std::map<std::string, double> language_propensity(const std::vector<interpolation_point> & pts);

} // namespace introspect
