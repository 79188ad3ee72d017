#pragma once

#include "introspect/forward.hpp"
#include "introspect/model.hpp"
#include "introspect/routing.hpp"

#include <optional>
#include <string>
#include <vector>

namespace introspect {

enum class extraction_rule { final_position, mean_over_positions };

// Per-layer concept direction: row l is the mean difference of extracted
// hidden states between the positive and negative sentence sets.
struct steering_vector {
    mat per_layer; // (L+1) x d
    std::string concept_label;
    std::string language;
    std::size_t n_positive = 0;
    std::size_t n_negative = 0;
    extraction_rule rule = extraction_rule::final_position;

    std::vector<double> layer_row(std::size_t layer) const {
        return {per_layer.row(layer), per_layer.row(layer) + per_layer.cols};
    }
};

steering_vector build_steering_vector(const model_bundle & bundle,
                                      const std::vector<std::string> & positive,
                                      const std::vector<std::string> & negative,
                                      extraction_rule rule = extraction_rule::final_position,
                                      const std::string & concept_label = "",
                                      const std::string & language = "");

// Steering pressure is applied at the prompt's final token and every
// generated position, re-applied at each decode step.
generation steer_generate(const model_bundle & bundle, const std::string & prompt,
                          const steering_vector & topic_vec, std::size_t topic_layer,
                          double topic_gamma, const steering_vector * lang_vec,
                          std::size_t lang_layer, double lang_gamma, std::size_t max_steps);

struct steer_outcome {
    bool success = false;
    std::optional<std::string> target_form_found;
    bool collapsed = false;
    std::string output_text;
};

// success iff a target form matches a segmented word (case-insensitive) and
// the collapse detector stays quiet. Collapse: some 1..4-gram of words
// repeats >= 4 consecutive times, or the distinct-word ratio over the last
// 32 words drops under 0.25.
steer_outcome evaluate_steering(const std::string & output_text,
                                const std::vector<std::string> & target_forms,
                                const segmenter & seg);

struct sweep_cell {
    std::size_t layer = 0;
    double gamma = 0.0;
    std::size_t successes = 0;
    std::size_t n_prompts = 0;
    double rate = 0.0;
};

struct sweep_result {
    std::vector<sweep_cell> table; // layer-major, gammas in given order
    std::size_t best_index = 0;    // argmax rate; ties -> lower layer, then lower gamma

    const sweep_cell & best() const { return table[best_index]; }
};

sweep_result sweep(const model_bundle & bundle, const std::vector<std::string> & holdout_prompts,
                   const steering_vector & vec, const std::vector<std::size_t> & layers,
                   const std::vector<double> & gammas,
                   const std::vector<std::string> & target_forms, const segmenter & seg,
                   std::size_t max_steps);

// Per-layer cosine similarity; a zero-norm row on either side yields an
// explicit "undefined" (nullopt), never 0.
std::vector<std::optional<double>> cosine_profile(const steering_vector & a,
                                                  const steering_vector & b);

// Cosine between (a + beta * lang_delta) and b, per layer.
std::vector<std::optional<double>> nudged_similarity(const steering_vector & a,
                                                     const steering_vector & b,
                                                     const steering_vector & lang_delta,
                                                     double beta);

// Paper-style layer grids: every `stride`-th layer (stride 5 for topic
// vectors, 2 for language vectors), falling back to every layer when the
// model is too shallow for the stride.
std::vector<std::size_t> default_layer_grid(std::size_t n_layers, std::size_t stride);

} // namespace introspect
