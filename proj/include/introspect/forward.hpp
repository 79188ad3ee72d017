#pragma once

#include "introspect/model.hpp"
#include "introspect/tokenizer.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace introspect {

// Position set an intervention applies to. `explicit_set` lists absolute
// sequence positions; `tail_from` covers every position >= anchor, which is
// how "the prompt's final token and everything generated after it" is
// expressed so the same intervention stays valid as the sequence grows.
struct position_spec {
    enum class kind_t { explicit_set, tail_from };
    kind_t kind = kind_t::explicit_set;
    std::vector<std::size_t> positions; // explicit_set
    std::size_t anchor = 0;             // tail_from

    static position_spec at(std::size_t pos);
    static position_spec at_all(std::vector<std::size_t> positions);
    static position_spec tail(std::size_t anchor);

    // Concrete positions for a sequence of length seq_len, ascending.
    std::vector<std::size_t> resolve(std::size_t seq_len) const;
};

// Declarative forward-pass edit. Hook points:
//   noise_embedding  - edits states[0] before block 1 runs
//   add_vector       - states[layer] += gamma * payload, after block `layer`
//   replace_state    - states[layer][pos] = payload row, after block `layer`
// Edits at the same hook point apply in declared order.
struct intervention {
    enum class kind_t { add_vector, replace_state, noise_embedding };
    kind_t kind = kind_t::add_vector;
    std::size_t layer = 0;          // add_vector / replace_state; in [0, L]
    position_spec positions;
    std::vector<double> payload;    // d-vector (add_vector, replace_state with one row)
    std::vector<std::vector<double>> payload_rows; // per-position rows (replace_state)
    double gamma = 1.0;             // add_vector scale
    double sigma = 0.0;             // noise std
    std::uint64_t seed = 0;         // noise seed

    static intervention add_vector(std::size_t layer, position_spec where,
                                   std::vector<double> direction, double gamma);
    static intervention replace_state(std::size_t layer, std::size_t position,
                                      std::vector<double> state);
    static intervention noise_embedding(position_spec where, double sigma, std::uint64_t seed);
};

// Residual-stream capture of one forward pass.
// states[0] is token+position embeddings (after any embedding noise);
// states[l] is the stream after block l and any layer-l interventions;
// final_logits[t] = unembedding . rmsnorm(states[L][t], final_norm_gain).
struct forward_trace {
    std::size_t seq_len = 0;
    std::size_t d_model = 0;
    std::vector<mat> states;      // (L+1) matrices, each T x d
    mat final_logits;             // T x V
    std::vector<intervention> applied_interventions;
    std::string bundle_hash;

    const double * state(std::size_t layer, std::size_t pos) const {
        return states[layer].row(pos);
    }
};

forward_trace forward(const model_bundle & bundle, const token_seq & tokens,
                      const std::vector<intervention> & interventions = {});

// Re-runs only blocks layer+1..L after applying `edits` (all hooked at
// `layer`) to a copy of base.states[layer]. Bit-identical to a full forward
// with base's interventions plus `edits`, since states below `layer` are
// unaffected by the edit.
forward_trace forward_replay_from(const model_bundle & bundle, const forward_trace & base,
                                  std::size_t layer, const std::vector<intervention> & edits);

// Probability distribution over the vocabulary from one logits row,
// computed in double with max-subtraction.
std::vector<double> softmax_row(const double * logits, std::size_t n);

// Index of the largest value; ties break toward the lowest index.
std::size_t argmax_lowest(const double * values, std::size_t n);

struct generation {
    token_seq prompt;
    token_seq generated;          // offsets relative to the generated text
    std::string prompt_text;
    std::string generated_text;
    // One trace over prompt + generated. Causal attention makes per-position
    // states identical to the ones seen at each decode step, so per-step
    // traces are prefix views of this one.
    forward_trace trace;
    std::string bundle_hash;

    std::size_t prompt_len() const { return prompt.size(); }
    std::size_t n_steps() const { return generated.size(); }

    // generated_text without a trailing "<eot>" marker; what a reader sees
    std::string visible_text() const {
        const std::string eot = "<eot>";
        if (generated_text.size() >= eot.size() &&
            generated_text.compare(generated_text.size() - eot.size(), eot.size(), eot) == 0)
            return generated_text.substr(0, generated_text.size() - eot.size());
        return generated_text;
    }
};

// Greedy decoding, ties toward the lowest token id. Stops at max_steps, at
// the "<eot>" token when the vocabulary has one, or when max_seq is reached.
generation generate(const model_bundle & bundle, const std::string & prompt,
                    std::size_t max_steps,
                    const std::vector<intervention> & interventions = {});

} // namespace introspect
