#pragma once

#include "introspect/forward.hpp"
#include "introspect/model.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace introspect {

// Raised when escalating noise cannot push the answer probability under the
// corruption threshold within the attempt budget.
class insufficient_corruption : public std::runtime_error {
public:
    explicit insufficient_corruption(const std::string & what) : std::runtime_error(what) {}
};

struct fact_probe {
    std::string prompt;
    std::size_t subject_begin = 0; // token positions, half-open
    std::size_t subject_end = 0;
    std::uint32_t answer_token = 0;
};

struct corrupt_result {
    forward_trace trace;
    double p_corrupted = 0.0;
};

struct corruption_plan {
    double sigma_used = 0.0;
    std::vector<std::uint64_t> seeds;
    double p_clean = 0.0;
    std::vector<double> p_corrupted; // per seed, same order as seeds
    std::size_t attempts = 0;

    double p_corrupted_mean() const;
};

struct trace_grid_options {
    double sigma0 = 0.0;           // <= 0 selects 3 * embedding_std(bundle)
    double threshold_ratio = 0.2;
    std::size_t n_seeds = 10;
    std::size_t max_attempts = 8;
    std::uint64_t seed = 0;
    bool parallel = false;
};

struct trace_grid_result {
    mat aie;                     // (L+1) x T_prompt
    double p_clean = 0.0;
    double p_corrupted_mean = 0.0;
    std::size_t n_seeds = 0;
    double sigma = 0.0;
    fact_probe probe;
    std::vector<std::string> prompt_tokens;
    std::string bundle_hash;
};

// Probability of the probe's answer token at the prompt's final position.
double answer_probability(const forward_trace & trace, std::uint32_t answer_token);

// Adds isotropic Gaussian noise (std sigma) to the subject-token embeddings.
corrupt_result corrupt_run(const model_bundle & bundle, const fact_probe & probe,
                           double sigma, std::uint64_t seed);

// Escalates sigma by x1.5 per attempt until every derived seed satisfies
// p_corrupted < threshold_ratio * p_clean; throws insufficient_corruption
// when the attempt budget runs out.
corruption_plan ensure_corrupted(const model_bundle & bundle, const fact_probe & probe,
                                 double sigma0, double threshold_ratio,
                                 std::size_t max_attempts, std::size_t n_seeds,
                                 std::uint64_t seed);

// p[answer | clean state restored at (layer, position)] - p[answer | corrupted],
// for one noise seed.
double restore_and_measure(const model_bundle & bundle, const fact_probe & probe,
                           const forward_trace & clean_trace, double sigma,
                           std::uint64_t seed, std::size_t layer, std::size_t position);

// Full AIE grid: ensure_corrupted, then per-cell restoration averaged over
// the accepted seeds in seed-index order.
trace_grid_result compute_trace_grid(const model_bundle & bundle, const fact_probe & probe,
                                     const trace_grid_options & options);

} // namespace introspect
