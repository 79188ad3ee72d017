#include "introspect/tracing.hpp"

#include "introspect/errors.hpp"
#include "introspect/tokenizer.hpp"

#include <cmath>
#include <future>
#include <sstream>

namespace introspect {

namespace {

void validate_probe(const model_bundle & bundle, const fact_probe & probe,
                    const token_seq & tokens) {
    if (probe.subject_begin >= probe.subject_end)
        throw validation_error("probe: empty subject span");
    if (probe.subject_end > tokens.size())
        throw validation_error("probe: subject span [" + std::to_string(probe.subject_begin) +
                               ", " + std::to_string(probe.subject_end) +
                               ") outside prompt of " + std::to_string(tokens.size()) +
                               " tokens");
    if (probe.answer_token >= bundle.vocab_size())
        throw validation_error("probe: answer token id out of range");
}

intervention subject_noise(const fact_probe & probe, double sigma, std::uint64_t seed) {
    std::vector<std::size_t> pos;
    for (std::size_t p = probe.subject_begin; p < probe.subject_end; ++p) pos.push_back(p);
    return intervention::noise_embedding(position_spec::at_all(std::move(pos)), sigma, seed);
}

} // namespace

double answer_probability(const forward_trace & trace, std::uint32_t answer_token) {
    const std::size_t last = trace.seq_len - 1;
    const auto probs = softmax_row(trace.final_logits.row(last), trace.final_logits.cols);
    return probs[answer_token];
}

double corruption_plan::p_corrupted_mean() const {
    double sum = 0.0;
    for (double p : p_corrupted) sum += p;
    return p_corrupted.empty() ? 0.0 : sum / static_cast<double>(p_corrupted.size());
}

corrupt_result corrupt_run(const model_bundle & bundle, const fact_probe & probe,
                           double sigma, std::uint64_t seed) {
    if (sigma < 0.0) throw validation_error("corrupt_run: sigma must be >= 0");
    const token_seq tokens = tokenize(bundle, probe.prompt);
    validate_probe(bundle, probe, tokens);

    corrupt_result out;
    out.trace = forward(bundle, tokens, {subject_noise(probe, sigma, seed)});
    out.p_corrupted = answer_probability(out.trace, probe.answer_token);
    return out;
}

corruption_plan ensure_corrupted(const model_bundle & bundle, const fact_probe & probe,
                                 double sigma0, double threshold_ratio,
                                 std::size_t max_attempts, std::size_t n_seeds,
                                 std::uint64_t seed) {
    if (!(threshold_ratio > 0.0 && threshold_ratio < 1.0))
        throw validation_error("ensure_corrupted: threshold_ratio must be in (0, 1)");
    if (n_seeds < 1) throw validation_error("ensure_corrupted: n_seeds must be >= 1");

    const token_seq tokens = tokenize(bundle, probe.prompt);
    validate_probe(bundle, probe, tokens);
    const forward_trace clean = forward(bundle, tokens);
    const double p_clean = answer_probability(clean, probe.answer_token);

    corruption_plan plan;
    plan.p_clean = p_clean;
    for (std::size_t i = 0; i < n_seeds; ++i) plan.seeds.push_back(seed + i);

    double sigma = sigma0;
    for (std::size_t attempt = 0; attempt < max_attempts; ++attempt, sigma *= 1.5) {
        plan.p_corrupted.clear();
        bool all_below = true;
        for (std::uint64_t s : plan.seeds) {
            const double p = corrupt_run(bundle, probe, sigma, s).p_corrupted;
            plan.p_corrupted.push_back(p);
            if (!(p < threshold_ratio * p_clean)) all_below = false;
        }
        if (all_below) {
            plan.sigma_used = sigma;
            plan.attempts = attempt + 1;
            return plan;
        }
    }

    std::ostringstream msg;
    msg << "insufficient corruption: after " << max_attempts << " attempts (sigma " << sigma0
        << " .. " << sigma / 1.5 << "), some seed kept p_corrupted >= " << threshold_ratio
        << " * p_clean (p_clean = " << p_clean << ")";
    throw insufficient_corruption(msg.str());
}

double restore_and_measure(const model_bundle & bundle, const fact_probe & probe,
                           const forward_trace & clean_trace, double sigma,
                           std::uint64_t seed, std::size_t layer, std::size_t position) {
    if (clean_trace.bundle_hash != bundle.hash)
        throw validation_error("restore_and_measure: clean trace from a different bundle");
    if (layer >= clean_trace.states.size())
        throw validation_error("restore_and_measure: layer " + std::to_string(layer) +
                               " out of range");
    if (position >= clean_trace.seq_len)
        throw validation_error("restore_and_measure: position " + std::to_string(position) +
                               " out of range");

    const corrupt_result corrupted = corrupt_run(bundle, probe, sigma, seed);
    const std::vector<double> clean_state(clean_trace.state(layer, position),
                                          clean_trace.state(layer, position) +
                                              clean_trace.d_model);
    const forward_trace restored = forward_replay_from(
        bundle, corrupted.trace, layer,
        {intervention::replace_state(layer, position, clean_state)});
    return answer_probability(restored, probe.answer_token) - corrupted.p_corrupted;
}

trace_grid_result compute_trace_grid(const model_bundle & bundle, const fact_probe & probe,
                                     const trace_grid_options & options) {
    const double sigma0 = options.sigma0 > 0.0 ? options.sigma0 : 3.0 * embedding_std(bundle);
    const corruption_plan plan =
        ensure_corrupted(bundle, probe, sigma0, options.threshold_ratio, options.max_attempts,
                         options.n_seeds, options.seed);

    const token_seq tokens = tokenize(bundle, probe.prompt);
    const forward_trace clean = forward(bundle, tokens);
    const std::size_t L = bundle.n_layers();
    const std::size_t T = tokens.size();

    // Corrupted traces are shared replay bases: restoring at layer l only
    // reruns blocks l+1..L.
    std::vector<forward_trace> corrupted;
    corrupted.reserve(plan.seeds.size());
    for (std::uint64_t s : plan.seeds)
        corrupted.push_back(
            forward(bundle, tokens, {subject_noise(probe, plan.sigma_used, s)}));

    trace_grid_result grid;
    grid.aie = mat(L + 1, T);
    grid.p_clean = plan.p_clean;
    grid.p_corrupted_mean = plan.p_corrupted_mean();
    grid.n_seeds = plan.seeds.size();
    grid.sigma = plan.sigma_used;
    grid.probe = probe;
    grid.bundle_hash = bundle.hash;
    for (std::size_t t = 0; t < T; ++t)
        grid.prompt_tokens.push_back(bundle.vocab[tokens.ids[t]]);

    auto cell_value = [&](std::size_t layer, std::size_t pos) {
        double sum = 0.0;
        for (std::size_t i = 0; i < plan.seeds.size(); ++i) {
            const std::vector<double> clean_state(clean.state(layer, pos),
                                                  clean.state(layer, pos) + clean.d_model);
            const forward_trace restored = forward_replay_from(
                bundle, corrupted[i], layer,
                {intervention::replace_state(layer, pos, clean_state)});
            sum += answer_probability(restored, probe.answer_token) - plan.p_corrupted[i];
        }
        return sum / static_cast<double>(plan.seeds.size());
    };

    if (options.parallel) {
        std::vector<std::future<void>> tasks;
        for (std::size_t l = 0; l <= L; ++l) {
            tasks.push_back(std::async(std::launch::async, [&, l] {
                for (std::size_t t = 0; t < T; ++t) grid.aie.at(l, t) = cell_value(l, t);
            }));
        }
        for (auto & f : tasks) f.get();
    } else {
        for (std::size_t l = 0; l <= L; ++l)
            for (std::size_t t = 0; t < T; ++t) grid.aie.at(l, t) = cell_value(l, t);
    }
    return grid;
}

} // namespace introspect
