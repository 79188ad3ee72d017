#include "introspect/interpolation.hpp"

#include "introspect/errors.hpp"
#include "introspect/tokenizer.hpp"

#include <algorithm>
#include <cmath>

namespace introspect {

std::string classify_language(const std::string & text,
                              const std::vector<language_lexicon> & lexicons,
                              const segmenter & seg) {
    if (lexicons.empty())
        throw validation_error("classify_language: at least one lexicon is required");

    std::vector<std::size_t> votes(lexicons.size(), 0);
    for (const auto & w : segment_words(text, seg)) {
        const std::string norm = normalize_form(w.surface);
        if (norm.empty()) continue;
        for (std::size_t i = 0; i < lexicons.size(); ++i) {
            const auto & words = lexicons[i].words;
            if (std::any_of(words.begin(), words.end(), [&](const std::string & lw) {
                    return normalize_form(lw) == norm;
                }))
                votes[i] += 1;
        }
    }

    std::size_t best = 0, best_votes = 0, n_at_best = 0;
    for (std::size_t i = 0; i < votes.size(); ++i) {
        if (votes[i] > best_votes) {
            best = i;
            best_votes = votes[i];
            n_at_best = 1;
        } else if (votes[i] == best_votes && votes[i] > 0) {
            n_at_best += 1;
        }
    }
    if (best_votes == 0) return "other";
    if (n_at_best > 1) return "ambiguous";
    return lexicons[best].label;
}

std::vector<double> interpolate_state(const forward_trace & trace_a,
                                      const forward_trace & trace_b, std::size_t layer,
                                      double alpha) {
    if (trace_a.bundle_hash != trace_b.bundle_hash)
        throw validation_error("interpolate_state: traces come from different bundles");
    if (layer >= trace_a.states.size())
        throw validation_error("interpolate_state: layer " + std::to_string(layer) +
                               " out of range");
    const std::size_t d = trace_a.d_model;
    const double * a = trace_a.state(layer, trace_a.seq_len - 1);
    const double * b = trace_b.state(layer, trace_b.seq_len - 1);
    std::vector<double> out(d);
    for (std::size_t i = 0; i < d; ++i) out[i] = alpha * a[i] + (1.0 - alpha) * b[i];
    return out;
}

std::vector<interpolation_point> interpolation_curve(
    const model_bundle & bundle, const interpolation_spec & spec, std::size_t max_steps,
    const std::vector<language_lexicon> & lexicons, const segmenter & seg) {
    for (double a : spec.alphas)
        if (!(a >= 0.0 && a <= 1.0))
            throw validation_error("interpolation: alpha " + std::to_string(a) +
                                   " outside [0, 1]");
    for (const auto & [lang, forms] : spec.answer_sets)
        if (forms.empty())
            throw validation_error("interpolation: empty answer set for language '" + lang +
                                   "'");

    const std::string pa = spec.instruction_prefix + spec.prompt_a;
    const std::string pb = spec.instruction_prefix + spec.prompt_b;
    const token_seq ta = tokenize(bundle, pa);
    const token_seq tb = tokenize(bundle, pb);
    const forward_trace trace_a = forward(bundle, ta);
    const forward_trace trace_b = forward(bundle, tb);

    const bool host_a = spec.host == interpolation_spec::host_t::A;
    const std::string & host_prompt = host_a ? pa : pb;
    const std::size_t host_last = (host_a ? ta.size() : tb.size()) - 1;

    auto contains_ci = [](const std::string & haystack, const std::string & needle) {
        if (needle.empty()) return false;
        auto lower = [](std::string s) {
            for (auto & c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            return s;
        };
        return lower(haystack).find(lower(needle)) != std::string::npos;
    };

    std::vector<interpolation_point> points;
    for (double alpha : spec.alphas) {
        const std::vector<double> blended =
            interpolate_state(trace_a, trace_b, spec.layer, alpha);
        const generation g =
            generate(bundle, host_prompt, max_steps,
                     {intervention::replace_state(spec.layer, host_last, blended)});

        interpolation_point pt;
        pt.alpha = alpha;
        pt.output_text = g.visible_text();
        for (const auto & [lang, forms] : spec.answer_sets) {
            for (const auto & form : forms)
                if (contains_ci(pt.output_text, form)) {
                    pt.correct = true;
                    break;
                }
            if (pt.correct) break;
        }
        pt.answer_language = classify_language(pt.output_text, lexicons, seg);
        points.push_back(std::move(pt));
    }
    return points;
}

std::map<std::string, double> language_propensity(const std::vector<interpolation_point> & pts) {
    std::map<std::string, double> out;
    if (pts.empty()) return out;
    for (const auto & p : pts) out[p.answer_language] += 1.0;
    for (auto & [label, count] : out) count /= static_cast<double>(pts.size());
    return out;
}

} // namespace introspect
