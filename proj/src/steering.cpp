#include "introspect/steering.hpp"

#include "introspect/errors.hpp"
#include "introspect/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace introspect {

steering_vector build_steering_vector(const model_bundle & bundle,
                                      const std::vector<std::string> & positive,
                                      const std::vector<std::string> & negative,
                                      extraction_rule rule, const std::string & concept_label,
                                      const std::string & language) {
    if (positive.empty()) throw validation_error("build_steering_vector: empty positive set");
    if (negative.empty()) throw validation_error("build_steering_vector: empty negative set");

    const std::size_t L = bundle.n_layers();
    const std::size_t d = bundle.d_model();

    auto accumulate_set = [&](const std::vector<std::string> & sentences) {
        mat sum(L + 1, d);
        for (const auto & s : sentences) {
            const token_seq tokens = tokenize(bundle, s);
            if (tokens.empty())
                throw validation_error("build_steering_vector: empty sentence '" + s + "'");
            if (tokens.size() > bundle.config.max_seq)
                throw validation_error("build_steering_vector: sentence exceeds max_seq: '" +
                                       s + "'");
            const forward_trace tr = forward(bundle, tokens);
            for (std::size_t l = 0; l <= L; ++l) {
                if (rule == extraction_rule::final_position) {
                    const double * row = tr.state(l, tokens.size() - 1);
                    for (std::size_t i = 0; i < d; ++i) sum.at(l, i) += row[i];
                } else {
                    for (std::size_t i = 0; i < d; ++i) {
                        double m = 0.0;
                        for (std::size_t t = 0; t < tokens.size(); ++t)
                            m += tr.state(l, t)[i];
                        sum.at(l, i) += m / static_cast<double>(tokens.size());
                    }
                }
            }
        }
        const double inv = 1.0 / static_cast<double>(sentences.size());
        for (auto & x : sum.a) x *= inv;
        return sum;
    };

    const mat mean_pos = accumulate_set(positive);
    const mat mean_neg = accumulate_set(negative);

    steering_vector v;
    v.per_layer = mat(L + 1, d);
    for (std::size_t i = 0; i < v.per_layer.a.size(); ++i)
        v.per_layer.a[i] = mean_pos.a[i] - mean_neg.a[i];
    v.concept_label = concept_label;
    v.language = language;
    v.n_positive = positive.size();
    v.n_negative = negative.size();
    v.rule = rule;
    return v;
}

generation steer_generate(const model_bundle & bundle, const std::string & prompt,
                          const steering_vector & topic_vec, std::size_t topic_layer,
                          double topic_gamma, const steering_vector * lang_vec,
                          std::size_t lang_layer, double lang_gamma, std::size_t max_steps) {
    const token_seq prompt_tokens = tokenize(bundle, prompt);
    if (prompt_tokens.empty()) throw validation_error("steer_generate: empty prompt");
    const std::size_t anchor = prompt_tokens.size() - 1;

    std::vector<intervention> ivs;
    ivs.push_back(intervention::add_vector(topic_layer, position_spec::tail(anchor),
                                           topic_vec.layer_row(topic_layer), topic_gamma));
    if (lang_vec != nullptr)
        ivs.push_back(intervention::add_vector(lang_layer, position_spec::tail(anchor),
                                               lang_vec->layer_row(lang_layer), lang_gamma));
    return generate(bundle, prompt, max_steps, ivs);
}

namespace {

bool detect_collapse(const std::vector<std::string> & words) {
    if (words.empty()) return false;

    // n-gram stutter: any 1..4-gram repeated >= 4 times back to back
    const std::size_t n_words = words.size();
    for (std::size_t n = 1; n <= 4; ++n) {
        if (n_words < 4 * n) continue;
        for (std::size_t start = 0; start + 4 * n <= n_words; ++start) {
            bool repeated = true;
            for (std::size_t rep = 1; rep < 4 && repeated; ++rep)
                for (std::size_t i = 0; i < n; ++i)
                    if (words[start + i] != words[start + rep * n + i]) {
                        repeated = false;
                        break;
                    }
            if (repeated) return true;
        }
    }

    // low diversity over the tail
    const std::size_t window = std::min<std::size_t>(32, n_words);
    std::set<std::string> distinct(words.end() - static_cast<std::ptrdiff_t>(window),
                                   words.end());
    return static_cast<double>(distinct.size()) / static_cast<double>(window) < 0.25;
}

} // namespace

steer_outcome evaluate_steering(const std::string & output_text,
                                const std::vector<std::string> & target_forms,
                                const segmenter & seg) {
    if (target_forms.empty())
        throw validation_error("evaluate_steering: target form list is empty");

    steer_outcome out;
    out.output_text = output_text;

    std::vector<std::string> words;
    for (const auto & w : segment_words(output_text, seg))
        words.push_back(normalize_form(w.surface));

    for (const auto & w : words) {
        for (const auto & form : target_forms) {
            if (w == normalize_form(form)) {
                out.target_form_found = form;
                break;
            }
        }
        if (out.target_form_found) break;
    }
    out.collapsed = detect_collapse(words);
    out.success = out.target_form_found.has_value() && !out.collapsed;
    return out;
}

sweep_result sweep(const model_bundle & bundle, const std::vector<std::string> & holdout_prompts,
                   const steering_vector & vec, const std::vector<std::size_t> & layers,
                   const std::vector<double> & gammas,
                   const std::vector<std::string> & target_forms, const segmenter & seg,
                   std::size_t max_steps) {
    if (holdout_prompts.empty()) throw validation_error("sweep: no holdout prompts");
    if (layers.empty() || gammas.empty())
        throw validation_error("sweep: empty layer or gamma grid");

    sweep_result result;
    for (std::size_t layer : layers) {
        for (double gamma : gammas) {
            sweep_cell cell;
            cell.layer = layer;
            cell.gamma = gamma;
            cell.n_prompts = holdout_prompts.size();
            for (const auto & prompt : holdout_prompts) {
                const generation g = steer_generate(bundle, prompt, vec, layer, gamma,
                                                    nullptr, 0, 0.0, max_steps);
                if (evaluate_steering(g.generated_text, target_forms, seg).success)
                    cell.successes += 1;
            }
            cell.rate = static_cast<double>(cell.successes) /
                        static_cast<double>(cell.n_prompts);
            result.table.push_back(cell);
        }
    }

    for (std::size_t i = 1; i < result.table.size(); ++i) {
        const sweep_cell & a = result.table[i];
        const sweep_cell & b = result.table[result.best_index];
        if (a.rate > b.rate ||
            (a.rate == b.rate &&
             (a.layer < b.layer || (a.layer == b.layer && a.gamma < b.gamma))))
            result.best_index = i;
    }
    return result;
}

namespace {

std::optional<double> cosine_rows(const double * a, const double * b, std::size_t d) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return std::nullopt;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

} // namespace

std::vector<std::optional<double>> cosine_profile(const steering_vector & a,
                                                  const steering_vector & b) {
    if (a.per_layer.rows != b.per_layer.rows || a.per_layer.cols != b.per_layer.cols)
        throw validation_error("cosine_profile: vectors have different shapes");
    std::vector<std::optional<double>> out;
    for (std::size_t l = 0; l < a.per_layer.rows; ++l)
        out.push_back(cosine_rows(a.per_layer.row(l), b.per_layer.row(l), a.per_layer.cols));
    return out;
}

std::vector<std::optional<double>> nudged_similarity(const steering_vector & a,
                                                     const steering_vector & b,
                                                     const steering_vector & lang_delta,
                                                     double beta) {
    if (a.per_layer.rows != b.per_layer.rows || a.per_layer.cols != b.per_layer.cols ||
        lang_delta.per_layer.rows != a.per_layer.rows ||
        lang_delta.per_layer.cols != a.per_layer.cols)
        throw validation_error("nudged_similarity: vectors have different shapes");

    const std::size_t d = a.per_layer.cols;
    std::vector<double> nudged(d);
    std::vector<std::optional<double>> out;
    for (std::size_t l = 0; l < a.per_layer.rows; ++l) {
        const double * ar = a.per_layer.row(l);
        const double * dr = lang_delta.per_layer.row(l);
        for (std::size_t i = 0; i < d; ++i) nudged[i] = ar[i] + beta * dr[i];
        out.push_back(cosine_rows(nudged.data(), b.per_layer.row(l), d));
    }
    return out;
}

std::vector<std::size_t> default_layer_grid(std::size_t n_layers, std::size_t stride) {
    std::vector<std::size_t> out;
    for (std::size_t l = stride; l <= n_layers; l += stride) out.push_back(l);
    if (out.empty())
        for (std::size_t l = 1; l <= n_layers; ++l) out.push_back(l);
    return out;
}

} // namespace introspect
