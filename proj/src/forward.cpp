#include "introspect/forward.hpp"

#include "introspect/detail/math.hpp"
#include "introspect/errors.hpp"
#include "introspect/rng.hpp"

#include <algorithm>
#include <cmath>

namespace introspect {

position_spec position_spec::at(std::size_t pos) {
    position_spec p;
    p.kind = kind_t::explicit_set;
    p.positions = {pos};
    return p;
}

position_spec position_spec::at_all(std::vector<std::size_t> positions) {
    position_spec p;
    p.kind = kind_t::explicit_set;
    p.positions = std::move(positions);
    return p;
}

position_spec position_spec::tail(std::size_t anchor) {
    position_spec p;
    p.kind = kind_t::tail_from;
    p.anchor = anchor;
    return p;
}

std::vector<std::size_t> position_spec::resolve(std::size_t seq_len) const {
    std::vector<std::size_t> out;
    if (kind == kind_t::explicit_set) {
        out = positions;
        std::sort(out.begin(), out.end());
    } else {
        for (std::size_t p = anchor; p < seq_len; ++p) out.push_back(p);
    }
    return out;
}

intervention intervention::add_vector(std::size_t layer, position_spec where,
                                      std::vector<double> direction, double gamma) {
    intervention iv;
    iv.kind = kind_t::add_vector;
    iv.layer = layer;
    iv.positions = std::move(where);
    iv.payload = std::move(direction);
    iv.gamma = gamma;
    return iv;
}

intervention intervention::replace_state(std::size_t layer, std::size_t position,
                                         std::vector<double> state) {
    intervention iv;
    iv.kind = kind_t::replace_state;
    iv.layer = layer;
    iv.positions = position_spec::at(position);
    iv.payload = std::move(state);
    return iv;
}

intervention intervention::noise_embedding(position_spec where, double sigma,
                                           std::uint64_t seed) {
    intervention iv;
    iv.kind = kind_t::noise_embedding;
    iv.layer = 0;
    iv.positions = std::move(where);
    iv.sigma = sigma;
    iv.seed = seed;
    return iv;
}

namespace {

using detail::gelu;
using detail::matvec_rows;
using detail::rmsnorm;

void validate_interventions(const model_bundle & bundle, std::size_t seq_len,
                            const std::vector<intervention> & interventions) {
    const std::size_t d = bundle.d_model();
    for (const auto & iv : interventions) {
        if (iv.layer > bundle.n_layers())
            throw validation_error("intervention: layer " + std::to_string(iv.layer) +
                                   " out of range [0, " + std::to_string(bundle.n_layers()) + "]");
        const auto pos = iv.positions.resolve(seq_len);
        for (std::size_t p : pos)
            if (p >= seq_len)
                throw validation_error("intervention: position " + std::to_string(p) +
                                       " outside sequence of length " + std::to_string(seq_len));
        switch (iv.kind) {
        case intervention::kind_t::add_vector:
            if (iv.payload.size() != d)
                throw validation_error("intervention: add_vector payload has " +
                                       std::to_string(iv.payload.size()) +
                                       " elements, expected " + std::to_string(d));
            if (!std::isfinite(iv.gamma))
                throw validation_error("intervention: gamma must be finite");
            break;
        case intervention::kind_t::replace_state:
            if (!iv.payload_rows.empty()) {
                if (iv.payload_rows.size() != pos.size())
                    throw validation_error("intervention: replace_state has " +
                                           std::to_string(iv.payload_rows.size()) +
                                           " rows for " + std::to_string(pos.size()) +
                                           " positions");
                for (const auto & r : iv.payload_rows)
                    if (r.size() != d)
                        throw validation_error("intervention: replace_state row dimension "
                                               "mismatch");
            } else if (iv.payload.size() != d) {
                throw validation_error("intervention: replace_state payload has " +
                                       std::to_string(iv.payload.size()) +
                                       " elements, expected " + std::to_string(d));
            }
            break;
        case intervention::kind_t::noise_embedding:
            if (iv.sigma < 0.0 || !std::isfinite(iv.sigma))
                throw validation_error("intervention: sigma must be finite and >= 0");
            break;
        }
    }
}

// Applies every intervention hooked at `layer`, in declared order.
void apply_hooks(mat & state, std::size_t layer, std::size_t seq_len, std::size_t d,
                 const std::vector<intervention> & interventions) {
    for (const auto & iv : interventions) {
        if (iv.layer != layer) continue;
        const auto pos = iv.positions.resolve(seq_len);
        switch (iv.kind) {
        case intervention::kind_t::noise_embedding:
            for (std::size_t p : pos)
                for (std::size_t i = 0; i < d; ++i)
                    state.at(p, i) += iv.sigma * rng_normal(iv.seed, rng_purpose::trace_noise,
                                                            p, i);
            break;
        case intervention::kind_t::add_vector:
            if (iv.gamma == 0.0) break; // exact no-op, keeps states bit-identical
            for (std::size_t p : pos)
                for (std::size_t i = 0; i < d; ++i)
                    state.at(p, i) += iv.gamma * iv.payload[i];
            break;
        case intervention::kind_t::replace_state:
            for (std::size_t r = 0; r < pos.size(); ++r) {
                const std::vector<double> & src =
                    iv.payload_rows.empty() ? iv.payload : iv.payload_rows[r];
                for (std::size_t i = 0; i < d; ++i) state.at(pos[r], i) = src[i];
            }
            break;
        }
    }
}

// One pre-norm block: y = x + attn(rmsnorm(x)); y += ffn(rmsnorm(y)).
void run_block(const model_bundle & bundle, const block_weights & blk, const mat & x, mat & y) {
    const std::size_t T = x.rows;
    const std::size_t d = bundle.d_model();
    const std::size_t dh = bundle.config.head_dim();
    const std::size_t n_heads = bundle.config.n_heads;
    const double eps = bundle.config.norm_epsilon;

    std::vector<double> normed(T * d), q(T * d), k(T * d), v(T * d);
    std::vector<double> ctx(d), proj(d), scores, ff_mid(bundle.config.d_ff);

    for (std::size_t t = 0; t < T; ++t)
        rmsnorm(x.row(t), blk.attn_norm_gain.data(), d, eps, normed.data() + t * d);
    for (std::size_t t = 0; t < T; ++t) {
        matvec_rows(normed.data() + t * d, blk.wq, q.data() + t * d);
        matvec_rows(normed.data() + t * d, blk.wk, k.data() + t * d);
        matvec_rows(normed.data() + t * d, blk.wv, v.data() + t * d);
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    for (std::size_t t = 0; t < T; ++t) {
        std::fill(ctx.begin(), ctx.end(), 0.0);
        for (std::size_t h = 0; h < n_heads; ++h) {
            const std::size_t off = h * dh;
            // causal mask: keys s <= t only, so states at t never depend on
            // later positions and prefix states match shorter runs bit-exactly
            scores.assign(t + 1, 0.0);
            double max_score = -1e300;
            for (std::size_t s = 0; s <= t; ++s) {
                double dot = 0.0;
                for (std::size_t c = 0; c < dh; ++c)
                    dot += q[t * d + off + c] * k[s * d + off + c];
                scores[s] = dot * scale;
                max_score = std::max(max_score, scores[s]);
            }
            double denom = 0.0;
            for (std::size_t s = 0; s <= t; ++s) {
                scores[s] = std::exp(scores[s] - max_score);
                denom += scores[s];
            }
            for (std::size_t s = 0; s <= t; ++s) {
                const double w = scores[s] / denom;
                for (std::size_t c = 0; c < dh; ++c) ctx[off + c] += w * v[s * d + off + c];
            }
        }
        matvec_rows(ctx.data(), blk.wo, proj.data());
        const double * xr = x.row(t);
        double * yr = y.row(t);
        for (std::size_t i = 0; i < d; ++i) yr[i] = xr[i] + proj[i];
    }

    for (std::size_t t = 0; t < T; ++t) {
        double * yr = y.row(t);
        rmsnorm(yr, blk.ffn_norm_gain.data(), d, eps, normed.data());
        matvec_rows(normed.data(), blk.ff_in, ff_mid.data());
        for (auto & m : ff_mid) m = gelu(m);
        matvec_rows(ff_mid.data(), blk.ff_out, proj.data());
        for (std::size_t i = 0; i < d; ++i) yr[i] += proj[i];
    }
}

// Runs blocks from_layer..L with hooks, then fills final_logits.
void run_from(const model_bundle & bundle, forward_trace & tr, std::size_t from_layer,
              const std::vector<intervention> & interventions) {
    const std::size_t L = bundle.n_layers();
    const std::size_t T = tr.seq_len;
    for (std::size_t l = from_layer; l <= L; ++l) {
        run_block(bundle, bundle.blocks[l - 1], tr.states[l - 1], tr.states[l]);
        apply_hooks(tr.states[l], l, T, tr.d_model, interventions);
    }
    tr.final_logits = mat(T, bundle.vocab_size());
    for (std::size_t t = 0; t < T; ++t)
        detail::decode_head(bundle, tr.states[L].row(t), tr.final_logits.row(t));
}

} // namespace

forward_trace forward(const model_bundle & bundle, const token_seq & tokens,
                      const std::vector<intervention> & interventions) {
    const std::size_t T = tokens.size();
    const std::size_t d = bundle.d_model();
    const std::size_t L = bundle.n_layers();

    if (T == 0) throw validation_error("forward: empty token sequence");
    if (T > bundle.config.max_seq)
        throw validation_error("forward: sequence length " + std::to_string(T) +
                               " exceeds max_seq " + std::to_string(bundle.config.max_seq));
    for (std::uint32_t id : tokens.ids)
        if (id >= bundle.vocab_size())
            throw validation_error("forward: token id " + std::to_string(id) + " out of range");
    validate_interventions(bundle, T, interventions);

    forward_trace tr;
    tr.seq_len = T;
    tr.d_model = d;
    tr.bundle_hash = bundle.hash;
    tr.applied_interventions = interventions;
    tr.states.assign(L + 1, mat(T, d));

    // states[0]: token + position embeddings, then embedding-level hooks
    for (std::size_t t = 0; t < T; ++t) {
        const double * te = bundle.token_embedding.row(tokens.ids[t]);
        const double * pe = bundle.position_embedding.row(t);
        double * row = tr.states[0].row(t);
        for (std::size_t i = 0; i < d; ++i) row[i] = te[i] + pe[i];
    }
    apply_hooks(tr.states[0], 0, T, d, interventions);

    run_from(bundle, tr, 1, interventions);
    return tr;
}

forward_trace forward_replay_from(const model_bundle & bundle, const forward_trace & base,
                                  std::size_t layer, const std::vector<intervention> & edits) {
    if (base.bundle_hash != bundle.hash)
        throw validation_error("forward_replay_from: trace was produced by a different bundle");
    if (layer >= base.states.size())
        throw validation_error("forward_replay_from: layer " + std::to_string(layer) +
                               " out of range");
    for (const auto & iv : edits)
        if (iv.layer != layer)
            throw validation_error("forward_replay_from: edit hooked at layer " +
                                   std::to_string(iv.layer) + ", expected " +
                                   std::to_string(layer));
    validate_interventions(bundle, base.seq_len, edits);

    forward_trace tr = base;
    tr.applied_interventions.insert(tr.applied_interventions.end(), edits.begin(), edits.end());
    apply_hooks(tr.states[layer], layer, tr.seq_len, tr.d_model, edits);
    if (layer < bundle.n_layers()) {
        run_from(bundle, tr, layer + 1, edits);
    } else {
        tr.final_logits = mat(tr.seq_len, bundle.vocab_size());
        for (std::size_t t = 0; t < tr.seq_len; ++t)
            detail::decode_head(bundle, tr.states[bundle.n_layers()].row(t),
                                tr.final_logits.row(t));
    }
    return tr;
}

std::vector<double> softmax_row(const double * logits, std::size_t n) {
    double max_logit = -1e300;
    for (std::size_t i = 0; i < n; ++i) max_logit = std::max(max_logit, logits[i]);
    std::vector<double> p(n);
    double denom = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        p[i] = std::exp(logits[i] - max_logit);
        denom += p[i];
    }
    for (auto & x : p) x /= denom;
    return p;
}

std::size_t argmax_lowest(const double * values, std::size_t n) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (values[i] > values[best]) best = i;
    return best;
}

generation generate(const model_bundle & bundle, const std::string & prompt,
                    std::size_t max_steps, const std::vector<intervention> & interventions) {
    if (max_steps < 1) throw validation_error("generate: max_steps must be >= 1");

    generation g;
    g.prompt_text = prompt;
    g.prompt = tokenize(bundle, prompt);
    g.bundle_hash = bundle.hash;
    if (g.prompt.empty()) throw validation_error("generate: empty prompt");
    if (g.prompt.size() > bundle.config.max_seq)
        throw validation_error("generate: prompt length " + std::to_string(g.prompt.size()) +
                               " exceeds max_seq " + std::to_string(bundle.config.max_seq));

    const int eot = bundle.eot_id();
    token_seq seq = g.prompt;

    for (std::size_t step = 0; step < max_steps; ++step) {
        if (seq.size() >= bundle.config.max_seq) break;
        const forward_trace tr = forward(bundle, seq, interventions);
        const std::size_t next =
            argmax_lowest(tr.final_logits.row(seq.size() - 1), bundle.vocab_size());
        seq.ids.push_back(static_cast<std::uint32_t>(next));
        seq.byte_offsets.emplace_back(0, 0); // refreshed below
        g.generated.ids.push_back(static_cast<std::uint32_t>(next));
        if (eot >= 0 && next == static_cast<std::size_t>(eot)) break;
    }

    g.generated_text = detokenize(bundle, g.generated.ids);
    std::size_t off = 0;
    for (std::uint32_t id : g.generated.ids) {
        g.generated.byte_offsets.emplace_back(off, off + bundle.vocab[id].size());
        off += bundle.vocab[id].size();
    }
    g.trace = forward(bundle, seq, interventions);
    return g;
}

} // namespace introspect
