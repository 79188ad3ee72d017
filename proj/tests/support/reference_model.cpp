#include "reference_model.hpp"

#include <cmath>

namespace refmodel {

using introspect::mat;
using introspect::model_bundle;

namespace {

std::vector<double> ref_rmsnorm(const std::vector<double> & x, const std::vector<double> & gain,
                                double eps) {
    double mean_square = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) mean_square += x[i] * x[i];
    mean_square /= static_cast<double>(x.size());
    const double scale = 1.0 / std::sqrt(mean_square + eps);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * scale * gain[i];
    return out;
}

// row-vector times row-major matrix, one scalar at a time
std::vector<double> ref_vecmat(const std::vector<double> & x, const mat & w) {
    std::vector<double> out(w.cols, 0.0);
    for (std::size_t j = 0; j < w.cols; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < w.rows; ++i) acc += x[i] * w.at(i, j);
        out[j] = acc;
    }
    return out;
}

} // namespace

ref_result reference_forward(const model_bundle & bundle,
                             const std::vector<std::uint32_t> & ids) {
    const std::size_t T = ids.size();
    const std::size_t d = bundle.config.d_model;
    const std::size_t L = bundle.config.n_layers;
    const std::size_t n_heads = bundle.config.n_heads;
    const std::size_t dh = d / n_heads;
    const double eps = bundle.config.norm_epsilon;

    ref_result res;
    res.states.resize(L + 1);

    res.states[0].resize(T);
    for (std::size_t t = 0; t < T; ++t) {
        res.states[0][t].resize(d);
        for (std::size_t i = 0; i < d; ++i)
            res.states[0][t][i] =
                bundle.token_embedding.at(ids[t], i) + bundle.position_embedding.at(t, i);
    }

    for (std::size_t l = 1; l <= L; ++l) {
        const auto & blk = bundle.blocks[l - 1];
        const auto & x = res.states[l - 1];
        auto & y = res.states[l];
        y.assign(T, std::vector<double>(d, 0.0));

        std::vector<std::vector<double>> q(T), k(T), v(T);
        for (std::size_t t = 0; t < T; ++t) {
            const auto normed = ref_rmsnorm(x[t], blk.attn_norm_gain, eps);
            q[t] = ref_vecmat(normed, blk.wq);
            k[t] = ref_vecmat(normed, blk.wk);
            v[t] = ref_vecmat(normed, blk.wv);
        }

        for (std::size_t t = 0; t < T; ++t) {
            std::vector<double> ctx(d, 0.0);
            for (std::size_t h = 0; h < n_heads; ++h) {
                std::vector<double> scores(t + 1, 0.0);
                double max_score = -1e300;
                for (std::size_t s = 0; s <= t; ++s) {
                    double dot = 0.0;
                    for (std::size_t c = 0; c < dh; ++c)
                        dot += q[t][h * dh + c] * k[s][h * dh + c];
                    scores[s] = dot / std::sqrt(static_cast<double>(dh));
                    if (scores[s] > max_score) max_score = scores[s];
                }
                double denom = 0.0;
                for (std::size_t s = 0; s <= t; ++s) {
                    scores[s] = std::exp(scores[s] - max_score);
                    denom += scores[s];
                }
                for (std::size_t s = 0; s <= t; ++s)
                    for (std::size_t c = 0; c < dh; ++c)
                        ctx[h * dh + c] += scores[s] / denom * v[s][h * dh + c];
            }
            const auto attn_out = ref_vecmat(ctx, blk.wo);
            for (std::size_t i = 0; i < d; ++i) y[t][i] = x[t][i] + attn_out[i];
        }

        for (std::size_t t = 0; t < T; ++t) {
            const auto normed = ref_rmsnorm(y[t], blk.ffn_norm_gain, eps);
            auto mid = ref_vecmat(normed, blk.ff_in);
            for (auto & m : mid)
                m = 0.5 * m * (1.0 + std::erf(m / std::sqrt(2.0)));
            const auto ff_out = ref_vecmat(mid, blk.ff_out);
            for (std::size_t i = 0; i < d; ++i) y[t][i] += ff_out[i];
        }
    }

    res.logits.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
        const auto normed = ref_rmsnorm(res.states[L][t], bundle.final_norm_gain, eps);
        res.logits[t] = ref_vecmat(normed, bundle.unembedding);
    }
    return res;
}

} // namespace refmodel
