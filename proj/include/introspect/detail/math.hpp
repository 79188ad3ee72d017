#pragma once

#include "introspect/model.hpp"

#include <cmath>
#include <cstddef>

// Shared numeric kernels. Lens decoding reuses exactly these so a decoded
// top-1 at the final layer coincides bit-for-bit with the model head.

namespace introspect::detail {

inline void rmsnorm(const double * x, const double * gain, std::size_t d, double eps,
                    double * out) {
    double ms = 0.0;
    for (std::size_t i = 0; i < d; ++i) ms += x[i] * x[i];
    const double inv = 1.0 / std::sqrt(ms / static_cast<double>(d) + eps);
    for (std::size_t i = 0; i < d; ++i) out[i] = x[i] * inv * gain[i];
}

// y = x . W for row-major W[in][out]
inline void matvec_rows(const double * x, const mat & w, double * y) {
    for (std::size_t j = 0; j < w.cols; ++j) y[j] = 0.0;
    for (std::size_t i = 0; i < w.rows; ++i) {
        const double xi = x[i];
        const double * wr = w.row(i);
        for (std::size_t j = 0; j < w.cols; ++j) y[j] += xi * wr[j];
    }
}

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * 0.7071067811865475244)); }

// logits = unembedding . rmsnorm(state, final_norm_gain)
inline void decode_head(const model_bundle & b, const double * state, double * logits) {
    std::vector<double> normed(b.config.d_model);
    rmsnorm(state, b.final_norm_gain.data(), b.config.d_model, b.config.norm_epsilon,
            normed.data());
    matvec_rows(normed.data(), b.unembedding, logits);
}

} // namespace introspect::detail
