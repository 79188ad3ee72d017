#include "introspect/lens.hpp"

#include "introspect/detail/math.hpp"
#include "introspect/errors.hpp"

#include <algorithm>
#include <numeric>

namespace introspect {

std::vector<lens_entry> lens_topk(const model_bundle & bundle, const double * state,
                                  std::size_t d, std::size_t k) {
    const std::size_t V = bundle.vocab_size();
    if (d != bundle.d_model())
        throw validation_error("lens_topk: state has dimension " + std::to_string(d) +
                               ", expected " + std::to_string(bundle.d_model()));
    if (k < 1 || k > V)
        throw validation_error("lens_topk: k must be in [1, " + std::to_string(V) + "]");

    std::vector<double> logits(V);
    detail::decode_head(bundle, state, logits.data());
    const std::vector<double> probs = softmax_row(logits.data(), V);

    std::vector<std::uint32_t> order(V);
    std::iota(order.begin(), order.end(), 0u);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k),
                      order.end(), [&](std::uint32_t a, std::uint32_t b) {
                          if (probs[a] != probs[b]) return probs[a] > probs[b];
                          return a < b;
                      });

    std::vector<lens_entry> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        const std::uint32_t id = order[i];
        out.push_back({id, bundle.vocab[id], probs[id]});
    }
    return out;
}

std::vector<lens_entry> lens_topk(const model_bundle & bundle,
                                  const std::vector<double> & state, std::size_t k) {
    return lens_topk(bundle, state.data(), state.size(), k);
}

lens_grid make_lens_grid(const model_bundle & bundle, const generation & gen, std::size_t k) {
    if (gen.bundle_hash != bundle.hash)
        throw validation_error("lens_grid: generation was produced by a different bundle "
                               "(hash " + gen.bundle_hash + " vs " + bundle.hash + ")");
    const std::size_t L = bundle.n_layers();
    const std::size_t steps = gen.n_steps();

    lens_grid grid;
    grid.k = k;
    grid.prompt_len = gen.prompt_len();
    grid.bundle_hash = bundle.hash;
    for (std::uint32_t id : gen.generated.ids) grid.column_tokens.push_back(bundle.vocab[id]);

    grid.cells.assign(L + 1, std::vector<lens_cell>(steps));
    for (std::size_t l = 0; l <= L; ++l) {
        for (std::size_t j = 0; j < steps; ++j) {
            // column j decodes the position whose next-token prediction
            // produced generated token j
            const std::size_t pos = gen.prompt_len() - 1 + j;
            lens_cell & cell = grid.cells[l][j];
            cell.layer = l;
            cell.column = j;
            cell.seq_position = pos;
            cell.top = lens_topk(bundle, gen.trace.state(l, pos), gen.trace.d_model, k);
        }
    }
    return grid;
}

} // namespace introspect
