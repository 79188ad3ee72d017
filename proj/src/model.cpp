#include "introspect/model.hpp"

#include "introspect/errors.hpp"

#include <cmath>
#include <cstring>
#include <set>

namespace introspect {

void model_config::validate() const {
    if (n_layers < 1) throw validation_error("config: n_layers must be >= 1");
    if (d_model < 1) throw validation_error("config: d_model must be >= 1");
    if (n_heads < 1) throw validation_error("config: n_heads must be >= 1");
    if (d_ff < 1) throw validation_error("config: d_ff must be >= 1");
    if (vocab_size < 1) throw validation_error("config: vocab_size must be >= 1");
    if (max_seq < 1) throw validation_error("config: max_seq must be >= 1");
    if (d_model % n_heads != 0)
        throw validation_error("config: d_model must be divisible by n_heads");
    if (!(norm_epsilon > 0.0))
        throw validation_error("config: norm_epsilon must be > 0");
}

std::vector<tensor_ref> tensor_manifest(model_bundle & b) {
    std::vector<tensor_ref> out;
    const std::size_t d = b.config.d_model;
    auto add = [&](const std::string & name, std::size_t r, std::size_t c, double * p) {
        out.push_back({name, r, c, p});
    };
    add("token_embedding", b.config.vocab_size, d, b.token_embedding.a.data());
    add("position_embedding", b.config.max_seq, d, b.position_embedding.a.data());
    for (std::size_t i = 0; i < b.blocks.size(); ++i) {
        auto & blk = b.blocks[i];
        const std::string p = "blocks." + std::to_string(i) + ".";
        add(p + "attn_norm_gain", 1, d, blk.attn_norm_gain.data());
        add(p + "wq", d, d, blk.wq.a.data());
        add(p + "wk", d, d, blk.wk.a.data());
        add(p + "wv", d, d, blk.wv.a.data());
        add(p + "wo", d, d, blk.wo.a.data());
        add(p + "ffn_norm_gain", 1, d, blk.ffn_norm_gain.data());
        add(p + "ff_in", d, b.config.d_ff, blk.ff_in.a.data());
        add(p + "ff_out", b.config.d_ff, d, blk.ff_out.a.data());
    }
    add("final_norm_gain", 1, d, b.final_norm_gain.data());
    add("unembedding", d, b.config.vocab_size, b.unembedding.a.data());
    return out;
}

std::vector<tensor_ref> tensor_manifest(const model_bundle & b) {
    return tensor_manifest(const_cast<model_bundle &>(b));
}

namespace {

std::uint64_t fnv1a(std::uint64_t h, const void * data, std::size_t n) {
    const auto * p = static_cast<const unsigned char *>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string to_hex(std::uint64_t h) {
    static const char * digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return s;
}

} // namespace

void model_bundle::finalize() {
    config.validate();

    if (blocks.size() != config.n_layers)
        throw validation_error("bundle: expected " + std::to_string(config.n_layers) +
                               " blocks, got " + std::to_string(blocks.size()));

    auto refs = tensor_manifest(*this);
    for (const auto & t : refs) {
        // shape consistency is implied by construction for mats, but gains are
        // plain vectors and load paths can leave them short
        const std::size_t n = t.rows * t.cols;
        if (t.data == nullptr && n > 0)
            throw validation_error("bundle: tensor '" + t.name + "' missing");
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::isfinite(t.data[i]))
                throw validation_error("bundle: tensor '" + t.name +
                                       "' has a non-finite value at index " + std::to_string(i));
        }
    }
    auto check_len = [&](const std::string & name, std::size_t got, std::size_t want) {
        if (got != want)
            throw validation_error("bundle: tensor '" + name + "' has " + std::to_string(got) +
                                   " elements, expected " + std::to_string(want));
    };
    check_len("token_embedding", token_embedding.size(), config.vocab_size * config.d_model);
    check_len("position_embedding", position_embedding.size(), config.max_seq * config.d_model);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const std::string p = "blocks." + std::to_string(i) + ".";
        check_len(p + "attn_norm_gain", blocks[i].attn_norm_gain.size(), config.d_model);
        check_len(p + "wq", blocks[i].wq.size(), config.d_model * config.d_model);
        check_len(p + "wk", blocks[i].wk.size(), config.d_model * config.d_model);
        check_len(p + "wv", blocks[i].wv.size(), config.d_model * config.d_model);
        check_len(p + "wo", blocks[i].wo.size(), config.d_model * config.d_model);
        check_len(p + "ffn_norm_gain", blocks[i].ffn_norm_gain.size(), config.d_model);
        check_len(p + "ff_in", blocks[i].ff_in.size(), config.d_model * config.d_ff);
        check_len(p + "ff_out", blocks[i].ff_out.size(), config.d_ff * config.d_model);
    }
    check_len("final_norm_gain", final_norm_gain.size(), config.d_model);
    check_len("unembedding", unembedding.size(), config.d_model * config.vocab_size);

    if (vocab.size() != config.vocab_size)
        throw validation_error("bundle: vocabulary has " + std::to_string(vocab.size()) +
                               " entries, expected " + std::to_string(config.vocab_size));
    token_index.clear();
    token_index.reserve(vocab.size());
    for (std::size_t id = 0; id < vocab.size(); ++id) {
        if (vocab[id].empty())
            throw validation_error("bundle: vocabulary gap at id " + std::to_string(id));
        auto [it, inserted] = token_index.emplace(vocab[id], static_cast<std::uint32_t>(id));
        if (!inserted)
            throw validation_error("bundle: duplicate token string '" + vocab[id] +
                                   "' at ids " + std::to_string(it->second) + " and " +
                                   std::to_string(id));
    }

    // Hash over the serialized form: config fields, vocab strings, f32 weights.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const std::uint64_t cfg[6] = {config.n_layers, config.d_model,   config.n_heads,
                                  config.d_ff,     config.vocab_size, config.max_seq};
    h = fnv1a(h, cfg, sizeof(cfg));
    h = fnv1a(h, &config.norm_epsilon, sizeof(config.norm_epsilon));
    for (const auto & s : vocab) {
        h = fnv1a(h, s.data(), s.size());
        h = fnv1a(h, "\0", 1);
    }
    for (const auto & t : refs) {
        const std::size_t n = t.rows * t.cols;
        for (std::size_t i = 0; i < n; ++i) {
            const float f = static_cast<float>(t.data[i]);
            h = fnv1a(h, &f, sizeof(f));
        }
    }
    hash = to_hex(h);
}

int model_bundle::eot_id() const {
    auto it = token_index.find("<eot>");
    return it == token_index.end() ? -1 : static_cast<int>(it->second);
}

double embedding_std(const model_bundle & bundle) {
    const auto & a = bundle.token_embedding.a;
    if (a.empty()) return 0.0;
    double mean = 0.0;
    for (double v : a) mean += v;
    mean /= static_cast<double>(a.size());
    double var = 0.0;
    for (double v : a) var += (v - mean) * (v - mean);
    var /= static_cast<double>(a.size());
    return std::sqrt(var);
}

} // namespace introspect
