#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace introspect {

// Dense row-major matrix of doubles. Weights are stored as f32 on disk and
// widened on load; all in-memory compute is double.
struct mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> a;

    mat() = default;
    mat(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

    double & at(std::size_t r, std::size_t c) { return a[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return a[r * cols + c]; }
    double * row(std::size_t r) { return a.data() + r * cols; }
    const double * row(std::size_t r) const { return a.data() + r * cols; }
    std::size_t size() const { return a.size(); }
};

struct model_config {
    std::size_t n_layers = 0;   // L
    std::size_t d_model = 0;    // d
    std::size_t n_heads = 0;
    std::size_t d_ff = 0;
    std::size_t vocab_size = 0; // V
    std::size_t max_seq = 0;
    double norm_epsilon = 1e-5;

    // Throws validation_error naming the offending field.
    void validate() const;

    std::size_t head_dim() const { return d_model / n_heads; }
    bool operator==(const model_config &) const = default;
};

// Weights of one pre-norm transformer block:
//   x += attn(rmsnorm(x, attn_norm_gain))        with projections wq/wk/wv/wo
//   x += ffn(rmsnorm(x, ffn_norm_gain))          with gelu(x W_in) W_out
struct block_weights {
    std::vector<double> attn_norm_gain; // d
    mat wq, wk, wv, wo;                 // d x d each
    std::vector<double> ffn_norm_gain;  // d
    mat ff_in;                          // d x d_ff
    mat ff_out;                         // d_ff x d
};

// Immutable after construction; safe to share across threads.
struct model_bundle {
    model_config config;
    mat token_embedding;                 // V x d
    mat position_embedding;              // max_seq x d
    std::vector<block_weights> blocks;   // L entries
    std::vector<double> final_norm_gain; // d
    mat unembedding;                     // d x V
    std::vector<std::string> vocab;      // index == token id

    std::unordered_map<std::string, std::uint32_t> token_index; // string -> id
    std::string hash; // 16-hex FNV-1a over config + vocab + f32 weight bytes

    // Validates shapes, finiteness and the vocabulary bijection, then fills
    // token_index and hash. Errors name the offending tensor or vocab slot.
    void finalize();

    std::size_t n_layers() const { return config.n_layers; }
    std::size_t d_model() const { return config.d_model; }
    std::size_t vocab_size() const { return config.vocab_size; }

    // End-of-text token id, or -1 when the vocabulary has no "<eot>" entry.
    int eot_id() const;
};

// Population standard deviation over all elements of the token embedding.
// Default corruption scale for causal tracing is 3x this value.
double embedding_std(const model_bundle & bundle);

// One entry of the bundle's ordered tensor manifest. The order below is the
// serialization order of weights.bin.
struct tensor_ref {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    double * data = nullptr;
};

// Manifest order: token_embedding, position_embedding,
// per block (attn_norm_gain, wq, wk, wv, wo, ffn_norm_gain, ff_in, ff_out),
// final_norm_gain, unembedding.
std::vector<tensor_ref> tensor_manifest(model_bundle & bundle);
std::vector<tensor_ref> tensor_manifest(const model_bundle & bundle);

} // namespace introspect
