#pragma once

#include "introspect/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace introspect {

// Bundle directory layout:
//   config.json  - model_config fields plus an ordered tensor manifest
//                  (name, shape, byte offset into weights.bin)
//   vocab.json   - array of token strings, index == token id
//   weights.bin  - little-endian f32, row-major, concatenated in manifest order
// write_bundle / load_bundle round-trip bit-exactly.

model_bundle load_bundle(const std::string & dir);
void write_bundle(const model_bundle & bundle, const std::string & dir);

// Deterministic random bundle: identical (seed, config, vocab) yields
// bit-identical tensors. Weights are counter-based standard normals scaled
// by 0.02; norm gains are 1 + 0.02 * normal so the model is well-conditioned.
model_bundle synthesize_bundle(std::uint64_t seed, const model_config & config,
                               const std::vector<std::string> & vocab);

// Vocabulary of all 256 single-byte tokens plus the given extra strings.
std::vector<std::string> byte_vocab(const std::vector<std::string> & extra = {});

// Hand-wired bundle that stores a small country->capital fact table:
// layer 1 pools token embeddings through uniform causal attention and the
// unembedding keys each capital token on its country's embedding direction.
// Prompts like "The capital of Canada is" then put ~0.9 probability on
// " Ottawa", which gives causal tracing and interpolation something real to
// measure at toy scale. Covers English and Dutch prompt templates for
// Canada/France/Japan.
model_bundle make_fact_bundle(std::uint64_t seed);

} // namespace introspect
