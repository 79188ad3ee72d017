#include "introspect/bundle_io.hpp"

#include "introspect/errors.hpp"
#include "introspect/rng.hpp"
#include "introspect/tokenizer.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace introspect {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int BUNDLE_VERSION = 1;

model_bundle allocate(const model_config & cfg) {
    model_bundle b;
    b.config = cfg;
    b.token_embedding = mat(cfg.vocab_size, cfg.d_model);
    b.position_embedding = mat(cfg.max_seq, cfg.d_model);
    b.blocks.resize(cfg.n_layers);
    for (auto & blk : b.blocks) {
        blk.attn_norm_gain.assign(cfg.d_model, 0.0);
        blk.wq = mat(cfg.d_model, cfg.d_model);
        blk.wk = mat(cfg.d_model, cfg.d_model);
        blk.wv = mat(cfg.d_model, cfg.d_model);
        blk.wo = mat(cfg.d_model, cfg.d_model);
        blk.ffn_norm_gain.assign(cfg.d_model, 0.0);
        blk.ff_in = mat(cfg.d_model, cfg.d_ff);
        blk.ff_out = mat(cfg.d_ff, cfg.d_model);
    }
    b.final_norm_gain.assign(cfg.d_model, 0.0);
    b.unembedding = mat(cfg.d_model, cfg.vocab_size);
    return b;
}

json read_json_file(const fs::path & path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception & e) {
        throw validation_error(path.string() + ": " + e.what());
    }
    return j;
}

void write_text_file(const fs::path & path, const std::string & text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write " + path.string());
    out << text;
    if (!out) throw io_error("short write to " + path.string());
}

std::size_t require_count(const json & j, const char * key, const fs::path & where) {
    if (!j.contains(key) || !j[key].is_number_unsigned())
        throw validation_error(where.string() + ": missing or invalid field '" +
                               std::string(key) + "'");
    return j[key].get<std::size_t>();
}

} // namespace

void write_bundle(const model_bundle & bundle, const std::string & dir) {
    fs::create_directories(dir);
    const fs::path root(dir);

    auto refs = tensor_manifest(bundle);
    json manifest = json::array();
    std::size_t offset = 0;
    for (const auto & t : refs) {
        manifest.push_back({{"name", t.name},
                            {"shape", {t.rows, t.cols}},
                            {"offset", offset}});
        offset += t.rows * t.cols * sizeof(float);
    }

    json cfg = {
        {"version", BUNDLE_VERSION},
        {"n_layers", bundle.config.n_layers},
        {"d_model", bundle.config.d_model},
        {"n_heads", bundle.config.n_heads},
        {"d_ff", bundle.config.d_ff},
        {"vocab_size", bundle.config.vocab_size},
        {"max_seq", bundle.config.max_seq},
        {"norm_epsilon", bundle.config.norm_epsilon},
        {"tensors", manifest},
    };
    write_text_file(root / "config.json", cfg.dump(2) + "\n");

    json vocab = json::array();
    for (const auto & s : bundle.vocab) vocab.push_back(s);
    write_text_file(root / "vocab.json", vocab.dump(2) + "\n");

    std::ofstream wout(root / "weights.bin", std::ios::binary | std::ios::trunc);
    if (!wout) throw io_error("cannot write " + (root / "weights.bin").string());
    std::vector<float> buf;
    for (const auto & t : refs) {
        const std::size_t n = t.rows * t.cols;
        buf.resize(n);
        for (std::size_t i = 0; i < n; ++i) buf[i] = static_cast<float>(t.data[i]);
        wout.write(reinterpret_cast<const char *>(buf.data()),
                   static_cast<std::streamsize>(n * sizeof(float)));
    }
    if (!wout) throw io_error("short write to " + (root / "weights.bin").string());
}

model_bundle load_bundle(const std::string & dir) {
    const fs::path root(dir);
    if (!fs::is_directory(root))
        throw io_error("bundle directory not found: " + dir);

    const json cfg = read_json_file(root / "config.json");
    if (!cfg.contains("version") || cfg["version"] != BUNDLE_VERSION)
        throw validation_error("config.json: unsupported bundle version");

    model_config mc;
    mc.n_layers = require_count(cfg, "n_layers", root / "config.json");
    mc.d_model = require_count(cfg, "d_model", root / "config.json");
    mc.n_heads = require_count(cfg, "n_heads", root / "config.json");
    mc.d_ff = require_count(cfg, "d_ff", root / "config.json");
    mc.vocab_size = require_count(cfg, "vocab_size", root / "config.json");
    mc.max_seq = require_count(cfg, "max_seq", root / "config.json");
    if (!cfg.contains("norm_epsilon") || !cfg["norm_epsilon"].is_number())
        throw validation_error("config.json: missing or invalid field 'norm_epsilon'");
    mc.norm_epsilon = cfg["norm_epsilon"].get<double>();
    mc.validate();

    model_bundle b = allocate(mc);

    // Validate the declared manifest against the expected one, in order.
    auto refs = tensor_manifest(b);
    if (!cfg.contains("tensors") || !cfg["tensors"].is_array())
        throw validation_error("config.json: missing tensor manifest");
    const json & manifest = cfg["tensors"];
    std::size_t expected_offset = 0;
    for (std::size_t i = 0; i < refs.size(); ++i) {
        if (i >= manifest.size())
            throw validation_error("config.json: tensor '" + refs[i].name +
                                   "' missing from manifest");
        const json & m = manifest[i];
        const std::string name = m.value("name", "");
        if (name != refs[i].name)
            throw validation_error("config.json: manifest entry " + std::to_string(i) +
                                   " is '" + name + "', expected '" + refs[i].name + "'");
        const auto shape = m.value("shape", std::vector<std::size_t>{});
        if (shape.size() != 2 || shape[0] != refs[i].rows || shape[1] != refs[i].cols)
            throw validation_error("config.json: tensor '" + name + "' shape mismatch");
        if (m.value("offset", static_cast<std::size_t>(-1)) != expected_offset)
            throw validation_error("config.json: tensor '" + name + "' has wrong offset");
        expected_offset += refs[i].rows * refs[i].cols * sizeof(float);
    }
    if (manifest.size() > refs.size())
        throw validation_error("config.json: extra tensor '" +
                               manifest[refs.size()].value("name", "?") + "' in manifest");

    // vocab.json
    const json vj = read_json_file(root / "vocab.json");
    if (!vj.is_array())
        throw validation_error("vocab.json: expected an array of token strings");
    b.vocab.clear();
    b.vocab.reserve(vj.size());
    for (std::size_t i = 0; i < vj.size(); ++i) {
        if (vj[i].is_null()) {
            b.vocab.push_back(""); // finalize reports the gap with its id
        } else if (vj[i].is_string()) {
            b.vocab.push_back(vj[i].get<std::string>());
        } else {
            throw validation_error("vocab.json: entry " + std::to_string(i) +
                                   " is not a string");
        }
    }

    // weights.bin
    std::ifstream win(root / "weights.bin", std::ios::binary);
    if (!win) throw io_error("cannot open " + (root / "weights.bin").string());
    win.seekg(0, std::ios::end);
    const std::size_t file_size = static_cast<std::size_t>(win.tellg());
    win.seekg(0);
    std::size_t offset = 0;
    std::vector<float> buf;
    for (auto & t : refs) {
        const std::size_t n = t.rows * t.cols;
        if (offset + n * sizeof(float) > file_size)
            throw validation_error("weights.bin: tensor '" + t.name +
                                   "' extends past end of file (shape mismatch or truncation)");
        buf.resize(n);
        win.read(reinterpret_cast<char *>(buf.data()),
                 static_cast<std::streamsize>(n * sizeof(float)));
        if (!win)
            throw validation_error("weights.bin: short read on tensor '" + t.name + "'");
        for (std::size_t i = 0; i < n; ++i) t.data[i] = static_cast<double>(buf[i]);
        offset += n * sizeof(float);
    }
    if (offset != file_size)
        throw validation_error("weights.bin: " + std::to_string(file_size - offset) +
                               " trailing bytes beyond the declared manifest");

    b.finalize();
    return b;
}

model_bundle synthesize_bundle(std::uint64_t seed, const model_config & config,
                               const std::vector<std::string> & vocab) {
    config.validate();
    if (vocab.size() != config.vocab_size)
        throw validation_error("synthesize_bundle: vocab has " + std::to_string(vocab.size()) +
                               " entries but config.vocab_size is " +
                               std::to_string(config.vocab_size));

    model_bundle b = allocate(config);
    b.vocab = vocab;

    auto refs = tensor_manifest(b);
    for (std::size_t t = 0; t < refs.size(); ++t) {
        const bool is_gain = refs[t].name.find("norm_gain") != std::string::npos;
        const std::size_t n = refs[t].rows * refs[t].cols;
        for (std::size_t i = 0; i < n; ++i) {
            const double z = rng_normal(seed, rng_purpose::weights, t, i);
            // f32 is the serialized precision; quantize now so in-memory and
            // reloaded bundles are identical
            refs[t].data[i] =
                static_cast<double>(static_cast<float>(is_gain ? 1.0 + 0.02 * z : 0.02 * z));
        }
    }
    b.finalize();
    return b;
}

std::vector<std::string> byte_vocab(const std::vector<std::string> & extra) {
    std::vector<std::string> v;
    v.reserve(128 + extra.size());
    for (int c = 0; c < 128; ++c) v.push_back(std::string(1, static_cast<char>(c)));
    for (const auto & s : extra) v.push_back(s);
    return v;
}

model_bundle make_fact_bundle(std::uint64_t seed) {
    // country token -> capital token, per prompt language of the toy facts set
    static const std::vector<std::pair<std::string, std::string>> FACTS = {
        {" Canada", " Ottawa"}, {" France", " Paris"},     {" Japan", " Tokyo"},
        {" Frankrijk", " Parijs"}, {" Japan", " Tokio"},
    };
    // prompt-structure marker -> generic continuation the model falls back to
    // once the subject is corrupted (what large models do with " the")
    static const std::vector<std::pair<std::string, std::string>> FILLERS = {
        {" capital", " the"}, {" hoofdstad", " de"},
    };
    const std::vector<std::string> extra = {
        " Canada", " France", " Frankrijk", " Japan",
        " Ottawa", " Paris",  " Parijs",    " Tokyo", " Tokio",
        " capital", " hoofdstad", " the", " de", "<eot>",
    };

    model_config cfg;
    cfg.n_layers = 4;
    cfg.d_model = 128;
    cfg.n_heads = 4;
    cfg.d_ff = 128;
    cfg.max_seq = 64;
    cfg.norm_epsilon = 1e-5;
    const auto vocab = byte_vocab(extra);
    cfg.vocab_size = vocab.size();

    model_bundle b = synthesize_bundle(seed, cfg, vocab);
    const std::size_t d = cfg.d_model;

    // Unit-scale token embeddings so directions are quasi-orthogonal. The top
    // RESERVED dims stay zero for every ordinary token; they form a clean
    // subspace for the capital / marker indicator axes below.
    constexpr std::size_t RESERVED = 8;
    for (std::size_t v = 0; v < cfg.vocab_size; ++v)
        for (std::size_t i = 0; i < d; ++i)
            b.token_embedding.at(v, i) =
                i + RESERVED >= d
                    ? 0.0
                    : static_cast<double>(static_cast<float>(
                          rng_normal(seed, rng_purpose::weights, 1000, v * d + i)));

    // Block 0: zero Q/K gives uniform causal attention; the value/output path
    // pools POOL_GAIN * rmsnorm(embedding) into every position.
    constexpr double POOL_GAIN = 8.0;
    auto & blk = b.blocks[0];
    std::fill(blk.wq.a.begin(), blk.wq.a.end(), 0.0);
    std::fill(blk.wk.a.begin(), blk.wk.a.end(), 0.0);
    std::fill(blk.wv.a.begin(), blk.wv.a.end(), 0.0);
    std::fill(blk.wo.a.begin(), blk.wo.a.end(), 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        blk.wv.at(i, i) = POOL_GAIN;
        blk.wo.at(i, i) = 1.0;
    }
    blk.attn_norm_gain.assign(d, 1.0);
    std::fill(blk.ff_in.a.begin(), blk.ff_in.a.end(), 0.0);
    std::fill(blk.ff_out.a.begin(), blk.ff_out.a.end(), 0.0);
    b.final_norm_gain.assign(d, 1.0);

    // Indicator axes in the reserved subspace. Marker and capital boosts are
    // strong (their signal should survive); country boosts are moderate so
    // embedding noise of a few units genuinely destroys the fact signal.
    constexpr double MARKER_BOOST = 20.0;
    constexpr double COUNTRY_BOOST = 6.0;
    constexpr double FACT_GAIN = 22.0;  // country axis -> capital logit
    constexpr double FILLER_GAIN = 9.0; // marker axis -> generic-token logit
    constexpr double EOT_GAIN = 16.0;   // capital axis -> <eot> logit

    // shared capital-present axis feeding <eot>
    const std::size_t eot = static_cast<std::size_t>(b.eot_id());
    const std::size_t capital_axis = d - 1;
    std::vector<std::string> capitals;
    for (const auto & [country, capital] : FACTS)
        if (std::find(capitals.begin(), capitals.end(), capital) == capitals.end())
            capitals.push_back(capital);
    for (const auto & capital : capitals)
        b.token_embedding.at(b.token_index.at(capital), capital_axis) = MARKER_BOOST;
    b.unembedding.at(capital_axis, eot) += EOT_GAIN;

    // marker axes feeding the per-language filler tokens
    for (std::size_t j = 0; j < FILLERS.size(); ++j) {
        const std::size_t axis = d - 2 - j;
        b.token_embedding.at(b.token_index.at(FILLERS[j].first), axis) = MARKER_BOOST;
        b.unembedding.at(axis, b.token_index.at(FILLERS[j].second)) += FILLER_GAIN;
    }

    // one axis per country, keyed to its capital(s)
    std::vector<std::string> countries;
    for (const auto & [country, capital] : FACTS)
        if (std::find(countries.begin(), countries.end(), country) == countries.end())
            countries.push_back(country);
    for (std::size_t j = 0; j < countries.size(); ++j) {
        const std::size_t axis = d - 4 - j;
        b.token_embedding.at(b.token_index.at(countries[j]), axis) = COUNTRY_BOOST;
        for (const auto & [country, capital] : FACTS)
            if (country == countries[j])
                b.unembedding.at(axis, b.token_index.at(capital)) += FACT_GAIN;
    }

    // Quantize the engineered tensors to f32 like everything else.
    for (auto & t : tensor_manifest(b)) {
        const std::size_t n = t.rows * t.cols;
        for (std::size_t i = 0; i < n; ++i)
            t.data[i] = static_cast<double>(static_cast<float>(t.data[i]));
    }
    b.finalize();
    return b;
}

} // namespace introspect
