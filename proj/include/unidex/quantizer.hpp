#pragma once

#include <openssl/evp.h>

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "unidex/linalg.hpp"
#include "unidex/types.hpp"

namespace unidex {

struct QuantizerConfig {
    int embed_dim = 64;       // d
    int code_dim = 19;        // d_q
    int levels = 2;           // K
    double ewgs_delta = 1e-3; // gradient scaling factor for the rounding step

    void validate() const {
        if (levels < 2) throw ConfigError("levels must be >= 2");
        if (code_dim < 1) throw ConfigError("code_dim must be >= 1");
        if (embed_dim < 1) throw ConfigError("embed_dim must be >= 1");
        if (ewgs_delta < 0) throw ConfigError("ewgs_delta must be >= 0");
        // K^d_q must fit in an unsigned 64-bit SID.
        double bits = code_dim * std::log2(static_cast<double>(levels));
        if (bits > 63.999)
            throw ConfigError("levels^code_dim exceeds 64-bit SID range");
    }

    uint64_t code_space() const {
        uint64_t s = 1;
        for (int i = 0; i < code_dim; ++i) s *= static_cast<uint64_t>(levels);
        return s;
    }
};

using CodeVector = std::vector<int>;
using SemanticId = uint64_t;

// Trainable parameters: per-slot toy-encoder matrices plus the down/up
// projections around the quantization step. Query and document roles share
// the first min(query_tokens, doc_tokens) encoder slots.
struct QuantizerHead {
    QuantizerConfig config;
    int feature_dim = 256;  // d_base
    int query_tokens = 3;   // M
    int doc_tokens = 8;     // N

    // Shapes: w_enc is slot_count x embed_dim x feature_dim,
    // w_down is code_dim x embed_dim, w_up is embed_dim x code_dim.
    std::vector<double> w_enc;
    std::vector<double> w_down, b_down;
    std::vector<double> w_up, b_up;

    int slot_count() const { return std::max(query_tokens, doc_tokens); }

    static QuantizerHead init(const QuantizerConfig& cfg, int feature_dim, int query_tokens,
                              int doc_tokens, uint64_t seed) {
        cfg.validate();
        if (feature_dim < 1 || query_tokens < 1 || doc_tokens < 1)
            throw ConfigError("head dims must be positive");
        QuantizerHead h;
        h.config = cfg;
        h.feature_dim = feature_dim;
        h.query_tokens = query_tokens;
        h.doc_tokens = doc_tokens;
        std::mt19937_64 rng(seed);
        auto uniform_init = [&](std::vector<double>& w, size_t n, int fan_in) {
            double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
            std::uniform_real_distribution<double> dist(-bound, bound);
            w.resize(n);
            for (auto& v : w) v = dist(rng);
        };
        size_t slots = static_cast<size_t>(h.slot_count());
        uniform_init(h.w_enc, slots * cfg.embed_dim * feature_dim, feature_dim);
        uniform_init(h.w_down, static_cast<size_t>(cfg.code_dim) * cfg.embed_dim, cfg.embed_dim);
        h.b_down.assign(cfg.code_dim, 0.0);
        uniform_init(h.w_up, static_cast<size_t>(cfg.embed_dim) * cfg.code_dim, cfg.code_dim);
        h.b_up.assign(cfg.embed_dim, 0.0);
        return h;
    }

    // Visits every parameter array; used by the optimizer and serialization.
    template <typename F>
    void for_each_param_array(F&& f) {
        f(w_enc);
        f(w_down);
        f(b_down);
        f(w_up);
        f(b_up);
    }
    template <typename F>
    void for_each_param_array(F&& f) const {
        f(w_enc);
        f(w_down);
        f(b_down);
        f(w_up);
        f(b_up);
    }
    size_t param_count() const {
        size_t n = 0;
        for_each_param_array([&](const std::vector<double>& a) { n += a.size(); });
        return n;
    }
};

// Gradients shaped like a head.
struct HeadGradients {
    std::vector<double> w_enc, w_down, b_down, w_up, b_up;

    static HeadGradients zeros_like(const QuantizerHead& h) {
        HeadGradients g;
        g.w_enc.assign(h.w_enc.size(), 0.0);
        g.w_down.assign(h.w_down.size(), 0.0);
        g.b_down.assign(h.b_down.size(), 0.0);
        g.w_up.assign(h.w_up.size(), 0.0);
        g.b_up.assign(h.b_up.size(), 0.0);
        return g;
    }
    template <typename F>
    void for_each_param_array(F&& f) {
        f(w_enc);
        f(w_down);
        f(b_down);
        f(w_up);
        f(b_up);
    }
};

// ---------------------------------------------------------------------------
// Forward operations

inline Vec down_project(const Vec& token, const QuantizerHead& head) {
    const auto& c = head.config;
    if (static_cast<int>(token.size()) != c.embed_dim)
        throw ConfigError("down_project: token dim mismatch");
    Vec out = matvec(head.w_down, c.code_dim, c.embed_dim, token);
    for (int t = 0; t < c.code_dim; ++t) out[t] += head.b_down[t];
    return out;
}

// Ties round 0.5 upward; the quantization regularizer keeps values away from
// the boundary so any deterministic rule works, this one is the simplest.
inline int round_half_up(double x) { return static_cast<int>(std::floor(x + 0.5)); }

inline CodeVector fsq_quantize(const Vec& low, const QuantizerConfig& cfg) {
    CodeVector codes(low.size());
    for (size_t t = 0; t < low.size(); ++t) {
        int c = round_half_up((cfg.levels - 1) * sigmoid(low[t]));
        if (c < 0) c = 0;
        if (c > cfg.levels - 1) c = cfg.levels - 1;
        codes[t] = c;
    }
    return codes;
}

// Dimension 0 is the least-significant base-K digit. The index file format
// relies on this convention.
inline SemanticId pack_sid(const CodeVector& codes, const QuantizerConfig& cfg) {
    if (static_cast<int>(codes.size()) != cfg.code_dim)
        throw ConfigError("pack_sid: code length mismatch");
    SemanticId sid = 0;
    uint64_t base = 1;
    for (int t = 0; t < cfg.code_dim; ++t) {
        int c = codes[t];
        if (c < 0 || c >= cfg.levels) throw ValidationError("pack_sid: code out of range");
        sid += static_cast<uint64_t>(c) * base;
        base *= static_cast<uint64_t>(cfg.levels);
    }
    return sid;
}

inline CodeVector unpack_sid(SemanticId sid, const QuantizerConfig& cfg) {
    if (sid >= cfg.code_space()) throw ValidationError("unpack_sid: sid out of range");
    CodeVector codes(cfg.code_dim);
    for (int t = 0; t < cfg.code_dim; ++t) {
        codes[t] = static_cast<int>(sid % static_cast<uint64_t>(cfg.levels));
        sid /= static_cast<uint64_t>(cfg.levels);
    }
    return codes;
}

// The reconstruction consumes raw integer codes.
inline Vec up_project(const CodeVector& codes, const QuantizerHead& head) {
    const auto& c = head.config;
    if (static_cast<int>(codes.size()) != c.code_dim)
        throw ConfigError("up_project: code length mismatch");
    Vec code_real(codes.begin(), codes.end());
    Vec out = matvec(head.w_up, c.embed_dim, c.code_dim, code_real);
    for (int t = 0; t < c.embed_dim; ++t) out[t] += head.b_up[t];
    return out;
}

// Intermediates of one token's pass through the quantizer; kept for backward.
struct EncodeTrace {
    Vec low;        // DownProj output
    Vec pre_round;  // (K-1) * sigmoid(low)
    CodeVector codes;
    SemanticId sid = 0;
    Vec reconstructed;
};

inline EncodeTrace encode_token(const Vec& token, const QuantizerHead& head) {
    EncodeTrace tr;
    tr.low = down_project(token, head);
    tr.pre_round.resize(tr.low.size());
    for (size_t t = 0; t < tr.low.size(); ++t)
        tr.pre_round[t] = (head.config.levels - 1) * sigmoid(tr.low[t]);
    tr.codes = fsq_quantize(tr.low, head.config);
    tr.sid = pack_sid(tr.codes, head.config);
    tr.reconstructed = up_project(tr.codes, head);
    return tr;
}

// One (SID, reconstruction) pair per token, order preserved. Duplicate SIDs
// are kept; deduplication belongs to the index layer.
inline std::vector<EncodeTrace> encode_multivector(const MultiVector& mv,
                                                   const QuantizerHead& head) {
    mv.validate();
    std::vector<EncodeTrace> out;
    out.reserve(mv.token_count());
    for (const auto& tok : mv.vectors) out.push_back(encode_token(tok, head));
    return out;
}

// EWGS rule at the rounding step: g_x = g_q * (1 + delta * sign(g_q) * (x - x_q)),
// elementwise between the pre-round value and the emitted code. delta = 0
// collapses to straight-through.
inline Vec ewgs_backward(const Vec& grad_wrt_code, const Vec& pre_round, const CodeVector& code,
                         double delta) {
    if (grad_wrt_code.size() != pre_round.size() || pre_round.size() != code.size())
        throw ConfigError("ewgs_backward: shape mismatch");
    if (delta < 0) throw ConfigError("ewgs_backward: delta must be >= 0");
    Vec out(grad_wrt_code.size());
    for (size_t t = 0; t < out.size(); ++t) {
        double g = grad_wrt_code[t];
        double sgn = (g > 0) - (g < 0);
        out[t] = g * (1.0 + delta * sgn * (pre_round[t] - code[t]));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoint (UDXQ)

inline ByteWriter serialize_head(const QuantizerHead& h) {
    ByteWriter w;
    w.str("UDXQ");
    w.le<uint32_t>(1);  // version
    w.le<uint32_t>(static_cast<uint32_t>(h.config.embed_dim));
    w.le<uint32_t>(static_cast<uint32_t>(h.config.code_dim));
    w.le<uint32_t>(static_cast<uint32_t>(h.config.levels));
    w.f64(h.config.ewgs_delta);
    w.le<uint32_t>(static_cast<uint32_t>(h.feature_dim));
    w.le<uint32_t>(static_cast<uint32_t>(h.query_tokens));
    w.le<uint32_t>(static_cast<uint32_t>(h.doc_tokens));
    w.le<uint64_t>(h.param_count());
    h.for_each_param_array([&](const std::vector<double>& a) {
        for (double v : a) w.f32(static_cast<float>(v));
    });
    return w;
}

inline void save_head(const QuantizerHead& h, const std::string& path) {
    serialize_head(h).write_file(path);
}

inline QuantizerHead load_head(const std::string& path) {
    auto r = ByteReader::from_file(path);
    expect_magic(r, "UDXQ");
    uint32_t version = r.le<uint32_t>();
    if (version != 1) throw ParseError("UDXQ: unsupported version");
    QuantizerHead h;
    h.config.embed_dim = static_cast<int>(r.le<uint32_t>());
    h.config.code_dim = static_cast<int>(r.le<uint32_t>());
    h.config.levels = static_cast<int>(r.le<uint32_t>());
    h.config.ewgs_delta = r.f64();
    h.feature_dim = static_cast<int>(r.le<uint32_t>());
    h.query_tokens = static_cast<int>(r.le<uint32_t>());
    h.doc_tokens = static_cast<int>(r.le<uint32_t>());
    h.config.validate();
    uint64_t count = r.le<uint64_t>();
    size_t slots = static_cast<size_t>(h.slot_count());
    h.w_enc.resize(slots * h.config.embed_dim * h.feature_dim);
    h.w_down.resize(static_cast<size_t>(h.config.code_dim) * h.config.embed_dim);
    h.b_down.resize(h.config.code_dim);
    h.w_up.resize(static_cast<size_t>(h.config.embed_dim) * h.config.code_dim);
    h.b_up.resize(h.config.embed_dim);
    if (count != h.param_count()) throw ParseError("UDXQ: parameter count mismatch");
    h.for_each_param_array([&](std::vector<double>& a) {
        for (auto& v : a) {
            v = r.f32();
            if (!std::isfinite(v)) throw ParseError("UDXQ: non-finite parameter");
        }
    });
    if (!r.done()) throw ParseError("UDXQ: trailing bytes");
    return h;
}

// SHA-256 over the serialized checkpoint; ties an index file to the exact
// head that produced its SIDs.
inline std::array<uint8_t, 32> head_checksum(const QuantizerHead& h) {
    auto bytes = serialize_head(h).bytes();
    std::array<uint8_t, 32> out{};
    unsigned int len = 0;
    EVP_Digest(bytes.data(), bytes.size(), out.data(), &len, EVP_sha256(), nullptr);
    return out;
}

}  // namespace unidex
