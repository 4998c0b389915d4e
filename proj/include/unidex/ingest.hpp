#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "unidex/quantizer.hpp"
#include "unidex/types.hpp"

namespace unidex {

// Corpus JSONL: one {"id": ..., "text": ...} object per line.
inline std::vector<DocumentRecord> load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus: " + path);
    std::vector<DocumentRecord> records;
    std::unordered_set<std::string> seen;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("corpus line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!j.contains("id") || !j["id"].is_string())
            throw ParseError("corpus line " + std::to_string(line_no) + ": missing string id");
        DocumentRecord rec;
        rec.id = j["id"].get<std::string>();
        if (rec.id.empty())
            throw ValidationError("corpus line " + std::to_string(line_no) + ": empty id");
        rec.text = j.value("text", std::string{});
        if (!seen.insert(rec.id).second)
            throw ValidationError("duplicate document id \"" + rec.id + "\" at line " +
                                  std::to_string(line_no));
        records.push_back(std::move(rec));
    }
    return records;
}

// ---------------------------------------------------------------------------
// Embedding binary (UDXE): magic, u32 version, u64 count, u16 tokens,
// u16 dim, then per record an 8-byte length-prefixed id and tokens*dim f32.

inline void save_embeddings(const std::map<std::string, MultiVector>& embeddings,
                            const std::string& path) {
    uint16_t tokens = 0, dim = 0;
    for (const auto& [id, mv] : embeddings) {
        mv.validate();
        if (tokens == 0) {
            tokens = static_cast<uint16_t>(mv.token_count());
            dim = static_cast<uint16_t>(mv.dim());
        } else if (mv.token_count() != tokens || mv.dim() != dim) {
            throw ValidationError("save_embeddings: inconsistent shapes");
        }
    }
    ByteWriter w;
    w.str("UDXE");
    w.le<uint32_t>(1);
    w.le<uint64_t>(embeddings.size());
    w.le<uint16_t>(tokens);
    w.le<uint16_t>(dim);
    for (const auto& [id, mv] : embeddings) {
        w.le<uint64_t>(id.size());
        w.str(id);
        for (const auto& v : mv.vectors)
            for (double x : v) w.f32(static_cast<float>(x));
    }
    w.write_file(path);
}

inline std::map<std::string, MultiVector> load_embeddings(const std::string& path) {
    auto r = ByteReader::from_file(path);
    expect_magic(r, "UDXE");
    uint32_t version = r.le<uint32_t>();
    if (version != 1) throw ParseError("UDXE: unsupported version");
    uint64_t count = r.le<uint64_t>();
    uint16_t tokens = r.le<uint16_t>();
    uint16_t dim = r.le<uint16_t>();
    std::map<std::string, MultiVector> out;
    for (uint64_t i = 0; i < count; ++i) {
        uint64_t id_len = r.le<uint64_t>();
        std::string id = r.str(id_len);
        MultiVector mv;
        mv.vectors.resize(tokens, Vec(dim));
        for (uint16_t t = 0; t < tokens; ++t)
            for (uint16_t d = 0; d < dim; ++d) {
                double v = r.f32();
                if (!std::isfinite(v))
                    throw ParseError("UDXE: non-finite float in record \"" + id + "\"");
                mv.vectors[t][d] = v;
            }
        out.emplace(std::move(id), std::move(mv));
    }
    if (!r.done()) throw ParseError("UDXE: trailing bytes");
    if (out.size() != count) throw ParseError("UDXE: duplicate record ids");
    return out;
}

// ---------------------------------------------------------------------------
// Feature hashing: character 3-gram counts, sign-hashed into d_base buckets,
// then L2-normalized. Pure function of (text, d_base, seed).

inline uint64_t fnv1a(const char* data, size_t n, uint64_t seed) {
    uint64_t h = 14695981039346656037ull ^ (seed * 0x9e3779b97f4a7c15ull);
    for (size_t i = 0; i < n; ++i) {
        h ^= static_cast<uint8_t>(data[i]);
        h *= 1099511628211ull;
    }
    return h;
}

inline BaseFeature hash_features(const std::string& text, int d_base, uint64_t seed) {
    if (d_base < 8) throw ConfigError("hash_features: d_base must be >= 8");
    BaseFeature f;
    f.values.assign(d_base, 0.0);
    if (text.size() >= 3) {
        for (size_t i = 0; i + 3 <= text.size(); ++i) {
            uint64_t h = fnv1a(text.data() + i, 3, seed);
            size_t bucket = h % static_cast<uint64_t>(d_base);
            double sign = (h >> 63) ? 1.0 : -1.0;
            f.values[bucket] += sign;
        }
    }
    double n = norm(f.values);
    if (n > 0)
        for (auto& v : f.values) v /= n;
    return f;
}

// ---------------------------------------------------------------------------
// Toy encoder: token t = tanh(W_enc[t] . feature). Query and document roles
// share slots t < min(M, N); document-only slots are extra parameters.

inline Vec toy_encode_slot(const BaseFeature& feature, const QuantizerHead& head, int slot) {
    const auto& c = head.config;
    if (static_cast<int>(feature.values.size()) != head.feature_dim)
        throw ConfigError("toy_encode: feature dim mismatch");
    const double* w = head.w_enc.data() +
                      static_cast<size_t>(slot) * c.embed_dim * head.feature_dim;
    Vec tok(c.embed_dim);
    for (int r = 0; r < c.embed_dim; ++r) {
        double s = 0.0;
        const double* row = w + static_cast<size_t>(r) * head.feature_dim;
        for (int k = 0; k < head.feature_dim; ++k) s += row[k] * feature.values[k];
        tok[r] = std::tanh(s);
    }
    return tok;
}

inline MultiVector toy_encode(const BaseFeature& feature, const QuantizerHead& head,
                              TokenRole role, int token_count = 0) {
    bool is_query = (role == TokenRole::kQuery || role == TokenRole::kRankQuery);
    int count = token_count > 0 ? token_count
                                : (is_query ? head.query_tokens : head.doc_tokens);
    if (count > head.slot_count())
        throw ConfigError("toy_encode: requested more tokens than head slots");
    MultiVector mv;
    mv.role = role;
    mv.vectors.reserve(count);
    for (int t = 0; t < count; ++t) mv.vectors.push_back(toy_encode_slot(feature, head, t));
    return mv;
}

}  // namespace unidex
