#pragma once

#include <string>
#include <vector>

#include "unidex/linalg.hpp"

namespace unidex {

struct DocumentRecord {
    std::string id;
    std::string text;
};

enum class TokenRole { kQuery, kDocument, kRankQuery, kRankDocument };

// Ordered set of token embeddings for one query or document.
struct MultiVector {
    std::vector<Vec> vectors;
    TokenRole role = TokenRole::kDocument;

    size_t token_count() const { return vectors.size(); }
    size_t dim() const { return vectors.empty() ? 0 : vectors.front().size(); }

    void validate() const {
        if (vectors.empty()) throw ValidationError("MultiVector: needs at least one token");
        size_t d = vectors.front().size();
        for (const auto& v : vectors) {
            if (v.size() != d) throw ValidationError("MultiVector: inconsistent dims");
            if (!all_finite(v)) throw ValidationError("MultiVector: non-finite component");
        }
    }
};

// Hashed text feature, L2-normalized (or all-zero for empty text).
struct BaseFeature {
    Vec values;
};

struct CorpusManifest {
    size_t doc_count = 0;
    size_t embedding_dim = 0;
    size_t tokens_per_doc = 0;
    enum class Source { kExternal, kToyEncoder } source = Source::kToyEncoder;
};

}  // namespace unidex
