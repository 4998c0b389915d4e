#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "unidex/linalg.hpp"
#include "unidex/types.hpp"

namespace unidex {

// Vectors with norm below this are treated as zero; cosine against them is 0
// so the toy encoder's zero embeddings stay neutral under max aggregation.
inline constexpr double kNormEps = 1e-12;

inline double cosine(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw ConfigError("cosine: dimension mismatch");
    double na = norm(a), nb = norm(b);
    if (na < kNormEps || nb < kNormEps) return 0.0;
    if (a == b) return 1.0;  // exact self-similarity, no rounding drift
    return dot(a, b) / (na * nb);
}

enum class MatchStrategy { kMaxMax, kMaxSum, kMaxMean };

inline MatchStrategy parse_match_strategy(const std::string& s) {
    if (s == "max-max") return MatchStrategy::kMaxMax;
    if (s == "max-sum") return MatchStrategy::kMaxSum;
    if (s == "max-mean") return MatchStrategy::kMaxMean;
    throw ConfigError("unknown match strategy: " + s);
}

inline const char* match_strategy_name(MatchStrategy s) {
    switch (s) {
        case MatchStrategy::kMaxMax: return "max-max";
        case MatchStrategy::kMaxSum: return "max-sum";
        case MatchStrategy::kMaxMean: return "max-mean";
    }
    return "?";
}

struct MatchMatrix {
    std::vector<std::vector<double>> entries;  // m x n pairwise cosines
    size_t m = 0, n = 0;
};

inline MatchMatrix match_matrix(const std::vector<Vec>& q, const std::vector<Vec>& d) {
    if (q.empty() || d.empty()) throw ValidationError("match_matrix: empty token list");
    MatchMatrix mm;
    mm.m = q.size();
    mm.n = d.size();
    mm.entries.assign(mm.m, std::vector<double>(mm.n));
    for (size_t i = 0; i < mm.m; ++i)
        for (size_t j = 0; j < mm.n; ++j) mm.entries[i][j] = cosine(q[i], d[j]);
    return mm;
}

inline double sim_max_max(const MatchMatrix& mm) {
    double best = mm.entries[0][0];
    for (const auto& row : mm.entries)
        for (double v : row) best = std::max(best, v);
    return best;
}

inline double sim_max_sum(const MatchMatrix& mm) {
    double total = 0.0;
    for (const auto& row : mm.entries) total += *std::max_element(row.begin(), row.end());
    return total;
}

inline double sim_max_mean(const MatchMatrix& mm) {
    return sim_max_sum(mm) / static_cast<double>(mm.m);
}

inline double sim(const MatchMatrix& mm, MatchStrategy strategy) {
    switch (strategy) {
        case MatchStrategy::kMaxMax: return sim_max_max(mm);
        case MatchStrategy::kMaxSum: return sim_max_sum(mm);
        case MatchStrategy::kMaxMean: return sim_max_mean(mm);
    }
    return 0.0;
}

// Late-interaction score over raw continuous rank vectors: sum over query
// tokens of the best cosine against any document token. Range [-M, M].
inline double unirank_score(const MultiVector& q_rank, const MultiVector& d_rank) {
    return sim_max_sum(match_matrix(q_rank.vectors, d_rank.vectors));
}

}  // namespace unidex
