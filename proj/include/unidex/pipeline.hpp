#pragma once

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "unidex/index.hpp"
#include "unidex/ingest.hpp"
#include "unidex/matcher.hpp"
#include "unidex/trainer.hpp"

namespace unidex {

struct SearchHit {
    std::string doc_id;
    double score = 0.0;
    uint32_t ordinal = 0;
};

// Pre-computed rank-role multi-vectors for every indexed document.
struct RankStore {
    std::unordered_map<std::string, MultiVector> by_id;
};

inline std::vector<SemanticId> query_sids(const Vec& feature, const QuantizerHead& head) {
    BaseFeature bf{feature};
    MultiVector mv = toy_encode(bf, head, TokenRole::kQuery);
    std::vector<SemanticId> sids;
    for (const auto& tr : encode_multivector(mv, head)) sids.push_back(tr.sid);
    return sids;
}

inline std::vector<SemanticId> doc_sids(const Vec& feature, const QuantizerHead& head,
                                        int token_count = 0) {
    BaseFeature bf{feature};
    MultiVector mv = toy_encode(bf, head, TokenRole::kDocument, token_count);
    std::vector<SemanticId> sids;
    for (const auto& tr : encode_multivector(mv, head)) sids.push_back(tr.sid);
    return sids;
}

// Retrieve by SID union, score every candidate with the late-interaction
// kernel, sort descending by score with ties broken by ascending doc id.
// max_candidates == 0 means unlimited; when it fires, candidates are kept by
// ascending ordinal and *truncated is set.
inline std::vector<SearchHit> search(const InvertedIndex& index,
                                     const std::vector<SemanticId>& sids,
                                     const MultiVector& query_rank, const RankStore& rank_store,
                                     size_t top_k, size_t max_candidates = 0,
                                     size_t* touched = nullptr, bool* truncated = nullptr) {
    RetrievalResult res = index.retrieve(sids);
    if (touched) *touched = res.doc_ordinals.size();
    if (truncated) *truncated = false;
    std::vector<uint32_t> candidates = res.doc_ordinals;
    if (max_candidates > 0 && candidates.size() > max_candidates) {
        candidates.resize(max_candidates);
        if (truncated) *truncated = true;
    }
    std::vector<SearchHit> hits;
    hits.reserve(candidates.size());
    for (uint32_t ord : candidates) {
        SearchHit h;
        h.ordinal = ord;
        h.doc_id = index.doc_id(ord);
        auto it = rank_store.by_id.find(h.doc_id);
        if (it == rank_store.by_id.end())
            throw ValidationError("missing rank embedding for doc \"" + h.doc_id + "\"");
        h.score = unirank_score(query_rank, it->second);
        hits.push_back(std::move(h));
    }
    std::sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    if (hits.size() > top_k) hits.resize(top_k);
    return hits;
}

// ---------------------------------------------------------------------------
// Metrics

inline double recall_at_k(const std::vector<std::string>& ranked_ids,
                          const std::set<std::string>& relevant_ids, int k) {
    if (k <= 0) throw ConfigError("recall_at_k: K must be positive");
    if (relevant_ids.empty()) throw ValidationError("recall_at_k: no relevant docs");
    size_t hits = 0;
    size_t limit = std::min<size_t>(k, ranked_ids.size());
    for (size_t i = 0; i < limit; ++i)
        if (relevant_ids.count(ranked_ids[i])) ++hits;
    return static_cast<double>(hits) / relevant_ids.size();
}

inline double mrr_at_k(const std::vector<std::string>& ranked_ids,
                       const std::set<std::string>& relevant_ids, int k) {
    if (k <= 0) throw ConfigError("mrr_at_k: K must be positive");
    size_t limit = std::min<size_t>(k, ranked_ids.size());
    for (size_t i = 0; i < limit; ++i)
        if (relevant_ids.count(ranked_ids[i])) return 1.0 / static_cast<double>(i + 1);
    return 0.0;
}

struct EvalQuery {
    std::string id;
    Vec feature;
    std::vector<std::string> relevant_ids;
};

// Test JSONL: {"query": {"id","text"}, "relevant_ids": [...]}
inline std::vector<EvalQuery> load_test_jsonl(const std::string& path, int d_base,
                                              uint64_t hash_seed) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open test data: " + path);
    std::vector<EvalQuery> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("test line " + std::to_string(line_no) + ": " + e.what());
        }
        EvalQuery q;
        q.id = j.at("query").at("id").get<std::string>();
        q.feature =
            hash_features(j.at("query").at("text").get<std::string>(), d_base, hash_seed).values;
        for (const auto& r : j.at("relevant_ids")) q.relevant_ids.push_back(r.get<std::string>());
        out.push_back(std::move(q));
    }
    return out;
}

struct EvalReport {
    std::map<int, double> recall_at;
    std::map<int, double> mrr_at;
    double avg_retrieved = 0.0;
    size_t query_count = 0;
};

// Rank vectors come from rank_head when given, otherwise from the touch
// head's continuous (pre-quantization) token embeddings.
inline MultiVector rank_vectors(const Vec& feature, const QuantizerHead& touch_head,
                                const QuantizerHead* rank_head, bool is_query) {
    const QuantizerHead& h = rank_head ? *rank_head : touch_head;
    BaseFeature bf{feature};
    return toy_encode(bf, h, is_query ? TokenRole::kRankQuery : TokenRole::kRankDocument);
}

inline RankStore build_rank_store(const std::vector<std::string>& ids,
                                  const std::vector<Vec>& features,
                                  const QuantizerHead& touch_head,
                                  const QuantizerHead* rank_head) {
    RankStore store;
    for (size_t i = 0; i < ids.size(); ++i)
        store.by_id.emplace(ids[i], rank_vectors(features[i], touch_head, rank_head, false));
    return store;
}

// Queries with zero relevant docs are excluded from the metric means.
inline EvalReport evaluate(const std::vector<EvalQuery>& queries, const InvertedIndex& index,
                           const QuantizerHead& touch_head, const QuantizerHead* rank_head,
                           const RankStore& rank_store, const std::vector<int>& ks,
                           size_t max_candidates = 0) {
    if (queries.empty()) throw ValidationError("evaluate: empty test set");
    if (ks.empty()) throw ConfigError("evaluate: no K values");
    EvalReport report;
    size_t max_k = static_cast<size_t>(*std::max_element(ks.begin(), ks.end()));
    double total_retrieved = 0.0;
    for (const auto& q : queries) {
        for (const auto& rid : q.relevant_ids)
            if (!index.contains(rid))
                throw ValidationError("evaluate: relevant doc \"" + rid + "\" not indexed");
        if (q.relevant_ids.empty()) continue;
        MultiVector q_rank = rank_vectors(q.feature, touch_head, rank_head, true);
        size_t touched = 0;
        auto hits = search(index, query_sids(q.feature, touch_head), q_rank, rank_store, max_k,
                           max_candidates, &touched);
        total_retrieved += static_cast<double>(touched);
        std::vector<std::string> ranked;
        for (const auto& h : hits) ranked.push_back(h.doc_id);
        std::set<std::string> rel(q.relevant_ids.begin(), q.relevant_ids.end());
        for (int k : ks) {
            report.recall_at[k] += recall_at_k(ranked, rel, k);
            report.mrr_at[k] += mrr_at_k(ranked, rel, k);
        }
        ++report.query_count;
    }
    if (report.query_count == 0)
        throw ValidationError("evaluate: every query had an empty relevant set");
    for (int k : ks) {
        report.recall_at[k] /= report.query_count;
        report.mrr_at[k] /= report.query_count;
    }
    report.avg_retrieved = total_retrieved / queries.size();
    return report;
}

// ---------------------------------------------------------------------------
// Synthetic clustered benchmark: unit-normalized Gaussian features around
// two-level (cluster, group) centers. Each query targets one group; its
// group members are the relevant docs. Seeded and fully deterministic.

struct SyntheticConfig {
    int clusters = 50;
    int groups_per_cluster = 20;
    int group_size = 5;  // clusters * groups_per_cluster * group_size docs
    int num_queries = 500;
    int feature_dim = 32;
    double group_spread = 0.5;
    double doc_noise = 0.05;
    double query_noise = 0.1;
    int positives_per_instance = 2;
    int same_cluster_negatives = 2;
    int other_cluster_negatives = 4;
    uint64_t seed = 1;
};

struct SyntheticBenchmark {
    std::vector<std::string> doc_ids;
    std::vector<Vec> doc_features;
    std::vector<int> doc_group;  // global group index per doc
    std::vector<TrainInstance> train_instances;
    std::vector<EvalQuery> queries;
};

inline SyntheticBenchmark make_synthetic_benchmark(const SyntheticConfig& cfg) {
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto sample = [&](int dim) {
        Vec v(dim);
        for (auto& x : v) x = gauss(rng);
        return v;
    };
    auto normalize = [](Vec v) {
        double n = norm(v);
        if (n > 0)
            for (auto& x : v) x /= n;
        return v;
    };
    auto perturb = [&](const Vec& center, double noise) {
        Vec v = center;
        for (auto& x : v) x += noise * gauss(rng);
        return normalize(std::move(v));
    };

    SyntheticBenchmark bench;
    int total_groups = cfg.clusters * cfg.groups_per_cluster;
    std::vector<Vec> group_centers(total_groups);
    for (int c = 0; c < cfg.clusters; ++c) {
        Vec cluster_center = normalize(sample(cfg.feature_dim));
        for (int g = 0; g < cfg.groups_per_cluster; ++g)
            group_centers[c * cfg.groups_per_cluster + g] =
                perturb(cluster_center, cfg.group_spread);
    }
    std::vector<std::vector<int>> group_docs(total_groups);
    for (int g = 0; g < total_groups; ++g) {
        for (int k = 0; k < cfg.group_size; ++k) {
            int ord = static_cast<int>(bench.doc_ids.size());
            bench.doc_ids.push_back("doc-" + std::to_string(ord));
            bench.doc_features.push_back(perturb(group_centers[g], cfg.doc_noise));
            bench.doc_group.push_back(g);
            group_docs[g].push_back(ord);
        }
    }

    std::uniform_int_distribution<int> pick_group(0, total_groups - 1);
    for (int qi = 0; qi < cfg.num_queries; ++qi) {
        int g = pick_group(rng);
        int cluster = g / cfg.groups_per_cluster;
        EvalQuery q;
        q.id = "query-" + std::to_string(qi);
        q.feature = perturb(group_centers[g], cfg.query_noise);
        for (int ord : group_docs[g]) q.relevant_ids.push_back(bench.doc_ids[ord]);
        bench.queries.push_back(q);

        TrainInstance inst;
        inst.query_id = q.id;
        inst.query_feature = q.feature;
        auto add_doc = [&](int ord, int label) {
            TrainDoc d;
            d.id = bench.doc_ids[ord];
            d.feature = bench.doc_features[ord];
            d.label = label;
            d.teacher_score = label / 2.0;
            inst.docs.push_back(std::move(d));
        };
        std::uniform_int_distribution<int> pick_member(0, cfg.group_size - 1);
        for (int k = 0; k < cfg.positives_per_instance; ++k)
            add_doc(group_docs[g][pick_member(rng)], 2);
        std::uniform_int_distribution<int> pick_in_cluster(0, cfg.groups_per_cluster - 1);
        for (int k = 0; k < cfg.same_cluster_negatives; ++k) {
            int og = cluster * cfg.groups_per_cluster + pick_in_cluster(rng);
            if (og == g) og = cluster * cfg.groups_per_cluster +
                              (pick_in_cluster(rng) + 1) % cfg.groups_per_cluster;
            add_doc(group_docs[og][pick_member(rng)], og == g ? 2 : 1);
        }
        std::uniform_int_distribution<int> pick_any(0, total_groups - 1);
        for (int k = 0; k < cfg.other_cluster_negatives; ++k) {
            int og = pick_any(rng);
            while (og / cfg.groups_per_cluster == cluster) og = pick_any(rng);
            add_doc(group_docs[og][pick_member(rng)], 0);
        }
        bench.train_instances.push_back(std::move(inst));
    }
    return bench;
}

// Build an index over the benchmark's docs with the given head.
inline InvertedIndex index_benchmark(const SyntheticBenchmark& bench, const QuantizerHead& head,
                                     int doc_token_count = 0) {
    InvertedIndex idx(IndexFingerprint::of(head), head.config.code_space());
    for (size_t i = 0; i < bench.doc_ids.size(); ++i)
        idx.insert_doc(bench.doc_ids[i], doc_sids(bench.doc_features[i], head, doc_token_count));
    return idx;
}

inline EvalReport evaluate_benchmark(const SyntheticBenchmark& bench, const QuantizerHead& head,
                                     const std::vector<int>& ks, int doc_token_count = 0) {
    InvertedIndex idx = index_benchmark(bench, head, doc_token_count);
    RankStore store = build_rank_store(bench.doc_ids, bench.doc_features, head, nullptr);
    return evaluate(bench.queries, idx, head, nullptr, store, ks);
}

// ---------------------------------------------------------------------------
// Ablation harness

enum class AblationAxis { kMatchStrategy, kDqSweep, kSidCountQuery, kSidCountDoc, kLossRemoval };

inline AblationAxis parse_ablation_axis(const std::string& s) {
    if (s == "match-strategy") return AblationAxis::kMatchStrategy;
    if (s == "dq-sweep") return AblationAxis::kDqSweep;
    if (s == "sid-count-query") return AblationAxis::kSidCountQuery;
    if (s == "sid-count-doc") return AblationAxis::kSidCountDoc;
    if (s == "loss-removal") return AblationAxis::kLossRemoval;
    throw ConfigError("unknown ablation axis: " + s);
}

inline const char* ablation_axis_name(AblationAxis a) {
    switch (a) {
        case AblationAxis::kMatchStrategy: return "match-strategy";
        case AblationAxis::kDqSweep: return "dq-sweep";
        case AblationAxis::kSidCountQuery: return "sid-count-query";
        case AblationAxis::kSidCountDoc: return "sid-count-doc";
        case AblationAxis::kLossRemoval: return "loss-removal";
    }
    return "?";
}

struct AblationSpec {
    AblationAxis axis = AblationAxis::kMatchStrategy;
    std::vector<std::string> values;
    std::vector<uint64_t> seeds;
};

struct AblationBase {
    SyntheticConfig synthetic;
    QuantizerConfig quantizer{.embed_dim = 32, .code_dim = 14};
    TrainerConfig trainer;
    int query_tokens = 3;
    int doc_tokens = 8;
    std::vector<int> ks{10};
};

struct AblationRow {
    std::string axis;
    std::string setting;
    uint64_t seed = 0;
    EvalReport report;
    double wall_time_s = 0.0;
};

// One full train + index + evaluate run.
inline EvalReport run_synthetic_experiment(const SyntheticConfig& scfg,
                                           const QuantizerConfig& qcfg,
                                           const TrainerConfig& tcfg, int query_tokens,
                                           int doc_tokens, const std::vector<int>& ks,
                                           QuantizerHead* trained_out = nullptr) {
    SyntheticBenchmark bench = make_synthetic_benchmark(scfg);
    QuantizerHead head =
        QuantizerHead::init(qcfg, scfg.feature_dim, query_tokens, doc_tokens, tcfg.seed);
    train(bench.train_instances, head, tcfg);
    EvalReport report = evaluate_benchmark(bench, head, ks);
    if (trained_out) *trained_out = head;
    return report;
}

inline std::vector<AblationRow> run_ablation(const AblationSpec& spec, const AblationBase& base) {
    if (spec.values.empty() || spec.seeds.empty())
        throw ConfigError("ablation spec needs values and seeds");
    std::vector<AblationRow> rows;
    for (const auto& value : spec.values) {
        for (uint64_t seed : spec.seeds) {
            SyntheticConfig scfg = base.synthetic;
            QuantizerConfig qcfg = base.quantizer;
            TrainerConfig tcfg = base.trainer;
            int query_tokens = base.query_tokens;
            int doc_tokens = base.doc_tokens;
            scfg.seed = seed;
            tcfg.seed = seed;
            switch (spec.axis) {
                case AblationAxis::kMatchStrategy:
                    tcfg.strategy = parse_match_strategy(value);
                    break;
                case AblationAxis::kDqSweep:
                    qcfg.code_dim = std::stoi(value);
                    break;
                case AblationAxis::kSidCountQuery:
                    query_tokens = std::stoi(value);
                    break;
                case AblationAxis::kSidCountDoc:
                    doc_tokens = std::stoi(value);
                    break;
                case AblationAxis::kLossRemoval:
                    if (value == "default") {
                    } else if (value == "no-match") {
                        tcfg.loss.lambda_match = 0.0;
                    } else if (value == "no-reg") {
                        tcfg.loss.lambda_reg = 0.0;
                    } else {
                        throw ConfigError("loss-removal value must be default|no-match|no-reg");
                    }
                    break;
            }
            auto t0 = std::chrono::steady_clock::now();
            AblationRow row;
            row.axis = ablation_axis_name(spec.axis);
            row.setting = value;
            row.seed = seed;
            row.report = run_synthetic_experiment(scfg, qcfg, tcfg, query_tokens, doc_tokens,
                                                  base.ks);
            row.wall_time_s =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

inline void write_ablation_csv(const std::vector<AblationRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write ablation csv: " + path);
    out << "axis,setting,seed";
    if (!rows.empty()) {
        for (const auto& [k, v] : rows.front().report.recall_at) out << ",recall@" << k;
        for (const auto& [k, v] : rows.front().report.mrr_at) out << ",mrr@" << k;
    }
    out << ",avg_retrieved,wall_time_s\n";
    for (const auto& r : rows) {
        out << r.axis << ',' << r.setting << ',' << r.seed;
        for (const auto& [k, v] : r.report.recall_at) out << ',' << v;
        for (const auto& [k, v] : r.report.mrr_at) out << ',' << v;
        out << ',' << r.report.avg_retrieved << ',' << r.wall_time_s << '\n';
    }
}

}  // namespace unidex
