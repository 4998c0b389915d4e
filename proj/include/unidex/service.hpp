#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <optional>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "unidex/pipeline.hpp"

namespace unidex {

struct ServiceConfig {
    std::string bind_address = "127.0.0.1";
    int port = 8080;
    std::string index_path;
    std::string touch_checkpoint;
    std::string rank_checkpoint;  // optional
    std::string corpus_path;      // documents whose rank embeddings are precomputed
    uint64_t hash_seed = 0;
    size_t default_top_k = 10;
    size_t max_candidates = 0;
};

// Immutable in-memory snapshot; loaded once at startup, shared by all
// request threads without locking.
struct ServiceSnapshot {
    InvertedIndex index;
    QuantizerHead touch_head;
    std::optional<QuantizerHead> rank_head;
    RankStore rank_store;
    uint64_t hash_seed = 0;

    static ServiceSnapshot load(const ServiceConfig& cfg) {
        ServiceSnapshot snap;
        snap.touch_head = load_head(cfg.touch_checkpoint);
        IndexFingerprint fp = IndexFingerprint::of(snap.touch_head);
        snap.index = InvertedIndex::load(cfg.index_path, &fp);
        if (!cfg.rank_checkpoint.empty()) snap.rank_head = load_head(cfg.rank_checkpoint);
        snap.hash_seed = cfg.hash_seed;
        auto corpus = load_corpus(cfg.corpus_path);
        for (const auto& rec : corpus) {
            if (!snap.index.contains(rec.id)) continue;
            Vec feature =
                hash_features(rec.text, snap.touch_head.feature_dim, cfg.hash_seed).values;
            snap.rank_store.by_id.emplace(
                rec.id, rank_vectors(feature, snap.touch_head,
                                     snap.rank_head ? &*snap.rank_head : nullptr, false));
        }
        return snap;
    }

    std::vector<SearchHit> search_text(const std::string& query, size_t top_k,
                                       size_t max_candidates, size_t* touched) const {
        Vec feature = hash_features(query, touch_head.feature_dim, hash_seed).values;
        MultiVector q_rank =
            rank_vectors(feature, touch_head, rank_head ? &*rank_head : nullptr, true);
        return search(index, query_sids(feature, touch_head), q_rank, rank_store, top_k,
                      max_candidates, touched);
    }
};

class SearchService {
  public:
    SearchService(ServiceConfig cfg, ServiceSnapshot snapshot)
        : cfg_(std::move(cfg)), snap_(std::move(snapshot)) {
        server_.Get("/healthz",
                    [](const httplib::Request&, httplib::Response& res) {
                        res.set_content("ok", "text/plain");
                    });
        server_.Get("/v1/stats", [this](const httplib::Request&, httplib::Response& res) {
            IndexStats s = snap_.index.stats();
            nlohmann::json j{{"num_docs", s.num_docs},
                             {"num_distinct_sids", s.num_distinct_sids},
                             {"total_postings", s.total_postings},
                             {"avg_postings_per_doc", s.avg_postings_per_doc}};
            res.set_content(j.dump(), "application/json");
        });
        server_.Post("/v1/search", [this](const httplib::Request& req, httplib::Response& res) {
            auto t0 = std::chrono::steady_clock::now();
            nlohmann::json body;
            try {
                body = nlohmann::json::parse(req.body);
            } catch (const nlohmann::json::exception&) {
                res.status = 400;
                res.set_content(R"({"error":"malformed JSON body"})", "application/json");
                return;
            }
            if (!body.contains("query") || !body["query"].is_string()) {
                res.status = 400;
                res.set_content(R"({"error":"missing string field 'query'"})",
                                "application/json");
                return;
            }
            int64_t top_k = body.value("top_k", static_cast<int64_t>(cfg_.default_top_k));
            if (top_k < 1) {
                res.status = 400;
                res.set_content(R"({"error":"top_k must be >= 1"})", "application/json");
                return;
            }
            try {
                size_t touched = 0;
                auto hits =
                    snap_.search_text(body["query"].get<std::string>(),
                                      static_cast<size_t>(top_k), cfg_.max_candidates, &touched);
                nlohmann::json out;
                out["hits"] = nlohmann::json::array();
                for (const auto& h : hits)
                    out["hits"].push_back({{"id", h.doc_id}, {"score", h.score}});
                out["touched"] = touched;
                out["latency_ms"] =
                    std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                              t0)
                        .count();
                res.set_content(out.dump(), "application/json");
            } catch (const std::exception& e) {
                res.status = 500;
                nlohmann::json err{{"error", "internal fault"}, {"id", fault_counter_++}};
                res.set_content(err.dump(), "application/json");
            }
        });
    }

    // Blocks until stop() is called.
    bool run() { return server_.listen(cfg_.bind_address, cfg_.port); }
    bool bind() { return server_.bind_to_port(cfg_.bind_address, cfg_.port); }
    bool run_after_bind() { return server_.listen_after_bind(); }
    void stop() { server_.stop(); }
    void wait_until_ready() { server_.wait_until_ready(); }

    const ServiceSnapshot& snapshot() const { return snap_; }

  private:
    ServiceConfig cfg_;
    ServiceSnapshot snap_;
    httplib::Server server_;
    std::atomic<uint64_t> fault_counter_{0};
};

}  // namespace unidex
