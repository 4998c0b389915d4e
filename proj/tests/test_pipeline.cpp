#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "unidex/pipeline.hpp"

using namespace unidex;

namespace {

struct Fixture {
    QuantizerHead head;
    std::vector<std::string> ids;
    std::vector<Vec> features;
    InvertedIndex index;
    RankStore store;

    explicit Fixture(int n_docs = 30, uint64_t seed = 11)
        : head(QuantizerHead::init(QuantizerConfig{.embed_dim = 16, .code_dim = 8}, 16, 3, 4,
                                   seed)),
          index(IndexFingerprint::of(head), head.config.code_space()) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> dist(-1, 1);
        for (int i = 0; i < n_docs; ++i) {
            ids.push_back("d" + std::to_string(i));
            Vec f(16);
            for (auto& x : f) x = dist(rng);
            features.push_back(f);
            index.insert_doc(ids.back(), doc_sids(f, head));
        }
        store = build_rank_store(ids, features, head, nullptr);
    }

    Vec random_feature(uint64_t seed) const {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> dist(-1, 1);
        Vec f(16);
        for (auto& x : f) x = dist(rng);
        return f;
    }
};

std::string tmp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("search matches a brute-force score-and-sort oracle") {
    Fixture fx;
    for (uint64_t qs = 100; qs < 110; ++qs) {
        Vec qf = fx.random_feature(qs);
        auto sids = query_sids(qf, fx.head);
        auto q_rank = rank_vectors(qf, fx.head, nullptr, true);
        auto hits = search(fx.index, sids, q_rank, fx.store, 10);

        // oracle: retrieve, score every candidate, sort by (score desc, id asc)
        std::vector<std::pair<double, std::string>> expected;
        for (uint32_t ord : fx.index.retrieve(sids).doc_ordinals) {
            const auto& id = fx.index.doc_id(ord);
            expected.emplace_back(unirank_score(q_rank, fx.store.by_id.at(id)), id);
        }
        std::sort(expected.begin(), expected.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        if (expected.size() > 10) expected.resize(10);
        REQUIRE(hits.size() == expected.size());
        for (size_t i = 0; i < hits.size(); ++i) {
            CHECK(hits[i].doc_id == expected[i].second);
            CHECK(hits[i].score == expected[i].first);
        }
    }
}

TEST_CASE("search breaks score ties by ascending doc id") {
    Fixture fx(4);
    // make two docs bitwise-identical in rank space -> identical scores
    fx.store.by_id.at("d1") = fx.store.by_id.at("d3");
    Vec qf = fx.random_feature(5);
    auto sids = doc_sids(fx.features[3], fx.head);  // ensure d3's SIDs are queried
    auto hits = search(fx.index, sids, rank_vectors(qf, fx.head, nullptr, true), fx.store, 10);
    std::string prev_id;
    double prev_score = 0;
    for (const auto& h : hits) {
        if (!prev_id.empty() && h.score == prev_score) CHECK(prev_id < h.doc_id);
        prev_id = h.doc_id;
        prev_score = h.score;
    }
}

TEST_CASE("search honours max_candidates and reports touched/truncated") {
    Fixture fx;
    Vec qf = fx.random_feature(42);
    auto sids = query_sids(qf, fx.head);
    size_t touched = 0;
    bool truncated = false;
    auto full = search(fx.index, sids, rank_vectors(qf, fx.head, nullptr, true), fx.store, 1000,
                       0, &touched, &truncated);
    CHECK(touched == fx.index.retrieve(sids).doc_ordinals.size());
    CHECK_FALSE(truncated);
    if (touched >= 2) {
        auto capped = search(fx.index, sids, rank_vectors(qf, fx.head, nullptr, true), fx.store,
                             1000, touched - 1, &touched, &truncated);
        CHECK(truncated);
        CHECK(capped.size() == touched - 1);
    }
}

TEST_CASE("search fails loudly on a missing rank embedding") {
    Fixture fx(5);
    fx.store.by_id.erase("d2");
    Vec qf = fx.random_feature(1);
    auto sids = doc_sids(fx.features[2], fx.head);
    CHECK_THROWS_WITH_AS(
        search(fx.index, sids, rank_vectors(qf, fx.head, nullptr, true), fx.store, 10),
        doctest::Contains("d2"), ValidationError);
}

TEST_CASE("recall_at_k hand cases") {
    std::vector<std::string> ranked{"a", "b", "c", "d"};
    CHECK(recall_at_k(ranked, {"b"}, 1) == 0.0);
    CHECK(recall_at_k(ranked, {"b"}, 2) == 1.0);
    CHECK(recall_at_k(ranked, {"a", "z"}, 4) == 0.5);
    CHECK(recall_at_k(ranked, {"c", "d"}, 100) == 1.0);
    CHECK(recall_at_k({}, {"a"}, 5) == 0.0);
    CHECK_THROWS_AS(recall_at_k(ranked, {"a"}, 0), ConfigError);
    CHECK_THROWS_AS(recall_at_k(ranked, {}, 3), ValidationError);
}

TEST_CASE("mrr_at_k hand cases") {
    std::vector<std::string> ranked{"x", "y", "z"};
    CHECK(mrr_at_k(ranked, {"z"}, 10) == doctest::Approx(1.0 / 3).epsilon(1e-12));
    CHECK(mrr_at_k(ranked, {"x"}, 10) == 1.0);
    CHECK(mrr_at_k(ranked, {"absent"}, 10) == 0.0);
    CHECK(mrr_at_k(ranked, {"z"}, 2) == 0.0);  // relevant doc below the cutoff
    CHECK_THROWS_AS(mrr_at_k(ranked, {"x"}, -1), ConfigError);
}

TEST_CASE("load_test_jsonl parses queries and rejects garbage") {
    auto path = tmp_path("unidex_test_queries.jsonl");
    {
        std::ofstream out(path);
        out << R"({"query":{"id":"q1","text":"alpha beta"},"relevant_ids":["d1","d2"]})" << "\n";
        out << "\n";  // blank lines are skipped
        out << R"({"query":{"id":"q2","text":"gamma"},"relevant_ids":[]})" << "\n";
    }
    auto qs = load_test_jsonl(path, 16, 7);
    REQUIRE(qs.size() == 2);
    CHECK(qs[0].id == "q1");
    CHECK(qs[0].relevant_ids == std::vector<std::string>{"d1", "d2"});
    CHECK(qs[0].feature == hash_features("alpha beta", 16, 7).values);
    CHECK(qs[1].relevant_ids.empty());

    { std::ofstream(path) << "{not json\n"; }
    CHECK_THROWS_AS(load_test_jsonl(path, 16, 7), ParseError);
    CHECK_THROWS_AS(load_test_jsonl("/nonexistent/q.jsonl", 16, 7), IoError);
    std::remove(path.c_str());
}

TEST_CASE("evaluate matches a per-query metric oracle and skips empty queries") {
    Fixture fx;
    std::vector<EvalQuery> queries;
    for (uint64_t s = 0; s < 6; ++s) {
        EvalQuery q;
        q.id = "q" + std::to_string(s);
        q.feature = fx.random_feature(200 + s);
        q.relevant_ids = {fx.ids[s], fx.ids[s + 1]};
        queries.push_back(q);
    }
    queries.push_back({"empty", fx.random_feature(999), {}});

    auto report = evaluate(queries, fx.index, fx.head, nullptr, fx.store, {1, 5});
    CHECK(report.query_count == 6);  // the zero-relevant query is excluded

    double r5 = 0.0, m1 = 0.0;
    for (size_t i = 0; i < 6; ++i) {
        const auto& q = queries[i];
        auto hits = search(fx.index, query_sids(q.feature, fx.head),
                           rank_vectors(q.feature, fx.head, nullptr, true), fx.store, 5);
        std::vector<std::string> ranked;
        for (const auto& h : hits) ranked.push_back(h.doc_id);
        std::set<std::string> rel(q.relevant_ids.begin(), q.relevant_ids.end());
        r5 += recall_at_k(ranked, rel, 5);
        m1 += mrr_at_k(ranked, rel, 1);
    }
    CHECK(report.recall_at.at(5) == doctest::Approx(r5 / 6).epsilon(1e-12));
    CHECK(report.mrr_at.at(1) == doctest::Approx(m1 / 6).epsilon(1e-12));
}

TEST_CASE("evaluate validates its inputs") {
    Fixture fx(5);
    CHECK_THROWS_AS(evaluate({}, fx.index, fx.head, nullptr, fx.store, {10}), ValidationError);

    std::vector<EvalQuery> only_empty{{"q", fx.random_feature(3), {}}};
    CHECK_THROWS_AS(evaluate(only_empty, fx.index, fx.head, nullptr, fx.store, {10}),
                    ValidationError);

    std::vector<EvalQuery> unindexed{{"q", fx.random_feature(3), {"ghost"}}};
    CHECK_THROWS_WITH_AS(evaluate(unindexed, fx.index, fx.head, nullptr, fx.store, {10}),
                         doctest::Contains("ghost"), ValidationError);

    std::vector<EvalQuery> ok{{"q", fx.random_feature(3), {fx.ids[0]}}};
    CHECK_THROWS_AS(evaluate(ok, fx.index, fx.head, nullptr, fx.store, {}), ConfigError);
}

TEST_CASE("synthetic benchmark has the advertised shape and is deterministic") {
    SyntheticConfig cfg;
    cfg.clusters = 4;
    cfg.groups_per_cluster = 3;
    cfg.group_size = 5;
    cfg.num_queries = 20;
    cfg.feature_dim = 16;
    auto bench = make_synthetic_benchmark(cfg);

    CHECK(bench.doc_ids.size() == 4u * 3 * 5);
    CHECK(bench.doc_features.size() == bench.doc_ids.size());
    CHECK(bench.queries.size() == 20);
    CHECK(bench.train_instances.size() == 20);
    for (const auto& f : bench.doc_features)
        CHECK(norm(f) == doctest::Approx(1.0).epsilon(1e-9));
    for (const auto& q : bench.queries) {
        CHECK(q.relevant_ids.size() == 5);
        CHECK(norm(q.feature) == doctest::Approx(1.0).epsilon(1e-9));
    }
    for (const auto& inst : bench.train_instances) {
        CHECK(inst.docs.size() == 2u + 2 + 4);
        int positives = 0;
        for (const auto& d : inst.docs) {
            CHECK(d.label >= 0);
            CHECK(d.label <= 2);
            CHECK(d.teacher_score.has_value());
            if (d.label == 2) ++positives;
        }
        CHECK(positives >= 2);
    }

    auto again = make_synthetic_benchmark(cfg);
    CHECK(again.doc_features == bench.doc_features);
    cfg.seed = 2;
    auto other = make_synthetic_benchmark(cfg);
    CHECK(other.doc_features != bench.doc_features);
}

TEST_CASE("synthetic positives label in-group docs as top grade") {
    SyntheticConfig cfg;
    cfg.clusters = 3;
    cfg.groups_per_cluster = 3;
    cfg.group_size = 4;
    cfg.num_queries = 30;
    cfg.feature_dim = 12;
    auto bench = make_synthetic_benchmark(cfg);
    for (size_t qi = 0; qi < bench.queries.size(); ++qi) {
        std::set<std::string> rel(bench.queries[qi].relevant_ids.begin(),
                                  bench.queries[qi].relevant_ids.end());
        for (const auto& d : bench.train_instances[qi].docs) {
            if (d.label == 2) CHECK(rel.count(d.id) == 1);
            if (d.label == 0) CHECK(rel.count(d.id) == 0);
        }
    }
}

TEST_CASE("ablation harness produces one row per (value, seed) and a CSV") {
    AblationBase base;
    base.synthetic.clusters = 3;
    base.synthetic.groups_per_cluster = 2;
    base.synthetic.group_size = 3;
    base.synthetic.num_queries = 12;
    base.synthetic.feature_dim = 16;
    base.quantizer = QuantizerConfig{.embed_dim = 16, .code_dim = 8};
    base.trainer.steps = 10;
    base.trainer.batch_size = 4;
    base.trainer.warmup_steps = 2;

    AblationSpec spec;
    spec.axis = AblationAxis::kLossRemoval;
    spec.values = {"default", "no-match"};
    spec.seeds = {1, 2};
    auto rows = run_ablation(spec, base);
    REQUIRE(rows.size() == 4);
    for (const auto& r : rows) {
        CHECK(r.axis == std::string("loss-removal"));
        CHECK(r.report.recall_at.at(10) >= 0.0);
        CHECK(r.report.recall_at.at(10) <= 1.0);
        CHECK(r.wall_time_s > 0.0);
    }
    CHECK(rows[0].setting == "default");
    CHECK(rows[0].seed == 1);
    CHECK(rows[3].setting == "no-match");
    CHECK(rows[3].seed == 2);

    auto path = tmp_path("unidex_test_ablation.csv");
    write_ablation_csv(rows, path);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "axis,setting,seed,recall@10,mrr@10,avg_retrieved,wall_time_s");
    size_t lines = 0;
    for (std::string l; std::getline(in, l);)
        if (!l.empty()) ++lines;
    CHECK(lines == 4);
    std::remove(path.c_str());

    CHECK_THROWS_AS(run_ablation(AblationSpec{}, base), ConfigError);
    CHECK_THROWS_AS(parse_ablation_axis("bogus"), ConfigError);
}
