// unidex: semantic-ID inverted indexing pipeline (train / index / search /
// evaluate / ablate / serve).

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>

#include "unidex/pipeline.hpp"
#include "unidex/service.hpp"

namespace {

using namespace unidex;

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
    if (out.empty()) throw ConfigError("empty list: " + csv);
    return out;
}

std::vector<std::string> parse_str_list(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

// Text-based synthetic fixture: clusters own a vocabulary, groups within a
// cluster share a phrase, docs and queries sample from them. Keeps the whole
// hashed-text path exercised end to end.
void write_text_fixture(const std::string& dir, int clusters, int groups_per_cluster,
                        int group_size, int num_queries, uint64_t seed) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::mt19937_64 rng(seed);
    auto word = [&]() {
        std::string w(5, 'a');
        for (auto& c : w) c = static_cast<char>('a' + rng() % 26);
        return w;
    };
    int total_groups = clusters * groups_per_cluster;
    std::vector<std::vector<std::string>> cluster_vocab(clusters), group_vocab(total_groups);
    for (auto& v : cluster_vocab)
        for (int i = 0; i < 12; ++i) v.push_back(word());
    for (auto& v : group_vocab)
        for (int i = 0; i < 8; ++i) v.push_back(word());

    auto sample_text = [&](int cluster, int group, int group_words, int cluster_words) {
        std::string text;
        for (int i = 0; i < group_words; ++i)
            text += group_vocab[group][rng() % group_vocab[group].size()] + " ";
        for (int i = 0; i < cluster_words; ++i)
            text += cluster_vocab[cluster][rng() % cluster_vocab[cluster].size()] + " ";
        if (!text.empty()) text.pop_back();
        return text;
    };

    std::ofstream corpus(dir + "/corpus.jsonl");
    std::vector<std::string> doc_text;
    std::vector<std::vector<std::string>> group_doc_ids(total_groups);
    int ord = 0;
    for (int g = 0; g < total_groups; ++g) {
        int cluster = g / groups_per_cluster;
        for (int k = 0; k < group_size; ++k, ++ord) {
            std::string id = "doc-" + std::to_string(ord);
            std::string text = sample_text(cluster, g, 6, 4);
            corpus << nlohmann::json{{"id", id}, {"text", text}}.dump() << "\n";
            group_doc_ids[g].push_back(id);
            doc_text.push_back(text);
        }
    }

    std::ofstream train(dir + "/train.jsonl");
    std::ofstream test(dir + "/test.jsonl");
    for (int qi = 0; qi < num_queries; ++qi) {
        int g = static_cast<int>(rng() % total_groups);
        int cluster = g / groups_per_cluster;
        std::string qid = "query-" + std::to_string(qi);
        std::string qtext = sample_text(cluster, g, 4, 1);
        nlohmann::json docs = nlohmann::json::array();
        auto add = [&](int group, int label) {
            int c = group / groups_per_cluster;
            size_t pick = rng() % group_doc_ids[group].size();
            docs.push_back({{"id", group_doc_ids[group][pick]},
                            {"text", doc_text[std::stoi(group_doc_ids[group][pick].substr(4))]},
                            {"label", label},
                            {"teacher_score", label / 2.0}});
            (void)c;
        };
        add(g, 2);
        add(g, 2);
        for (int k = 0; k < 2; ++k) {
            int og = cluster * groups_per_cluster + static_cast<int>(rng() % groups_per_cluster);
            add(og, og == g ? 2 : 1);
        }
        for (int k = 0; k < 4; ++k) {
            int og = static_cast<int>(rng() % total_groups);
            while (og / groups_per_cluster == cluster) og = static_cast<int>(rng() % total_groups);
            add(og, 0);
        }
        train << nlohmann::json{{"query", {{"id", qid}, {"text", qtext}}}, {"docs", docs}}.dump()
              << "\n";
        test << nlohmann::json{{"query", {{"id", qid}, {"text", qtext}}},
                               {"relevant_ids", group_doc_ids[g]}}
                    .dump()
             << "\n";
    }
}

int run(int argc, char** argv) {
    CLI::App app{"unidex: semantic-ID inverted indexing pipeline"};
    app.require_subcommand(1);

    // --- train ---
    auto* train_cmd = app.add_subcommand("train", "Train a touch or rank head");
    std::string data_path, mode = "touch", out_ckpt, history_csv, match_strategy = "max-max";
    int steps = 500, batch_size = 8, warmup = 50, d_base = 256, dim = 64, dq = 19, k_levels = 2;
    int m_tokens = -1, n_tokens = -1;
    double tau = 0.05, lambda_match = 1.0, lambda_reg = 0.01, lambda_distill = 1.0;
    double ewgs_delta = 1e-3, lr = 0.001;
    uint64_t seed = 1, hash_seed = 0;
    bool no_in_batch = false;
    train_cmd->add_option("--data", data_path)->required();
    train_cmd->add_option("--mode", mode)->check(CLI::IsMember({"touch", "rank"}));
    train_cmd->add_option("--steps", steps);
    train_cmd->add_option("--tau", tau);
    train_cmd->add_option("--lambda-match", lambda_match);
    train_cmd->add_option("--lambda-reg", lambda_reg);
    train_cmd->add_option("--lambda-distill", lambda_distill);
    train_cmd->add_option("--seed", seed);
    train_cmd->add_option("--out", out_ckpt)->required();
    train_cmd->add_option("--history", history_csv);
    train_cmd->add_option("--match-strategy", match_strategy)
        ->check(CLI::IsMember({"max-max", "max-sum", "max-mean"}));
    train_cmd->add_option("--d-base", d_base);
    train_cmd->add_option("--dim", dim);
    train_cmd->add_option("--dq", dq);
    train_cmd->add_option("--k", k_levels);
    train_cmd->add_option("--ewgs-delta", ewgs_delta);
    train_cmd->add_option("--m-tokens", m_tokens);
    train_cmd->add_option("--n-tokens", n_tokens);
    train_cmd->add_option("--lr", lr);
    train_cmd->add_option("--batch-size", batch_size);
    train_cmd->add_option("--warmup", warmup);
    train_cmd->add_option("--hash-seed", hash_seed);
    train_cmd->add_flag("--no-in-batch-negatives", no_in_batch);

    // --- build-index ---
    auto* build_cmd = app.add_subcommand("build-index", "Encode a corpus and build the index");
    std::string bi_corpus, bi_ckpt, bi_out;
    uint64_t bi_hash_seed = 0;
    build_cmd->add_option("--corpus", bi_corpus)->required();
    build_cmd->add_option("--checkpoint", bi_ckpt)->required();
    build_cmd->add_option("--out", bi_out)->required();
    build_cmd->add_option("--hash-seed", bi_hash_seed);

    // --- index-stats ---
    auto* stats_cmd = app.add_subcommand("index-stats", "Report index statistics");
    std::string st_index, st_query_log, st_ckpt;
    uint64_t st_hash_seed = 0;
    stats_cmd->add_option("--index", st_index)->required();
    stats_cmd->add_option("--query-log", st_query_log);
    stats_cmd->add_option("--checkpoint", st_ckpt);
    stats_cmd->add_option("--hash-seed", st_hash_seed);

    // --- search ---
    auto* search_cmd = app.add_subcommand("search", "Run one query through the pipeline");
    std::string se_index, se_touch, se_rank, se_corpus, se_query;
    int se_top_k = 10;
    size_t se_max_candidates = 0;
    uint64_t se_hash_seed = 0;
    search_cmd->add_option("--index", se_index)->required();
    search_cmd->add_option("--touch", se_touch)->required();
    search_cmd->add_option("--rank", se_rank);
    search_cmd->add_option("--corpus", se_corpus)->required();
    search_cmd->add_option("--query", se_query)->required();
    search_cmd->add_option("--top-k", se_top_k)->check(CLI::PositiveNumber);
    search_cmd->add_option("--max-candidates", se_max_candidates);
    search_cmd->add_option("--hash-seed", se_hash_seed);

    // --- evaluate ---
    auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate Recall@K / MRR@K on a test set");
    std::string ev_index, ev_touch, ev_rank, ev_corpus, ev_test, ev_out, ev_ks = "10,300";
    uint64_t ev_hash_seed = 0;
    size_t ev_max_candidates = 0;
    eval_cmd->add_option("--index", ev_index)->required();
    eval_cmd->add_option("--touch", ev_touch)->required();
    eval_cmd->add_option("--rank", ev_rank);
    eval_cmd->add_option("--corpus", ev_corpus)->required();
    eval_cmd->add_option("--test", ev_test)->required();
    eval_cmd->add_option("--k", ev_ks);
    eval_cmd->add_option("--out", ev_out);
    eval_cmd->add_option("--hash-seed", ev_hash_seed);
    eval_cmd->add_option("--max-candidates", ev_max_candidates);

    // --- ablate ---
    auto* ablate_cmd = app.add_subcommand("ablate", "Synthetic ablation sweeps");
    std::string ab_axis, ab_values, ab_seeds = "1", ab_out;
    int ab_steps = 400;
    ablate_cmd->add_option("--axis", ab_axis)
        ->required()
        ->check(CLI::IsMember({"match-strategy", "dq-sweep", "sid-count-query", "sid-count-doc",
                               "loss-removal"}));
    ablate_cmd->add_option("--values", ab_values)->required();
    ablate_cmd->add_option("--seeds", ab_seeds);
    ablate_cmd->add_option("--out", ab_out)->required();
    ablate_cmd->add_option("--steps", ab_steps);

    // --- serve ---
    auto* serve_cmd = app.add_subcommand("serve", "HTTP search service over a frozen snapshot");
    ServiceConfig svc;
    std::string sv_bind;
    serve_cmd->add_option("--bind", sv_bind)->envname("UNIDEX_BIND");
    serve_cmd->add_option("--index", svc.index_path)->envname("UNIDEX_INDEX")->required();
    serve_cmd->add_option("--touch", svc.touch_checkpoint)
        ->envname("UNIDEX_TOUCH_CKPT")
        ->required();
    serve_cmd->add_option("--rank", svc.rank_checkpoint)->envname("UNIDEX_RANK_CKPT");
    serve_cmd->add_option("--corpus", svc.corpus_path)->required();
    serve_cmd->add_option("--top-k", svc.default_top_k);
    serve_cmd->add_option("--max-candidates", svc.max_candidates);
    serve_cmd->add_option("--hash-seed", svc.hash_seed);

    // --- export-embeddings ---
    auto* export_cmd =
        app.add_subcommand("export-embeddings", "Write toy-encoder embeddings as UDXE");
    std::string ex_corpus, ex_ckpt, ex_out, ex_role = "document";
    uint64_t ex_hash_seed = 0;
    export_cmd->add_option("--corpus", ex_corpus)->required();
    export_cmd->add_option("--checkpoint", ex_ckpt)->required();
    export_cmd->add_option("--out", ex_out)->required();
    export_cmd->add_option("--role", ex_role)->check(CLI::IsMember({"query", "document"}));
    export_cmd->add_option("--hash-seed", ex_hash_seed);

    // --- gen-synthetic ---
    auto* gen_cmd = app.add_subcommand("gen-synthetic", "Write a text-based synthetic fixture");
    std::string gn_dir;
    int gn_clusters = 8, gn_groups = 4, gn_group_size = 5, gn_queries = 40;
    uint64_t gn_seed = 7;
    gen_cmd->add_option("--out-dir", gn_dir)->required();
    gen_cmd->add_option("--clusters", gn_clusters);
    gen_cmd->add_option("--groups-per-cluster", gn_groups);
    gen_cmd->add_option("--group-size", gn_group_size);
    gen_cmd->add_option("--queries", gn_queries);
    gen_cmd->add_option("--seed", gn_seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << app.help() << "\nerror: " << e.what() << "\n";
        return 2;
    }

    if (train_cmd->parsed()) {
        if (mode == "rank") {
            // Rank heads default to 4 tokens per side ("touch" keeps 3/8).
            if (m_tokens < 0) m_tokens = 4;
            if (n_tokens < 0) n_tokens = 4;
            if (!train_cmd->count("--dim")) dim = 32;
        } else {
            if (m_tokens < 0) m_tokens = 3;
            if (n_tokens < 0) n_tokens = 8;
        }
        QuantizerConfig qcfg{.embed_dim = dim, .code_dim = dq, .levels = k_levels,
                             .ewgs_delta = ewgs_delta};
        qcfg.validate();
        TrainerConfig tcfg;
        tcfg.mode = (mode == "rank") ? TrainMode::kRank : TrainMode::kTouch;
        tcfg.strategy = parse_match_strategy(match_strategy);
        tcfg.loss = {tau, lambda_match, lambda_reg, lambda_distill, !no_in_batch};
        tcfg.steps = steps;
        tcfg.batch_size = batch_size;
        tcfg.warmup_steps = warmup;
        tcfg.learning_rate = lr;
        tcfg.seed = seed;
        auto instances = load_training_jsonl(data_path, d_base, hash_seed);
        QuantizerHead head = QuantizerHead::init(qcfg, d_base, m_tokens, n_tokens, seed);
        auto result = train(instances, head, tcfg);
        save_head(head, out_ckpt);
        if (!history_csv.empty()) write_loss_history_csv(result.history, history_csv);
        std::cout << "trained " << mode << " head for " << steps << " steps, wrote " << out_ckpt
                  << "\n";
        return 0;
    }

    if (build_cmd->parsed()) {
        QuantizerHead head = load_head(bi_ckpt);
        auto corpus = load_corpus(bi_corpus);
        InvertedIndex idx(IndexFingerprint::of(head), head.config.code_space());
        for (const auto& rec : corpus) {
            Vec feature = hash_features(rec.text, head.feature_dim, bi_hash_seed).values;
            idx.insert_doc(rec.id, doc_sids(feature, head));
        }
        idx.save(bi_out);
        IndexStats s = idx.stats();
        std::cout << "indexed " << s.num_docs << " docs, " << s.num_distinct_sids
                  << " distinct SIDs, " << s.total_postings << " postings -> " << bi_out << "\n";
        return 0;
    }

    if (stats_cmd->parsed()) {
        InvertedIndex idx = InvertedIndex::load(st_index);
        std::vector<std::vector<SemanticId>> log;
        if (!st_query_log.empty()) {
            if (st_ckpt.empty())
                throw ConfigError("--query-log requires --checkpoint to encode queries");
            QuantizerHead head = load_head(st_ckpt);
            for (const auto& rec : load_corpus(st_query_log))
                log.push_back(query_sids(
                    hash_features(rec.text, head.feature_dim, st_hash_seed).values, head));
        }
        IndexStats s = idx.stats(log.empty() ? nullptr : &log);
        nlohmann::json j{{"num_docs", s.num_docs},
                         {"num_distinct_sids", s.num_distinct_sids},
                         {"total_postings", s.total_postings},
                         {"avg_postings_per_doc", s.avg_postings_per_doc},
                         {"avg_retrieved_per_query", s.avg_retrieved_per_query}};
        std::cout << j.dump(2) << "\n";
        return 0;
    }

    if (search_cmd->parsed()) {
        ServiceConfig cfg;
        cfg.index_path = se_index;
        cfg.touch_checkpoint = se_touch;
        cfg.rank_checkpoint = se_rank;
        cfg.corpus_path = se_corpus;
        cfg.hash_seed = se_hash_seed;
        ServiceSnapshot snap = ServiceSnapshot::load(cfg);
        size_t touched = 0;
        auto hits = snap.search_text(se_query, static_cast<size_t>(se_top_k), se_max_candidates,
                                     &touched);
        nlohmann::json out;
        out["hits"] = nlohmann::json::array();
        for (const auto& h : hits) out["hits"].push_back({{"id", h.doc_id}, {"score", h.score}});
        out["touched"] = touched;
        std::cout << out.dump(2) << "\n";
        return 0;
    }

    if (eval_cmd->parsed()) {
        QuantizerHead touch = load_head(ev_touch);
        std::optional<QuantizerHead> rank;
        if (!ev_rank.empty()) rank = load_head(ev_rank);
        IndexFingerprint fp = IndexFingerprint::of(touch);
        InvertedIndex idx = InvertedIndex::load(ev_index, &fp);
        auto corpus = load_corpus(ev_corpus);
        std::vector<std::string> ids;
        std::vector<Vec> features;
        for (const auto& rec : corpus) {
            ids.push_back(rec.id);
            features.push_back(hash_features(rec.text, touch.feature_dim, ev_hash_seed).values);
        }
        RankStore store = build_rank_store(ids, features, touch, rank ? &*rank : nullptr);
        auto queries = load_test_jsonl(ev_test, touch.feature_dim, ev_hash_seed);
        auto ks = parse_int_list(ev_ks);
        EvalReport rep = evaluate(queries, idx, touch, rank ? &*rank : nullptr, store, ks,
                                  ev_max_candidates);
        std::ostream* out = &std::cout;
        std::ofstream file;
        if (!ev_out.empty()) {
            file.open(ev_out, std::ios::trunc);
            if (!file) throw IoError("cannot write report: " + ev_out);
            out = &file;
        }
        *out << "metric,k,value\n";
        for (const auto& [k, v] : rep.recall_at) *out << "recall," << k << ',' << v << "\n";
        for (const auto& [k, v] : rep.mrr_at) *out << "mrr," << k << ',' << v << "\n";
        *out << "avg_retrieved,," << rep.avg_retrieved << "\n";
        *out << "query_count,," << rep.query_count << "\n";
        return 0;
    }

    if (ablate_cmd->parsed()) {
        AblationSpec spec;
        spec.axis = parse_ablation_axis(ab_axis);
        spec.values = parse_str_list(ab_values);
        for (const auto& s : parse_str_list(ab_seeds)) spec.seeds.push_back(std::stoull(s));
        AblationBase base;
        base.trainer.steps = ab_steps;
        auto rows = run_ablation(spec, base);
        write_ablation_csv(rows, ab_out);
        std::cout << "wrote " << rows.size() << " ablation rows to " << ab_out << "\n";
        return 0;
    }

    if (serve_cmd->parsed()) {
        if (!sv_bind.empty()) {
            auto colon = sv_bind.rfind(':');
            if (colon == std::string::npos) throw ConfigError("--bind expects host:port");
            svc.bind_address = sv_bind.substr(0, colon);
            svc.port = std::stoi(sv_bind.substr(colon + 1));
        }
        ServiceSnapshot snap = ServiceSnapshot::load(svc);
        SearchService service(svc, std::move(snap));
        std::cout << "serving on " << svc.bind_address << ":" << svc.port << "\n";
        if (!service.run()) {
            std::cerr << "failed to bind " << svc.bind_address << ":" << svc.port << "\n";
            return 1;
        }
        return 0;
    }

    if (export_cmd->parsed()) {
        QuantizerHead head = load_head(ex_ckpt);
        auto corpus = load_corpus(ex_corpus);
        std::map<std::string, MultiVector> embeddings;
        TokenRole role = (ex_role == "query") ? TokenRole::kQuery : TokenRole::kDocument;
        for (const auto& rec : corpus) {
            BaseFeature f = hash_features(rec.text, head.feature_dim, ex_hash_seed);
            embeddings.emplace(rec.id, toy_encode(f, head, role));
        }
        save_embeddings(embeddings, ex_out);
        std::cout << "wrote " << embeddings.size() << " embeddings to " << ex_out << "\n";
        return 0;
    }

    if (gen_cmd->parsed()) {
        write_text_fixture(gn_dir, gn_clusters, gn_groups, gn_group_size, gn_queries, gn_seed);
        std::cout << "wrote fixture to " << gn_dir << "\n";
        return 0;
    }

    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const unidex::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
