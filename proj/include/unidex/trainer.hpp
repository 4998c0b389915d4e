#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "unidex/ingest.hpp"
#include "unidex/matcher.hpp"
#include "unidex/quantizer.hpp"

namespace unidex {

// ---------------------------------------------------------------------------
// Training data

struct TrainDoc {
    std::string id;
    Vec feature;  // hashed or synthetic base feature
    int label = 0;
    std::optional<double> teacher_score;
};

struct TrainInstance {
    std::string query_id;
    Vec query_feature;
    std::vector<TrainDoc> docs;

    void validate() const {
        if (docs.empty()) throw ValidationError("instance needs at least one doc");
        for (const auto& d : docs) {
            if (d.label < 0) throw ValidationError("labels must be nonnegative");
            if (d.teacher_score && (*d.teacher_score < 0.0 || *d.teacher_score > 1.0))
                throw ValidationError("teacher scores must lie in [0,1]");
        }
    }
};

// Training JSONL: {"query": {"id","text"}, "docs": [{"id","text","label", "teacher_score"?}]}
inline std::vector<TrainInstance> load_training_jsonl(const std::string& path, int d_base,
                                                      uint64_t hash_seed) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open training data: " + path);
    std::vector<TrainInstance> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("training line " + std::to_string(line_no) + ": " + e.what());
        }
        TrainInstance inst;
        inst.query_id = j.at("query").at("id").get<std::string>();
        inst.query_feature =
            hash_features(j.at("query").at("text").get<std::string>(), d_base, hash_seed).values;
        for (const auto& dj : j.at("docs")) {
            TrainDoc doc;
            doc.id = dj.at("id").get<std::string>();
            doc.feature =
                hash_features(dj.value("text", std::string{}), d_base, hash_seed).values;
            doc.label = dj.at("label").get<int>();
            if (dj.contains("teacher_score"))
                doc.teacher_score = dj["teacher_score"].get<double>();
            inst.docs.push_back(std::move(doc));
        }
        inst.validate();
        out.push_back(std::move(inst));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Loss functions (scalar forms; the batched trainer mirrors these)

// Eq.-6-style list-wise InfoNCE. Negatives of doc i are the lower-labeled
// docs of the same list plus every cross-query similarity supplied.
inline double infonce_loss(const std::vector<double>& sims, const std::vector<int>& labels,
                           const std::vector<double>& cross_query_sims, double tau) {
    if (tau <= 0) throw ConfigError("infonce_loss: tau must be > 0");
    if (sims.size() != labels.size()) throw ConfigError("infonce_loss: length mismatch");
    if (sims.empty()) throw ValidationError("infonce_loss: empty doc list");
    double total = 0.0;
    for (size_t i = 0; i < sims.size(); ++i) {
        std::vector<double> logits{sims[i] / tau};
        for (size_t j = 0; j < sims.size(); ++j)
            if (labels[i] > labels[j]) logits.push_back(sims[j] / tau);
        for (double s : cross_query_sims) logits.push_back(s / tau);
        double m = *std::max_element(logits.begin(), logits.end());
        double lse = 0.0;
        for (double l : logits) lse += std::exp(l - m);
        total += -(logits[0] - m - std::log(lse));
    }
    return total / static_cast<double>(sims.size());
}

// Eq.-7-style matching loss: mean of (1 - sim) over top-grade docs only.
inline double matching_loss(const std::vector<double>& sims, const std::vector<int>& labels) {
    if (sims.size() != labels.size() || sims.empty())
        throw ConfigError("matching_loss: bad inputs");
    int top = *std::max_element(labels.begin(), labels.end());
    double total = 0.0;
    size_t count = 0;
    for (size_t i = 0; i < sims.size(); ++i)
        if (labels[i] == top) {
            total += 1.0 - sims[i];
            ++count;
        }
    return total / static_cast<double>(count);
}

// Eq.-8-style regularization pushing sigmoid outputs away from 0.5.
inline double quant_reg_loss(const std::vector<Vec>& low_vectors) {
    if (low_vectors.empty()) return 0.0;
    double total = 0.0;
    for (const auto& low : low_vectors)
        for (double x : low) {
            double v = std::abs(sigmoid(x) - 0.5) - 0.5;
            total += v * v;
        }
    return total / static_cast<double>(low_vectors.size());
}

// MSE distillation: model scores divided by the rank token count to land in
// [-1, 1] before comparison against [0, 1] teacher scores.
inline double distill_mse_loss(const std::vector<double>& model_scores,
                               const std::vector<double>& teacher_scores, int rank_tokens) {
    if (model_scores.size() != teacher_scores.size())
        throw ConfigError("distill_mse_loss: length mismatch");
    if (model_scores.empty()) return 0.0;
    double total = 0.0;
    for (size_t i = 0; i < model_scores.size(); ++i) {
        double v = model_scores[i] / rank_tokens - teacher_scores[i];
        total += v * v;
    }
    return total / static_cast<double>(model_scores.size());
}

// ---------------------------------------------------------------------------
// Trainer configuration

enum class TrainMode { kTouch, kRank };
enum class QuantizePath { kQuantized, kBypass, kContinuous };

struct LossConfig {
    double tau = 0.05;
    double lambda_match = 1.0;
    // Heavier regularization saturates every sigmoid and collapses the code
    // space into a handful of SIDs; 0.01 keeps codes crisp without collapse.
    double lambda_reg = 0.01;
    double lambda_distill = 1.0;
    bool in_batch_negatives = true;

    void validate() const {
        if (tau <= 0) throw ConfigError("tau must be > 0");
        if (lambda_match < 0 || lambda_reg < 0 || lambda_distill < 0)
            throw ConfigError("loss weights must be >= 0");
    }
};

struct TrainerConfig {
    TrainMode mode = TrainMode::kTouch;
    MatchStrategy strategy = MatchStrategy::kMaxMax;
    LossConfig loss;
    // In bypass mode the Round node is replaced by the identity on
    // (K-1)*sigmoid; used by the finite-difference gradient checks.
    bool bypass_round = false;
    int steps = 500;
    int batch_size = 8;
    int warmup_steps = 50;
    double learning_rate = 0.001;
    uint64_t seed = 1;

    QuantizePath path() const {
        if (mode == TrainMode::kRank) return QuantizePath::kContinuous;
        return bypass_round ? QuantizePath::kBypass : QuantizePath::kQuantized;
    }
};

struct LossBreakdown {
    double total = 0.0, infonce = 0.0, match = 0.0, reg = 0.0, distill = 0.0;
};

// ---------------------------------------------------------------------------
// Forward traces

struct TokenTrace {
    int slot = 0;
    Vec tok;        // tanh encoder output
    Vec low;        // DownProj output (empty on the continuous path)
    Vec pre_round;  // (K-1)*sigmoid(low)
    CodeVector codes;
    Vec code_real;  // what UpProj consumed (codes, or pre_round in bypass)
    Vec recon;      // recon == tok on the continuous path
    Vec grad_recon;
    Vec grad_low;
};

struct ItemTrace {
    const Vec* feature = nullptr;
    std::vector<TokenTrace> tokens;
};

inline ItemTrace encode_item(const Vec& feature, const QuantizerHead& head, int token_count,
                             QuantizePath path) {
    ItemTrace item;
    item.feature = &feature;
    item.tokens.reserve(token_count);
    BaseFeature bf{feature};
    const auto& cfg = head.config;
    for (int t = 0; t < token_count; ++t) {
        TokenTrace tr;
        tr.slot = t;
        tr.tok = toy_encode_slot(bf, head, t);
        if (path == QuantizePath::kContinuous) {
            tr.recon = tr.tok;
        } else {
            tr.low = down_project(tr.tok, head);
            tr.pre_round.resize(tr.low.size());
            for (size_t k = 0; k < tr.low.size(); ++k)
                tr.pre_round[k] = (cfg.levels - 1) * sigmoid(tr.low[k]);
            if (path == QuantizePath::kQuantized) {
                tr.codes = fsq_quantize(tr.low, cfg);
                tr.code_real.assign(tr.codes.begin(), tr.codes.end());
            } else {
                tr.code_real = tr.pre_round;
            }
            tr.recon = matvec(head.w_up, cfg.embed_dim, cfg.code_dim, tr.code_real);
            for (int k = 0; k < cfg.embed_dim; ++k) tr.recon[k] += head.b_up[k];
            tr.grad_low.assign(tr.low.size(), 0.0);
        }
        tr.grad_recon.assign(tr.recon.size(), 0.0);
        item.tokens.push_back(std::move(tr));
    }
    return item;
}

struct PairTrace {
    ItemTrace* q = nullptr;
    ItemTrace* d = nullptr;
    MatchMatrix mm;
    double score = 0.0;
    double grad_score = 0.0;
};

inline PairTrace make_pair_trace(ItemTrace& q, ItemTrace& d, MatchStrategy strategy) {
    PairTrace p;
    p.q = &q;
    p.d = &d;
    std::vector<Vec> qv, dv;
    for (const auto& t : q.tokens) qv.push_back(t.recon);
    for (const auto& t : d.tokens) dv.push_back(t.recon);
    p.mm = match_matrix(qv, dv);
    p.score = sim(p.mm, strategy);
    return p;
}

// d(cosine)/d(a), d(cosine)/d(b) accumulated into the traces' grad_recon.
inline void cosine_backward(const Vec& a, const Vec& b, double cos_val, double dcos, Vec& ga,
                            Vec& gb) {
    double na = norm(a), nb = norm(b);
    if (na < kNormEps || nb < kNormEps) return;  // cosine defined as constant 0
    double inv = 1.0 / (na * nb);
    for (size_t k = 0; k < a.size(); ++k) {
        ga[k] += dcos * (b[k] * inv - cos_val * a[k] / (na * na));
        gb[k] += dcos * (a[k] * inv - cos_val * b[k] / (nb * nb));
    }
}

// Routes grad_score through the matching strategy. Max nodes send gradient
// to the first argmax index on exact ties.
inline void pair_backward(PairTrace& p, MatchStrategy strategy) {
    if (p.grad_score == 0.0) return;
    auto& q = *p.q;
    auto& d = *p.d;
    size_t m = p.mm.m, n = p.mm.n;
    auto route = [&](size_t i, size_t j, double dcos) {
        cosine_backward(q.tokens[i].recon, d.tokens[j].recon, p.mm.entries[i][j], dcos,
                        q.tokens[i].grad_recon, d.tokens[j].grad_recon);
    };
    if (strategy == MatchStrategy::kMaxMax) {
        size_t bi = 0, bj = 0;
        for (size_t i = 0; i < m; ++i)
            for (size_t j = 0; j < n; ++j)
                if (p.mm.entries[i][j] > p.mm.entries[bi][bj]) bi = i, bj = j;
        route(bi, bj, p.grad_score);
    } else {
        double scale = (strategy == MatchStrategy::kMaxMean) ? 1.0 / m : 1.0;
        for (size_t i = 0; i < m; ++i) {
            size_t bj = 0;
            for (size_t j = 1; j < n; ++j)
                if (p.mm.entries[i][j] > p.mm.entries[i][bj]) bj = j;
            route(i, bj, p.grad_score * scale);
        }
    }
}

// Propagates accumulated grad_recon / grad_low of one item into the head
// parameter gradients. EWGS handles the rounding step on the quantized path.
inline void item_backward(ItemTrace& item, const QuantizerHead& head, HeadGradients& g,
                          QuantizePath path) {
    const auto& cfg = head.config;
    for (auto& tr : item.tokens) {
        Vec grad_tok(cfg.embed_dim, 0.0);
        bool recon_touched =
            std::any_of(tr.grad_recon.begin(), tr.grad_recon.end(), [](double v) { return v != 0; });
        bool low_touched =
            !tr.grad_low.empty() &&
            std::any_of(tr.grad_low.begin(), tr.grad_low.end(), [](double v) { return v != 0; });
        if (!recon_touched && !low_touched) continue;

        if (path == QuantizePath::kContinuous) {
            grad_tok = tr.grad_recon;
        } else {
            Vec d_low = tr.grad_low;  // regularization contribution
            if (recon_touched) {
                outer_accum(g.w_up, tr.grad_recon, tr.code_real);
                for (int k = 0; k < cfg.embed_dim; ++k) g.b_up[k] += tr.grad_recon[k];
                Vec d_code(cfg.code_dim, 0.0);
                matvec_transpose_accum(head.w_up, cfg.embed_dim, cfg.code_dim, tr.grad_recon,
                                       d_code);
                Vec d_pre = (path == QuantizePath::kQuantized)
                                ? ewgs_backward(d_code, tr.pre_round, tr.codes, cfg.ewgs_delta)
                                : d_code;
                for (int k = 0; k < cfg.code_dim; ++k) {
                    double s = sigmoid(tr.low[k]);
                    d_low[k] += d_pre[k] * (cfg.levels - 1) * s * (1.0 - s);
                }
            }
            outer_accum(g.w_down, d_low, tr.tok);
            for (int k = 0; k < cfg.code_dim; ++k) g.b_down[k] += d_low[k];
            matvec_transpose_accum(head.w_down, cfg.code_dim, cfg.embed_dim, d_low, grad_tok);
        }
        // tanh then the encoder slot
        Vec d_pre_act(cfg.embed_dim);
        for (int k = 0; k < cfg.embed_dim; ++k)
            d_pre_act[k] = grad_tok[k] * (1.0 - tr.tok[k] * tr.tok[k]);
        double* w_slot = g.w_enc.data() +
                         static_cast<size_t>(tr.slot) * cfg.embed_dim * head.feature_dim;
        for (int r = 0; r < cfg.embed_dim; ++r) {
            double gr = d_pre_act[r];
            if (gr == 0.0) continue;
            double* row = w_slot + static_cast<size_t>(r) * head.feature_dim;
            for (int k = 0; k < head.feature_dim; ++k) row[k] += gr * (*item.feature)[k];
        }
    }
}

// ---------------------------------------------------------------------------
// Batched forward/backward over one mini-batch of instances

struct BatchResult {
    LossBreakdown loss;
    HeadGradients grads;
};

inline BatchResult batch_forward_backward(const std::vector<const TrainInstance*>& batch,
                                          const QuantizerHead& head, const TrainerConfig& cfg,
                                          bool compute_grads = true) {
    cfg.loss.validate();
    QuantizePath path = cfg.path();
    MatchStrategy strategy =
        (cfg.mode == TrainMode::kRank) ? MatchStrategy::kMaxSum : cfg.strategy;
    double tau = cfg.loss.tau;
    size_t B = batch.size();
    if (B == 0) throw ValidationError("empty batch");

    struct InstanceTrace {
        ItemTrace query;
        std::vector<ItemTrace> docs;
        std::vector<size_t> pair_begin;  // index of in-instance pair per doc
        std::vector<int> top_docs;       // indices with the highest label
        int max_label = 0;
    };
    std::vector<InstanceTrace> traces(B);
    std::vector<PairTrace> pairs;

    // forward: encode and score everything
    for (size_t a = 0; a < B; ++a) {
        const auto& inst = *batch[a];
        inst.validate();
        auto& t = traces[a];
        t.query = encode_item(inst.query_feature, head, head.query_tokens, path);
        t.docs.reserve(inst.docs.size());
        for (const auto& d : inst.docs)
            t.docs.push_back(encode_item(d.feature, head, head.doc_tokens, path));
        t.max_label = 0;
        for (const auto& d : inst.docs) t.max_label = std::max(t.max_label, d.label);
        for (size_t i = 0; i < inst.docs.size(); ++i)
            if (inst.docs[i].label == t.max_label) t.top_docs.push_back(static_cast<int>(i));
    }
    // in-instance pairs
    std::vector<std::vector<size_t>> in_pair_idx(B);
    for (size_t a = 0; a < B; ++a)
        for (size_t i = 0; i < traces[a].docs.size(); ++i) {
            in_pair_idx[a].push_back(pairs.size());
            pairs.push_back(make_pair_trace(traces[a].query, traces[a].docs[i], strategy));
        }
    // cross pairs: query a vs top-grade docs of other instances
    std::vector<std::vector<size_t>> cross_pair_idx(B);
    if (cfg.loss.in_batch_negatives && B > 1) {
        for (size_t a = 0; a < B; ++a)
            for (size_t b = 0; b < B; ++b) {
                if (a == b) continue;
                for (int di : traces[b].top_docs) {
                    cross_pair_idx[a].push_back(pairs.size());
                    pairs.push_back(
                        make_pair_trace(traces[a].query, traces[b].docs[di], strategy));
                }
            }
    }

    LossBreakdown loss;

    // InfoNCE
    for (size_t a = 0; a < B; ++a) {
        const auto& inst = *batch[a];
        size_t n_docs = inst.docs.size();
        double inst_loss = 0.0;
        for (size_t i = 0; i < n_docs; ++i) {
            std::vector<size_t> set{in_pair_idx[a][i]};
            for (size_t j = 0; j < n_docs; ++j)
                if (inst.docs[i].label > inst.docs[j].label) set.push_back(in_pair_idx[a][j]);
            for (size_t c : cross_pair_idx[a]) set.push_back(c);
            double m = -1e300;
            for (size_t k : set) m = std::max(m, pairs[k].score / tau);
            double lse = 0.0;
            for (size_t k : set) lse += std::exp(pairs[k].score / tau - m);
            double log_z = m + std::log(lse);
            inst_loss += -(pairs[set[0]].score / tau - log_z);
            if (compute_grads) {
                double w = 1.0 / (tau * n_docs * B);
                for (size_t k : set)
                    pairs[k].grad_score += std::exp(pairs[k].score / tau - log_z) * w;
                pairs[set[0]].grad_score -= w;
            }
        }
        loss.infonce += inst_loss / n_docs;
    }
    loss.infonce /= B;

    // Matching loss over top-grade docs (touch mode)
    if (cfg.mode == TrainMode::kTouch && cfg.loss.lambda_match > 0) {
        for (size_t a = 0; a < B; ++a) {
            const auto& top = traces[a].top_docs;
            double inst_loss = 0.0;
            for (int di : top) {
                inst_loss += 1.0 - pairs[in_pair_idx[a][di]].score;
                if (compute_grads)
                    pairs[in_pair_idx[a][di]].grad_score -=
                        cfg.loss.lambda_match / (top.size() * B);
            }
            loss.match += inst_loss / top.size();
        }
        loss.match /= B;
    }

    // Quantization regularization over every token's DownProj output
    if (cfg.mode == TrainMode::kTouch && path != QuantizePath::kContinuous &&
        cfg.loss.lambda_reg > 0) {
        for (size_t a = 0; a < B; ++a) {
            auto& t = traces[a];
            std::vector<TokenTrace*> toks;
            for (auto& tok : t.query.tokens) toks.push_back(&tok);
            for (auto& d : t.docs)
                for (auto& tok : d.tokens) toks.push_back(&tok);
            double inst_loss = 0.0;
            for (auto* tok : toks)
                for (size_t k = 0; k < tok->low.size(); ++k) {
                    double s = sigmoid(tok->low[k]);
                    double v = std::abs(s - 0.5) - 0.5;
                    inst_loss += v * v;
                    if (compute_grads) {
                        double sgn = (s > 0.5) - (s < 0.5);
                        tok->grad_low[k] += cfg.loss.lambda_reg * 2.0 * v * sgn * s * (1.0 - s) /
                                            (toks.size() * B);
                    }
                }
            loss.reg += inst_loss / toks.size();
        }
        loss.reg /= B;
    }

    // MSE distillation (rank mode)
    if (cfg.mode == TrainMode::kRank && cfg.loss.lambda_distill > 0) {
        int rank_tokens = head.query_tokens;
        for (size_t a = 0; a < B; ++a) {
            const auto& inst = *batch[a];
            std::vector<size_t> with_teacher;
            for (size_t i = 0; i < inst.docs.size(); ++i)
                if (inst.docs[i].teacher_score) with_teacher.push_back(i);
            if (with_teacher.empty()) continue;
            double inst_loss = 0.0;
            for (size_t i : with_teacher) {
                auto& p = pairs[in_pair_idx[a][i]];
                double v = p.score / rank_tokens - *inst.docs[i].teacher_score;
                inst_loss += v * v;
                if (compute_grads)
                    p.grad_score += cfg.loss.lambda_distill * 2.0 * v /
                                    (rank_tokens * with_teacher.size() * B);
            }
            loss.distill += inst_loss / with_teacher.size();
        }
        loss.distill /= B;
    }

    loss.total = loss.infonce + cfg.loss.lambda_match * loss.match +
                 cfg.loss.lambda_reg * loss.reg + cfg.loss.lambda_distill * loss.distill;

    BatchResult res;
    res.loss = loss;
    if (!compute_grads) return res;

    res.grads = HeadGradients::zeros_like(head);
    for (auto& p : pairs) pair_backward(p, strategy);
    for (auto& t : traces) {
        item_backward(t.query, head, res.grads, path);
        for (auto& d : t.docs) item_backward(d, head, res.grads, path);
    }
    return res;
}

// Single-instance convenience wrapper over the batched loss.
inline LossBreakdown total_loss(const TrainInstance& inst, const QuantizerHead& head,
                                const TrainerConfig& cfg) {
    return batch_forward_backward({&inst}, head, cfg, /*compute_grads=*/false).loss;
}

// ---------------------------------------------------------------------------
// Adam with linear warm-up then cosine decay

struct AdamState {
    HeadGradients m, v;
    int64_t step = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    static AdamState init(const QuantizerHead& head) {
        AdamState s;
        s.m = HeadGradients::zeros_like(head);
        s.v = HeadGradients::zeros_like(head);
        return s;
    }
};

inline double lr_at_step(const TrainerConfig& cfg, int step) {
    if (cfg.warmup_steps > 0 && step < cfg.warmup_steps)
        return cfg.learning_rate * (step + 1) / static_cast<double>(cfg.warmup_steps);
    int decay_span = std::max(1, cfg.steps - cfg.warmup_steps);
    double progress = static_cast<double>(step - cfg.warmup_steps) / decay_span;
    return cfg.learning_rate * 0.5 * (1.0 + std::cos(progress * M_PI));
}

inline void adam_step(QuantizerHead& head, const HeadGradients& grads, AdamState& state,
                      double lr) {
    ++state.step;
    double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    auto update = [&](std::vector<double>& w, std::vector<double>& m, std::vector<double>& v,
                      const std::vector<double>& g) {
        for (size_t i = 0; i < w.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            w[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + state.eps);
        }
    };
    update(head.w_enc, state.m.w_enc, state.v.w_enc, grads.w_enc);
    update(head.w_down, state.m.w_down, state.v.w_down, grads.w_down);
    update(head.b_down, state.m.b_down, state.v.b_down, grads.b_down);
    update(head.w_up, state.m.w_up, state.v.w_up, grads.w_up);
    update(head.b_up, state.m.b_up, state.v.b_up, grads.b_up);
}

struct TrainResult {
    std::vector<LossBreakdown> history;  // one row per step
};

inline void write_loss_history_csv(const std::vector<LossBreakdown>& history,
                                   const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write loss history: " + path);
    out << "step,total,infonce,match,reg,distill\n";
    for (size_t i = 0; i < history.size(); ++i) {
        const auto& h = history[i];
        out << i << ',' << h.total << ',' << h.infonce << ',' << h.match << ',' << h.reg << ','
            << h.distill << '\n';
    }
}

// Deterministic single-threaded optimization loop. Instances are shuffled
// once per epoch with the seeded rng; batches are taken in order.
inline TrainResult train(const std::vector<TrainInstance>& instances, QuantizerHead& head,
                         const TrainerConfig& cfg) {
    if (instances.empty()) throw ValidationError("train: no instances");
    cfg.loss.validate();
    TrainResult result;
    if (cfg.steps <= 0) return result;
    AdamState adam = AdamState::init(head);
    std::mt19937_64 rng(cfg.seed);
    std::vector<size_t> order(instances.size());
    std::iota(order.begin(), order.end(), 0);
    size_t cursor = order.size();  // force an initial shuffle
    for (int step = 0; step < cfg.steps; ++step) {
        std::vector<const TrainInstance*> batch;
        for (int i = 0; i < cfg.batch_size; ++i) {
            if (cursor >= order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            batch.push_back(&instances[order[cursor++]]);
        }
        auto res = batch_forward_backward(batch, head, cfg);
        if (!std::isfinite(res.loss.total)) {
            auto name = [&]() -> const char* {
                if (!std::isfinite(res.loss.infonce)) return "infonce";
                if (!std::isfinite(res.loss.match)) return "match";
                if (!std::isfinite(res.loss.reg)) return "reg";
                if (!std::isfinite(res.loss.distill)) return "distill";
                return "total";
            }();
            throw Error("non-finite loss at step " + std::to_string(step) + " (term: " + name +
                        ")");
        }
        adam_step(head, res.grads, adam, lr_at_step(cfg, step));
        result.history.push_back(res.loss);
    }
    return result;
}

}  // namespace unidex
