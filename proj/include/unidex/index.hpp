#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "unidex/quantizer.hpp"

namespace unidex {

struct IndexFingerprint {
    uint8_t code_dim = 0;
    uint8_t levels = 0;
    std::array<uint8_t, 32> head_checksum{};

    bool operator==(const IndexFingerprint&) const = default;

    static IndexFingerprint of(const QuantizerHead& head) {
        IndexFingerprint fp;
        fp.code_dim = static_cast<uint8_t>(head.config.code_dim);
        fp.levels = static_cast<uint8_t>(head.config.levels);
        fp.head_checksum = unidex::head_checksum(head);
        return fp;
    }
};

struct IndexStats {
    size_t num_docs = 0;
    size_t num_distinct_sids = 0;
    size_t total_postings = 0;
    double avg_postings_per_doc = 0.0;
    double avg_retrieved_per_query = 0.0;  // the "Recall Num." analogue
};

struct RetrievalResult {
    std::vector<uint32_t> doc_ordinals;            // deduplicated, ascending
    std::map<SemanticId, size_t> per_sid_counts;   // query SID -> posting length
};

// SID -> sorted posting list of document ordinals. Immutable-snapshot
// semantics: retrieval is lock-free over a frozen index, mutation is
// single-writer. Removed ordinals leave tombstones in the doc table so
// surviving ordinals stay stable.
class InvertedIndex {
  public:
    InvertedIndex() = default;
    explicit InvertedIndex(IndexFingerprint fp, uint64_t sid_space)
        : fingerprint_(fp), sid_space_(sid_space) {}

    const IndexFingerprint& fingerprint() const { return fingerprint_; }
    uint64_t sid_space() const { return sid_space_; }
    const std::map<SemanticId, std::vector<uint32_t>>& postings() const { return postings_; }
    size_t live_doc_count() const { return id_to_ordinal_.size(); }
    size_t table_size() const { return doc_table_.size(); }

    bool contains(const std::string& id) const { return id_to_ordinal_.count(id) > 0; }

    const std::string& doc_id(uint32_t ordinal) const {
        if (ordinal >= doc_table_.size() || !doc_table_[ordinal].has_value())
            throw ValidationError("unknown ordinal " + std::to_string(ordinal));
        return *doc_table_[ordinal];
    }

    std::optional<uint32_t> ordinal_of(const std::string& id) const {
        auto it = id_to_ordinal_.find(id);
        if (it == id_to_ordinal_.end()) return std::nullopt;
        return it->second;
    }

    void insert_doc(const std::string& id, const std::vector<SemanticId>& sids) {
        if (id.empty()) throw ValidationError("insert_doc: empty id");
        if (contains(id)) throw ValidationError("insert_doc: duplicate id \"" + id + "\"");
        check_sids(sids);
        uint32_t ordinal = static_cast<uint32_t>(doc_table_.size());
        doc_table_.emplace_back(id);
        id_to_ordinal_.emplace(id, ordinal);
        // Per-doc duplicate SIDs collapse to a single posting entry.
        std::vector<SemanticId> distinct(sids);
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        doc_sids_.emplace_back(distinct);
        for (SemanticId sid : distinct) {
            auto& list = postings_[sid];
            list.insert(std::lower_bound(list.begin(), list.end(), ordinal), ordinal);
        }
    }

    void remove_doc(const std::string& id) {
        auto it = id_to_ordinal_.find(id);
        if (it == id_to_ordinal_.end())
            throw ValidationError("remove_doc: unknown id \"" + id + "\"");
        uint32_t ordinal = it->second;
        for (SemanticId sid : doc_sids_[ordinal]) {
            auto pit = postings_.find(sid);
            auto& list = pit->second;
            list.erase(std::lower_bound(list.begin(), list.end(), ordinal));
            if (list.empty()) postings_.erase(pit);  // no empty posting lists
        }
        doc_table_[ordinal].reset();
        doc_sids_[ordinal].clear();
        id_to_ordinal_.erase(it);
        // Dropping trailing tombstones makes insert-then-remove an exact inverse.
        while (!doc_table_.empty() && !doc_table_.back().has_value()) {
            doc_table_.pop_back();
            doc_sids_.pop_back();
        }
    }

    RetrievalResult retrieve(const std::vector<SemanticId>& query_sids) const {
        RetrievalResult res;
        std::vector<SemanticId> distinct(query_sids);
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        for (SemanticId sid : distinct) {
            if (sid >= sid_space_)
                throw ValidationError("retrieve: sid out of range: " + std::to_string(sid));
            auto it = postings_.find(sid);
            size_t len = (it == postings_.end()) ? 0 : it->second.size();
            res.per_sid_counts[sid] = len;
            if (len > 0)
                res.doc_ordinals.insert(res.doc_ordinals.end(), it->second.begin(),
                                        it->second.end());
        }
        std::sort(res.doc_ordinals.begin(), res.doc_ordinals.end());
        res.doc_ordinals.erase(std::unique(res.doc_ordinals.begin(), res.doc_ordinals.end()),
                               res.doc_ordinals.end());
        return res;
    }

    IndexStats stats(const std::vector<std::vector<SemanticId>>* query_log = nullptr) const {
        IndexStats s;
        s.num_docs = live_doc_count();
        s.num_distinct_sids = postings_.size();
        for (const auto& [sid, list] : postings_) s.total_postings += list.size();
        s.avg_postings_per_doc =
            s.num_docs ? static_cast<double>(s.total_postings) / s.num_docs : 0.0;
        if (query_log && !query_log->empty()) {
            double total = 0.0;
            for (const auto& q : *query_log) total += retrieve(q).doc_ordinals.size();
            s.avg_retrieved_per_query = total / query_log->size();
        }
        return s;
    }

    bool operator==(const InvertedIndex& other) const {
        return fingerprint_ == other.fingerprint_ && sid_space_ == other.sid_space_ &&
               doc_table_ == other.doc_table_ && postings_ == other.postings_;
    }

    // --- persistence (UDXI) ---

    ByteWriter serialize() const {
        ByteWriter w;
        w.str("UDXI");
        w.le<uint32_t>(1);
        w.le<uint8_t>(fingerprint_.code_dim);
        w.le<uint8_t>(fingerprint_.levels);
        w.raw(fingerprint_.head_checksum.data(), 32);
        w.le<uint64_t>(doc_table_.size());
        for (const auto& entry : doc_table_) {
            // Tombstones persist as zero-length ids (live ids are nonempty).
            const std::string empty;
            const std::string& id = entry.has_value() ? *entry : empty;
            w.le<uint32_t>(static_cast<uint32_t>(id.size()));
            w.str(id);
        }
        w.le<uint64_t>(postings_.size());
        for (const auto& [sid, list] : postings_) {
            w.le<uint64_t>(sid);
            w.le<uint32_t>(static_cast<uint32_t>(list.size()));
            for (uint32_t ord : list) w.le<uint32_t>(ord);
        }
        return w;
    }

    void save(const std::string& path) const { serialize().write_file(path); }

    static InvertedIndex load(const std::string& path,
                              const IndexFingerprint* expected = nullptr) {
        auto r = ByteReader::from_file(path);
        expect_magic(r, "UDXI");
        uint32_t version = r.le<uint32_t>();
        if (version != 1) throw ParseError("UDXI: unsupported version");
        InvertedIndex idx;
        idx.fingerprint_.code_dim = r.le<uint8_t>();
        idx.fingerprint_.levels = r.le<uint8_t>();
        r.raw(idx.fingerprint_.head_checksum.data(), 32);
        if (expected && !(idx.fingerprint_ == *expected))
            throw ValidationError("UDXI: fingerprint mismatch against supplied quantizer");
        QuantizerConfig cfg;
        cfg.code_dim = idx.fingerprint_.code_dim;
        cfg.levels = idx.fingerprint_.levels;
        idx.sid_space_ = cfg.code_space();
        uint64_t doc_count = r.le<uint64_t>();
        for (uint64_t i = 0; i < doc_count; ++i) {
            uint32_t len = r.le<uint32_t>();
            std::string id = r.str(len);
            if (id.empty()) {
                idx.doc_table_.emplace_back(std::nullopt);
            } else {
                if (idx.id_to_ordinal_.count(id))
                    throw ParseError("UDXI: duplicate doc id \"" + id + "\"");
                idx.id_to_ordinal_.emplace(id, static_cast<uint32_t>(i));
                idx.doc_table_.emplace_back(std::move(id));
            }
        }
        idx.doc_sids_.resize(idx.doc_table_.size());
        uint64_t posting_count = r.le<uint64_t>();
        SemanticId prev_sid = 0;
        for (uint64_t p = 0; p < posting_count; ++p) {
            SemanticId sid = r.le<uint64_t>();
            if (p > 0 && sid <= prev_sid) throw ParseError("UDXI: postings not sorted by SID");
            prev_sid = sid;
            if (sid >= idx.sid_space_) throw ParseError("UDXI: sid out of range");
            uint32_t len = r.le<uint32_t>();
            if (len == 0) throw ParseError("UDXI: empty posting list");
            std::vector<uint32_t> list(len);
            for (uint32_t k = 0; k < len; ++k) {
                list[k] = r.le<uint32_t>();
                if (list[k] >= idx.doc_table_.size() || !idx.doc_table_[list[k]].has_value())
                    throw ParseError("UDXI: posting references unknown ordinal");
                if (k > 0 && list[k] <= list[k - 1])
                    throw ParseError("UDXI: posting list not strictly increasing");
                idx.doc_sids_[list[k]].push_back(sid);
            }
            idx.postings_.emplace(sid, std::move(list));
        }
        if (!r.done()) throw ParseError("UDXI: trailing bytes");
        return idx;
    }

  private:
    void check_sids(const std::vector<SemanticId>& sids) const {
        for (SemanticId sid : sids)
            if (sid >= sid_space_)
                throw ValidationError("sid out of range: " + std::to_string(sid));
    }

    IndexFingerprint fingerprint_;
    uint64_t sid_space_ = 1ull << 19;
    std::map<SemanticId, std::vector<uint32_t>> postings_;
    std::vector<std::optional<std::string>> doc_table_;   // ordinal -> external id
    std::vector<std::vector<SemanticId>> doc_sids_;       // ordinal -> distinct SIDs
    std::unordered_map<std::string, uint32_t> id_to_ordinal_;
};

inline InvertedIndex build_index(
    const std::vector<std::pair<std::string, std::vector<SemanticId>>>& docs,
    IndexFingerprint fingerprint, uint64_t sid_space) {
    InvertedIndex idx(fingerprint, sid_space);
    for (const auto& [id, sids] : docs) idx.insert_doc(id, sids);
    return idx;
}

}  // namespace unidex
