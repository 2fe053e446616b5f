#include "memlayer/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <mutex>
#include <set>
#include <unordered_map>

#include "memlayer/error.hpp"

namespace memlayer {

namespace {

bool ranks_before(const ScoredDoc& a, const ScoredDoc& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
}

std::vector<ScoredDoc> top_k(std::vector<ScoredDoc> docs, std::size_t k) {
    if (docs.size() > k) {
        std::partial_sort(docs.begin(), docs.begin() + static_cast<std::ptrdiff_t>(k), docs.end(),
                          ranks_before);
        docs.resize(k);
    } else {
        std::sort(docs.begin(), docs.end(), ranks_before);
    }
    return docs;
}

std::set<std::string> distinct_terms(const std::vector<std::string>& terms) {
    return {terms.begin(), terms.end()};
}

double idf(std::size_t n_docs, std::size_t doc_freq) {
    const auto n = static_cast<double>(n_docs);
    const auto nq = static_cast<double>(doc_freq);
    return std::log(1.0 + (n - nq + 0.5) / (nq + 0.5));
}

double term_weight(double term_idf, std::uint32_t tf, std::uint32_t dl, double avgdl,
                   const HybridParams& p) {
    const auto f = static_cast<double>(tf);
    const double norm = avgdl > 0.0 ? static_cast<double>(dl) / avgdl : 0.0;
    return term_idf * f * (p.k1 + 1.0) / (f + p.k1 * (1.0 - p.b + p.b * norm));
}

const LexicalIndex::Posting* find_posting(const std::vector<LexicalIndex::Posting>& list,
                                          const std::string& id) {
    auto it = std::lower_bound(list.begin(), list.end(), id,
                               [](const LexicalIndex::Posting& p, const std::string& key) {
                                   return p.doc_id < key;
                               });
    return it != list.end() && it->doc_id == id ? &*it : nullptr;
}

} // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::string triple_doc_text(const Triple& t) {
    return t.subject + " " + t.predicate + " " + t.object;
}

void HybridParams::validate() const {
    if (!(k1 > 0.0)) throw Error(ErrorCode::InvalidArgument, "k1 must be > 0");
    if (!(b >= 0.0 && b <= 1.0)) throw Error(ErrorCode::InvalidArgument, "b must be in [0, 1]");
    if (rrf_k == 0) throw Error(ErrorCode::InvalidArgument, "rrf_k must be positive");
    if (top_k_per_channel == 0 || final_k == 0) {
        throw Error(ErrorCode::InvalidArgument, "top_k_per_channel and final_k must be positive");
    }
    if (final_k > top_k_per_channel) {
        throw Error(ErrorCode::InvalidArgument, "final_k must not exceed top_k_per_channel");
    }
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must be in [0, 1]");
}

// ---------------------------------------------------------------------------
// LexicalIndex

void LexicalIndex::insert(const std::string& id, const std::vector<std::string>& tokens) {
    if (contains(id)) throw Error(ErrorCode::DuplicateId, "document " + id + " already indexed");
    std::map<std::string, std::uint32_t> counts;
    for (const auto& t : tokens) ++counts[t];
    for (const auto& [term, tf] : counts) {
        auto& list = postings_[term];
        auto pos = std::lower_bound(list.begin(), list.end(), id,
                                    [](const Posting& p, const std::string& key) { return p.doc_id < key; });
        list.insert(pos, Posting{id, tf});
    }
    doc_lengths_.emplace(id, static_cast<std::uint32_t>(tokens.size()));
    total_length_ += tokens.size();
}

void LexicalIndex::remove(const std::string& id) {
    auto it = doc_lengths_.find(id);
    if (it == doc_lengths_.end()) throw Error(ErrorCode::UnknownDocument, "document " + id + " not indexed");
    for (auto pit = postings_.begin(); pit != postings_.end();) {
        auto& list = pit->second;
        list.erase(std::remove_if(list.begin(), list.end(),
                                  [&](const Posting& p) { return p.doc_id == id; }),
                   list.end());
        pit = list.empty() ? postings_.erase(pit) : std::next(pit);
    }
    total_length_ -= it->second;
    doc_lengths_.erase(it);
}

double LexicalIndex::avgdl() const {
    return doc_lengths_.empty() ? 0.0
                                : static_cast<double>(total_length_) / static_cast<double>(doc_lengths_.size());
}

std::size_t LexicalIndex::document_frequency(const std::string& term) const {
    auto it = postings_.find(term);
    return it == postings_.end() ? 0 : it->second.size();
}

std::uint32_t LexicalIndex::term_frequency(const std::string& term, const std::string& id) const {
    auto it = postings_.find(term);
    if (it == postings_.end()) return 0;
    const Posting* p = find_posting(it->second, id);
    return p != nullptr ? p->term_frequency : 0;
}

std::uint32_t LexicalIndex::doc_length(const std::string& id) const {
    auto it = doc_lengths_.find(id);
    if (it == doc_lengths_.end()) throw Error(ErrorCode::UnknownDocument, "document " + id + " not indexed");
    return it->second;
}

std::vector<ScoredDoc> LexicalIndex::search(const std::vector<std::string>& query_terms,
                                            const HybridParams& params, std::size_t limit,
                                            const DocFilter& filter) const {
    const double mean_len = avgdl();
    std::unordered_map<std::string, double> acc;
    // Same term order and arithmetic as bm25_score(), so the results agree bit for bit.
    for (const auto& term : distinct_terms(query_terms)) {
        auto it = postings_.find(term);
        if (it == postings_.end()) continue;
        const double term_idf = idf(size(), it->second.size());
        for (const auto& p : it->second) {
            if (filter && !filter(p.doc_id)) continue;
            acc[p.doc_id] += term_weight(term_idf, p.term_frequency, doc_lengths_.at(p.doc_id), mean_len, params);
        }
    }
    std::vector<ScoredDoc> docs;
    docs.reserve(acc.size());
    for (auto& [id, score] : acc) docs.push_back({id, score});
    return top_k(std::move(docs), limit);
}

double bm25_score(const std::vector<std::string>& query_terms, const std::string& id,
                  const LexicalIndex& index, const HybridParams& params) {
    const std::uint32_t dl = index.doc_length(id);
    const double mean_len = index.avgdl();
    double score = 0.0;
    for (const auto& term : distinct_terms(query_terms)) {
        auto it = index.postings().find(term);
        if (it == index.postings().end()) continue;
        const LexicalIndex::Posting* p = find_posting(it->second, id);
        if (p == nullptr) continue;
        score += term_weight(idf(index.size(), it->second.size()), p->term_frequency, dl, mean_len, params);
    }
    return score;
}

// ---------------------------------------------------------------------------
// DenseIndex

DenseIndex::DenseIndex(std::size_t dimension) : dimension_(dimension) {
    if (dimension == 0) throw Error(ErrorCode::InvalidArgument, "dimension must be positive");
}

void DenseIndex::insert(const std::string& id, const Embedding& v) {
    if (contains(id)) throw Error(ErrorCode::DuplicateId, "vector " + id + " already indexed");
    if (v.size() != dimension_) {
        throw Error(ErrorCode::DimensionMismatch, "expected dimension " + std::to_string(dimension_) +
                                                      ", got " + std::to_string(v.size()));
    }
    if (!is_unit_norm(v)) throw Error(ErrorCode::BadEmbeddingNorm, "vector " + id + " is not unit norm");
    vectors_.emplace(id, v);
}

void DenseIndex::remove(const std::string& id) {
    if (vectors_.erase(id) == 0) throw Error(ErrorCode::UnknownDocument, "vector " + id + " not indexed");
}

const Embedding* DenseIndex::find(const std::string& id) const {
    auto it = vectors_.find(id);
    return it == vectors_.end() ? nullptr : &it->second;
}

double dot(const Embedding& a, const Embedding& b) {
    double sum = 0.0;
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) sum += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return sum;
}

std::vector<ScoredDoc> dense_search(const Embedding& query, const DenseIndex& index, std::size_t k,
                                    const DocFilter& filter) {
    if (query.size() != index.dimension()) {
        throw Error(ErrorCode::DimensionMismatch, "query dimension " + std::to_string(query.size()) +
                                                      " != index dimension " + std::to_string(index.dimension()));
    }
    if (!is_unit_norm(query)) throw Error(ErrorCode::BadEmbeddingNorm, "query vector is not unit norm");
    std::vector<ScoredDoc> docs;
    docs.reserve(index.size());
    for (const auto& [id, v] : index.vectors()) {
        if (filter && !filter(id)) continue;
        docs.push_back({id, dot(query, v)});
    }
    return top_k(std::move(docs), k);
}

// ---------------------------------------------------------------------------
// Fusion

std::vector<RetrievalEntry> hybrid_retrieve(std::string_view query_text, const LexicalIndex& lexical,
                                            const DenseIndex& dense, const QueryEmbedder& embed,
                                            const HybridParams& params, const DocFilter& filter) {
    return hybrid_retrieve(query_text, embed(query_text), lexical, dense, params, filter);
}

std::vector<RetrievalEntry> hybrid_retrieve(std::string_view query_text, const Embedding& query_vector,
                                            const LexicalIndex& lexical, const DenseIndex& dense,
                                            const HybridParams& params, const DocFilter& filter) {
    params.validate();
    const std::vector<std::string> terms = tokenize(query_text);
    const auto lex = terms.empty() ? std::vector<ScoredDoc>{}
                                   : lexical.search(terms, params, params.top_k_per_channel, filter);
    const auto den = dense_search(query_vector, dense, params.top_k_per_channel, filter);

    std::map<std::string, RetrievalEntry> merged;
    auto entry_for = [&](const std::string& id) -> RetrievalEntry& {
        auto [it, fresh] = merged.try_emplace(id);
        if (fresh) {
            it->second.triple_id = id;
            it->second.lexical_score = terms.empty() ? 0.0 : bm25_score(terms, id, lexical, params);
            const Embedding* v = dense.find(id);
            it->second.dense_score = v != nullptr ? dot(query_vector, *v) : 0.0;
        }
        return it->second;
    };
    for (std::size_t i = 0; i < lex.size(); ++i) entry_for(lex[i].id).lexical_rank = static_cast<std::uint32_t>(i + 1);
    for (std::size_t i = 0; i < den.size(); ++i) entry_for(den[i].id).dense_rank = static_cast<std::uint32_t>(i + 1);

    if (params.fusion == FusionMode::ReciprocalRank) {
        const auto k = static_cast<double>(params.rrf_k);
        for (auto& [id, e] : merged) {
            double fused = 0.0;
            if (e.lexical_rank) fused += 1.0 / (k + *e.lexical_rank);
            if (e.dense_rank) fused += 1.0 / (k + *e.dense_rank);
            e.fused_score = fused;
        }
    } else {
        auto normalizer = [](const std::vector<ScoredDoc>& docs) {
            double lo = 0.0, hi = 0.0;
            if (!docs.empty()) {
                hi = docs.front().score;
                lo = docs.back().score;
            }
            return [lo, hi](double s) { return hi > lo ? (s - lo) / (hi - lo) : 1.0; };
        };
        const auto lex_norm = normalizer(lex);
        const auto den_norm = normalizer(den);
        for (auto& [id, e] : merged) {
            double fused = 0.0;
            if (e.lexical_rank) fused += params.alpha * lex_norm(lex[*e.lexical_rank - 1].score);
            if (e.dense_rank) fused += (1.0 - params.alpha) * den_norm(den[*e.dense_rank - 1].score);
            e.fused_score = fused;
        }
    }

    std::vector<RetrievalEntry> out;
    out.reserve(merged.size());
    for (auto& [id, e] : merged) {
        if (e.fused_score > 0.0) out.push_back(std::move(e));
    }
    std::sort(out.begin(), out.end(), [](const RetrievalEntry& a, const RetrievalEntry& b) {
        if (a.fused_score != b.fused_score) return a.fused_score > b.fused_score;
        return a.triple_id < b.triple_id;
    });
    if (out.size() > params.final_k) out.resize(params.final_k);
    return out;
}

// ---------------------------------------------------------------------------
// HybridIndex

HybridIndex::HybridIndex(std::size_t dimension) : dimension_(dimension), dense_(dimension) {}

void HybridIndex::insert(const Triple& t) {
    if (!t.embedding) throw Error(ErrorCode::InvalidArgument, "triple " + t.id + " has no embedding");
    std::unique_lock lock(mu_);
    if (lexical_.contains(t.id) || dense_.contains(t.id)) {
        throw Error(ErrorCode::DuplicateId, "triple " + t.id + " already indexed");
    }
    dense_.insert(t.id, *t.embedding);  // validates dimension and norm first
    lexical_.insert(t.id, tokenize(triple_doc_text(t)));
    conversation_of_.emplace(t.id, t.conversation_id);
}

void HybridIndex::remove(const std::string& id) {
    std::unique_lock lock(mu_);
    if (!lexical_.contains(id)) throw Error(ErrorCode::UnknownDocument, "triple " + id + " not indexed");
    lexical_.remove(id);
    dense_.remove(id);
    conversation_of_.erase(id);
}

void HybridIndex::clear() {
    std::unique_lock lock(mu_);
    lexical_ = LexicalIndex{};
    dense_ = DenseIndex(dimension_);
    conversation_of_.clear();
}

void HybridIndex::reset(std::size_t dimension) {
    std::unique_lock lock(mu_);
    dimension_ = dimension;
    lexical_ = LexicalIndex{};
    dense_ = DenseIndex(dimension);
    conversation_of_.clear();
}

std::size_t HybridIndex::size() const {
    std::shared_lock lock(mu_);
    return lexical_.size();
}

std::size_t HybridIndex::vocabulary_size() const {
    std::shared_lock lock(mu_);
    return lexical_.postings().size();
}

double HybridIndex::avgdl() const {
    std::shared_lock lock(mu_);
    return lexical_.avgdl();
}

std::vector<RetrievalEntry> HybridIndex::search(std::string_view query_text, const QueryEmbedder& embed,
                                                const HybridParams& params,
                                                const std::optional<std::string>& conversation_id) const {
    const Embedding query_vector = embed(query_text);
    std::shared_lock lock(mu_);
    DocFilter filter;
    if (conversation_id) {
        filter = [this, &conversation_id](const std::string& id) {
            auto it = conversation_of_.find(id);
            return it != conversation_of_.end() && it->second == *conversation_id;
        };
    }
    return hybrid_retrieve(query_text, query_vector, lexical_, dense_, params, filter);
}

LexicalIndex HybridIndex::lexical_snapshot() const {
    std::shared_lock lock(mu_);
    return lexical_;
}

DenseIndex HybridIndex::dense_snapshot() const {
    std::shared_lock lock(mu_);
    return dense_;
}

} // namespace memlayer
