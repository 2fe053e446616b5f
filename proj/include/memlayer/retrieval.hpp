#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "memlayer/model.hpp"

namespace memlayer {

/// Lowercase, split on every non-alphanumeric byte, drop empty fragments.
/// No stemming and no stopword removal.
std::vector<std::string> tokenize(std::string_view text);

/// "subject predicate object": the document indexed for a triple.
std::string triple_doc_text(const Triple& t);

enum class FusionMode { ReciprocalRank, WeightedSum };

struct HybridParams {
    double k1 = 1.2;
    double b = 0.75;
    std::uint32_t rrf_k = 60;
    std::uint32_t top_k_per_channel = 30;
    std::uint32_t final_k = 10;
    FusionMode fusion = FusionMode::ReciprocalRank;
    double alpha = 0.5;  // lexical weight in WeightedSum mode

    /// Throws Error(InvalidArgument) on k1 <= 0, b outside [0,1], zero counts,
    /// final_k > top_k_per_channel or alpha outside [0,1].
    void validate() const;
};

struct ScoredDoc {
    std::string id;
    double score = 0.0;

    bool operator==(const ScoredDoc&) const = default;
};

/// Restricts a search to documents for which the predicate holds; empty means all.
using DocFilter = std::function<bool(const std::string& id)>;

/// Inverted index for Okapi BM25 over triple documents.
class LexicalIndex {
public:
    struct Posting {
        std::string doc_id;
        std::uint32_t term_frequency = 0;

        bool operator==(const Posting&) const = default;
    };

    /// Throws Error(DuplicateId).
    void insert(const std::string& id, const std::vector<std::string>& tokens);
    /// Throws Error(UnknownDocument).
    void remove(const std::string& id);

    bool contains(const std::string& id) const { return doc_lengths_.count(id) != 0; }
    std::size_t size() const { return doc_lengths_.size(); }
    double avgdl() const;
    std::uint64_t total_length() const { return total_length_; }
    std::size_t document_frequency(const std::string& term) const;
    std::uint32_t term_frequency(const std::string& term, const std::string& id) const;
    /// Throws Error(UnknownDocument).
    std::uint32_t doc_length(const std::string& id) const;

    const std::map<std::string, std::vector<Posting>>& postings() const { return postings_; }
    const std::map<std::string, std::uint32_t>& doc_lengths() const { return doc_lengths_; }

    /// Every document sharing at least one term with the query, ranked by
    /// BM25 descending then id ascending, truncated to `limit`.
    std::vector<ScoredDoc> search(const std::vector<std::string>& query_terms,
                                  const HybridParams& params, std::size_t limit,
                                  const DocFilter& filter = {}) const;

    bool operator==(const LexicalIndex&) const = default;

private:
    std::map<std::string, std::vector<Posting>> postings_;  // postings sorted by doc_id
    std::map<std::string, std::uint32_t> doc_lengths_;
    std::uint64_t total_length_ = 0;
};

/// BM25 with IDF = ln(1 + (N - n + 0.5) / (n + 0.5)); repeated query terms count once.
/// Throws Error(UnknownDocument).
double bm25_score(const std::vector<std::string>& query_terms, const std::string& id,
                  const LexicalIndex& index, const HybridParams& params);

/// Exact store of unit vectors of one fixed dimension.
class DenseIndex {
public:
    explicit DenseIndex(std::size_t dimension = kDefaultEmbeddingDimension);

    /// Throws Error(DuplicateId | DimensionMismatch | BadEmbeddingNorm).
    void insert(const std::string& id, const Embedding& v);
    /// Throws Error(UnknownDocument).
    void remove(const std::string& id);

    bool contains(const std::string& id) const { return vectors_.count(id) != 0; }
    std::size_t size() const { return vectors_.size(); }
    std::size_t dimension() const { return dimension_; }
    const Embedding* find(const std::string& id) const;
    const std::map<std::string, Embedding>& vectors() const { return vectors_; }

    bool operator==(const DenseIndex&) const = default;

private:
    std::size_t dimension_;
    std::map<std::string, Embedding> vectors_;
};

double dot(const Embedding& a, const Embedding& b);

/// Exact top-k by dot product (cosine for unit vectors), ties by id ascending.
/// Throws Error(DimensionMismatch | BadEmbeddingNorm).
std::vector<ScoredDoc> dense_search(const Embedding& query, const DenseIndex& index, std::size_t k,
                                    const DocFilter& filter = {});

using QueryEmbedder = std::function<Embedding(std::string_view)>;

/// Runs both channels, fuses them and returns at most final_k entries sorted by
/// fused score descending then triple_id ascending. Entries carry the true BM25
/// and cosine scores even when the triple missed one channel's top-k; the
/// `triple` member is left empty for the caller to resolve.
std::vector<RetrievalEntry> hybrid_retrieve(std::string_view query_text,
                                            const LexicalIndex& lexical, const DenseIndex& dense,
                                            const QueryEmbedder& embed, const HybridParams& params,
                                            const DocFilter& filter = {});

/// Same as above with a precomputed query vector.
std::vector<RetrievalEntry> hybrid_retrieve(std::string_view query_text,
                                            const Embedding& query_vector,
                                            const LexicalIndex& lexical, const DenseIndex& dense,
                                            const HybridParams& params,
                                            const DocFilter& filter = {});

/// Both channels plus the triple → conversation map used for scoping, behind a
/// reader-writer lock. Searches see a consistent snapshot of both channels.
class HybridIndex {
public:
    explicit HybridIndex(std::size_t dimension = kDefaultEmbeddingDimension);

    /// Requires an embedding. Throws Error(DuplicateId | DimensionMismatch |
    /// BadEmbeddingNorm | InvalidArgument); on error neither channel changes.
    void insert(const Triple& t);
    /// Throws Error(UnknownDocument).
    void remove(const std::string& id);
    void clear();
    /// Empties the index and switches it to a new dimension.
    void reset(std::size_t dimension);

    std::size_t size() const;
    std::size_t dimension() const { return dimension_; }
    std::size_t vocabulary_size() const;
    double avgdl() const;

    /// Query vector is computed by `embed` before the snapshot lock is taken.
    std::vector<RetrievalEntry> search(std::string_view query_text, const QueryEmbedder& embed,
                                       const HybridParams& params,
                                       const std::optional<std::string>& conversation_id = {}) const;

    /// Copies of the channels, for inspection and tests.
    LexicalIndex lexical_snapshot() const;
    DenseIndex dense_snapshot() const;

private:
    std::size_t dimension_;
    mutable std::shared_mutex mu_;
    LexicalIndex lexical_;
    DenseIndex dense_;
    std::map<std::string, std::string> conversation_of_;
};

} // namespace memlayer
