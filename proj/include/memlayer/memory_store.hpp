#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "memlayer/hash.hpp"
#include "memlayer/model.hpp"
#include "memlayer/retrieval.hpp"

namespace memlayer {

inline constexpr int kStoreFormatVersion = 1;

enum class OpenMode { Read, ReadWrite };

struct DataFileState {
    std::uint64_t bytes = 0;
    std::string sha256;

    bool operator==(const DataFileState&) const = default;
};

struct StoreManifest {
    int format_version = kStoreFormatVersion;
    std::size_t embedding_dimension = kDefaultEmbeddingDimension;
    std::size_t n_triples = 0;
    std::size_t n_summaries = 0;
    std::string created_at;
    std::string updated_at;
    std::string checksum;  // sha256 over the per-file digests
    DataFileState triples_file;
    DataFileState summaries_file;

    bool operator==(const StoreManifest&) const = default;
};

/// What the recovery scan on open had to do.
struct RecoveryReport {
    bool recovered = false;
    std::uint64_t discarded_bytes = 0;        // uncommitted or torn tail bytes
    std::size_t dropped_orphan_triples = 0;   // triples whose summary was lost
};

struct CommitResult {
    bool summary_written = false;
    std::size_t new_triples = 0;
};

struct StoreOptions {
    std::size_t embedding_dimension = kDefaultEmbeddingDimension;  // used when creating
    bool create_if_missing = true;                                 // read_write only
};

/// Durable dual-layer memory: summaries.jsonl + triples.jsonl + manifest.json in
/// one directory. Data files are append-only; the manifest (replaced atomically)
/// is the commit point and records the committed length and digest of each file.
/// Indexes are rebuilt from the data files on open.
///
/// Many concurrent readers or one writer per handle; a read_write handle holds
/// an exclusive lock file so two writers never share a directory.
class MemoryStore {
public:
    static constexpr const char* kManifestFile = "manifest.json";
    static constexpr const char* kTriplesFile = "triples.jsonl";
    static constexpr const char* kSummariesFile = "summaries.jsonl";
    static constexpr const char* kLockFile = "store.lock";

    /// Throws Error(NotFound | CorruptStore | VersionMismatch | StoreLocked | IoError).
    static std::unique_ptr<MemoryStore> open(const std::filesystem::path& dir, OpenMode mode,
                                             const StoreOptions& options = {});

    ~MemoryStore();
    MemoryStore(const MemoryStore&) = delete;
    MemoryStore& operator=(const MemoryStore&) = delete;

    void close();
    bool is_open() const;
    OpenMode mode() const { return mode_; }
    const std::filesystem::path& path() const { return dir_; }

    StoreManifest manifest() const;
    const RecoveryReport& recovery() const { return recovery_; }
    std::size_t embedding_dimension() const { return dimension_; }

    /// Returns true when the stored text or timestamp changed (or was new).
    bool upsert_summary(const Summary& s);

    /// Returns the number of triples actually added; existing ids are skipped.
    /// Throws Error(MissingSummaryLink) if any triple's session has no summary
    /// (nothing is written in that case), Error(InvalidArgument |
    /// DimensionMismatch) for triples without a proper embedding.
    std::size_t insert_triples(const std::vector<Triple>& triples);

    /// Summary then triples in one commit; a failure leaves the store untouched.
    CommitResult commit_session(const Summary& s, const std::vector<Triple>& triples);

    std::optional<Summary> get_summary(const std::string& conversation_id,
                                       const std::string& session_id) const;
    std::optional<Triple> get_triple(const std::string& id) const;
    /// In insertion order.
    std::vector<Triple> all_triples() const;
    /// Ordered by (conversation_id, session_id).
    std::vector<Summary> all_summaries() const;
    bool has_conversation(const std::string& conversation_id) const;

    /// Hybrid search scoped to one conversation when given, with every entry's
    /// triple resolved and the linked summaries attached (deduplicated, in
    /// order of first appearance).
    RetrievalResult retrieve(std::string_view query, const QueryEmbedder& embed,
                             const HybridParams& params,
                             const std::optional<std::string>& conversation_id = {}) const;

    const HybridIndex& index() const { return index_; }

private:
    MemoryStore(std::filesystem::path dir, OpenMode mode, std::size_t dimension);

    void load(const StoreOptions& options);
    void initialize_empty();
    void require_open() const;
    void require_writable() const;
    void check_triple(const Triple& t) const;
    CommitResult commit_locked(const std::optional<Summary>& s, const std::vector<Triple>& triples);
    void write_manifest();
    void rewrite_data_files();

    std::filesystem::path dir_;
    OpenMode mode_;
    std::size_t dimension_;
    int lock_fd_ = -1;
    bool open_ = false;

    mutable std::shared_mutex mu_;
    StoreManifest manifest_;
    RecoveryReport recovery_;
    std::vector<Triple> triples_;
    std::map<std::string, std::size_t> triple_pos_;
    std::map<SessionKey, Summary> summaries_;
    HybridIndex index_;
    Sha256 triples_digest_;
    Sha256 summaries_digest_;
};

} // namespace memlayer
