#include "memlayer/memory_store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "memlayer/error.hpp"
#include "memlayer/serialization.hpp"

namespace memlayer {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

std::string now_iso() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

[[noreturn]] void throw_errno(const std::string& what) {
    throw Error(ErrorCode::IoError, what + ": " + std::strerror(errno));
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return {};
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_all(int fd, std::string_view data, const fs::path& p) {
    while (!data.empty()) {
        const ssize_t n = ::write(fd, data.data(), data.size());
        if (n < 0) {
            if (errno == EINTR) continue;
            throw_errno("write " + p.string());
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
}

void fsync_dir(const fs::path& dir) {
    const int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
    if (fd >= 0) {
        ::fsync(fd);
        ::close(fd);
    }
}

/// Cuts the file back to `offset` (dropping any uncommitted tail) and appends.
void append_at(const fs::path& p, std::uint64_t offset, std::string_view data) {
    const int fd = ::open(p.c_str(), O_WRONLY | O_CREAT, 0644);
    if (fd < 0) throw_errno("open " + p.string());
    try {
        if (::ftruncate(fd, static_cast<off_t>(offset)) != 0) throw_errno("truncate " + p.string());
        if (::lseek(fd, static_cast<off_t>(offset), SEEK_SET) < 0) throw_errno("seek " + p.string());
        write_all(fd, data, p);
        if (::fsync(fd) != 0) throw_errno("fsync " + p.string());
    } catch (...) {
        (void)::ftruncate(fd, static_cast<off_t>(offset));
        ::close(fd);
        throw;
    }
    ::close(fd);
}

void write_atomic(const fs::path& p, std::string_view data) {
    const fs::path tmp = p.string() + ".tmp";
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd < 0) throw_errno("open " + tmp.string());
    try {
        write_all(fd, data, tmp);
        if (::fsync(fd) != 0) throw_errno("fsync " + tmp.string());
    } catch (...) {
        ::close(fd);
        throw;
    }
    ::close(fd);
    if (::rename(tmp.c_str(), p.c_str()) != 0) throw_errno("rename " + tmp.string());
    fsync_dir(p.parent_path());
}

std::string combined_checksum(const std::string& triples_sha, const std::string& summaries_sha) {
    return sha256_hex(triples_sha + "\n" + summaries_sha);
}

ordered_json manifest_to_json(const StoreManifest& m) {
    ordered_json j;
    j["format_version"] = m.format_version;
    j["embedding_dimension"] = m.embedding_dimension;
    j["counts"] = {{"n_triples", m.n_triples}, {"n_summaries", m.n_summaries}};
    j["created_at"] = m.created_at;
    j["updated_at"] = m.updated_at;
    j["checksum"] = m.checksum;
    j["files"] = {
        {MemoryStore::kTriplesFile, {{"bytes", m.triples_file.bytes}, {"sha256", m.triples_file.sha256}}},
        {MemoryStore::kSummariesFile, {{"bytes", m.summaries_file.bytes}, {"sha256", m.summaries_file.sha256}}},
    };
    return j;
}

StoreManifest manifest_from_json(const json& j) {
    StoreManifest m;
    try {
        m.format_version = j.at("format_version").get<int>();
        if (m.format_version != kStoreFormatVersion) {
            throw Error(ErrorCode::VersionMismatch, "store format " + std::to_string(m.format_version) +
                                                        ", expected " + std::to_string(kStoreFormatVersion));
        }
        m.embedding_dimension = j.at("embedding_dimension").get<std::size_t>();
        m.n_triples = j.at("counts").at("n_triples").get<std::size_t>();
        m.n_summaries = j.at("counts").at("n_summaries").get<std::size_t>();
        m.created_at = j.at("created_at").get<std::string>();
        m.updated_at = j.at("updated_at").get<std::string>();
        m.checksum = j.at("checksum").get<std::string>();
        const json& files = j.at("files");
        m.triples_file = {files.at(MemoryStore::kTriplesFile).at("bytes").get<std::uint64_t>(),
                          files.at(MemoryStore::kTriplesFile).at("sha256").get<std::string>()};
        m.summaries_file = {files.at(MemoryStore::kSummariesFile).at("bytes").get<std::uint64_t>(),
                            files.at(MemoryStore::kSummariesFile).at("sha256").get<std::string>()};
    } catch (const json::exception& e) {
        throw Error(ErrorCode::CorruptStore, std::string("bad manifest: ") + e.what());
    }
    if (m.embedding_dimension == 0) throw Error(ErrorCode::CorruptStore, "manifest embedding_dimension is 0");
    return m;
}

/// The part of a data file that can be trusted, plus whether recovery was needed.
struct FileScan {
    std::vector<std::string> lines;
    bool truncated = false;  // file shorter than committed: torn lines dropped
    std::uint64_t discarded_bytes = 0;
};

FileScan scan_data_file(const fs::path& p, const DataFileState& committed) {
    const std::string content = read_file(p);
    FileScan scan;
    std::string_view usable;
    if (content.size() >= committed.bytes) {
        usable = std::string_view(content).substr(0, committed.bytes);
        if (sha256_hex(usable) != committed.sha256) {
            throw Error(ErrorCode::CorruptStore, p.filename().string() + ": checksum mismatch");
        }
        if (!usable.empty() && usable.back() != '\n') {
            throw Error(ErrorCode::CorruptStore, p.filename().string() + ": committed data ends mid-record");
        }
        scan.discarded_bytes = content.size() - committed.bytes;
    } else {
        scan.truncated = true;
        usable = content;
        const auto last_nl = usable.rfind('\n');
        const std::size_t keep = last_nl == std::string_view::npos ? 0 : last_nl + 1;
        scan.discarded_bytes = usable.size() - keep;
        usable = usable.substr(0, keep);
    }
    std::size_t start = 0;
    while (start < usable.size()) {
        const std::size_t nl = usable.find('\n', start);
        scan.lines.emplace_back(usable.substr(start, nl - start));
        start = nl + 1;
    }
    return scan;
}

} // namespace

MemoryStore::MemoryStore(fs::path dir, OpenMode mode, std::size_t dimension)
    : dir_(std::move(dir)), mode_(mode), dimension_(dimension), index_(dimension) {}

MemoryStore::~MemoryStore() { close(); }

std::unique_ptr<MemoryStore> MemoryStore::open(const fs::path& dir, OpenMode mode,
                                               const StoreOptions& options) {
    if (options.embedding_dimension == 0) {
        throw Error(ErrorCode::InvalidArgument, "embedding dimension must be positive");
    }
    std::unique_ptr<MemoryStore> store(new MemoryStore(dir, mode, options.embedding_dimension));
    store->load(options);
    return store;
}

void MemoryStore::close() {
    std::unique_lock lock(mu_);
    if (lock_fd_ >= 0) {
        ::flock(lock_fd_, LOCK_UN);
        ::close(lock_fd_);
        lock_fd_ = -1;
    }
    open_ = false;
}

bool MemoryStore::is_open() const {
    std::shared_lock lock(mu_);
    return open_;
}

void MemoryStore::require_open() const {
    if (!open_) throw Error(ErrorCode::StoreClosed, "store " + dir_.string() + " is closed");
}

void MemoryStore::require_writable() const {
    require_open();
    if (mode_ != OpenMode::ReadWrite) throw Error(ErrorCode::ReadOnly, "store opened read-only");
}

void MemoryStore::load(const StoreOptions& options) {
    std::error_code ec;
    const bool exists = fs::is_directory(dir_, ec);
    if (!exists) {
        if (mode_ == OpenMode::Read || !options.create_if_missing) {
            throw Error(ErrorCode::NotFound, "no store at " + dir_.string());
        }
        fs::create_directories(dir_, ec);
        if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir_.string() + ": " + ec.message());
    }

    if (mode_ == OpenMode::ReadWrite) {
        const fs::path lock_path = dir_ / kLockFile;
        lock_fd_ = ::open(lock_path.c_str(), O_RDWR | O_CREAT, 0644);
        if (lock_fd_ < 0) throw_errno("open " + lock_path.string());
        if (::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
            ::close(lock_fd_);
            lock_fd_ = -1;
            throw Error(ErrorCode::StoreLocked, dir_.string() + " is locked by another writer");
        }
    }

    const fs::path manifest_path = dir_ / kManifestFile;
    if (!fs::exists(manifest_path)) {
        auto nonempty = [](const fs::path& p) {
            std::error_code e;
            const auto n = fs::file_size(p, e);
            return !e && n > 0;
        };
        const bool has_data = nonempty(dir_ / kTriplesFile) || nonempty(dir_ / kSummariesFile);
        if (has_data) throw Error(ErrorCode::CorruptStore, "data files present but manifest missing");
        if (mode_ == OpenMode::Read) throw Error(ErrorCode::NotFound, "no manifest in " + dir_.string());
        initialize_empty();
        open_ = true;
        return;
    }

    json mj = json::parse(read_file(manifest_path), nullptr, false);
    if (mj.is_discarded()) throw Error(ErrorCode::CorruptStore, "manifest is not valid JSON");
    manifest_ = manifest_from_json(mj);
    dimension_ = manifest_.embedding_dimension;
    index_.reset(dimension_);

    FileScan sum_scan = scan_data_file(dir_ / kSummariesFile, manifest_.summaries_file);
    FileScan tri_scan = scan_data_file(dir_ / kTriplesFile, manifest_.triples_file);
    const bool truncated = sum_scan.truncated || tri_scan.truncated;
    if (!truncated && combined_checksum(manifest_.triples_file.sha256, manifest_.summaries_file.sha256) !=
                          manifest_.checksum) {
        throw Error(ErrorCode::CorruptStore, "manifest checksum mismatch");
    }

    // In a verified file every record must parse; in a torn file recovery stops
    // at the first record that does not.
    auto parse_lines = [&](FileScan& scan, auto&& parse_one) {
        for (std::size_t i = 0; i < scan.lines.size(); ++i) {
            try {
                json j = json::parse(scan.lines[i]);
                parse_one(j);
            } catch (const std::exception& e) {
                if (!scan.truncated) {
                    throw Error(ErrorCode::CorruptStore, "record " + std::to_string(i + 1) + ": " + e.what());
                }
                scan.lines.resize(i);
                break;
            }
        }
    };
    parse_lines(sum_scan, [&](const json& j) {
        Summary s = summary_from_json(j);
        summaries_[s.key()] = std::move(s);
    });
    parse_lines(tri_scan, [&](const json& j) {
        Triple t = triple_from_json(j);
        if (!t.embedding || t.embedding->size() != dimension_) {
            throw Error(ErrorCode::DimensionMismatch, "triple " + t.id + " has wrong embedding dimension");
        }
        if (triple_pos_.count(t.id) != 0) return;
        triple_pos_.emplace(t.id, triples_.size());
        triples_.push_back(std::move(t));
    });

    if (!truncated && (triples_.size() != manifest_.n_triples || summaries_.size() != manifest_.n_summaries)) {
        throw Error(ErrorCode::CorruptStore, "manifest counts do not match data files");
    }

    // Triples whose summary was lost to truncation cannot be kept without
    // breaking the link invariant.
    std::vector<Triple> kept;
    kept.reserve(triples_.size());
    for (auto& t : triples_) {
        if (summaries_.count(t.session_key()) != 0) {
            kept.push_back(std::move(t));
        } else {
            ++recovery_.dropped_orphan_triples;
        }
    }
    triples_ = std::move(kept);
    triple_pos_.clear();
    for (std::size_t i = 0; i < triples_.size(); ++i) {
        triple_pos_.emplace(triples_[i].id, i);
        index_.insert(triples_[i]);
    }

    recovery_.discarded_bytes = sum_scan.discarded_bytes + tri_scan.discarded_bytes;
    recovery_.recovered = truncated || recovery_.discarded_bytes > 0 || recovery_.dropped_orphan_triples > 0;

    if (truncated || recovery_.dropped_orphan_triples > 0) {
        if (mode_ == OpenMode::ReadWrite) {
            rewrite_data_files();
        } else {
            manifest_.n_triples = triples_.size();
            manifest_.n_summaries = summaries_.size();
        }
    } else {
        for (const auto& line : sum_scan.lines) summaries_digest_.update(line + "\n");
        for (const auto& line : tri_scan.lines) triples_digest_.update(line + "\n");
    }
    open_ = true;
}

void MemoryStore::initialize_empty() {
    manifest_ = StoreManifest{};
    manifest_.embedding_dimension = dimension_;
    manifest_.created_at = now_iso();
    triples_digest_ = Sha256{};
    summaries_digest_ = Sha256{};
    append_at(dir_ / kTriplesFile, 0, "");
    append_at(dir_ / kSummariesFile, 0, "");
    write_manifest();
}

void MemoryStore::write_manifest() {
    manifest_.embedding_dimension = dimension_;
    manifest_.n_triples = triples_.size();
    manifest_.n_summaries = summaries_.size();
    manifest_.triples_file.sha256 = triples_digest_.hex_digest();
    manifest_.summaries_file.sha256 = summaries_digest_.hex_digest();
    manifest_.checksum = combined_checksum(manifest_.triples_file.sha256, manifest_.summaries_file.sha256);
    manifest_.updated_at = now_iso();
    if (manifest_.created_at.empty()) manifest_.created_at = manifest_.updated_at;
    write_atomic(dir_ / kManifestFile, manifest_to_json(manifest_).dump(2) + "\n");
}

void MemoryStore::rewrite_data_files() {
    std::string sums;
    for (const auto& [key, s] : summaries_) sums += summary_to_json(s).dump() + "\n";
    std::string tris;
    for (const auto& t : triples_) tris += triple_to_json(t).dump() + "\n";
    write_atomic(dir_ / kSummariesFile, sums);
    write_atomic(dir_ / kTriplesFile, tris);
    summaries_digest_ = Sha256{};
    summaries_digest_.update(sums);
    triples_digest_ = Sha256{};
    triples_digest_.update(tris);
    manifest_.summaries_file.bytes = sums.size();
    manifest_.triples_file.bytes = tris.size();
    write_manifest();
}

StoreManifest MemoryStore::manifest() const {
    std::shared_lock lock(mu_);
    return manifest_;
}

void MemoryStore::check_triple(const Triple& t) const {
    if (!t.embedding) throw Error(ErrorCode::InvalidArgument, "triple " + t.id + " has no embedding");
    if (t.embedding->size() != dimension_) {
        throw Error(ErrorCode::DimensionMismatch, "triple " + t.id + " embedding has dimension " +
                                                      std::to_string(t.embedding->size()) + ", store uses " +
                                                      std::to_string(dimension_));
    }
    if (!is_unit_norm(*t.embedding)) throw Error(ErrorCode::BadEmbeddingNorm, "triple " + t.id);
    if (t.id != triple_content_id(t.conversation_id, t.session_id, t.source_message_index, t.subject,
                                  t.predicate, t.object)) {
        throw Error(ErrorCode::InvalidArgument, "triple id " + t.id + " is not its content hash");
    }
}

bool MemoryStore::upsert_summary(const Summary& s) {
    return commit_session(s, {}).summary_written;
}

std::size_t MemoryStore::insert_triples(const std::vector<Triple>& triples) {
    std::unique_lock lock(mu_);
    return commit_locked(std::nullopt, triples).new_triples;
}

CommitResult MemoryStore::commit_session(const Summary& summary, const std::vector<Triple>& triples) {
    const Summary s = validate_summary(summary);
    std::unique_lock lock(mu_);
    return commit_locked(s, triples);
}

CommitResult MemoryStore::commit_locked(const std::optional<Summary>& s, const std::vector<Triple>& triples) {
    require_writable();

    std::optional<Summary> old_summary;
    bool summary_changed = false;
    if (s) {
        auto existing = summaries_.find(s->key());
        if (existing != summaries_.end()) old_summary = existing->second;
        summary_changed = !old_summary || !(*old_summary == *s);
    }
    std::vector<const Triple*> fresh;
    std::set<std::string> batch;
    for (const auto& t : triples) {
        check_triple(t);
        const bool linked = (s && t.session_key() == s->key()) || summaries_.count(t.session_key()) != 0;
        if (!linked) {
            throw Error(ErrorCode::MissingSummaryLink,
                        "triple " + t.id + " links to missing summary (" + t.conversation_id + ", " +
                            t.session_id + ")");
        }
        if (triple_pos_.count(t.id) == 0 && batch.insert(t.id).second) fresh.push_back(&t);
    }
    CommitResult result{summary_changed, fresh.size()};
    if (!summary_changed && fresh.empty()) return result;

    const std::string sum_line = summary_changed ? summary_to_json(*s).dump() + "\n" : std::string{};
    std::string tri_lines;
    for (const Triple* t : fresh) tri_lines += triple_to_json(*t).dump() + "\n";

    // Summary first, so every committed triple has its link target on disk.
    // Nothing counts until the manifest is replaced.
    if (!sum_line.empty()) append_at(dir_ / kSummariesFile, manifest_.summaries_file.bytes, sum_line);
    if (!tri_lines.empty()) append_at(dir_ / kTriplesFile, manifest_.triples_file.bytes, tri_lines);

    const StoreManifest old_manifest = manifest_;
    const Sha256 old_sum_digest = summaries_digest_;
    const Sha256 old_tri_digest = triples_digest_;

    summaries_digest_.update(sum_line);
    triples_digest_.update(tri_lines);
    manifest_.summaries_file.bytes += sum_line.size();
    manifest_.triples_file.bytes += tri_lines.size();
    if (summary_changed) summaries_[s->key()] = *s;
    for (const Triple* t : fresh) {
        triple_pos_.emplace(t->id, triples_.size());
        triples_.push_back(*t);
    }
    try {
        write_manifest();
    } catch (...) {
        triples_.resize(triples_.size() - fresh.size());
        for (const Triple* t : fresh) triple_pos_.erase(t->id);
        if (summary_changed) {
            if (old_summary) {
                summaries_[s->key()] = *old_summary;
            } else {
                summaries_.erase(s->key());
            }
        }
        summaries_digest_ = old_sum_digest;
        triples_digest_ = old_tri_digest;
        manifest_ = old_manifest;
        throw;
    }
    for (const Triple* t : fresh) index_.insert(*t);
    return result;
}

std::optional<Summary> MemoryStore::get_summary(const std::string& conversation_id,
                                                const std::string& session_id) const {
    std::shared_lock lock(mu_);
    require_open();
    auto it = summaries_.find(SessionKey{conversation_id, session_id});
    if (it == summaries_.end()) return std::nullopt;
    return it->second;
}

std::optional<Triple> MemoryStore::get_triple(const std::string& id) const {
    std::shared_lock lock(mu_);
    require_open();
    auto it = triple_pos_.find(id);
    if (it == triple_pos_.end()) return std::nullopt;
    return triples_[it->second];
}

std::vector<Triple> MemoryStore::all_triples() const {
    std::shared_lock lock(mu_);
    require_open();
    return triples_;
}

std::vector<Summary> MemoryStore::all_summaries() const {
    std::shared_lock lock(mu_);
    require_open();
    std::vector<Summary> out;
    out.reserve(summaries_.size());
    for (const auto& [key, s] : summaries_) out.push_back(s);
    return out;
}

bool MemoryStore::has_conversation(const std::string& conversation_id) const {
    std::shared_lock lock(mu_);
    require_open();
    auto it = summaries_.lower_bound(SessionKey{conversation_id, ""});
    return it != summaries_.end() && it->first.conversation_id == conversation_id;
}

RetrievalResult MemoryStore::retrieve(std::string_view query, const QueryEmbedder& embed,
                                      const HybridParams& params,
                                      const std::optional<std::string>& conversation_id) const {
    const Embedding query_vector = embed(query);
    std::shared_lock lock(mu_);
    require_open();
    RetrievalResult result;
    result.entries = index_.search(query, [&](std::string_view) { return query_vector; }, params,
                                   conversation_id);
    std::set<SessionKey> seen;
    for (auto& e : result.entries) {
        e.triple = triples_[triple_pos_.at(e.triple_id)];
        const SessionKey key = e.triple.session_key();
        if (seen.insert(key).second) result.summaries.push_back(summaries_.at(key));
    }
    return result;
}

} // namespace memlayer
