#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace memlayer {

using Embedding = std::vector<float>;

inline constexpr double kNormTolerance = 1e-6;
inline constexpr std::size_t kDefaultEmbeddingDimension = 128;

/// Identifies one session of one conversation; the link from a triple to its summary.
struct SessionKey {
    std::string conversation_id;
    std::string session_id;

    auto operator<=>(const SessionKey&) const = default;
    bool operator==(const SessionKey&) const = default;
};

/// Atomic (subject, predicate, object) fact with provenance.
/// Only construct through validate_triple() (or from a store that validated it).
struct Triple {
    std::string id;
    std::string subject;
    std::string predicate;
    std::string object;
    std::string conversation_id;
    std::string session_id;
    std::uint32_t source_message_index = 0;
    std::string timestamp;  // canonical ISO-8601 UTC
    std::optional<Embedding> embedding;

    SessionKey session_key() const { return {conversation_id, session_id}; }
    bool operator==(const Triple&) const = default;
};

/// Unvalidated triple fields as they arrive from extraction or disk.
struct RawTriple {
    std::string subject;
    std::string predicate;
    std::string object;
    std::string conversation_id;
    std::string session_id;
    std::int64_t source_message_index = 0;
    std::string timestamp;
    std::optional<Embedding> embedding;
};

struct Summary {
    std::string conversation_id;
    std::string session_id;
    std::string text;
    std::string timestamp;

    SessionKey key() const { return {conversation_id, session_id}; }
    bool operator==(const Summary&) const = default;
};

struct Turn {
    std::string speaker;
    std::string text;

    bool operator==(const Turn&) const = default;
};

struct SessionTranscript {
    std::string conversation_id;
    std::string session_id;
    std::string timestamp;
    std::vector<Turn> turns;

    SessionKey key() const { return {conversation_id, session_id}; }
    bool operator==(const SessionTranscript&) const = default;
};

/// One ranked triple with its per-channel evidence.
struct RetrievalEntry {
    std::string triple_id;
    double lexical_score = 0.0;
    double dense_score = 0.0;
    double fused_score = 0.0;
    std::optional<std::uint32_t> lexical_rank;
    std::optional<std::uint32_t> dense_rank;
    Triple triple;

    bool operator==(const RetrievalEntry&) const = default;
};

/// Entries are sorted by fused_score descending (triple_id ascending on ties);
/// summaries are the deduplicated link targets in order of first appearance.
struct RetrievalResult {
    std::vector<RetrievalEntry> entries;
    std::vector<Summary> summaries;

    bool operator==(const RetrievalResult&) const = default;
};

struct TokenStats {
    std::size_t context_tokens = 0;
    std::size_t question_tokens = 0;
    std::size_t budget = 1;

    bool operator==(const TokenStats&) const = default;
};

/// Content hash over (conversation, session, turn index, subject, predicate, object).
std::string triple_content_id(std::string_view conversation_id, std::string_view session_id,
                              std::uint32_t source_message_index, std::string_view subject,
                              std::string_view predicate, std::string_view object);

/// Trims the text fields, checks every invariant and assigns the content-hash id.
/// Throws Error(EmptyField | BadEmbeddingNorm | InvalidArgument).
Triple validate_triple(const RawTriple& raw);

/// Throws Error(EmptyField | InvalidArgument).
Summary validate_summary(Summary s);

/// L2 norm accumulated in double precision.
double l2_norm(const Embedding& v);

/// Returns v / ‖v‖; throws Error(EmptyInput) for a zero vector.
Embedding l2_normalize(const Embedding& v);

bool is_unit_norm(const Embedding& v, double tolerance = kNormTolerance);

std::string trim(std::string_view s);

/// Parses ISO-8601 dates and date-times ("2023-05-08", "2023-05-08T13:56",
/// "2023-05-08 13:56:00+02:00", ...) into canonical UTC "YYYY-MM-DDTHH:MM:SSZ".
/// Returns std::nullopt when the text is not a recognisable timestamp.
std::optional<std::string> normalize_timestamp(std::string_view text);

} // namespace memlayer
