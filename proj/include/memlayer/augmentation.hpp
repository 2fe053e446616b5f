#pragma once

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "memlayer/llm_gateway.hpp"
#include "memlayer/memory_store.hpp"
#include "memlayer/model.hpp"

namespace memlayer {

/// "[i] speaker: text" per turn, 0-based.
std::string render_transcript(const SessionTranscript& transcript);

std::vector<ChatMessage> extraction_messages(const SessionTranscript& transcript);
std::vector<ChatMessage> extraction_repair_messages(const SessionTranscript& transcript,
                                                    std::string_view bad_output,
                                                    std::string_view parse_error);
std::vector<ChatMessage> summary_messages(const SessionTranscript& transcript);

/// One element of the model's extraction output, before validation.
struct ExtractedFact {
    std::string subject;
    std::string predicate;
    std::string object;
    std::optional<std::int64_t> turn_index;  // absent for 3-element entries
};

struct ParsedExtraction {
    std::vector<ExtractedFact> facts;
    std::size_t malformed = 0;  // elements of the array that were not fact tuples
};

/// Parses a JSON array of [subject, predicate, object(, turn_index)] entries,
/// tolerating surrounding markdown code fences. Malformed elements are counted,
/// not fatal. Throws Error(ExtractionFormatError) when the reply as a whole is
/// not a JSON array.
ParsedExtraction parse_extraction_output(std::string_view output);

/// Turn whose tokens overlap most with the fact (earliest on ties, 0 if none).
std::uint32_t infer_turn_index(const SessionTranscript& transcript, const ExtractedFact& fact);

struct ExtractionResult {
    std::vector<Triple> triples;  // validated, deduplicated, without embeddings
    std::size_t dropped = 0;      // malformed or invalid facts
    std::size_t duplicates = 0;
    bool repaired = false;        // the repair retry was needed
};

/// Throws Error(EmptyTranscript | ExtractionFormatError) and gateway errors.
ExtractionResult extract_triples(const SessionTranscript& transcript, Gateway& gateway);

/// Throws Error(EmptyTranscript) and gateway errors.
Summary summarize_session(const SessionTranscript& transcript, Gateway& gateway);

struct AugmentOutcome {
    std::size_t new_triples = 0;
    bool summary_written = false;
    std::size_t extracted = 0;
    std::size_t dropped = 0;
};

/// Extracts, summarizes and embeds everything first, then commits the summary
/// and triples to the store in one step; any failure leaves the store untouched.
AugmentOutcome augment_session(const SessionTranscript& transcript, Gateway& gateway, MemoryStore& store);

enum class JobState { Pending, Running, Done, Failed };

std::string_view to_string(JobState state);

struct AugmentationJob {
    SessionTranscript transcript;
    JobState state = JobState::Pending;
    int attempts = 0;
    std::optional<std::string> error;
    std::optional<AugmentOutcome> outcome;
};

/// Background worker consuming a FIFO queue of augmentation jobs, one session
/// per job. Submitting a session that is already pending replaces the queued
/// transcript in place; one submitted while running is queued after it. A failed job goes back to pending until it has used
/// max_attempts attempts.
class AugmentationWorker {
public:
    static constexpr int kDefaultMaxAttempts = 3;

    AugmentationWorker(Gateway& gateway, MemoryStore& store, int max_attempts = kDefaultMaxAttempts);
    ~AugmentationWorker();

    AugmentationWorker(const AugmentationWorker&) = delete;
    AugmentationWorker& operator=(const AugmentationWorker&) = delete;

    void submit(SessionTranscript transcript);
    /// Blocks until the queue is empty and no job is running.
    void wait_idle();
    void stop();

    std::optional<AugmentationJob> status(const SessionKey& key) const;
    /// Finished jobs (done or finally failed) in completion order.
    std::vector<AugmentationJob> finished() const;

private:
    void run();

    Gateway& gateway_;
    MemoryStore& store_;
    int max_attempts_;

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::condition_variable idle_cv_;
    std::deque<SessionKey> queue_;
    std::map<SessionKey, AugmentationJob> jobs_;
    std::map<SessionKey, SessionTranscript> resubmitted_;  // arrived while running
    std::vector<AugmentationJob> finished_;
    bool running_job_ = false;
    bool stopping_ = false;
    std::thread thread_;
};

} // namespace memlayer
