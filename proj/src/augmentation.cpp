#include "memlayer/augmentation.hpp"

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "memlayer/error.hpp"
#include "memlayer/prompts.hpp"
#include "memlayer/retrieval.hpp"

namespace memlayer {

using json = nlohmann::json;

namespace {

void require_turns(const SessionTranscript& transcript) {
    if (transcript.turns.empty()) {
        throw Error(ErrorCode::EmptyTranscript, "session (" + transcript.conversation_id + ", " +
                                                    transcript.session_id + ") has no turns");
    }
}

std::string fill_session_template(std::string_view tmpl, const SessionTranscript& transcript) {
    const std::string rendered = render_transcript(transcript);
    return prompts::substitute(tmpl, {{"{{conversation_id}}", transcript.conversation_id},
                                      {"{{session_id}}", transcript.session_id},
                                      {"{{timestamp}}", transcript.timestamp},
                                      {"{{transcript}}", rendered}});
}

std::string_view strip_code_fence(std::string_view s) {
    std::string_view t = s;
    while (!t.empty() && std::isspace(static_cast<unsigned char>(t.front()))) t.remove_prefix(1);
    while (!t.empty() && std::isspace(static_cast<unsigned char>(t.back()))) t.remove_suffix(1);
    if (t.substr(0, 3) == "```" && t.size() >= 6 && t.substr(t.size() - 3) == "```") {
        t.remove_prefix(3);
        t.remove_suffix(3);
        const auto nl = t.find('\n');
        if (nl != std::string_view::npos) {
            const std::string_view lang = t.substr(0, nl);
            if (std::all_of(lang.begin(), lang.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)); })) {
                t.remove_prefix(nl + 1);
            }
        }
    }
    return t;
}

} // namespace

std::string render_transcript(const SessionTranscript& transcript) {
    std::string out;
    for (std::size_t i = 0; i < transcript.turns.size(); ++i) {
        const Turn& turn = transcript.turns[i];
        out += "[" + std::to_string(i) + "] " + turn.speaker + ": " + turn.text + "\n";
    }
    return out;
}

std::vector<ChatMessage> extraction_messages(const SessionTranscript& transcript) {
    return {{Role::User, fill_session_template(prompts::extraction_template(), transcript)}};
}

std::vector<ChatMessage> extraction_repair_messages(const SessionTranscript& transcript,
                                                    std::string_view bad_output,
                                                    std::string_view parse_error) {
    auto messages = extraction_messages(transcript);
    messages.push_back({Role::Assistant, std::string(bad_output)});
    messages.push_back({Role::User, prompts::substitute(prompts::extraction_repair_template(),
                                                        {{"{{error}}", parse_error}})});
    return messages;
}

std::vector<ChatMessage> summary_messages(const SessionTranscript& transcript) {
    return {{Role::User, fill_session_template(prompts::summary_template(), transcript)}};
}

ParsedExtraction parse_extraction_output(std::string_view output) {
    json parsed = json::parse(strip_code_fence(output), nullptr, false);
    if (parsed.is_discarded()) throw Error(ErrorCode::ExtractionFormatError, "reply is not valid JSON");
    if (!parsed.is_array()) throw Error(ErrorCode::ExtractionFormatError, "reply is not a JSON array");
    ParsedExtraction result;
    for (const auto& item : parsed) {
        if (!item.is_array() || item.size() < 3 || item.size() > 4 || !item[0].is_string() ||
            !item[1].is_string() || !item[2].is_string() || (item.size() == 4 && !item[3].is_number_integer())) {
            ++result.malformed;
            continue;
        }
        ExtractedFact fact{item[0].get<std::string>(), item[1].get<std::string>(), item[2].get<std::string>(), {}};
        if (item.size() == 4) fact.turn_index = item[3].get<std::int64_t>();
        result.facts.push_back(std::move(fact));
    }
    return result;
}

std::uint32_t infer_turn_index(const SessionTranscript& transcript, const ExtractedFact& fact) {
    const auto fact_tokens = tokenize(fact.subject + " " + fact.predicate + " " + fact.object);
    const std::set<std::string> wanted(fact_tokens.begin(), fact_tokens.end());
    std::size_t best = 0;
    std::size_t best_overlap = 0;
    for (std::size_t i = 0; i < transcript.turns.size(); ++i) {
        const auto turn_tokens = tokenize(transcript.turns[i].speaker + " " + transcript.turns[i].text);
        const std::set<std::string> have(turn_tokens.begin(), turn_tokens.end());
        std::size_t overlap = 0;
        for (const auto& t : wanted) overlap += have.count(t);
        if (overlap > best_overlap) {
            best_overlap = overlap;
            best = i;
        }
    }
    return static_cast<std::uint32_t>(best);
}

ExtractionResult extract_triples(const SessionTranscript& transcript, Gateway& gateway) {
    require_turns(transcript);
    ExtractionResult result;
    const std::string first = gateway.chat(extraction_messages(transcript));
    ParsedExtraction parsed;
    try {
        parsed = parse_extraction_output(first);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::ExtractionFormatError) throw;
        result.repaired = true;
        const std::string second = gateway.chat(extraction_repair_messages(transcript, first, e.what()));
        parsed = parse_extraction_output(second);  // a second failure propagates
    }
    result.dropped = parsed.malformed;

    std::set<std::string> seen;
    for (const auto& fact : parsed.facts) {
        const std::int64_t index = fact.turn_index ? *fact.turn_index : infer_turn_index(transcript, fact);
        if (index < 0 || index >= static_cast<std::int64_t>(transcript.turns.size())) {
            ++result.dropped;
            continue;
        }
        RawTriple raw{fact.subject, fact.predicate, fact.object, transcript.conversation_id,
                      transcript.session_id, index, transcript.timestamp, std::nullopt};
        try {
            Triple t = validate_triple(raw);
            if (!seen.insert(t.id).second) {
                ++result.duplicates;
                continue;
            }
            result.triples.push_back(std::move(t));
        } catch (const Error&) {
            ++result.dropped;
        }
    }
    return result;
}

Summary summarize_session(const SessionTranscript& transcript, Gateway& gateway) {
    require_turns(transcript);
    Summary s{transcript.conversation_id, transcript.session_id,
              trim(gateway.chat(summary_messages(transcript))), transcript.timestamp};
    return validate_summary(std::move(s));
}

AugmentOutcome augment_session(const SessionTranscript& transcript, Gateway& gateway, MemoryStore& store) {
    ExtractionResult extraction = extract_triples(transcript, gateway);
    const Summary summary = summarize_session(transcript, gateway);
    for (auto& t : extraction.triples) t.embedding = gateway.embed_text(triple_doc_text(t));

    const CommitResult commit = store.commit_session(summary, extraction.triples);
    AugmentOutcome outcome;
    outcome.new_triples = commit.new_triples;
    outcome.summary_written = commit.summary_written;
    outcome.extracted = extraction.triples.size();
    outcome.dropped = extraction.dropped;
    return outcome;
}

// ---------------------------------------------------------------------------
// Background worker

std::string_view to_string(JobState state) {
    switch (state) {
        case JobState::Pending: return "pending";
        case JobState::Running: return "running";
        case JobState::Done:    return "done";
        case JobState::Failed:  return "failed";
    }
    return "pending";
}

AugmentationWorker::AugmentationWorker(Gateway& gateway, MemoryStore& store, int max_attempts)
    : gateway_(gateway), store_(store), max_attempts_(max_attempts) {
    if (max_attempts_ < 1) throw Error(ErrorCode::InvalidArgument, "max_attempts must be >= 1");
    thread_ = std::thread([this] { run(); });
}

AugmentationWorker::~AugmentationWorker() { stop(); }

void AugmentationWorker::submit(SessionTranscript transcript) {
    std::lock_guard lock(mu_);
    const SessionKey key = transcript.key();
    auto it = jobs_.find(key);
    if (it != jobs_.end() && it->second.state == JobState::Pending) {
        it->second.transcript = std::move(transcript);
        return;
    }
    if (it != jobs_.end() && it->second.state == JobState::Running) {
        resubmitted_.insert_or_assign(key, std::move(transcript));
        return;
    }
    AugmentationJob job;
    job.transcript = std::move(transcript);
    jobs_.insert_or_assign(key, std::move(job));
    queue_.push_back(key);
    cv_.notify_one();
}

void AugmentationWorker::wait_idle() {
    std::unique_lock lock(mu_);
    idle_cv_.wait(lock, [this] { return (queue_.empty() && !running_job_) || stopping_; });
}

void AugmentationWorker::stop() {
    {
        std::lock_guard lock(mu_);
        if (stopping_ && !thread_.joinable()) return;
        stopping_ = true;
    }
    cv_.notify_all();
    idle_cv_.notify_all();
    if (thread_.joinable()) thread_.join();
}

std::optional<AugmentationJob> AugmentationWorker::status(const SessionKey& key) const {
    std::lock_guard lock(mu_);
    auto it = jobs_.find(key);
    if (it == jobs_.end()) return std::nullopt;
    return it->second;
}

std::vector<AugmentationJob> AugmentationWorker::finished() const {
    std::lock_guard lock(mu_);
    return finished_;
}

void AugmentationWorker::run() {
    std::unique_lock lock(mu_);
    for (;;) {
        cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
        if (stopping_) return;
        const SessionKey key = queue_.front();
        queue_.pop_front();
        AugmentationJob& job = jobs_.at(key);
        job.state = JobState::Running;
        ++job.attempts;
        running_job_ = true;
        const SessionTranscript transcript = job.transcript;
        lock.unlock();

        std::optional<AugmentOutcome> outcome;
        std::optional<std::string> error;
        try {
            outcome = augment_session(transcript, gateway_, store_);
        } catch (const std::exception& e) {
            error = e.what();
        }

        lock.lock();
        running_job_ = false;
        AugmentationJob& current = jobs_.at(key);
        if (outcome) {
            current.state = JobState::Done;
            current.outcome = outcome;
            current.error.reset();
            finished_.push_back(current);
        } else {
            current.state = JobState::Failed;
            current.error = error;
            if (current.attempts < max_attempts_) {
                current.state = JobState::Pending;
                queue_.push_back(key);
            } else {
                finished_.push_back(current);
            }
        }
        if (auto again = resubmitted_.find(key); again != resubmitted_.end()) {
            AugmentationJob job;
            job.transcript = std::move(again->second);
            resubmitted_.erase(again);
            if (current.state == JobState::Pending) {
                current.transcript = std::move(job.transcript);
            } else {
                current = std::move(job);
                queue_.push_back(key);
            }
        }
        if (queue_.empty()) idle_cv_.notify_all();
    }
}

} // namespace memlayer
