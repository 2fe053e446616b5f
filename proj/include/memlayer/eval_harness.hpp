#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "memlayer/context_builder.hpp"
#include "memlayer/llm_gateway.hpp"
#include "memlayer/memory_store.hpp"
#include "memlayer/model.hpp"
#include "memlayer/retrieval.hpp"

namespace memlayer {

// Question categories: 1=Multi-Hop, 2=Temporal, 3=Open-Domain, 4=Single-Hop, 5=Adversarial.
inline constexpr int kMinCategory = 1;
inline constexpr int kMaxCategory = 5;
inline constexpr int kAdversarialCategory = 5;

std::string_view category_name(int category);

struct QAItem {
    std::string question;
    std::string gold_answer;
    int category = 1;
    std::string conversation_id;

    bool operator==(const QAItem&) const = default;
};

struct Conversation {
    std::string conversation_id;
    std::vector<SessionTranscript> sessions;
};

struct Dataset {
    std::vector<Conversation> conversations;
    std::vector<QAItem> qa;

    std::size_t session_count() const;
};

/// Parses the normalized dataset schema:
///   {"conversations": [{"conversation_id", "sessions": [{"session_id", "timestamp",
///     "turns": [{"speaker", "text"}]}]}],
///    "qa": [{"conversation_id", "question", "answer", "category"}]}
/// "qa" may be omitted. Throws Error(SchemaError) naming the offending path.
Dataset parse_locomo(std::string_view text);
Dataset load_locomo(const std::filesystem::path& file);

/// Adapter for the public LoCoMo release (a JSON array of samples with
/// "conversation": {"session_N": [...], "session_N_date_time": "..."} and "qa").
Dataset parse_public_locomo(std::string_view text);

/// Picks the public adapter when the document is a top-level array.
Dataset load_dataset(const std::filesystem::path& file);

/// Writes the normalized schema (deterministic key order).
std::string dataset_to_json(const Dataset& dataset);

/// "1:56 pm on 8 May, 2023" -> "2023-05-08T13:56:00Z".
std::optional<std::string> parse_locomo_datetime(std::string_view text);

std::map<int, std::size_t> category_counts(const std::vector<QAItem>& qa);

/// Drops the adversarial category, preserving order.
std::vector<QAItem> filter_eval_set(const std::vector<QAItem>& qa);

enum class Label { Correct, Wrong };

std::string_view to_string(Label label);

struct EvalRecord {
    std::size_t round = 0;
    std::size_t index = 0;  // position in the filtered eval set
    QAItem item;
    std::string generated_answer;
    Label label = Label::Wrong;
    std::string judge_explanation;
    std::size_t context_tokens = 0;
    bool flagged = false;       // answer or judge failure; label forced to WRONG
    std::string error;          // empty unless flagged

    bool operator==(const EvalRecord&) const = default;
};

struct AnswerResult {
    std::string answer;
    std::size_t context_tokens = 0;
    std::optional<std::string> error;
    ContextBlock block;
};

/// retrieve -> render block -> render prompt -> chat. Never throws for gateway
/// failures; they come back in `error` with an empty answer.
AnswerResult answer_question(const QAItem& item, const MemoryStore& store, const HybridParams& params,
                             std::size_t token_budget, Gateway& gateway);

std::string render_judge_prompt(const QAItem& item, std::string_view generated_answer);

struct JudgeResult {
    Label label = Label::Wrong;
    std::string explanation;
    bool flagged = false;
    std::string error;
};

/// Finds a JSON object with "label" in the reply, if any.
std::optional<Label> parse_judge_label(std::string_view reply, std::string* explanation = nullptr);

/// One repair retry on an unparseable reply; after that the item is flagged
/// WRONG with a JudgeFormatError annotation. Gateway errors are flagged too.
JudgeResult judge_answer(const QAItem& item, std::string_view generated_answer, Gateway& gateway);

/// sum(acc_c * n_c) / sum(n_c). Throws Error(KeyMismatch) when the key sets
/// differ, Error(InvalidArgument) for a non-positive count, Error(EmptyInput)
/// for no categories.
double weighted_overall(const std::map<int, double>& accuracy_percent,
                        const std::map<int, std::size_t>& counts);

struct CostReport {
    double mean_added_tokens = 0.0;
    double context_cost_usd = 0.0;
    double footprint_percent = 0.0;
    double price_per_million_usd = 0.0;

    bool operator==(const CostReport&) const = default;
};

inline constexpr double kDefaultPricePerMillion = 0.8;
inline constexpr double kFullContextMeanTokens = 26031.0;

/// Throws Error(EmptyInput) for no tokens, Error(InvalidArgument) for a
/// non-positive price or baseline.
CostReport cost_report(const std::vector<std::size_t>& per_query_tokens, double price_per_million_usd,
                       double full_context_mean_tokens);

struct EvalConfig {
    HybridParams params;
    std::size_t token_budget = kDefaultTokenBudget;
    std::size_t parallelism = 4;
    std::size_t n_rounds = 1;
    double price_per_million_usd = kDefaultPricePerMillion;
    double full_context_mean_tokens = kFullContextMeanTokens;
    std::optional<std::filesystem::path> checkpoint;  // run-state JSONL

    void validate() const;
};

struct CategoryStats {
    std::size_t questions = 0;           // per round
    std::vector<std::size_t> correct;    // per round
    std::vector<double> accuracy;        // percent, per round
    double mean = 0.0;
    double stddev = 0.0;                 // sample standard deviation across rounds
};

struct AugmentationSummary {
    std::size_t sessions_total = 0;
    std::size_t sessions_augmented = 0;
    std::size_t sessions_skipped = 0;   // already in the store
    std::size_t sessions_failed = 0;
    std::size_t triples_added = 0;
};

struct BenchmarkReport {
    std::size_t n_rounds = 0;
    std::size_t n_items = 0;  // filtered items per round
    std::map<int, CategoryStats> categories;
    std::vector<double> overall;  // percent, per round
    double overall_mean = 0.0;
    double overall_stddev = 0.0;
    CostReport cost;
    double full_context_mean_tokens = kFullContextMeanTokens;
    std::string token_counter;
    std::size_t flagged = 0;
    std::size_t store_triples = 0;
    std::size_t store_summaries = 0;
    AugmentationSummary augmentation;  // this invocation only; not part of report.json
    std::vector<EvalRecord> records;  // sorted by (round, index)
};

/// Phase 1 augments every session not yet in the store; phase 2 answers and
/// judges the filtered items n_rounds times with bounded parallelism. With a
/// checkpoint, already judged items are read back instead of recomputed.
BenchmarkReport run_benchmark(const Dataset& dataset, MemoryStore& store, Gateway& answer_gateway,
                              Gateway& judge_gateway, const EvalConfig& config);

/// Aggregation only; also used to recount from records.
BenchmarkReport aggregate_records(std::vector<EvalRecord> records, std::size_t n_rounds, std::size_t n_items,
                                  const EvalConfig& config);

std::string record_to_json(const EvalRecord& record);
EvalRecord record_from_json(std::string_view line);
std::string report_to_json(const BenchmarkReport& report);

/// Writes report.json and records.jsonl into `dir`.
void write_report(const BenchmarkReport& report, const std::filesystem::path& dir);

} // namespace memlayer
