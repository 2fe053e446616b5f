#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "memlayer/model.hpp"

namespace memlayer {

inline constexpr std::size_t kDefaultTokenBudget = 2048;
inline constexpr std::size_t kMinTokenBudget = 32;

/// Pluggable token counter; reports name the counter they used.
class TokenCounter {
public:
    virtual ~TokenCounter() = default;
    virtual std::string name() const = 0;
    virtual std::size_t count(std::string_view text) const = 0;
};

/// ceil(characters / 4), counting UTF-8 code points.
class ApproxTokenCounter final : public TokenCounter {
public:
    std::string name() const override { return "approx-chars/4"; }
    std::size_t count(std::string_view text) const override;
};

const TokenCounter& default_token_counter();

/// count_tokens with the default approximate counter.
std::size_t count_tokens(std::string_view text);

struct ContextBlock {
    std::string rendered_text;
    std::vector<std::string> included_triples;
    std::vector<SessionKey> included_summaries;
    TokenStats stats;
    std::string counter_name;
};

inline constexpr std::string_view kMemoriesHeader = "MEMORIES:\n";
inline constexpr std::string_view kSummariesHeader = "SUMMARIES:\n";

/// "[timestamp] subject predicate object"
std::string render_memory_line(const Triple& t);
/// "[timestamp] text"
std::string render_summary_line(const Summary& s);

/// Admits triples then summaries, in result order, while the whole block stays
/// within `budget` tokens; stops at the first item that does not fit, so the
/// included items are always a prefix. Throws Error(BudgetTooSmall) below 32.
ContextBlock render_memory_block(const RetrievalResult& result, std::size_t budget,
                                 const TokenCounter& counter = default_token_counter());

/// Answer prompt with {{memories}} and {{question}} substituted.
/// Throws Error(EmptyQuestion).
std::string render_answer_prompt(const ContextBlock& block, std::string_view question);

} // namespace memlayer
