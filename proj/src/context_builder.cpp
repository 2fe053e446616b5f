#include "memlayer/context_builder.hpp"

#include "memlayer/error.hpp"
#include "memlayer/prompts.hpp"

namespace memlayer {

std::size_t ApproxTokenCounter::count(std::string_view text) const {
    std::size_t chars = 0;
    for (unsigned char c : text) {
        if ((c & 0xC0) != 0x80) ++chars;  // skip UTF-8 continuation bytes
    }
    return (chars + 3) / 4;
}

const TokenCounter& default_token_counter() {
    static const ApproxTokenCounter counter;
    return counter;
}

std::size_t count_tokens(std::string_view text) { return default_token_counter().count(text); }

std::string render_memory_line(const Triple& t) {
    return "[" + t.timestamp + "] " + t.subject + " " + t.predicate + " " + t.object + "\n";
}

std::string render_summary_line(const Summary& s) {
    return "[" + s.timestamp + "] " + s.text + "\n";
}

ContextBlock render_memory_block(const RetrievalResult& result, std::size_t budget,
                                 const TokenCounter& counter) {
    if (budget < kMinTokenBudget) {
        throw Error(ErrorCode::BudgetTooSmall,
                    "budget " + std::to_string(budget) + " < " + std::to_string(kMinTokenBudget));
    }
    ContextBlock block;
    block.counter_name = counter.name();
    std::string memories(kMemoriesHeader);
    std::string summaries(kSummariesHeader);
    auto fits = [&](const std::string& candidate_mem, const std::string& candidate_sum) {
        return counter.count(candidate_mem + candidate_sum) <= budget;
    };

    bool open = fits(memories, summaries);
    for (const auto& e : result.entries) {
        if (!open) break;
        std::string line = render_memory_line(e.triple);
        if (!fits(memories + line, summaries)) {
            open = false;
            break;
        }
        memories += line;
        block.included_triples.push_back(e.triple_id);
    }
    for (const auto& s : result.summaries) {
        if (!open) break;
        std::string line = render_summary_line(s);
        if (!fits(memories, summaries + line)) {
            open = false;
            break;
        }
        summaries += line;
        block.included_summaries.push_back(s.key());
    }

    block.rendered_text = memories + summaries;
    block.stats.context_tokens = counter.count(block.rendered_text);
    block.stats.budget = budget;
    return block;
}

std::string render_answer_prompt(const ContextBlock& block, std::string_view question) {
    if (trim(question).empty()) throw Error(ErrorCode::EmptyQuestion, "question is empty");
    return prompts::substitute(prompts::answer_template(),
                               {{"{{memories}}", block.rendered_text}, {"{{question}}", question}});
}

} // namespace memlayer
