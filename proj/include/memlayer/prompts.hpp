#pragma once

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace memlayer::prompts {

/// A versioned prompt template compiled into the library from resources/prompts/.
struct Resource {
    std::string_view name;
    std::string_view text;
};

std::span<const Resource> all();

/// Throws Error(NotFound) for an unknown resource name.
std::string_view get(std::string_view name);

std::string_view answer_template();             // placeholders {{memories}}, {{question}}
std::string_view judge_template();              // placeholders {question}, {gold_answer}, {generated_answer}
std::string_view judge_repair_template();
std::string_view extraction_template();         // {{conversation_id}}, {{session_id}}, {{timestamp}}, {{transcript}}
std::string_view extraction_repair_template();  // {{error}}
std::string_view summary_template();            // same placeholders as extraction

using Substitutions = std::vector<std::pair<std::string_view, std::string_view>>;

/// Replaces every placeholder occurrence in a single left-to-right pass; the
/// substituted values are never rescanned.
std::string substitute(std::string_view tmpl, const Substitutions& values);

} // namespace memlayer::prompts
