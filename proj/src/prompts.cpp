#include "memlayer/prompts.hpp"

#include <cstddef>

#include "memlayer/error.hpp"

namespace memlayer::prompts {

namespace detail {
extern const Resource kResources[];
extern const std::size_t kResourceCount;
} // namespace detail

std::span<const Resource> all() {
    return {detail::kResources, detail::kResourceCount};
}

std::string_view get(std::string_view name) {
    for (const auto& r : all()) {
        if (r.name == name) return r.text;
    }
    throw Error(ErrorCode::NotFound, "no prompt resource named " + std::string(name));
}

std::string_view answer_template() { return get("answer_prompt.v1.txt"); }
std::string_view judge_template() { return get("judge_prompt.v1.txt"); }
std::string_view judge_repair_template() { return get("judge_repair_prompt.v1.txt"); }
std::string_view extraction_template() { return get("extraction_prompt.v1.txt"); }
std::string_view extraction_repair_template() { return get("extraction_repair_prompt.v1.txt"); }
std::string_view summary_template() { return get("summary_prompt.v1.txt"); }

std::string substitute(std::string_view tmpl, const Substitutions& values) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size()) {
        const std::pair<std::string_view, std::string_view>* best = nullptr;
        for (const auto& kv : values) {
            if (!kv.first.empty() && tmpl.substr(i, kv.first.size()) == kv.first &&
                (best == nullptr || kv.first.size() > best->first.size())) {
                best = &kv;
            }
        }
        if (best != nullptr) {
            out.append(best->second);
            i += best->first.size();
        } else {
            out.push_back(tmpl[i++]);
        }
    }
    return out;
}

} // namespace memlayer::prompts
