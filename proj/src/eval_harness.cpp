#include "memlayer/eval_harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "memlayer/augmentation.hpp"
#include "memlayer/error.hpp"
#include "memlayer/prompts.hpp"

namespace memlayer {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string_view category_name(int category) {
    switch (category) {
        case 1: return "multi_hop";
        case 2: return "temporal";
        case 3: return "open_domain";
        case 4: return "single_hop";
        case 5: return "adversarial";
        default: return "unknown";
    }
}

std::string_view to_string(Label label) { return label == Label::Correct ? "CORRECT" : "WRONG"; }

// ---------------------------------------------------------------------------
// Answering and judging

AnswerResult answer_question(const QAItem& item, const MemoryStore& store, const HybridParams& params,
                             std::size_t token_budget, Gateway& gateway) {
    AnswerResult out;
    try {
        const QueryEmbedder embed = [&gateway](std::string_view text) { return gateway.embed_text(text); };
        const RetrievalResult result = store.retrieve(item.question, embed, params, item.conversation_id);
        out.block = render_memory_block(result, token_budget);
        out.context_tokens = out.block.stats.context_tokens;
        out.answer = trim(gateway.chat({{Role::User, render_answer_prompt(out.block, item.question)}}));
    } catch (const Error& e) {
        out.answer.clear();
        out.error = e.what();
    }
    return out;
}

std::string render_judge_prompt(const QAItem& item, std::string_view generated_answer) {
    return prompts::substitute(prompts::judge_template(), {{"{question}", item.question},
                                                           {"{gold_answer}", item.gold_answer},
                                                           {"{generated_answer}", generated_answer}});
}

std::optional<Label> parse_judge_label(std::string_view reply, std::string* explanation) {
    for (std::size_t open = reply.find('{'); open != std::string_view::npos; open = reply.find('{', open + 1)) {
        for (std::size_t close = reply.rfind('}'); close != std::string_view::npos && close > open;
             close = close == 0 ? std::string_view::npos : reply.rfind('}', close - 1)) {
            json obj = json::parse(reply.substr(open, close - open + 1), nullptr, false);
            if (obj.is_discarded() || !obj.is_object()) continue;
            auto it = obj.find("label");
            if (it == obj.end() || !it->is_string()) break;
            std::string value = trim(it->get<std::string>());
            std::transform(value.begin(), value.end(), value.begin(),
                           [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
            if (value != "CORRECT" && value != "WRONG") break;
            if (explanation != nullptr) {
                std::string rest = std::string(reply.substr(0, open)) + " " + std::string(reply.substr(close + 1));
                *explanation = trim(rest);
                if (explanation->empty()) *explanation = trim(obj.value("explanation", obj.value("reasoning", "")));
            }
            return value == "CORRECT" ? Label::Correct : Label::Wrong;
        }
    }
    return std::nullopt;
}

JudgeResult judge_answer(const QAItem& item, std::string_view generated_answer, Gateway& gateway) {
    JudgeResult out;
    std::vector<ChatMessage> messages{{Role::User, render_judge_prompt(item, generated_answer)}};
    try {
        const std::string first = gateway.chat(messages);
        if (auto label = parse_judge_label(first, &out.explanation)) {
            out.label = *label;
            return out;
        }
        messages.push_back({Role::Assistant, first});
        messages.push_back({Role::User, std::string(prompts::judge_repair_template())});
        const std::string second = gateway.chat(messages);
        if (auto label = parse_judge_label(second, &out.explanation)) {
            out.label = *label;
            return out;
        }
        out.flagged = true;
        out.error = Error(ErrorCode::JudgeFormatError, "judge reply has no CORRECT/WRONG label after one repair").what();
        out.explanation = trim(second);
    } catch (const Error& e) {
        out.flagged = true;
        out.error = e.what();
    }
    out.label = Label::Wrong;
    return out;
}

// ---------------------------------------------------------------------------
// Metrics

double weighted_overall(const std::map<int, double>& accuracy_percent, const std::map<int, std::size_t>& counts) {
    if (accuracy_percent.empty() && counts.empty()) throw Error(ErrorCode::EmptyInput, "no categories");
    if (accuracy_percent.size() != counts.size() ||
        !std::equal(accuracy_percent.begin(), accuracy_percent.end(), counts.begin(),
                    [](const auto& a, const auto& b) { return a.first == b.first; })) {
        throw Error(ErrorCode::KeyMismatch, "accuracy and count maps have different categories");
    }
    double weighted = 0.0;
    double total = 0.0;
    for (const auto& [category, acc] : accuracy_percent) {
        const std::size_t n = counts.at(category);
        if (n == 0) throw Error(ErrorCode::InvalidArgument, "count for category " + std::to_string(category) + " is 0");
        weighted += acc * static_cast<double>(n);
        total += static_cast<double>(n);
    }
    return weighted / total;
}

CostReport cost_report(const std::vector<std::size_t>& per_query_tokens, double price_per_million_usd,
                       double full_context_mean_tokens) {
    if (per_query_tokens.empty()) throw Error(ErrorCode::EmptyInput, "no per-query token counts");
    if (!(price_per_million_usd > 0.0)) throw Error(ErrorCode::InvalidArgument, "price must be positive");
    if (!(full_context_mean_tokens > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "full-context token mean must be positive");
    }
    const double sum = std::accumulate(per_query_tokens.begin(), per_query_tokens.end(), 0.0,
                                       [](double acc, std::size_t t) { return acc + static_cast<double>(t); });
    CostReport r;
    r.mean_added_tokens = sum / static_cast<double>(per_query_tokens.size());
    r.context_cost_usd = r.mean_added_tokens * price_per_million_usd / 1e6;
    r.footprint_percent = 100.0 * r.mean_added_tokens / full_context_mean_tokens;
    r.price_per_million_usd = price_per_million_usd;
    return r;
}

namespace {

std::pair<double, double> mean_and_stddev(const std::vector<double>& xs) {
    if (xs.empty()) return {0.0, 0.0};
    if (std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs.front(); })) return {xs.front(), 0.0};
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

} // namespace

void EvalConfig::validate() const {
    params.validate();
    if (token_budget < kMinTokenBudget) {
        throw Error(ErrorCode::BudgetTooSmall, "token budget must be >= " + std::to_string(kMinTokenBudget));
    }
    if (parallelism == 0) throw Error(ErrorCode::InvalidArgument, "parallelism must be >= 1");
    if (n_rounds == 0) throw Error(ErrorCode::InvalidArgument, "n_rounds must be >= 1");
    if (!(price_per_million_usd > 0.0)) throw Error(ErrorCode::InvalidArgument, "price must be positive");
    if (!(full_context_mean_tokens > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "full-context token mean must be positive");
    }
}

BenchmarkReport aggregate_records(std::vector<EvalRecord> records, std::size_t n_rounds, std::size_t n_items,
                                  const EvalConfig& config) {
    std::sort(records.begin(), records.end(),
              [](const EvalRecord& a, const EvalRecord& b) { return std::tie(a.round, a.index) < std::tie(b.round, b.index); });
    BenchmarkReport report;
    report.n_rounds = n_rounds;
    report.n_items = n_items;
    report.full_context_mean_tokens = config.full_context_mean_tokens;
    report.token_counter = default_token_counter().name();

    std::set<int> categories;
    for (const auto& r : records) categories.insert(r.item.category);
    for (int c : categories) {
        CategoryStats& stats = report.categories[c];
        stats.correct.assign(n_rounds, 0);
    }
    std::vector<std::map<int, std::size_t>> per_round_counts(n_rounds);
    for (const auto& r : records) {
        if (r.round >= n_rounds) throw Error(ErrorCode::InvalidArgument, "record round out of range");
        ++per_round_counts[r.round][r.item.category];
        if (r.label == Label::Correct) ++report.categories[r.item.category].correct[r.round];
        if (r.flagged) ++report.flagged;
    }
    for (auto& [c, stats] : report.categories) {
        stats.questions = per_round_counts.empty() ? 0 : per_round_counts[0][c];
        for (std::size_t round = 0; round < n_rounds; ++round) {
            const std::size_t n = per_round_counts[round][c];
            stats.accuracy.push_back(n == 0 ? 0.0 : 100.0 * static_cast<double>(stats.correct[round]) /
                                                        static_cast<double>(n));
        }
        std::tie(stats.mean, stats.stddev) = mean_and_stddev(stats.accuracy);
    }
    for (std::size_t round = 0; round < n_rounds && !categories.empty(); ++round) {
        std::map<int, double> acc;
        std::map<int, std::size_t> counts;
        for (const auto& [c, n] : per_round_counts[round]) {
            if (n == 0) continue;
            counts[c] = n;
            acc[c] = report.categories[c].accuracy[round];
        }
        report.overall.push_back(weighted_overall(acc, counts));
    }
    std::tie(report.overall_mean, report.overall_stddev) = mean_and_stddev(report.overall);

    if (!records.empty()) {
        std::vector<std::size_t> tokens;
        tokens.reserve(records.size());
        for (const auto& r : records) tokens.push_back(r.context_tokens);
        report.cost = cost_report(tokens, config.price_per_million_usd, config.full_context_mean_tokens);
    } else {
        report.cost.price_per_million_usd = config.price_per_million_usd;
    }
    report.records = std::move(records);
    return report;
}

// ---------------------------------------------------------------------------
// Serialization

std::string record_to_json(const EvalRecord& r) {
    ordered_json j;
    j["round"] = r.round;
    j["index"] = r.index;
    j["conversation_id"] = r.item.conversation_id;
    j["category"] = r.item.category;
    j["question"] = r.item.question;
    j["gold_answer"] = r.item.gold_answer;
    j["generated_answer"] = r.generated_answer;
    j["label"] = to_string(r.label);
    j["judge_explanation"] = r.judge_explanation;
    j["context_tokens"] = r.context_tokens;
    j["flagged"] = r.flagged;
    j["error"] = r.error;
    return j.dump();
}

EvalRecord record_from_json(std::string_view line) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::SchemaError, "record is not a JSON object");
    try {
        EvalRecord r;
        r.round = j.at("round").get<std::size_t>();
        r.index = j.at("index").get<std::size_t>();
        r.item.conversation_id = j.at("conversation_id").get<std::string>();
        r.item.category = j.at("category").get<int>();
        r.item.question = j.at("question").get<std::string>();
        r.item.gold_answer = j.at("gold_answer").get<std::string>();
        r.generated_answer = j.at("generated_answer").get<std::string>();
        const auto label = j.at("label").get<std::string>();
        if (label != "CORRECT" && label != "WRONG") throw Error(ErrorCode::SchemaError, "bad label " + label);
        r.label = label == "CORRECT" ? Label::Correct : Label::Wrong;
        r.judge_explanation = j.at("judge_explanation").get<std::string>();
        r.context_tokens = j.at("context_tokens").get<std::size_t>();
        r.flagged = j.at("flagged").get<bool>();
        r.error = j.at("error").get<std::string>();
        return r;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaError, std::string("bad record: ") + e.what());
    }
}

std::string report_to_json(const BenchmarkReport& report) {
    ordered_json j;
    j["n_rounds"] = report.n_rounds;
    j["n_items"] = report.n_items;
    j["overall"] = {{"mean", report.overall_mean}, {"stddev", report.overall_stddev}, {"per_round", report.overall}};
    ordered_json cats = ordered_json::object();
    for (const auto& [c, s] : report.categories) {
        ordered_json cj;
        cj["name"] = category_name(c);
        cj["questions"] = s.questions;
        cj["correct"] = s.correct;
        cj["accuracy"] = s.accuracy;
        cj["mean"] = s.mean;
        cj["stddev"] = s.stddev;
        cats[std::to_string(c)] = std::move(cj);
    }
    j["categories"] = std::move(cats);
    ordered_json cost;
    cost["mean_added_tokens"] = report.cost.mean_added_tokens;
    cost["context_cost_usd"] = report.cost.context_cost_usd;
    cost["footprint_percent"] = report.cost.footprint_percent;
    cost["price_per_million_usd"] = report.cost.price_per_million_usd;
    cost["full_context_mean_tokens"] = report.full_context_mean_tokens;
    cost["token_counter"] = report.token_counter;
    j["cost"] = std::move(cost);
    j["flagged"] = report.flagged;
    j["store"] = {{"triples", report.store_triples}, {"summaries", report.store_summaries}};
    return j.dump(2) + "\n";
}

void write_report(const BenchmarkReport& report, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
    {
        std::ofstream out(dir / "report.json", std::ios::binary | std::ios::trunc);
        out << report_to_json(report);
        if (!out) throw Error(ErrorCode::IoError, "cannot write report.json in " + dir.string());
    }
    std::ofstream out(dir / "records.jsonl", std::ios::binary | std::ios::trunc);
    for (const auto& r : report.records) out << record_to_json(r) << '\n';
    if (!out) throw Error(ErrorCode::IoError, "cannot write records.jsonl in " + dir.string());
}

// ---------------------------------------------------------------------------
// Benchmark runner

namespace {

// Drops a torn last line so later appends start on a fresh line.
std::vector<EvalRecord> load_checkpoint(const std::filesystem::path& path) {
    std::vector<EvalRecord> out;
    std::ifstream in(path, std::ios::binary);
    if (!in) return out;
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    const auto last_nl = content.rfind('\n');
    const std::size_t keep = last_nl == std::string::npos ? 0 : last_nl + 1;
    if (keep != content.size()) std::filesystem::resize_file(path, keep);
    std::size_t start = 0;
    while (start < keep) {
        const std::size_t end = content.find('\n', start);
        const std::string_view line(content.data() + start, end - start);
        start = end + 1;
        if (trim(line).empty()) continue;
        try {
            out.push_back(record_from_json(line));
        } catch (const Error&) {
        }
    }
    return out;
}

EvalRecord evaluate_item(std::size_t round, std::size_t index, const QAItem& item, const MemoryStore& store,
                         Gateway& answer_gateway, Gateway& judge_gateway, const EvalConfig& config) {
    EvalRecord rec;
    rec.round = round;
    rec.index = index;
    rec.item = item;
    const AnswerResult answer = answer_question(item, store, config.params, config.token_budget, answer_gateway);
    rec.context_tokens = answer.context_tokens;
    if (answer.error) {
        rec.flagged = true;
        rec.error = "answer: " + *answer.error;
        rec.label = Label::Wrong;
        return rec;
    }
    rec.generated_answer = answer.answer;
    const JudgeResult verdict = judge_answer(item, answer.answer, judge_gateway);
    rec.label = verdict.label;
    rec.judge_explanation = verdict.explanation;
    if (verdict.flagged) {
        rec.flagged = true;
        rec.error = "judge: " + verdict.error;
    }
    return rec;
}

} // namespace

BenchmarkReport run_benchmark(const Dataset& dataset, MemoryStore& store, Gateway& answer_gateway,
                              Gateway& judge_gateway, const EvalConfig& config) {
    config.validate();

    AugmentationSummary aug;
    for (const auto& conv : dataset.conversations) {
        for (const auto& session : conv.sessions) {
            ++aug.sessions_total;
            if (store.get_summary(session.conversation_id, session.session_id)) {
                ++aug.sessions_skipped;
                continue;
            }
            try {
                aug.triples_added += augment_session(session, answer_gateway, store).new_triples;
                ++aug.sessions_augmented;
            } catch (const Error&) {
                ++aug.sessions_failed;
            }
        }
    }

    const std::vector<QAItem> items = filter_eval_set(dataset.qa);
    std::map<std::pair<std::size_t, std::size_t>, EvalRecord> done;
    if (config.checkpoint) {
        for (auto& r : load_checkpoint(*config.checkpoint)) {
            if (r.round < config.n_rounds && r.index < items.size() && r.item == items[r.index]) {
                done.insert_or_assign({r.round, r.index}, std::move(r));
            }
        }
    }
    std::vector<std::pair<std::size_t, std::size_t>> todo;
    for (std::size_t round = 0; round < config.n_rounds; ++round) {
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (!done.count({round, i})) todo.emplace_back(round, i);
        }
    }

    std::ofstream checkpoint;
    if (config.checkpoint && !todo.empty()) {
        checkpoint.open(*config.checkpoint, std::ios::binary | std::ios::app);
        if (!checkpoint) throw Error(ErrorCode::IoError, "cannot open checkpoint " + config.checkpoint->string());
    }

    std::mutex mu;
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    auto worker = [&] {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= todo.size()) return;
            const auto [round, index] = todo[k];
            try {
                EvalRecord rec = evaluate_item(round, index, items[index], store, answer_gateway, judge_gateway, config);
                std::lock_guard lock(mu);
                if (checkpoint.is_open()) {
                    checkpoint << record_to_json(rec) << '\n';
                    checkpoint.flush();
                }
                done.insert_or_assign({round, index}, std::move(rec));
            } catch (...) {
                std::lock_guard lock(mu);
                if (!failure) failure = std::current_exception();
                next.store(todo.size());
            }
        }
    };
    const std::size_t n_threads = std::min(config.parallelism, todo.size());
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (failure) std::rethrow_exception(failure);

    std::vector<EvalRecord> records;
    records.reserve(done.size());
    for (auto& [key, rec] : done) records.push_back(std::move(rec));
    BenchmarkReport report = aggregate_records(std::move(records), config.n_rounds, items.size(), config);
    const StoreManifest m = store.manifest();
    report.store_triples = m.n_triples;
    report.store_summaries = m.n_summaries;
    report.augmentation = aug;
    return report;
}

} // namespace memlayer
