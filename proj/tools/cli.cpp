#include "cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "memlayer/augmentation.hpp"
#include "memlayer/context_builder.hpp"
#include "memlayer/error.hpp"
#include "memlayer/eval_harness.hpp"
#include "memlayer/llm_gateway.hpp"
#include "memlayer/memory_store.hpp"
#include "memlayer/prompts.hpp"

namespace memlayer::cli {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

std::string strip_newline(std::string s) {
    if (!s.empty() && s.back() == '\n') s.pop_back();
    return s;
}

struct Settings {
    std::string store = "memlayer-store";
    bool scripted = false;
    std::string fixtures;
    std::size_t budget = kDefaultTokenBudget;
    HybridParams params;
    double price = kDefaultPricePerMillion;
    double full_context_tokens = kFullContextMeanTokens;
    std::size_t rounds = 1;
    std::size_t parallelism = 4;
    std::optional<std::size_t> dimension;
    BackendConfig backend;
    std::string judge_model;  // empty: same as chat model
};

struct Flags {
    std::optional<std::string> store, config, fixtures, base_url, chat_model, embed_model, judge_model;
    bool scripted = false;
    bool json = false;
    std::optional<std::size_t> budget, rounds, parallelism, dimension;
    std::optional<std::uint32_t> rrf_k, final_k, top_k;
    std::optional<double> k1, b, price, full_context_tokens, timeout;
};

std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

template <typename T>
T config_value(const json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorCode::SchemaError, std::string("config: bad value for '") + key + "'");
    }
}

void apply_config_file(Settings& s, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::NotFound, "cannot open config " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::SchemaError, "config: " + path + " is not a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        if (k == "store") s.store = config_value<std::string>(j, "store");
        else if (k == "scripted") s.scripted = config_value<bool>(j, "scripted");
        else if (k == "fixtures") s.fixtures = config_value<std::string>(j, "fixtures");
        else if (k == "budget") s.budget = config_value<std::size_t>(j, "budget");
        else if (k == "rrf_k") s.params.rrf_k = config_value<std::uint32_t>(j, "rrf_k");
        else if (k == "k1") s.params.k1 = config_value<double>(j, "k1");
        else if (k == "b") s.params.b = config_value<double>(j, "b");
        else if (k == "final_k") s.params.final_k = config_value<std::uint32_t>(j, "final_k");
        else if (k == "top_k") s.params.top_k_per_channel = config_value<std::uint32_t>(j, "top_k");
        else if (k == "price") s.price = config_value<double>(j, "price");
        else if (k == "full_context_tokens") s.full_context_tokens = config_value<double>(j, "full_context_tokens");
        else if (k == "rounds") s.rounds = config_value<std::size_t>(j, "rounds");
        else if (k == "parallelism") s.parallelism = config_value<std::size_t>(j, "parallelism");
        else if (k == "dimension") s.dimension = config_value<std::size_t>(j, "dimension");
        else if (k == "base_url") s.backend.base_url = config_value<std::string>(j, "base_url");
        else if (k == "chat_model") s.backend.chat_model = config_value<std::string>(j, "chat_model");
        else if (k == "embed_model") s.backend.embed_model = config_value<std::string>(j, "embed_model");
        else if (k == "judge_model") s.judge_model = config_value<std::string>(j, "judge_model");
        else if (k == "timeout") {
            s.backend.timeout = std::chrono::milliseconds(static_cast<long long>(config_value<double>(j, "timeout") * 1000));
        } else {
            throw Error(ErrorCode::SchemaError, "config: unknown key '" + k + "'");
        }
    }
}

std::optional<std::string> env(const char* name) {
    const char* v = std::getenv(name);
    if (v == nullptr || *v == '\0') return std::nullopt;
    return std::string(v);
}

void apply_env(Settings& s) {
    if (auto v = env("MEMLAYER_STORE")) s.store = *v;
    if (auto v = env("MEMLAYER_FIXTURES")) s.fixtures = *v;
    if (auto v = env("MEMLAYER_SCRIPTED")) s.scripted = *v == "1" || *v == "true";
    if (auto v = env("MEMLAYER_JUDGE_MODEL")) s.judge_model = *v;
    if (auto v = env("MEMLAYER_BUDGET")) {
        try {
            s.budget = std::stoul(*v);
        } catch (const std::exception&) {
            throw Error(ErrorCode::InvalidArgument, "MEMLAYER_BUDGET is not a number: " + *v);
        }
    }
    s.backend = BackendConfig::from_env(s.backend);
}

void apply_flags(Settings& s, const Flags& f) {
    if (f.store) s.store = *f.store;
    if (f.scripted) s.scripted = true;
    if (f.fixtures) s.fixtures = *f.fixtures;
    if (f.budget) s.budget = *f.budget;
    if (f.rrf_k) s.params.rrf_k = *f.rrf_k;
    if (f.k1) s.params.k1 = *f.k1;
    if (f.b) s.params.b = *f.b;
    if (f.final_k) s.params.final_k = *f.final_k;
    if (f.top_k) s.params.top_k_per_channel = *f.top_k;
    if (f.price) s.price = *f.price;
    if (f.full_context_tokens) s.full_context_tokens = *f.full_context_tokens;
    if (f.rounds) s.rounds = *f.rounds;
    if (f.parallelism) s.parallelism = *f.parallelism;
    if (f.dimension) s.dimension = *f.dimension;
    if (f.base_url) s.backend.base_url = *f.base_url;
    if (f.chat_model) s.backend.chat_model = *f.chat_model;
    if (f.embed_model) s.backend.embed_model = *f.embed_model;
    if (f.judge_model) s.judge_model = *f.judge_model;
    if (f.timeout) s.backend.timeout = std::chrono::milliseconds(static_cast<long long>(*f.timeout * 1000));
    if (f.base_url || f.chat_model || f.embed_model || f.judge_model || f.timeout) s.scripted = false;
}

struct Backends {
    std::shared_ptr<ModelBackend> backend;
    std::unique_ptr<Gateway> answer;
    std::unique_ptr<Gateway> judge;
};

Backends make_backends(const Settings& s, std::size_t dimension) {
    Backends b;
    if (s.scripted) {
        auto scripted = std::make_shared<ScriptedBackend>(dimension);
        if (!s.fixtures.empty()) scripted->load(s.fixtures);
        b.backend = scripted;
    } else {
        b.backend = std::make_shared<OpenAiBackend>(s.backend);
    }
    b.answer = std::make_unique<Gateway>(b.backend, s.backend);
    BackendConfig judge_cfg = s.backend;
    if (!s.judge_model.empty()) judge_cfg.chat_model = s.judge_model;
    b.judge = std::make_unique<Gateway>(b.backend, judge_cfg);
    return b;
}

std::unique_ptr<MemoryStore> open_for_write(const Settings& s) {
    StoreOptions opts;
    if (s.dimension) {
        opts.embedding_dimension = *s.dimension;
    } else if (!s.scripted && !std::filesystem::exists(std::filesystem::path(s.store) / MemoryStore::kManifestFile)) {
        // A new store for a live backend takes the embedding model's width.
        Backends probe = make_backends(s, kDefaultEmbeddingDimension);
        opts.embedding_dimension = probe.answer->embed_text("dimension probe").size();
    }
    return MemoryStore::open(s.store, OpenMode::ReadWrite, opts);
}

QueryEmbedder embedder(Gateway& g) {
    return [&g](std::string_view text) { return g.embed_text(text); };
}

EvalConfig eval_config(const Settings& s) {
    EvalConfig c;
    c.params = s.params;
    c.token_budget = s.budget;
    c.parallelism = s.parallelism;
    c.n_rounds = s.rounds;
    c.price_per_million_usd = s.price;
    c.full_context_mean_tokens = s.full_context_tokens;
    return c;
}

void print_cost(const CostReport& c, double full_context, std::ostream& out) {
    out << "mean added tokens: " << fixed(c.mean_added_tokens, 2) << "\n";
    out << "context cost (USD per query at $" << fixed(c.price_per_million_usd, 2) << "/1M): "
        << fixed(c.context_cost_usd, 6) << "\n";
    out << "context footprint (vs " << fixed(full_context, 0) << " tokens): " << fixed(c.footprint_percent, 2)
        << "%\n";
}

ordered_json cost_json(const CostReport& c, double full_context) {
    ordered_json j;
    j["mean_added_tokens"] = c.mean_added_tokens;
    j["context_cost_usd"] = c.context_cost_usd;
    j["footprint_percent"] = c.footprint_percent;
    j["price_per_million_usd"] = c.price_per_million_usd;
    j["full_context_mean_tokens"] = full_context;
    return j;
}

// --- commands ---------------------------------------------------------------

int cmd_ingest(const Settings& s, bool as_json, const std::string& file, std::ostream& out, std::ostream& err) {
    const Dataset dataset = load_dataset(file);
    auto store = open_for_write(s);
    Backends b = make_backends(s, store->embedding_dimension());
    std::size_t sessions = 0, new_triples = 0, summaries = 0, dropped = 0;
    for (const auto& conv : dataset.conversations) {
        for (const auto& session : conv.sessions) {
            const AugmentOutcome o = augment_session(session, *b.answer, *store);
            ++sessions;
            new_triples += o.new_triples;
            summaries += o.summary_written ? 1 : 0;
            dropped += o.dropped;
        }
    }
    store->close();
    if (dropped > 0) err << "warning: " << dropped << " extracted facts were invalid and dropped\n";
    if (as_json) {
        ordered_json j;
        j["sessions"] = sessions;
        j["new_triples"] = new_triples;
        j["summaries"] = summaries;
        j["dropped"] = dropped;
        out << j.dump() << "\n";
    } else {
        out << sessions << " sessions, " << new_triples << " new triples, " << summaries << " summaries\n";
    }
    return kExitOk;
}

int cmd_ask(const Settings& s, bool as_json, const std::string& question, const std::optional<std::string>& conv,
            bool show_context, std::ostream& out, std::ostream& err) {
    auto store = MemoryStore::open(s.store, OpenMode::Read);
    Backends b = make_backends(s, store->embedding_dimension());
    const StoreManifest m = store->manifest();
    if (m.n_triples == 0 && m.n_summaries == 0) err << "warning: store is empty; answering without memories\n";
    const RetrievalResult result = store->retrieve(question, embedder(*b.answer), s.params, conv);
    const ContextBlock block = render_memory_block(result, s.budget);
    const std::string answer = trim(b.answer->chat({{Role::User, render_answer_prompt(block, question)}}));
    if (as_json) {
        ordered_json j;
        j["answer"] = answer;
        j["context_tokens"] = block.stats.context_tokens;
        j["question_tokens"] = block.stats.question_tokens;
        j["budget"] = block.stats.budget;
        j["token_counter"] = block.counter_name;
        j["triples"] = block.included_triples;
        if (show_context) j["context"] = block.rendered_text;
        out << j.dump() << "\n";
        return kExitOk;
    }
    if (show_context) {
        out << "--- context: " << block.stats.context_tokens << " tokens (budget " << block.stats.budget
            << ", counter " << block.counter_name << ") ---\n"
            << block.rendered_text << "--- end context ---\n";
    }
    out << answer << "\n";
    return kExitOk;
}

int cmd_query(const Settings& s, bool as_json, const std::string& query, const std::optional<std::string>& conv,
              std::ostream& out) {
    auto store = MemoryStore::open(s.store, OpenMode::Read);
    Backends b = make_backends(s, store->embedding_dimension());
    const RetrievalResult result = store->retrieve(query, embedder(*b.answer), s.params, conv);
    auto rank_text = [](const std::optional<std::uint32_t>& r) { return r ? std::to_string(*r) : std::string("-"); };
    if (as_json) {
        ordered_json j;
        j["query"] = query;
        j["entries"] = ordered_json::array();
        std::size_t rank = 0;
        for (const auto& e : result.entries) {
            ordered_json ej;
            ej["rank"] = ++rank;
            ej["triple_id"] = e.triple_id;
            ej["subject"] = e.triple.subject;
            ej["predicate"] = e.triple.predicate;
            ej["object"] = e.triple.object;
            ej["conversation_id"] = e.triple.conversation_id;
            ej["session_id"] = e.triple.session_id;
            ej["timestamp"] = e.triple.timestamp;
            ej["fused_score"] = e.fused_score;
            ej["lexical_rank"] = e.lexical_rank ? ordered_json(*e.lexical_rank) : ordered_json(nullptr);
            ej["lexical_score"] = e.lexical_score;
            ej["dense_rank"] = e.dense_rank ? ordered_json(*e.dense_rank) : ordered_json(nullptr);
            ej["dense_score"] = e.dense_score;
            j["entries"].push_back(std::move(ej));
        }
        j["summaries"] = ordered_json::array();
        for (const auto& sm : result.summaries) {
            j["summaries"].push_back({{"conversation_id", sm.conversation_id},
                                      {"session_id", sm.session_id},
                                      {"timestamp", sm.timestamp},
                                      {"text", sm.text}});
        }
        out << j.dump() << "\n";
        return kExitOk;
    }
    out << std::left << std::setw(5) << "rank" << std::setw(11) << "fused" << std::setw(6) << "lex"
        << std::setw(11) << "bm25" << std::setw(6) << "dense" << std::setw(11) << "cosine" << "memory\n";
    std::size_t rank = 0;
    for (const auto& e : result.entries) {
        out << std::left << std::setw(5) << ++rank << std::setw(11) << fixed(e.fused_score, 6) << std::setw(6)
            << rank_text(e.lexical_rank) << std::setw(11) << fixed(e.lexical_score, 4) << std::setw(6)
            << rank_text(e.dense_rank) << std::setw(11) << fixed(e.dense_score, 4)
            << strip_newline(render_memory_line(e.triple))
            << "  (" << e.triple.conversation_id << "/" << e.triple.session_id << ")\n";
    }
    if (result.entries.empty()) out << "(no matching memories)\n";
    if (!result.summaries.empty()) {
        out << "linked summaries:\n";
        for (const auto& sm : result.summaries) {
            out << "  " << sm.conversation_id << "/" << sm.session_id << " " << render_summary_line(sm);
        }
    }
    return kExitOk;
}

std::vector<std::size_t> read_token_counts(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::NotFound, "cannot open token counts " + path);
    std::vector<std::size_t> tokens;
    std::string word;
    while (in >> word) {
        std::size_t pos = 0;
        long long v = -1;
        try {
            v = std::stoll(word, &pos);
        } catch (const std::exception&) {
        }
        if (v < 0 || pos != word.size()) throw Error(ErrorCode::SchemaError, "token counts: bad entry '" + word + "'");
        tokens.push_back(static_cast<std::size_t>(v));
    }
    return tokens;
}

int cmd_eval(const Settings& s, bool as_json, const std::optional<std::string>& dataset_file,
             const std::optional<std::string>& token_counts, const std::string& out_dir,
             const std::optional<std::string>& checkpoint, bool fresh, std::ostream& out, std::ostream& err) {
    if (token_counts) {
        const CostReport c = cost_report(read_token_counts(*token_counts), s.price, s.full_context_tokens);
        if (as_json) {
            out << cost_json(c, s.full_context_tokens).dump() << "\n";
        } else {
            print_cost(c, s.full_context_tokens, out);
        }
        return kExitOk;
    }
    if (!dataset_file) throw CLI::RequiredError("dataset (or --token-counts)");

    const Dataset dataset = load_dataset(*dataset_file);
    EvalConfig cfg = eval_config(s);
    cfg.validate();
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    cfg.checkpoint = checkpoint ? std::filesystem::path(*checkpoint) : dir / "run_state.jsonl";
    if (fresh) std::filesystem::remove(*cfg.checkpoint);

    auto store = open_for_write(s);
    Backends b = make_backends(s, store->embedding_dimension());
    const BenchmarkReport report = run_benchmark(dataset, *store, *b.answer, *b.judge, cfg);
    store->close();
    write_report(report, dir);

    const AugmentationSummary& a = report.augmentation;
    if (a.sessions_failed > 0) err << "warning: " << a.sessions_failed << " sessions failed to augment\n";
    if (report.flagged > 0) err << "warning: " << report.flagged << " items flagged (counted WRONG)\n";
    if (as_json) {
        out << report_to_json(report);
        return kExitOk;
    }
    out << "sessions: " << a.sessions_total << " (" << a.sessions_augmented << " augmented, " << a.sessions_skipped
        << " already stored, " << a.sessions_failed << " failed)\n";
    out << "questions: " << report.n_items << " x " << report.n_rounds << " round(s)\n\n";
    out << std::left << std::setw(14) << "category" << std::setw(8) << "n" << std::setw(10) << "accuracy"
        << "stddev\n";
    for (const auto& [c, st] : report.categories) {
        out << std::left << std::setw(14) << category_name(c) << std::setw(8) << st.questions << std::setw(10)
            << fixed(st.mean, 2) << fixed(st.stddev, 2) << "\n";
    }
    out << std::left << std::setw(22) << "overall (weighted)" << std::setw(10) << fixed(report.overall_mean, 2)
        << fixed(report.overall_stddev, 2) << "\n\n";
    if (!report.records.empty()) print_cost(report.cost, report.full_context_mean_tokens, out);
    out << "flagged: " << report.flagged << "\n";
    out << "report: " << (dir / "report.json").string() << "\n";
    return kExitOk;
}

int cmd_stats(const Settings& s, bool as_json, std::ostream& out) {
    auto store = MemoryStore::open(s.store, OpenMode::Read);
    const StoreManifest m = store->manifest();
    const HybridIndex& idx = store->index();
    if (as_json) {
        ordered_json j;
        j["store"] = store->path().string();
        j["format_version"] = m.format_version;
        j["embedding_dimension"] = m.embedding_dimension;
        j["n_triples"] = m.n_triples;
        j["n_summaries"] = m.n_summaries;
        j["indexed_triples"] = idx.size();
        j["vocabulary_size"] = idx.vocabulary_size();
        j["avgdl"] = idx.avgdl();
        j["checksum"] = m.checksum;
        j["recovered"] = store->recovery().recovered;
        out << j.dump() << "\n";
        return kExitOk;
    }
    out << "store: " << store->path().string() << "\n"
        << "format_version: " << m.format_version << "\n"
        << "embedding_dimension: " << m.embedding_dimension << "\n"
        << "n_triples: " << m.n_triples << "\n"
        << "n_summaries: " << m.n_summaries << "\n"
        << "indexed_triples: " << idx.size() << "\n"
        << "vocabulary_size: " << idx.vocabulary_size() << "\n"
        << "avgdl: " << fixed(idx.avgdl(), 6) << "\n"
        << "checksum: " << m.checksum << "\n";
    if (store->recovery().recovered) out << "recovered: discarded " << store->recovery().discarded_bytes << " bytes\n";
    return kExitOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Long-term memory layer: ingest conversations, retrieve memories, run benchmarks.", "memlayer"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", "memlayer 1.0.0");

    Flags f;
    app.add_option("--store", f.store, "Store directory (default ./memlayer-store)");
    app.add_option("--config", f.config, "JSON config file");
    auto* scripted = app.add_flag("--scripted", f.scripted, "Use the offline scripted backend");
    app.add_option("--fixtures", f.fixtures, "Scripted completions (JSONL)");
    app.add_flag("--json", f.json, "Emit one JSON document");
    app.add_option("--budget", f.budget, "Token budget for the memory block");
    app.add_option("--rrf-k", f.rrf_k, "Reciprocal-rank fusion constant");
    app.add_option("--k1", f.k1, "BM25 k1");
    app.add_option("--b", f.b, "BM25 b");
    app.add_option("--final-k", f.final_k, "Triples kept after fusion");
    app.add_option("--top-k", f.top_k, "Candidates per retrieval channel");
    app.add_option("--price", f.price, "USD per million input tokens");
    app.add_option("--full-context-tokens", f.full_context_tokens, "Full-context mean tokens (footprint baseline)");
    app.add_option("--rounds", f.rounds, "Benchmark rounds");
    app.add_option("--parallelism", f.parallelism, "Questions in flight during eval");
    app.add_option("--dimension", f.dimension, "Embedding dimension for a new store");
    std::vector<CLI::Option*> live{
        app.add_option("--base-url", f.base_url, "OpenAI-compatible endpoint"),
        app.add_option("--chat-model", f.chat_model, "Answer/augmentation model"),
        app.add_option("--embed-model", f.embed_model, "Embedding model"),
        app.add_option("--judge-model", f.judge_model, "Judge model"),
        app.add_option("--timeout", f.timeout, "Request timeout in seconds"),
    };
    for (auto* o : live) scripted->excludes(o);

    auto* ingest = app.add_subcommand("ingest", "Augment a transcript file into the store");
    std::string ingest_file;
    ingest->add_option("file", ingest_file, "Dataset/transcript JSON")->required();

    auto* ask = app.add_subcommand("ask", "Answer a question from memory");
    std::string question;
    std::optional<std::string> ask_conv;
    bool show_context = false;
    ask->add_option("question", question, "Question")->required();
    ask->add_option("--conversation", ask_conv, "Restrict retrieval to one conversation");
    ask->add_flag("--show-context", show_context, "Print the memory block and its token count");

    auto* query = app.add_subcommand("query", "Show hybrid retrieval results");
    std::string query_text;
    std::optional<std::string> query_conv;
    query->add_option("text", query_text, "Query text")->required();
    query->add_option("--conversation", query_conv, "Restrict retrieval to one conversation");

    auto* eval = app.add_subcommand("eval", "Run the benchmark, or cost accounting with --token-counts");
    std::optional<std::string> dataset;
    std::optional<std::string> token_counts;
    std::optional<std::string> checkpoint;
    std::string out_dir = "eval-out";
    bool fresh = false;
    eval->add_option("dataset", dataset, "Dataset JSON (normalized or public LoCoMo)");
    eval->add_option("--token-counts", token_counts, "File of per-query context token counts (cost only)");
    eval->add_option("--out", out_dir, "Output directory for report.json and records.jsonl");
    eval->add_option("--checkpoint", checkpoint, "Run-state JSONL (default <out>/run_state.jsonl)");
    eval->add_flag("--fresh", fresh, "Ignore an existing checkpoint");

    auto* stats = app.add_subcommand("stats", "Print store statistics");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(std::move(reversed));
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        Settings s;
        std::optional<std::string> config_path = f.config ? f.config : env("MEMLAYER_CONFIG");
        if (config_path) apply_config_file(s, *config_path);
        apply_env(s);
        apply_flags(s, f);
        s.params.validate();
        if (s.budget < kMinTokenBudget) {
            throw Error(ErrorCode::BudgetTooSmall, "budget must be >= " + std::to_string(kMinTokenBudget));
        }

        if (*ingest) return cmd_ingest(s, f.json, ingest_file, out, err);
        if (*ask) return cmd_ask(s, f.json, question, ask_conv, show_context, out, err);
        if (*query) return cmd_query(s, f.json, query_text, query_conv, out);
        if (*eval) return cmd_eval(s, f.json, dataset, token_counts, out_dir, checkpoint, fresh, out, err);
        if (*stats) return cmd_stats(s, f.json, out);
        return kExitUsage;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        const bool usage = e.code() == ErrorCode::InvalidArgument || e.code() == ErrorCode::BudgetTooSmall;
        err << "error: " << e.what() << "\n";
        return usage ? kExitUsage : kExitFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

} // namespace memlayer::cli
