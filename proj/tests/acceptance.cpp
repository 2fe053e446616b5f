// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "memlayer/context_builder.hpp"
#include "memlayer/eval_harness.hpp"
#include "memlayer/hash.hpp"
#include "memlayer/memory_store.hpp"
#include "memlayer/prompts.hpp"
#include "memlayer/retrieval.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace memlayer;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void fail(const std::string& why) {
        if (pass) detail = why;
        pass = false;
    }
    void check(bool ok, const std::string& why) {
        if (!ok) fail(why);
    }
};

std::string num(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

// ---------------------------------------------------------------------------

Outcome cost_table() {
    Outcome o;
    struct Row {
        double tokens, cost, footprint;
    };
    const Row rows[] = {{1294, 0.001035, 4.97}, {26031, 0.020825, 100.00}, {1764, 0.001411, 6.78}, {3911, 0.003129, 15.02}};
    std::ostringstream d;
    for (const Row& r : rows) {
        const CostReport c = cost_report({static_cast<std::size_t>(r.tokens)}, 0.8, 26031);
        o.check(near(c.context_cost_usd, r.cost, 5e-7), "cost for " + num(r.tokens, 0) + " = " + num(c.context_cost_usd, 8));
        o.check(near(c.footprint_percent, r.footprint, 0.01),
                "footprint for " + num(r.tokens, 0) + " = " + num(c.footprint_percent, 4));
        d << num(r.tokens, 0) << "->" << num(c.context_cost_usd, 6) << "/" << num(c.footprint_percent, 2) << "% ";
    }
    if (o.pass) o.detail = d.str();
    return o;
}

Outcome weighted_overall_row() {
    Outcome o;
    const double v = weighted_overall({{4, 87.87}, {1, 72.70}, {3, 63.54}, {2, 80.37}},
                                      {{4, 830}, {1, 282}, {3, 96}, {2, 321}});
    o.check(near(v, 81.95, 0.1), "overall " + num(v, 4));
    if (o.pass) o.detail = "overall " + num(v, 2) + " (target 81.95 +/- 0.1)";
    return o;
}

Outcome filter_law() {
    Outcome o;
    const std::map<int, std::size_t> want{{1, 282}, {2, 321}, {3, 96}, {4, 830}, {5, 445}};
    Dataset d;
    Conversation c{"conv-1", {{"conv-1", "s1", "2023-05-08T13:56:00Z", {{"A", "hello"}}}}};
    d.conversations.push_back(c);
    for (const auto& [cat, n] : want) {
        for (std::size_t i = 0; i < n; ++i) d.qa.push_back({"q" + std::to_string(cat) + "-" + std::to_string(i), "a", cat, "conv-1"});
    }
    std::mt19937_64 rng(1);
    std::shuffle(d.qa.begin(), d.qa.end(), rng);
    testkit::TempDir dir;
    testkit::write_file(dir / "fixture.json", dataset_to_json(d));
    const Dataset loaded = load_locomo(dir / "fixture.json");
    const auto counts = category_counts(loaded.qa);
    o.check(counts == want, "category counts differ");
    const auto kept = filter_eval_set(loaded.qa);
    o.check(kept.size() == 1529, "kept " + std::to_string(kept.size()));
    std::size_t j = 0;
    for (const auto& q : loaded.qa) {
        if (q.category == 5) continue;
        if (j >= kept.size() || !(kept[j] == q)) {
            o.fail("order not preserved");
            break;
        }
        ++j;
    }
    if (o.pass) o.detail = "282/321/96/830/445 loaded, 1529 kept in order";
    return o;
}

bool same_ranking(const std::vector<ScoredDoc>& got, const std::vector<oracle::Ranked>& want, double tol) {
    if (got.size() != want.size()) return false;
    for (std::size_t i = 0; i < got.size(); ++i) {
        if (!near(got[i].score, want[i].score, tol)) return false;
        if (got[i].id != want[i].id) {
            bool tied = false;
            for (const auto& w : want) tied = tied || (w.id == got[i].id && near(w.score, want[i].score, tol));
            if (!tied) return false;
        }
    }
    return true;
}

Outcome bm25_oracle() {
    Outcome o;
    {
        LexicalIndex idx;
        idx.insert("d1", {"dog"});
        const double v = bm25_score({"dog"}, "d1", idx, HybridParams{});
        o.check(near(v, 0.28768, 1e-5) && near(v, std::log(4.0 / 3.0), 1e-12), "hand case " + num(v, 8));
    }
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> n_docs(1, 20), doc_len(1, 8), q_len(1, 5), vocab_size(2, 15);
    std::uniform_real_distribution<double> k1(0.2, 3.0), b(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 1000 && o.pass; ++trial) {
        const int vocab = vocab_size(rng);
        std::uniform_int_distribution<int> word(0, vocab - 1), qword(0, vocab + 1);
        std::vector<oracle::Doc> docs;
        LexicalIndex idx;
        const int n = n_docs(rng);
        for (int i = 0; i < n; ++i) {
            oracle::Doc d{"doc" + std::to_string(i), {}};
            for (int t = doc_len(rng); t > 0; --t) d.tokens.push_back("t" + std::to_string(word(rng)));
            idx.insert(d.id, d.tokens);
            docs.push_back(std::move(d));
        }
        std::vector<std::string> q;
        for (int t = q_len(rng); t > 0; --t) q.push_back("t" + std::to_string(qword(rng)));
        HybridParams p;
        p.k1 = k1(rng);
        p.b = b(rng);
        for (const auto& d : docs) {
            const double diff = std::abs(bm25_score(q, d.id, idx, p) - oracle::bm25(docs, q, d.id, p.k1, p.b));
            worst = std::max(worst, diff);
        }
        o.check(same_ranking(idx.search(q, p, docs.size()), oracle::bm25_rank(docs, q, p.k1, p.b, docs.size()), 1e-9),
                "ranking differs in trial " + std::to_string(trial));
    }
    o.check(worst <= 1e-9, "max score difference " + std::to_string(worst));
    if (o.pass) o.detail = "1000 corpora, max |diff| " + [&] {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.1e", worst);
        return std::string(buf);
    }() + ", hand case ln(4/3)";
    return o;
}

Outcome dense_and_rrf() {
    Outcome o;
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> n_triples(1, 50), dims(8, 32), vocab_size(3, 12), doc_len(1, 8);
    for (int trial = 0; trial < 500 && o.pass; ++trial) {
        const std::size_t d = static_cast<std::size_t>(dims(rng));
        const int n = n_triples(rng);
        const int vocab = vocab_size(rng);
        std::uniform_int_distribution<int> word(0, vocab - 1);
        std::vector<oracle::Doc> docs;
        std::vector<std::pair<std::string, Embedding>> vectors;
        LexicalIndex lexical;
        DenseIndex dense(d);
        for (int i = 0; i < n; ++i) {
            oracle::Doc doc{"id" + std::to_string(1000 + (i * 7919) % 9000), {}};
            for (int t = doc_len(rng); t > 0; --t) doc.tokens.push_back("t" + std::to_string(word(rng)));
            // every fifth triple repeats an earlier vector: exact cosine ties
            Embedding v = (i % 5 == 4) ? vectors[static_cast<std::size_t>(i - 1)].second : testkit::random_unit(rng, d);
            lexical.insert(doc.id, doc.tokens);
            dense.insert(doc.id, v);
            vectors.emplace_back(doc.id, v);
            docs.push_back(std::move(doc));
        }
        const Embedding qv = testkit::random_unit(rng, d);
        HybridParams p;
        p.top_k_per_channel = static_cast<std::uint32_t>(1 + trial % 30);
        p.final_k = 1 + static_cast<std::uint32_t>(trial) % p.top_k_per_channel;

        const auto got_dense = dense_search(qv, dense, p.top_k_per_channel);
        const auto want_dense = oracle::cosine_rank(vectors, qv, p.top_k_per_channel);
        for (std::size_t i = 0; i < got_dense.size() && i < want_dense.size(); ++i) {
            o.check(got_dense[i].id == want_dense[i].id && near(got_dense[i].score, want_dense[i].score, 1e-12),
                    "dense rank " + std::to_string(i) + " trial " + std::to_string(trial));
        }
        o.check(got_dense.size() == want_dense.size(), "dense size trial " + std::to_string(trial));

        std::vector<std::string> q;
        for (int t = 1 + trial % 4; t > 0; --t) q.push_back("t" + std::to_string(word(rng)));
        std::string text;
        for (const auto& t : q) text += t + " ";
        const auto got = hybrid_retrieve(text, qv, lexical, dense, p);
        const auto want = oracle::rrf({oracle::bm25_rank(docs, q, p.k1, p.b, p.top_k_per_channel),
                                       oracle::cosine_rank(vectors, qv, p.top_k_per_channel)},
                                      p.rrf_k, p.final_k);
        o.check(got.size() == want.size(), "rrf size trial " + std::to_string(trial));
        for (std::size_t i = 0; i < got.size() && i < want.size(); ++i) {
            o.check(got[i].triple_id == want[i].id && near(got[i].fused_score, want[i].score, 1e-12),
                    "rrf rank " + std::to_string(i) + " trial " + std::to_string(trial));
        }
        o.check(hybrid_retrieve(text, qv, lexical, dense, p) == got, "repeat differs trial " + std::to_string(trial));
        for (std::size_t i = 1; i < got.size(); ++i) {
            o.check(got[i - 1].fused_score > got[i].fused_score ||
                        (got[i - 1].fused_score == got[i].fused_score && got[i - 1].triple_id < got[i].triple_id),
                    "tie order trial " + std::to_string(trial));
        }
    }
    if (o.pass) o.detail = "500 instances, dense and fused rankings identical to oracles";
    return o;
}

Outcome budget_law() {
    Outcome o;
    std::mt19937_64 rng(99);
    static const char* words[] = {"dog", "pottery", "Oslo", "sister", "marathon", "jazz", "café", "2023", "Lisbon", "guitar"};
    std::uniform_int_distribution<int> w(0, 9), len(1, 8), n_entries(0, 60), n_summaries(0, 8);
    std::uniform_int_distribution<std::size_t> budget(32, 4096), step(1, 200);
    auto phrase = [&] {
        std::string s = words[w(rng)];
        for (int i = len(rng); i > 1; --i) s += std::string(" ") + words[w(rng)];
        return s;
    };
    for (int trial = 0; trial < 1000 && o.pass; ++trial) {
        RetrievalResult r;
        for (int i = n_entries(rng); i > 0; --i) {
            RetrievalEntry e;
            e.triple = testkit::make_triple(phrase(), phrase(), phrase() + " " + std::to_string(i));
            e.triple_id = e.triple.id;
            r.entries.push_back(e);
        }
        for (int i = n_summaries(rng); i > 0; --i) {
            r.summaries.push_back(testkit::make_summary("c", "s" + std::to_string(i), phrase() + " " + phrase()));
        }
        const std::size_t b = budget(rng);
        const ContextBlock block = render_memory_block(r, b);
        o.check(block.stats.context_tokens <= b, "over budget in trial " + std::to_string(trial));
        o.check(block.stats.context_tokens == count_tokens(block.rendered_text), "token count mismatch");
        for (std::size_t i = 0; i < block.included_triples.size(); ++i) {
            o.check(block.included_triples[i] == r.entries[i].triple_id, "triples not a prefix");
        }
        for (std::size_t i = 0; i < block.included_summaries.size(); ++i) {
            o.check(block.included_summaries[i] == r.summaries[i].key(), "summaries not a prefix");
        }
        if (!block.included_summaries.empty()) {
            o.check(block.included_triples.size() == r.entries.size(), "summary admitted before all triples");
        }
        // greedy: the next item would not have fitted
        if (block.included_triples.size() < r.entries.size()) {
            const std::string next = render_memory_line(r.entries[block.included_triples.size()].triple);
            const std::string head = block.rendered_text.substr(0, block.rendered_text.size() - kSummariesHeader.size());
            o.check(count_tokens(head + next + std::string(kSummariesHeader)) > b, "greedy stopped early");
        }
        const ContextBlock bigger = render_memory_block(r, b + step(rng));
        o.check(bigger.included_triples.size() >= block.included_triples.size() &&
                    bigger.included_summaries.size() >= block.included_summaries.size(),
                "monotonicity violated in trial " + std::to_string(trial));
    }
    if (o.pass) o.detail = "1000 random results, budgets 32..4096";
    return o;
}

Outcome store_durability() {
    Outcome o;
    std::mt19937_64 rng(5150);
    std::uniform_int_distribution<int> n_commits(1, 8), n_triples(0, 6), conv(0, 2), sess(0, 4), word(0, 40);
    auto links_hold = [](const MemoryStore& s) {
        for (const Triple& t : s.all_triples()) {
            if (!s.get_summary(t.conversation_id, t.session_id)) return false;
        }
        return s.index().size() == s.all_triples().size();
    };
    int truncations = 0;
    for (int trial = 0; trial < 60 && o.pass; ++trial) {
        testkit::TempDir dir;
        StoreOptions opts;
        opts.embedding_dimension = 16;
        std::vector<Triple> triples;
        std::vector<Summary> summaries;
        {
            auto store = MemoryStore::open(dir / "s", OpenMode::ReadWrite, opts);
            for (int c = n_commits(rng); c > 0; --c) {
                const std::string cid = "c" + std::to_string(conv(rng));
                const std::string sid = "s" + std::to_string(sess(rng));
                std::vector<Triple> batch;
                for (int i = n_triples(rng); i > 0; --i) {
                    batch.push_back(testkit::make_triple("w" + std::to_string(word(rng)), "rel" + std::to_string(word(rng)),
                                                         "w" + std::to_string(word(rng)), cid, sid,
                                                         static_cast<std::uint32_t>(i)));
                }
                store->commit_session(testkit::make_summary(cid, sid, "summary " + std::to_string(word(rng))), batch);
                auto reader = MemoryStore::open(dir / "s", OpenMode::Read);
                o.check(links_hold(*reader), "link invariant broken at a commit point");
            }
            triples = store->all_triples();
            summaries = store->all_summaries();
        }
        {
            auto reopened = MemoryStore::open(dir / "s", OpenMode::Read);
            o.check(reopened->all_triples() == triples && reopened->all_summaries() == summaries,
                    "reopen differs in trial " + std::to_string(trial));
        }
        // truncate the triples file at a random byte; summaries stay intact
        const fs::path tp = dir / "s" / MemoryStore::kTriplesFile;
        const std::string data = testkit::read_file(tp);
        if (data.empty()) continue;
        const std::size_t cut = std::uniform_int_distribution<std::size_t>(0, data.size() - 1)(rng);
        testkit::write_file(tp, data.substr(0, cut));
        const std::size_t complete = static_cast<std::size_t>(std::count(data.begin(), data.begin() + static_cast<long>(cut), '\n'));
        ++truncations;
        auto recovered = MemoryStore::open(dir / "s", OpenMode::ReadWrite);
        const auto got = recovered->all_triples();
        o.check(recovered->recovery().recovered, "recovery not reported");
        o.check(got.size() == complete, "recovered " + std::to_string(got.size()) + " of " + std::to_string(complete));
        for (std::size_t i = 0; i < got.size() && i < triples.size(); ++i) {
            o.check(got[i] == triples[i], "recovered triples are not the committed prefix");
        }
        o.check(links_hold(*recovered), "link invariant broken after recovery");
        recovered->close();
        o.check(!MemoryStore::open(dir / "s", OpenMode::Read)->recovery().recovered, "store not clean after recovery");
    }
    if (o.pass) o.detail = "60 randomized stores reopened identically, " + std::to_string(truncations) + " truncations recovered";
    return o;
}

Outcome end_to_end() {
    Outcome o;
    const testkit::Corpus corpus = testkit::planted_corpus();
    o.check(corpus.planted.size() == 12 && corpus.dataset.conversations.size() == 3, "corpus shape");

    std::string reports[2];
    std::string round3[2];
    for (int run = 0; run < 2; ++run) {
        auto backend = std::make_shared<ScriptedBackend>();
        testkit::script_corpus(backend, corpus, {});
        Gateway answer(backend, testkit::fast_config());
        Gateway judge(backend, testkit::fast_config());
        testkit::TempDir dir;
        auto store = MemoryStore::open(dir / "store", OpenMode::ReadWrite);
        EvalConfig cfg;
        const BenchmarkReport report = run_benchmark(corpus.dataset, *store, answer, judge, cfg);
        o.check(report.augmentation.sessions_failed == 0, "augmentation failures");

        if (run == 0) {
            std::set<std::string> want_triples;
            for (const auto& [key, facts] : corpus.extractions) {
                for (const auto& f : facts) {
                    want_triples.insert(triple_content_id(key.conversation_id, key.session_id,
                                                          static_cast<std::uint32_t>(f.turn_index.value_or(0)), f.subject,
                                                          f.predicate, f.object));
                }
            }
            std::set<std::string> have;
            for (const auto& t : store->all_triples()) have.insert(t.id);
            o.check(have == want_triples, "stored triples differ from the scripted extraction");
            for (const auto& [key, text] : corpus.summaries) {
                const auto s = store->get_summary(key.conversation_id, key.session_id);
                o.check(s && s->text == trim(text), "summary missing for " + key.conversation_id + "/" + key.session_id);
            }
            const QueryEmbedder embed = [&answer](std::string_view t) { return answer.embed_text(t); };
            for (const auto& f : corpus.planted) {
                const std::string id =
                    triple_content_id(f.conversation_id, f.session_id, f.turn, f.subject, f.predicate, f.object);
                const RetrievalResult r = store->retrieve(f.question, embed, cfg.params, f.conversation_id);
                bool found = false;
                for (std::size_t i = 0; i < r.entries.size() && i < 10; ++i) found = found || r.entries[i].triple_id == id;
                o.check(found, "planted fact not in top-10: " + f.question);
            }
            o.check(report.flagged == 0, "flagged items");
            o.check(near(report.overall_mean, 100.0, 1e-9), "overall " + num(report.overall_mean, 2));
        }
        write_report(report, dir / "out");
        reports[run] = testkit::read_file(dir / "out" / "report.json") + testkit::read_file(dir / "out" / "records.jsonl");

        auto store3 = MemoryStore::open(dir / "store3", OpenMode::ReadWrite);
        cfg.n_rounds = 3;
        const BenchmarkReport r3 = run_benchmark(corpus.dataset, *store3, answer, judge, cfg);
        for (const auto& [c, st] : r3.categories) o.check(st.stddev == 0.0, "stddev non-zero for category " + std::to_string(c));
        o.check(r3.overall_stddev == 0.0 && r3.overall.size() == 3, "overall stddev non-zero");
        o.check(r3.overall_mean == report.overall_mean, "3-round mean differs from 1-round");
        round3[run] = report_to_json(r3);
    }
    o.check(reports[0] == reports[1], "reports differ across runs");
    o.check(round3[0] == round3[1], "3-round reports differ across runs");
    if (o.pass) o.detail = "12/12 planted facts in top-10, reports byte-identical, std 0 over 3 rounds";
    return o;
}

std::string fill(std::string tmpl, const std::vector<std::pair<std::string, std::string>>& subs) {
    // independent substitution: locate each placeholder in the original template once
    std::vector<std::tuple<std::size_t, std::size_t, std::string>> spots;
    for (const auto& [key, value] : subs) {
        for (std::size_t at = tmpl.find(key); at != std::string::npos; at = tmpl.find(key, at + key.size())) {
            spots.emplace_back(at, key.size(), value);
        }
    }
    std::sort(spots.begin(), spots.end(), [](const auto& a, const auto& b) { return std::get<0>(a) > std::get<0>(b); });
    for (const auto& [at, len, value] : spots) tmpl.replace(at, len, value);
    return tmpl;
}

Outcome prompt_fidelity() {
    Outcome o;
    const fs::path dir = MEMLAYER_RESOURCE_DIR;
    const std::string answer_file = testkit::read_file(dir / "answer_prompt.v1.txt");
    const std::string judge_file = testkit::read_file(dir / "judge_prompt.v1.txt");
    o.check(answer_file == prompts::answer_template(), "embedded answer template differs from resource");
    o.check(judge_file == prompts::judge_template(), "embedded judge template differs from resource");
    o.check(sha256_hex(answer_file) == "114e412f49a9f706d8696beb7af90a0e49afa7f71821c02a74bd5e3e930046a2",
            "answer template checksum");
    o.check(sha256_hex(judge_file) == "464b53eb7fef153222c2d90c19616ba972c094fcdaf3328690b064e84073df1f",
            "judge template checksum");

    RetrievalResult r;
    RetrievalEntry e;
    e.triple = testkit::make_triple("Alice", "adopted", "a golden retriever named {question}");
    e.triple_id = e.triple.id;
    r.entries.push_back(e);
    r.summaries.push_back(testkit::make_summary("c1", "s1", "Alice talked about her new dog."));
    const ContextBlock block = render_memory_block(r, 512);
    const std::string question = "What did Alice adopt?";
    o.check(render_answer_prompt(block, question) ==
                fill(answer_file, {{"{{memories}}", block.rendered_text}, {"{{question}}", question}}),
            "answer prompt bytes differ");

    const QAItem item{"When did Alice adopt the dog?", "May 2023", 2, "c1"};
    const std::string generated = "In May 2023, per {gold_answer} notes.";
    o.check(render_judge_prompt(item, generated) == fill(judge_file, {{"{question}", item.question},
                                                                      {"{gold_answer}", item.gold_answer},
                                                                      {"{generated_answer}", generated}}),
            "judge prompt bytes differ");
    if (o.pass) o.detail = "answer and judge prompts byte-match the checksummed templates";
    return o;
}

} // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"cost arithmetic", cost_table},
        {"weighted overall", weighted_overall_row},
        {"category filter law", filter_law},
        {"bm25 oracle equivalence", bm25_oracle},
        {"dense search and rrf oracle", dense_and_rrf},
        {"context budget law", budget_law},
        {"store round-trip and recovery", store_durability},
        {"end-to-end scripted run", end_to_end},
        {"prompt fidelity", prompt_fidelity},
    };
    int failures = 0;
    for (const auto& [name, fn] : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o.fail(std::string("exception: ") + e.what());
        }
        const double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << ": " << o.detail << " (" << num(ms, 0) << " ms)\n";
        failures += o.pass ? 0 : 1;
    }
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << "\n";
    return failures == 0 ? 0 : 1;
}
