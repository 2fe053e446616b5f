#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "memlayer/error.hpp"
#include "memlayer/llm_gateway.hpp"
#include "memlayer/retrieval.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace memlayer;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an Error";
    return ErrorCode::IoError;
}

std::vector<oracle::Doc> random_corpus(std::mt19937_64& rng, std::size_t n_docs, std::size_t vocab) {
    std::uniform_int_distribution<std::size_t> len(1, 12);
    std::uniform_int_distribution<std::size_t> word(0, vocab - 1);
    std::vector<oracle::Doc> docs;
    for (std::size_t i = 0; i < n_docs; ++i) {
        oracle::Doc d{"d" + std::to_string(1000 + i), {}};
        const std::size_t n = len(rng);
        for (std::size_t j = 0; j < n; ++j) d.tokens.push_back("w" + std::to_string(word(rng)));
        docs.push_back(std::move(d));
    }
    return docs;
}

std::vector<std::string> random_query(std::mt19937_64& rng, std::size_t vocab) {
    std::uniform_int_distribution<std::size_t> len(1, 4);
    std::uniform_int_distribution<std::size_t> word(0, vocab + 2);  // occasionally unseen
    std::vector<std::string> q;
    const std::size_t n = len(rng);
    for (std::size_t j = 0; j < n; ++j) q.push_back("w" + std::to_string(word(rng)));
    return q;
}

// Same scores position by position; ids may only differ inside groups of tied scores.
::testing::AssertionResult same_ranking(const std::vector<ScoredDoc>& got, const std::vector<oracle::Ranked>& want,
                                        double tol) {
    if (got.size() != want.size()) {
        return ::testing::AssertionFailure() << "size " << got.size() << " vs " << want.size();
    }
    for (std::size_t i = 0; i < got.size(); ++i) {
        if (std::abs(got[i].score - want[i].score) > tol) {
            return ::testing::AssertionFailure() << "rank " << i << ": " << got[i].score << " vs " << want[i].score;
        }
        if (got[i].id != want[i].id) {
            bool tied = false;
            for (const auto& w : want) {
                if (w.id == got[i].id && std::abs(w.score - want[i].score) <= tol) tied = true;
            }
            if (!tied) return ::testing::AssertionFailure() << "rank " << i << ": " << got[i].id << " vs " << want[i].id;
        }
    }
    return ::testing::AssertionSuccess();
}

LexicalIndex build_lexical(const std::vector<oracle::Doc>& docs) {
    LexicalIndex idx;
    for (const auto& d : docs) idx.insert(d.id, d.tokens);
    return idx;
}

} // namespace

TEST(Tokenize, LowercasesAndSplitsOnNonAlnum) {
    EXPECT_EQ(tokenize("Alice's  golden-Retriever, 2023!"),
              (std::vector<std::string>{"alice", "s", "golden", "retriever", "2023"}));
    EXPECT_TRUE(tokenize(" ,.; ").empty());
    EXPECT_EQ(tokenize("running runs"), (std::vector<std::string>{"running", "runs"}));  // no stemming
    EXPECT_EQ(tokenize("the a of"), (std::vector<std::string>{"the", "a", "of"}));      // no stopwords
}

TEST(Params, Validation) {
    HybridParams p;
    EXPECT_NO_THROW(p.validate());
    for (auto mutate : std::vector<std::function<void(HybridParams&)>>{
             [](HybridParams& q) { q.k1 = 0; }, [](HybridParams& q) { q.b = 1.5; },
             [](HybridParams& q) { q.rrf_k = 0; }, [](HybridParams& q) { q.final_k = 0; },
             [](HybridParams& q) { q.final_k = 40; }, [](HybridParams& q) { q.alpha = -0.1; }}) {
        HybridParams q;
        mutate(q);
        EXPECT_EQ(code_of([&] { q.validate(); }), ErrorCode::InvalidArgument);
    }
}

TEST(Bm25, SingleDocumentHandCase) {
    LexicalIndex idx;
    idx.insert("d1", {"dog"});
    const HybridParams p;
    EXPECT_NEAR(bm25_score({"dog"}, "d1", idx, p), std::log(4.0 / 3.0), 1e-12);
    EXPECT_NEAR(bm25_score({"dog"}, "d1", idx, p), 0.28768, 1e-5);
    EXPECT_EQ(bm25_score({"dog", "dog"}, "d1", idx, p), bm25_score({"dog"}, "d1", idx, p));
    EXPECT_EQ(bm25_score({"cat"}, "d1", idx, p), 0.0);
    EXPECT_EQ(code_of([&] { bm25_score({"dog"}, "zz", idx, p); }), ErrorCode::UnknownDocument);
}

TEST(Bm25, MatchesOracleOnRandomCorpora) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t vocab = 5 + trial % 20;
        const auto docs = random_corpus(rng, 1 + trial % 40, vocab);
        const LexicalIndex idx = build_lexical(docs);
        HybridParams p;
        p.k1 = 0.5 + (trial % 7) * 0.25;
        p.b = (trial % 5) * 0.25;
        const auto q = random_query(rng, vocab);
        for (const auto& d : docs) {
            ASSERT_NEAR(bm25_score(q, d.id, idx, p), oracle::bm25(docs, q, d.id, p.k1, p.b), 1e-9);
        }
        const std::size_t limit = 1 + trial % 15;
        ASSERT_TRUE(same_ranking(idx.search(q, p, limit), oracle::bm25_rank(docs, q, p.k1, p.b, limit), 1e-9))
            << "trial " << trial;
    }
}

TEST(Bm25, SearchOnlyReturnsDocumentsWithAHit) {
    LexicalIndex idx;
    idx.insert("a", {"red", "dog"});
    idx.insert("b", {"blue", "cat"});
    const auto hits = idx.search({"dog"}, HybridParams{}, 10);
    ASSERT_EQ(hits.size(), 1u);
    EXPECT_EQ(hits[0].id, "a");
    EXPECT_TRUE(idx.search({"zebra"}, HybridParams{}, 10).empty());
    const auto filtered = idx.search({"dog", "cat"}, HybridParams{}, 10, [](const std::string& id) { return id == "b"; });
    ASSERT_EQ(filtered.size(), 1u);
    EXPECT_EQ(filtered[0].id, "b");
}

TEST(LexicalIndex, BookkeepingAndErrors) {
    LexicalIndex idx;
    idx.insert("a", {"x", "y", "x"});
    idx.insert("b", {"y"});
    EXPECT_EQ(idx.size(), 2u);
    EXPECT_EQ(idx.total_length(), 4u);
    EXPECT_DOUBLE_EQ(idx.avgdl(), 2.0);
    EXPECT_EQ(idx.document_frequency("y"), 2u);
    EXPECT_EQ(idx.term_frequency("x", "a"), 2u);
    EXPECT_EQ(idx.doc_length("a"), 3u);
    EXPECT_EQ(code_of([&] { idx.insert("a", {"z"}); }), ErrorCode::DuplicateId);
    EXPECT_EQ(code_of([&] { idx.remove("zz"); }), ErrorCode::UnknownDocument);
    EXPECT_EQ(code_of([&] { idx.doc_length("zz"); }), ErrorCode::UnknownDocument);
    EXPECT_EQ(LexicalIndex{}.avgdl(), 0.0);
}

TEST(LexicalIndex, RemoveThenInsertRestoresIdenticalState) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const auto docs = random_corpus(rng, 2 + trial % 20, 8);
        LexicalIndex idx = build_lexical(docs);
        const LexicalIndex before = idx;
        const auto& victim = docs[static_cast<std::size_t>(trial) % docs.size()];
        idx.remove(victim.id);
        EXPECT_FALSE(idx.contains(victim.id));
        for (const auto& [term, postings] : idx.postings()) {
            EXPECT_FALSE(postings.empty()) << term;
            for (const auto& posting : postings) EXPECT_NE(posting.doc_id, victim.id);
        }
        idx.insert(victim.id, victim.tokens);
        EXPECT_EQ(idx, before);
    }
}

TEST(Dense, MatchesCosineOracle) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t d = 8 + trial % 24;
        DenseIndex idx(d);
        std::vector<std::pair<std::string, Embedding>> vectors;
        for (int i = 0; i < 1 + trial % 50; ++i) {
            vectors.emplace_back("v" + std::to_string(i), testkit::random_unit(rng, d));
            idx.insert(vectors.back().first, vectors.back().second);
        }
        const Embedding q = testkit::random_unit(rng, d);
        const std::size_t k = 1 + trial % 12;
        const auto got = dense_search(q, idx, k);
        const auto want = oracle::cosine_rank(vectors, q, k);
        ASSERT_TRUE(same_ranking(got, want, 1e-9));
    }
}

TEST(Dense, TiesBreakByIdAndErrors) {
    DenseIndex idx(2);
    idx.insert("b", {1.0F, 0.0F});
    idx.insert("a", {1.0F, 0.0F});
    idx.insert("c", {0.0F, 1.0F});
    const auto hits = dense_search({1.0F, 0.0F}, idx, 3);
    ASSERT_EQ(hits.size(), 3u);
    EXPECT_EQ(hits[0].id, "a");
    EXPECT_EQ(hits[1].id, "b");
    EXPECT_EQ(code_of([&] { idx.insert("d", {1.0F, 0.0F, 0.0F}); }), ErrorCode::DimensionMismatch);
    EXPECT_EQ(code_of([&] { idx.insert("d", {1.0F, 1.0F}); }), ErrorCode::BadEmbeddingNorm);
    EXPECT_EQ(code_of([&] { idx.insert("a", {0.0F, 1.0F}); }), ErrorCode::DuplicateId);
    EXPECT_EQ(code_of([&] { dense_search({1.0F}, idx, 1); }), ErrorCode::DimensionMismatch);
    EXPECT_EQ(code_of([&] { dense_search({2.0F, 0.0F}, idx, 1); }), ErrorCode::BadEmbeddingNorm);
    EXPECT_EQ(code_of([&] { idx.remove("zz"); }), ErrorCode::UnknownDocument);
}

TEST(Rrf, MatchesFusionOracle) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t d = 16;
        const std::size_t vocab = 6 + trial % 10;
        const auto docs = random_corpus(rng, 5 + trial % 60, vocab);
        const LexicalIndex lexical = build_lexical(docs);
        DenseIndex dense(d);
        std::vector<std::pair<std::string, Embedding>> vectors;
        for (const auto& doc : docs) {
            vectors.emplace_back(doc.id, testkit::random_unit(rng, d));
            dense.insert(doc.id, vectors.back().second);
        }
        HybridParams p;
        p.top_k_per_channel = 5 + trial % 26;
        p.final_k = 1 + static_cast<std::uint32_t>(trial) % p.top_k_per_channel;
        p.rrf_k = 1 + static_cast<std::uint32_t>(trial) % 80;
        const auto query_terms = random_query(rng, vocab);
        std::string query_text;
        for (const auto& t : query_terms) query_text += t + " ";
        const Embedding qv = testkit::random_unit(rng, d);

        const auto got = hybrid_retrieve(query_text, qv, lexical, dense, p);
        const auto want = oracle::rrf({oracle::bm25_rank(docs, query_terms, p.k1, p.b, p.top_k_per_channel),
                                       oracle::cosine_rank(vectors, qv, p.top_k_per_channel)},
                                      p.rrf_k, p.final_k);
        ASSERT_EQ(got.size(), want.size()) << "trial " << trial;
        for (std::size_t i = 0; i < got.size(); ++i) {
            EXPECT_EQ(got[i].triple_id, want[i].id) << "trial " << trial << " rank " << i;
            EXPECT_NEAR(got[i].fused_score, want[i].score, 1e-12);
            EXPECT_NEAR(got[i].lexical_score, oracle::bm25(docs, query_terms, got[i].triple_id, p.k1, p.b), 1e-9);
            EXPECT_NEAR(got[i].dense_score, dot(qv, *dense.find(got[i].triple_id)), 1e-12);
        }
    }
}

TEST(Rrf, RanksAreOneBasedAndMissingChannelsAreEmpty) {
    LexicalIndex lexical;
    DenseIndex dense(2);
    lexical.insert("a", {"dog"});
    lexical.insert("b", {"cat"});
    dense.insert("a", {0.0F, 1.0F});
    dense.insert("b", {1.0F, 0.0F});
    HybridParams p;
    p.top_k_per_channel = 1;
    p.final_k = 1;
    p.rrf_k = 60;
    const auto got = hybrid_retrieve("dog", {1.0F, 0.0F}, lexical, dense, p);
    // a: lexical rank 1 only; b: dense rank 1 only; equal fused score, id breaks the tie
    ASSERT_EQ(got.size(), 1u);
    EXPECT_EQ(got[0].triple_id, "a");
    EXPECT_EQ(got[0].lexical_rank, 1u);
    EXPECT_FALSE(got[0].dense_rank.has_value());
    EXPECT_DOUBLE_EQ(got[0].fused_score, 1.0 / 61.0);
    EXPECT_DOUBLE_EQ(got[0].dense_score, 0.0);  // true cosine even outside the dense top-k
}

TEST(Rrf, RepeatedQueriesAreIdentical) {
    std::mt19937_64 rng(9);
    const auto docs = random_corpus(rng, 40, 4);  // tiny vocabulary: many ties
    const LexicalIndex lexical = build_lexical(docs);
    DenseIndex dense(8);
    for (const auto& doc : docs) dense.insert(doc.id, deterministic_embed("same text", 8));
    const Embedding q = deterministic_embed("same text", 8);
    const auto first = hybrid_retrieve("w1 w2", q, lexical, dense, HybridParams{});
    for (int i = 0; i < 5; ++i) EXPECT_EQ(hybrid_retrieve("w1 w2", q, lexical, dense, HybridParams{}), first);
    for (std::size_t i = 1; i < first.size(); ++i) {
        EXPECT_TRUE(first[i - 1].fused_score > first[i].fused_score ||
                    (first[i - 1].fused_score == first[i].fused_score && first[i - 1].triple_id < first[i].triple_id));
    }
}

TEST(Rrf, EmptyLexicalQueryFallsBackToDense) {
    LexicalIndex lexical;
    DenseIndex dense(2);
    lexical.insert("a", {"dog"});
    dense.insert("a", {1.0F, 0.0F});
    const auto got = hybrid_retrieve("?!", {1.0F, 0.0F}, lexical, dense, HybridParams{});
    ASSERT_EQ(got.size(), 1u);
    EXPECT_FALSE(got[0].lexical_rank.has_value());
    EXPECT_EQ(got[0].dense_rank, 1u);
}

TEST(WeightedSum, AlphaSelectsChannel) {
    LexicalIndex lexical;
    DenseIndex dense(2);
    lexical.insert("a", {"dog", "dog"});
    lexical.insert("b", {"dog", "cat", "bird", "fish"});
    dense.insert("a", {0.0F, 1.0F});
    dense.insert("b", {1.0F, 0.0F});
    HybridParams p;
    p.fusion = FusionMode::WeightedSum;
    p.alpha = 1.0;
    auto got = hybrid_retrieve("dog", {1.0F, 0.0F}, lexical, dense, p);
    ASSERT_FALSE(got.empty());
    EXPECT_EQ(got[0].triple_id, "a");
    p.alpha = 0.0;
    got = hybrid_retrieve("dog", {1.0F, 0.0F}, lexical, dense, p);
    ASSERT_FALSE(got.empty());
    EXPECT_EQ(got[0].triple_id, "b");
    for (const auto& e : got) EXPECT_GT(e.fused_score, 0.0);
}

TEST(HybridIndex, ScopesToConversationAndKeepsChannelsInSync) {
    HybridIndex idx(16);
    const Triple a = testkit::make_triple("Alice", "adopted", "a dog", "c1");
    const Triple b = testkit::make_triple("Bob", "adopted", "a cat", "c2");
    idx.insert(a);
    idx.insert(b);
    EXPECT_EQ(idx.size(), 2u);
    const QueryEmbedder embed = [](std::string_view t) { return deterministic_embed(t, 16); };
    const auto all = idx.search("adopted", embed, HybridParams{});
    EXPECT_EQ(all.size(), 2u);
    const auto scoped = idx.search("adopted", embed, HybridParams{}, std::string("c2"));
    ASSERT_EQ(scoped.size(), 1u);
    EXPECT_EQ(scoped[0].triple_id, b.id);
    EXPECT_TRUE(idx.search("adopted", embed, HybridParams{}, std::string("nope")).empty());

    EXPECT_EQ(code_of([&] { idx.insert(a); }), ErrorCode::DuplicateId);
    Triple bad = testkit::make_triple("x", "y", "z", "c1", "s1", 0, "2023-05-08T13:56:00Z", 8);
    EXPECT_EQ(code_of([&] { idx.insert(bad); }), ErrorCode::DimensionMismatch);
    bad.embedding.reset();
    EXPECT_EQ(code_of([&] { idx.insert(bad); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(idx.lexical_snapshot().size(), 2u);
    EXPECT_EQ(idx.dense_snapshot().size(), 2u);

    idx.remove(a.id);
    EXPECT_EQ(idx.lexical_snapshot().size(), 1u);
    EXPECT_EQ(idx.dense_snapshot().size(), 1u);
    EXPECT_EQ(code_of([&] { idx.remove(a.id); }), ErrorCode::UnknownDocument);
    idx.clear();
    EXPECT_EQ(idx.size(), 0u);
    EXPECT_EQ(idx.vocabulary_size(), 0u);
}
