#include <gtest/gtest.h>

#include <set>

#include "memlayer/error.hpp"
#include "memlayer/hash.hpp"
#include "memlayer/prompts.hpp"

using namespace memlayer;

TEST(Hash, Sha256KnownVectors) {
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Hash, IncrementalMatchesOneShotAndCopiesAreIndependent) {
    Sha256 h;
    h.update("ab");
    Sha256 copy = h;
    h.update("c");
    EXPECT_EQ(h.hex_digest(), sha256_hex("abc"));
    EXPECT_EQ(h.hex_digest(), sha256_hex("abc"));  // digest does not consume state
    EXPECT_EQ(copy.hex_digest(), sha256_hex("ab"));
}

TEST(Hash, Fnv1aKnownVectors) {
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
    EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(Prompts, ResourceChecksumsAreFrozen) {
    const std::pair<const char*, const char*> expected[] = {
        {"answer_prompt.v1.txt", "114e412f49a9f706d8696beb7af90a0e49afa7f71821c02a74bd5e3e930046a2"},
        {"judge_prompt.v1.txt", "464b53eb7fef153222c2d90c19616ba972c094fcdaf3328690b064e84073df1f"},
        {"extraction_prompt.v1.txt", "5129a9861cb54dd7abfcb55903cefa5883a240b501f40209c96da68f2e4a920d"},
        {"extraction_repair_prompt.v1.txt", "0598b335c34f0a1e8d24cdd126130b00cdb73888567243c7c817f8eef9e301c2"},
        {"judge_repair_prompt.v1.txt", "2869953fdb4fad56afe07d683d9ac08ca0890dc60f7cd695666a7fadda5369ea"},
        {"summary_prompt.v1.txt", "d6dbd1cf744a0c98b23566237a236e049cc055d1f7b10a334279f974e21cab89"},
    };
    for (const auto& [name, sha] : expected) EXPECT_EQ(sha256_hex(prompts::get(name)), sha) << name;
    EXPECT_EQ(prompts::all().size(), std::size(expected));
    EXPECT_EQ(prompts::answer_template().size(), 2245u);
    EXPECT_EQ(prompts::judge_template().size(), 1653u);
}

TEST(Prompts, UnknownResourceIsNotFound) {
    try {
        prompts::get("nope.txt");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NotFound);
    }
}

TEST(Prompts, TemplatesCarryTheirPlaceholders) {
    const std::string_view answer = prompts::answer_template();
    EXPECT_NE(answer.find("{{memories}}"), std::string_view::npos);
    EXPECT_NE(answer.find("{{question}}"), std::string_view::npos);
    const std::string_view judge = prompts::judge_template();
    for (const char* p : {"{question}", "{gold_answer}", "{generated_answer}"}) {
        EXPECT_NE(judge.find(p), std::string_view::npos) << p;
    }
    for (const char* p : {"{{conversation_id}}", "{{session_id}}", "{{timestamp}}", "{{transcript}}"}) {
        EXPECT_NE(prompts::extraction_template().find(p), std::string_view::npos) << p;
        EXPECT_NE(prompts::summary_template().find(p), std::string_view::npos) << p;
    }
}

TEST(Substitute, SinglePassAndNoRescan) {
    EXPECT_EQ(prompts::substitute("a {x} b {y}", {{"{x}", "1"}, {"{y}", "2"}}), "a 1 b 2");
    // a value that looks like a placeholder is inserted literally
    EXPECT_EQ(prompts::substitute("{x}{y}", {{"{x}", "{y}"}, {"{y}", "Z"}}), "{y}Z");
    EXPECT_EQ(prompts::substitute("{x} {x}", {{"{x}", "q"}}), "q q");
    EXPECT_EQ(prompts::substitute("no placeholders", {{"{x}", "q"}}), "no placeholders");
}

TEST(Substitute, LongestMatchWins) {
    EXPECT_EQ(prompts::substitute("{{question}}", {{"{question}", "A"}, {"{{question}}", "B"}}), "B");
}
