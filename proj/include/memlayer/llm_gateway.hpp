#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "memlayer/model.hpp"

namespace memlayer {

enum class Role { System, User, Assistant };

std::string_view to_string(Role role);

struct ChatMessage {
    Role role = Role::User;
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
};

struct BackendConfig {
    std::string base_url = "https://api.openai.com/v1";
    std::string api_key;
    std::string chat_model = "gpt-4.1-mini";
    std::string embed_model = "text-embedding-3-small";
    std::chrono::milliseconds timeout{60000};
    int max_retries = 2;
    std::chrono::milliseconds retry_backoff{500};  // doubled after every retry
    std::size_t max_in_flight = 4;

    /// Overlays MEMLAYER_API_KEY, MEMLAYER_BASE_URL, MEMLAYER_CHAT_MODEL and
    /// MEMLAYER_EMBED_MODEL onto `base` when they are set.
    static BackendConfig from_env(BackendConfig base);
    static BackendConfig from_env() { return from_env(BackendConfig{}); }

    /// Throws Error(InvalidArgument) when timeout <= 0, max_retries < 0 or max_in_flight == 0.
    void validate() const;
};

/// Something that can answer chat requests and embed text. Implementations
/// report failures as Error(TransportError | ProtocolError | FixtureMissing)
/// or RemoteError; retries and normalization are the gateway's job.
class ModelBackend {
public:
    virtual ~ModelBackend() = default;
    virtual std::string name() const = 0;
    virtual std::string complete(const ChatRequest& req) = 0;
    virtual Embedding embed(std::string_view text) = 0;
};

/// OpenAI-compatible HTTP(S) backend: POST {base_url}/chat/completions and
/// POST {base_url}/embeddings.
class OpenAiBackend final : public ModelBackend {
public:
    explicit OpenAiBackend(BackendConfig cfg);

    std::string name() const override { return "openai-compatible"; }
    std::string complete(const ChatRequest& req) override;
    Embedding embed(std::string_view text) override;

private:
    std::string post_json(const std::string& endpoint, const std::string& body);

    BackendConfig cfg_;
    std::string scheme_host_port_;
    std::string path_prefix_;
};

/// Stable hash of the rendered prompt: SHA-256 of the compact JSON array
/// [[role, content], ...]. Model name and temperature are not part of it.
std::string prompt_hash(const std::vector<ChatMessage>& messages);

/// Offline backend: completions come from a fixtures table keyed by
/// prompt_hash(), embeddings from deterministic_embed().
class ScriptedBackend final : public ModelBackend {
public:
    explicit ScriptedBackend(std::size_t dimension = kDefaultEmbeddingDimension);

    /// Reads a JSONL file of {"prompt_hash": ..., "completion": ...} records.
    /// Later records override earlier ones with the same hash.
    static std::shared_ptr<ScriptedBackend> from_fixtures(const std::filesystem::path& path,
                                                          std::size_t dimension = kDefaultEmbeddingDimension);
    /// Adds the records of a fixtures file to this backend.
    void load(const std::filesystem::path& path);

    void add_fixture(std::string hash, std::string completion);
    void add_fixture(const std::vector<ChatMessage>& messages, std::string completion) {
        add_fixture(prompt_hash(messages), std::move(completion));
    }
    /// Writes all fixtures sorted by hash.
    void save(const std::filesystem::path& path) const;
    std::size_t fixture_count() const;

    std::string name() const override { return "scripted"; }
    std::string complete(const ChatRequest& req) override;
    Embedding embed(std::string_view text) override;

private:
    std::size_t dimension_;
    mutable std::mutex mu_;
    std::map<std::string, std::string> fixtures_;
};

/// Signed feature hashing of the character 3-grams of the lowercased text into
/// `dimension` buckets, L2-normalized. Texts shorter than three bytes hash as a
/// single gram. Throws Error(EmptyInput) for empty text, Error(InvalidArgument)
/// for dimension < 8.
Embedding deterministic_embed(std::string_view text, std::size_t dimension);

/// Single choke-point for inference: retries transport failures (and 5xx),
/// bounds in-flight calls and L2-normalizes every embedding it returns.
class Gateway {
public:
    Gateway(std::shared_ptr<ModelBackend> backend, BackendConfig cfg);

    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    std::string chat_complete(const ChatRequest& req);

    /// Convenience: builds a request for the configured chat model at temperature 0.
    std::string chat(std::vector<ChatMessage> messages);

    Embedding embed_text(std::string_view text);

    const BackendConfig& config() const { return cfg_; }
    const ModelBackend& backend() const { return *backend_; }
    std::size_t chat_calls() const { return chat_calls_.load(); }
    std::size_t embed_calls() const { return embed_calls_.load(); }

private:
    template <typename F>
    auto with_retries(F&& call) -> decltype(call());

    std::shared_ptr<ModelBackend> backend_;
    BackendConfig cfg_;
    std::counting_semaphore<1024> in_flight_;
    std::atomic<std::size_t> chat_calls_{0};
    std::atomic<std::size_t> embed_calls_{0};
};

} // namespace memlayer
