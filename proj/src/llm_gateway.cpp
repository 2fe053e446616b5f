#include "memlayer/llm_gateway.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "memlayer/error.hpp"
#include "memlayer/hash.hpp"

namespace memlayer {

using json = nlohmann::json;

std::string_view to_string(Role role) {
    switch (role) {
        case Role::System:    return "system";
        case Role::User:      return "user";
        case Role::Assistant: return "assistant";
    }
    return "user";
}

BackendConfig BackendConfig::from_env(BackendConfig base) {
    auto overlay = [](const char* var, std::string& field) {
        if (const char* v = std::getenv(var); v != nullptr && *v != '\0') field = v;
    };
    overlay("MEMLAYER_API_KEY", base.api_key);
    overlay("MEMLAYER_BASE_URL", base.base_url);
    overlay("MEMLAYER_CHAT_MODEL", base.chat_model);
    overlay("MEMLAYER_EMBED_MODEL", base.embed_model);
    return base;
}

void BackendConfig::validate() const {
    if (timeout.count() <= 0) throw Error(ErrorCode::InvalidArgument, "timeout must be positive");
    if (max_retries < 0) throw Error(ErrorCode::InvalidArgument, "max_retries must be >= 0");
    if (max_in_flight == 0 || max_in_flight > 1024) {
        throw Error(ErrorCode::InvalidArgument, "max_in_flight must be in [1, 1024]");
    }
}

// ---------------------------------------------------------------------------
// OpenAI-compatible backend

OpenAiBackend::OpenAiBackend(BackendConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const auto scheme_end = cfg_.base_url.find("://");
    if (scheme_end == std::string::npos) {
        throw Error(ErrorCode::InvalidArgument, "base_url needs a scheme: " + cfg_.base_url);
    }
    const auto path_start = cfg_.base_url.find('/', scheme_end + 3);
    scheme_host_port_ = cfg_.base_url.substr(0, path_start);
    path_prefix_ = path_start == std::string::npos ? "" : cfg_.base_url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

std::string OpenAiBackend::post_json(const std::string& endpoint, const std::string& body) {
    httplib::Client client(scheme_host_port_);
    if (!client.is_valid()) {
        throw Error(ErrorCode::TransportError, "unsupported endpoint " + scheme_host_port_);
    }
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);

    auto res = client.Post(path_prefix_ + endpoint, headers, body, "application/json");
    if (!res) {
        throw Error(ErrorCode::TransportError,
                    "POST " + path_prefix_ + endpoint + " failed: " + httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) throw RemoteError(res->status, res->body);
    return res->body;
}

std::string OpenAiBackend::complete(const ChatRequest& req) {
    json messages = json::array();
    for (const auto& m : req.messages) {
        messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    }
    const json body = {{"model", req.model.empty() ? cfg_.chat_model : req.model},
                       {"messages", std::move(messages)},
                       {"temperature", req.temperature}};
    const std::string raw = post_json("/chat/completions", body.dump());
    json parsed = json::parse(raw, nullptr, false);
    if (parsed.is_discarded()) throw Error(ErrorCode::ProtocolError, "response is not JSON");
    const auto choices = parsed.find("choices");
    if (choices == parsed.end() || !choices->is_array() || choices->empty()) {
        throw Error(ErrorCode::ProtocolError, "response has no choices");
    }
    const json& first = (*choices)[0];
    if (!first.contains("message") || !first["message"].is_object() ||
        !first["message"].contains("content") || !first["message"]["content"].is_string()) {
        throw Error(ErrorCode::ProtocolError, "choice has no message content");
    }
    return first["message"]["content"].get<std::string>();
}

Embedding OpenAiBackend::embed(std::string_view text) {
    const json body = {{"model", cfg_.embed_model}, {"input", std::string(text)}};
    const std::string raw = post_json("/embeddings", body.dump());
    json parsed = json::parse(raw, nullptr, false);
    if (parsed.is_discarded()) throw Error(ErrorCode::ProtocolError, "response is not JSON");
    const auto data = parsed.find("data");
    if (data == parsed.end() || !data->is_array() || data->empty() ||
        !(*data)[0].contains("embedding") || !(*data)[0]["embedding"].is_array()) {
        throw Error(ErrorCode::ProtocolError, "response has no embedding");
    }
    Embedding out;
    for (const auto& x : (*data)[0]["embedding"]) {
        if (!x.is_number()) throw Error(ErrorCode::ProtocolError, "non-numeric embedding value");
        out.push_back(x.get<float>());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Scripted backend

std::string prompt_hash(const std::vector<ChatMessage>& messages) {
    json arr = json::array();
    for (const auto& m : messages) arr.push_back(json::array({to_string(m.role), m.content}));
    return sha256_hex(arr.dump());
}

ScriptedBackend::ScriptedBackend(std::size_t dimension) : dimension_(dimension) {}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_fixtures(const std::filesystem::path& path,
                                                                std::size_t dimension) {
    auto backend = std::make_shared<ScriptedBackend>(dimension);
    backend->load(path);
    return backend;
}

void ScriptedBackend::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::NotFound, "cannot open fixtures " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        json rec = json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object() || !rec.contains("prompt_hash") ||
            !rec.contains("completion") || !rec["prompt_hash"].is_string() ||
            !rec["completion"].is_string()) {
            throw Error(ErrorCode::SchemaError,
                        path.string() + ":" + std::to_string(lineno) + ": bad fixture record");
        }
        add_fixture(rec["prompt_hash"].get<std::string>(), rec["completion"].get<std::string>());
    }
}

void ScriptedBackend::add_fixture(std::string hash, std::string completion) {
    std::lock_guard lock(mu_);
    fixtures_[std::move(hash)] = std::move(completion);
}

void ScriptedBackend::save(const std::filesystem::path& path) const {
    std::lock_guard lock(mu_);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    for (const auto& [hash, completion] : fixtures_) {
        out << json{{"prompt_hash", hash}, {"completion", completion}}.dump() << '\n';
    }
}

std::size_t ScriptedBackend::fixture_count() const {
    std::lock_guard lock(mu_);
    return fixtures_.size();
}

std::string ScriptedBackend::complete(const ChatRequest& req) {
    const std::string hash = prompt_hash(req.messages);
    std::lock_guard lock(mu_);
    auto it = fixtures_.find(hash);
    if (it == fixtures_.end()) {
        throw Error(ErrorCode::FixtureMissing, "no scripted completion for prompt " + hash);
    }
    return it->second;
}

Embedding ScriptedBackend::embed(std::string_view text) {
    return deterministic_embed(text, dimension_);
}

Embedding deterministic_embed(std::string_view text, std::size_t dimension) {
    if (text.empty()) throw Error(ErrorCode::EmptyInput, "cannot embed empty text");
    if (dimension < 8) throw Error(ErrorCode::InvalidArgument, "dimension must be >= 8");
    std::string lowered(text);
    std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    std::vector<double> acc(dimension, 0.0);
    auto add_gram = [&](std::string_view gram) {
        const std::uint64_t h = fnv1a64(gram);
        const double sign = ((h >> 32) & 1U) != 0 ? -1.0 : 1.0;
        acc[h % dimension] += sign;
    };
    if (lowered.size() < 3) {
        add_gram(lowered);
    } else {
        for (std::size_t i = 0; i + 3 <= lowered.size(); ++i) {
            add_gram(std::string_view(lowered).substr(i, 3));
        }
    }
    double norm = 0.0;
    for (double x : acc) norm += x * x;
    norm = std::sqrt(norm);
    Embedding out(dimension, 0.0F);
    if (norm == 0.0) {
        // Every gram cancelled out against a colliding gram of opposite sign.
        out[fnv1a64(lowered) % dimension] = 1.0F;
        return out;
    }
    for (std::size_t i = 0; i < dimension; ++i) out[i] = static_cast<float>(acc[i] / norm);
    return out;
}

// ---------------------------------------------------------------------------
// Gateway

Gateway::Gateway(std::shared_ptr<ModelBackend> backend, BackendConfig cfg)
    : backend_(std::move(backend)), cfg_(std::move(cfg)),
      in_flight_(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(cfg_.max_in_flight, 1, 1024))) {
    cfg_.validate();
    if (!backend_) throw Error(ErrorCode::InvalidArgument, "gateway needs a backend");
}

template <typename F>
auto Gateway::with_retries(F&& call) -> decltype(call()) {
    struct Permit {
        std::counting_semaphore<1024>& sem;
        explicit Permit(std::counting_semaphore<1024>& s) : sem(s) { sem.acquire(); }
        ~Permit() { sem.release(); }
    };
    auto backoff = cfg_.retry_backoff;
    for (int attempt = 0;; ++attempt) {
        try {
            Permit permit(in_flight_);
            return call();
        } catch (const RemoteError& e) {
            if (e.status() < 500 || attempt >= cfg_.max_retries) throw;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::TransportError || attempt >= cfg_.max_retries) throw;
        }
        if (backoff.count() > 0) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }
}

std::string Gateway::chat_complete(const ChatRequest& req) {
    if (req.messages.empty()) throw Error(ErrorCode::InvalidArgument, "chat request has no messages");
    if (req.temperature < 0.0) throw Error(ErrorCode::InvalidArgument, "temperature must be >= 0");
    ++chat_calls_;
    return with_retries([&] { return backend_->complete(req); });
}

std::string Gateway::chat(std::vector<ChatMessage> messages) {
    ChatRequest req;
    req.model = cfg_.chat_model;
    req.messages = std::move(messages);
    return chat_complete(req);
}

Embedding Gateway::embed_text(std::string_view text) {
    if (text.empty()) throw Error(ErrorCode::EmptyInput, "cannot embed empty text");
    ++embed_calls_;
    Embedding raw = with_retries([&] { return backend_->embed(text); });
    if (raw.empty()) throw Error(ErrorCode::ProtocolError, "backend returned an empty embedding");
    try {
        return l2_normalize(raw);
    } catch (const Error&) {
        throw Error(ErrorCode::ProtocolError, "backend returned a zero embedding");
    }
}

} // namespace memlayer
