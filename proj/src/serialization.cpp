#include "memlayer/serialization.hpp"

#include "memlayer/error.hpp"

namespace memlayer {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

ordered_json triple_to_json(const Triple& t) {
    ordered_json j;
    j["id"] = t.id;
    j["subject"] = t.subject;
    j["predicate"] = t.predicate;
    j["object"] = t.object;
    j["conversation_id"] = t.conversation_id;
    j["session_id"] = t.session_id;
    j["source_message_index"] = t.source_message_index;
    j["timestamp"] = t.timestamp;
    j["embedding"] = t.embedding ? ordered_json(*t.embedding) : ordered_json(nullptr);
    return j;
}

ordered_json summary_to_json(const Summary& s) {
    ordered_json j;
    j["conversation_id"] = s.conversation_id;
    j["session_id"] = s.session_id;
    j["text"] = s.text;
    j["timestamp"] = s.timestamp;
    return j;
}

const json& require_member(const json& obj, std::string_view key, const std::string& path) {
    if (!obj.is_object()) throw Error(ErrorCode::SchemaError, path + ": expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) throw Error(ErrorCode::SchemaError, path + "." + std::string(key) + ": missing");
    return *it;
}

std::string require_string(const json& obj, std::string_view key, const std::string& path) {
    const json& v = require_member(obj, key, path);
    if (!v.is_string()) {
        throw Error(ErrorCode::SchemaError, path + "." + std::string(key) + ": expected a string");
    }
    return v.get<std::string>();
}

Triple triple_from_json(const json& j) {
    RawTriple raw;
    raw.subject = require_string(j, "subject", "triple");
    raw.predicate = require_string(j, "predicate", "triple");
    raw.object = require_string(j, "object", "triple");
    raw.conversation_id = require_string(j, "conversation_id", "triple");
    raw.session_id = require_string(j, "session_id", "triple");
    raw.timestamp = require_string(j, "timestamp", "triple");
    const json& idx = require_member(j, "source_message_index", "triple");
    if (!idx.is_number_integer()) {
        throw Error(ErrorCode::SchemaError, "triple.source_message_index: expected an integer");
    }
    raw.source_message_index = idx.get<std::int64_t>();
    const json& emb = require_member(j, "embedding", "triple");
    if (emb.is_array()) {
        Embedding v;
        v.reserve(emb.size());
        for (const auto& x : emb) {
            if (!x.is_number()) throw Error(ErrorCode::SchemaError, "triple.embedding: non-numeric value");
            v.push_back(x.get<float>());
        }
        raw.embedding = std::move(v);
    } else if (!emb.is_null()) {
        throw Error(ErrorCode::SchemaError, "triple.embedding: expected an array or null");
    }
    Triple t = validate_triple(raw);
    const std::string stored_id = require_string(j, "id", "triple");
    if (stored_id != t.id) {
        throw Error(ErrorCode::SchemaError, "triple.id: " + stored_id + " does not match content hash " + t.id);
    }
    return t;
}

Summary summary_from_json(const json& j) {
    Summary s;
    s.conversation_id = require_string(j, "conversation_id", "summary");
    s.session_id = require_string(j, "session_id", "summary");
    s.text = require_string(j, "text", "summary");
    s.timestamp = require_string(j, "timestamp", "summary");
    return validate_summary(std::move(s));
}

} // namespace memlayer
