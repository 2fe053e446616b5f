#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "memlayer/model.hpp"

namespace memlayer {

/// Field order follows the on-disk schema:
/// {id, subject, predicate, object, conversation_id, session_id,
///  source_message_index, timestamp, embedding}
nlohmann::ordered_json triple_to_json(const Triple& t);

/// {conversation_id, session_id, text, timestamp}
nlohmann::ordered_json summary_to_json(const Summary& s);

/// Parses and validates a stored triple; the stored id must equal the
/// recomputed content hash. Throws Error(SchemaError | EmptyField | ...).
Triple triple_from_json(const nlohmann::json& j);

Summary summary_from_json(const nlohmann::json& j);

/// Reads a required member, throwing Error(SchemaError) that names `path`.
const nlohmann::json& require_member(const nlohmann::json& obj, std::string_view key,
                                     const std::string& path);
std::string require_string(const nlohmann::json& obj, std::string_view key, const std::string& path);

} // namespace memlayer
