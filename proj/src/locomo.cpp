#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "memlayer/error.hpp"
#include "memlayer/eval_harness.hpp"

namespace memlayer {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

[[noreturn]] void schema_error(const std::string& path, const std::string& what) {
    throw Error(ErrorCode::SchemaError, path + ": " + what);
}

const json& member(const json& obj, const char* key, const std::string& path) {
    if (!obj.is_object()) schema_error(path, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) schema_error(path + "." + key, "missing");
    return *it;
}

std::string nonempty_string(const json& obj, const char* key, const std::string& path) {
    const json& v = member(obj, key, path);
    if (!v.is_string()) schema_error(path + "." + key, "expected a string");
    std::string s = trim(v.get<std::string>());
    if (s.empty()) schema_error(path + "." + key, "must not be empty");
    return s;
}

// Answers are sometimes numbers (years, counts) in the released data.
std::string answer_text(const json& v, const std::string& path) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number()) return v.dump();
    schema_error(path, "expected a string or number");
}

int category_value(const json& v, const std::string& path) {
    if (!v.is_number_integer()) schema_error(path, "expected an integer");
    const auto c = v.get<std::int64_t>();
    if (c < kMinCategory || c > kMaxCategory) {
        schema_error(path, "category " + std::to_string(c) + " is outside 1..5");
    }
    return static_cast<int>(c);
}

json parse_document(std::string_view text) {
    if (trim(text).empty()) throw Error(ErrorCode::SchemaError, "$: document is empty");
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw Error(ErrorCode::SchemaError, "$: not valid JSON");
    return doc;
}

std::string read_file(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(ErrorCode::NotFound, "cannot open " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void check_qa_links(const Dataset& d) {
    std::set<std::string> ids;
    for (const auto& c : d.conversations) ids.insert(c.conversation_id);
    for (std::size_t i = 0; i < d.qa.size(); ++i) {
        if (!ids.count(d.qa[i].conversation_id)) {
            schema_error("$.qa[" + std::to_string(i) + "].conversation_id",
                         "unknown conversation '" + d.qa[i].conversation_id + "'");
        }
    }
}

} // namespace

std::size_t Dataset::session_count() const {
    std::size_t n = 0;
    for (const auto& c : conversations) n += c.sessions.size();
    return n;
}

Dataset parse_locomo(std::string_view text) {
    const json doc = parse_document(text);
    if (!doc.is_object()) schema_error("$", "expected an object");
    Dataset out;

    const json& convs = member(doc, "conversations", "$");
    if (!convs.is_array()) schema_error("$.conversations", "expected an array");
    std::set<std::string> conv_ids;
    for (std::size_t ci = 0; ci < convs.size(); ++ci) {
        const std::string cpath = "$.conversations[" + std::to_string(ci) + "]";
        Conversation conv;
        conv.conversation_id = nonempty_string(convs[ci], "conversation_id", cpath);
        if (!conv_ids.insert(conv.conversation_id).second) {
            schema_error(cpath + ".conversation_id", "duplicate id '" + conv.conversation_id + "'");
        }
        const json& sessions = member(convs[ci], "sessions", cpath);
        if (!sessions.is_array()) schema_error(cpath + ".sessions", "expected an array");
        std::set<std::string> session_ids;
        for (std::size_t si = 0; si < sessions.size(); ++si) {
            const std::string spath = cpath + ".sessions[" + std::to_string(si) + "]";
            SessionTranscript s;
            s.conversation_id = conv.conversation_id;
            s.session_id = nonempty_string(sessions[si], "session_id", spath);
            if (!session_ids.insert(s.session_id).second) {
                schema_error(spath + ".session_id", "duplicate id '" + s.session_id + "'");
            }
            const std::string raw_ts = nonempty_string(sessions[si], "timestamp", spath);
            auto ts = normalize_timestamp(raw_ts);
            if (!ts) schema_error(spath + ".timestamp", "unparseable timestamp '" + raw_ts + "'");
            s.timestamp = *ts;
            const json& turns = member(sessions[si], "turns", spath);
            if (!turns.is_array() || turns.empty()) schema_error(spath + ".turns", "expected a non-empty array");
            for (std::size_t ti = 0; ti < turns.size(); ++ti) {
                const std::string tpath = spath + ".turns[" + std::to_string(ti) + "]";
                const json& text = member(turns[ti], "text", tpath);
                if (!text.is_string()) schema_error(tpath + ".text", "expected a string");
                s.turns.push_back({nonempty_string(turns[ti], "speaker", tpath), text.get<std::string>()});
            }
            conv.sessions.push_back(std::move(s));
        }
        out.conversations.push_back(std::move(conv));
    }

    if (auto qa = doc.find("qa"); qa != doc.end()) {
        if (!qa->is_array()) schema_error("$.qa", "expected an array");
        for (std::size_t i = 0; i < qa->size(); ++i) {
            const std::string qpath = "$.qa[" + std::to_string(i) + "]";
            const json& q = (*qa)[i];
            QAItem item;
            item.conversation_id = nonempty_string(q, "conversation_id", qpath);
            item.question = nonempty_string(q, "question", qpath);
            item.gold_answer = answer_text(member(q, "answer", qpath), qpath + ".answer");
            item.category = category_value(member(q, "category", qpath), qpath + ".category");
            out.qa.push_back(std::move(item));
        }
    }
    check_qa_links(out);
    return out;
}

Dataset load_locomo(const std::filesystem::path& file) { return parse_locomo(read_file(file)); }

std::optional<std::string> parse_locomo_datetime(std::string_view text) {
    static const std::regex re(R"(^\s*(\d{1,2}):(\d{2})\s*(am|pm)\s+on\s+(\d{1,2})\s+([a-z]+),?\s+(\d{4})\s*$)",
                               std::regex::icase);
    static const std::array<std::string_view, 12> months = {"jan", "feb", "mar", "apr", "may", "jun",
                                                           "jul", "aug", "sep", "oct", "nov", "dec"};
    std::cmatch m;
    const std::string s(text);
    if (!std::regex_match(s.c_str(), m, re)) return std::nullopt;
    int hour = std::stoi(m[1].str());
    const int minute = std::stoi(m[2].str());
    std::string ampm = m[3].str();
    std::transform(ampm.begin(), ampm.end(), ampm.begin(), [](unsigned char c) { return std::tolower(c); });
    if (hour < 1 || hour > 12 || minute > 59) return std::nullopt;
    if (ampm == "pm" && hour != 12) hour += 12;
    if (ampm == "am" && hour == 12) hour = 0;
    std::string month = m[5].str();
    std::transform(month.begin(), month.end(), month.begin(), [](unsigned char c) { return std::tolower(c); });
    if (month.size() < 3) return std::nullopt;
    auto it = std::find(months.begin(), months.end(), std::string_view(month).substr(0, 3));
    if (it == months.end()) return std::nullopt;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s-%02d-%02d %02d:%02d", m[6].str().c_str(),
                  static_cast<int>(it - months.begin()) + 1, std::stoi(m[4].str()), hour, minute);
    return normalize_timestamp(buf);
}

Dataset parse_public_locomo(std::string_view text) {
    const json doc = parse_document(text);
    if (!doc.is_array()) schema_error("$", "expected an array of samples");
    static const std::regex session_key(R"(^session_(\d+)$)");
    Dataset out;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const std::string path = "$[" + std::to_string(i) + "]";
        const json& sample = doc[i];
        Conversation conv;
        if (sample.is_object() && sample.contains("sample_id") && sample["sample_id"].is_string()) {
            conv.conversation_id = sample["sample_id"].get<std::string>();
        } else {
            conv.conversation_id = "conv-" + std::to_string(i);
        }
        const json& c = member(sample, "conversation", path);
        if (!c.is_object()) schema_error(path + ".conversation", "expected an object");
        std::vector<std::pair<int, std::string>> keys;
        for (auto it = c.begin(); it != c.end(); ++it) {
            std::smatch m;
            const std::string& k = it.key();
            if (std::regex_match(k, m, session_key) && it->is_array()) keys.emplace_back(std::stoi(m[1].str()), k);
        }
        std::sort(keys.begin(), keys.end());
        for (const auto& [n, key] : keys) {
            const std::string spath = path + ".conversation." + key;
            const json& turns = c[key];
            if (turns.empty()) continue;
            SessionTranscript s;
            s.conversation_id = conv.conversation_id;
            s.session_id = key;
            const std::string dt_key = key + "_date_time";
            const json& dt = member(c, dt_key.c_str(), path + ".conversation");
            if (!dt.is_string()) schema_error(path + ".conversation." + dt_key, "expected a string");
            auto ts = parse_locomo_datetime(dt.get<std::string>());
            if (!ts) ts = normalize_timestamp(dt.get<std::string>());
            if (!ts) schema_error(path + ".conversation." + dt_key, "unparseable date '" + dt.get<std::string>() + "'");
            s.timestamp = *ts;
            for (std::size_t t = 0; t < turns.size(); ++t) {
                const std::string tpath = spath + "[" + std::to_string(t) + "]";
                const json& text_field = member(turns[t], "text", tpath);
                if (!text_field.is_string()) schema_error(tpath + ".text", "expected a string");
                s.turns.push_back({nonempty_string(turns[t], "speaker", tpath), text_field.get<std::string>()});
            }
            conv.sessions.push_back(std::move(s));
        }
        if (auto qa = sample.find("qa"); qa != sample.end()) {
            if (!qa->is_array()) schema_error(path + ".qa", "expected an array");
            for (std::size_t q = 0; q < qa->size(); ++q) {
                const std::string qpath = path + ".qa[" + std::to_string(q) + "]";
                const json& entry = (*qa)[q];
                QAItem item;
                item.conversation_id = conv.conversation_id;
                item.question = nonempty_string(entry, "question", qpath);
                item.category = category_value(member(entry, "category", qpath), qpath + ".category");
                if (entry.contains("answer")) {
                    item.gold_answer = answer_text(entry["answer"], qpath + ".answer");
                } else if (entry.contains("adversarial_answer")) {
                    item.gold_answer = answer_text(entry["adversarial_answer"], qpath + ".adversarial_answer");
                } else {
                    schema_error(qpath + ".answer", "missing");
                }
                out.qa.push_back(std::move(item));
            }
        }
        out.conversations.push_back(std::move(conv));
    }
    return out;
}

Dataset load_dataset(const std::filesystem::path& file) {
    const std::string text = read_file(file);
    const auto first = std::find_if(text.begin(), text.end(), [](unsigned char c) { return !std::isspace(c); });
    if (first != text.end() && *first == '[') return parse_public_locomo(text);
    return parse_locomo(text);
}

std::string dataset_to_json(const Dataset& dataset) {
    ordered_json doc;
    doc["conversations"] = ordered_json::array();
    for (const auto& c : dataset.conversations) {
        ordered_json conv;
        conv["conversation_id"] = c.conversation_id;
        conv["sessions"] = ordered_json::array();
        for (const auto& s : c.sessions) {
            ordered_json sj;
            sj["session_id"] = s.session_id;
            sj["timestamp"] = s.timestamp;
            sj["turns"] = ordered_json::array();
            for (const auto& t : s.turns) sj["turns"].push_back({{"speaker", t.speaker}, {"text", t.text}});
            conv["sessions"].push_back(std::move(sj));
        }
        doc["conversations"].push_back(std::move(conv));
    }
    doc["qa"] = ordered_json::array();
    for (const auto& q : dataset.qa) {
        ordered_json qj;
        qj["conversation_id"] = q.conversation_id;
        qj["question"] = q.question;
        qj["answer"] = q.gold_answer;
        qj["category"] = q.category;
        doc["qa"].push_back(std::move(qj));
    }
    return doc.dump(2) + "\n";
}

std::map<int, std::size_t> category_counts(const std::vector<QAItem>& qa) {
    std::map<int, std::size_t> counts;
    for (const auto& q : qa) ++counts[q.category];
    return counts;
}

std::vector<QAItem> filter_eval_set(const std::vector<QAItem>& qa) {
    std::vector<QAItem> out;
    std::copy_if(qa.begin(), qa.end(), std::back_inserter(out),
                 [](const QAItem& q) { return q.category != kAdversarialCategory; });
    return out;
}

} // namespace memlayer
