#include "memlayer/model.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>

#include "memlayer/error.hpp"
#include "memlayer/hash.hpp"

namespace memlayer {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

// Days since 1970-01-01 for a proleptic Gregorian date (H. Hinnant's algorithm).
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2 ? 1 : 0;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const auto doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y += m <= 2 ? 1 : 0;
}

unsigned days_in_month(std::int64_t y, unsigned m) {
    static constexpr unsigned kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    return m == 2 && leap ? 29 : kDays[m - 1];
}

class Cursor {
public:
    explicit Cursor(std::string_view s) : s_(s) {}

    bool digits(std::size_t n, int& out) {
        if (pos_ + n > s_.size()) return false;
        int v = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const char c = s_[pos_ + i];
            if (!std::isdigit(static_cast<unsigned char>(c))) return false;
            v = v * 10 + (c - '0');
        }
        pos_ += n;
        out = v;
        return true;
    }
    bool eat(char c) {
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }
    char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
    bool done() const { return pos_ == s_.size(); }
    void skip_fraction() {
        if (eat('.') || eat(',')) {
            while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
        }
    }

private:
    std::string_view s_;
    std::size_t pos_ = 0;
};

} // namespace

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

std::optional<std::string> normalize_timestamp(std::string_view text) {
    const std::string t = trim(text);
    Cursor c(t);
    int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
    if (!c.digits(4, year) || !c.eat('-') || !c.digits(2, month) || !c.eat('-') ||
        !c.digits(2, day)) {
        return std::nullopt;
    }
    if (month < 1 || month > 12 || day < 1 ||
        static_cast<unsigned>(day) > days_in_month(year, static_cast<unsigned>(month))) {
        return std::nullopt;
    }
    int offset_minutes = 0;
    if (!c.done()) {
        if (!c.eat('T') && !c.eat(' ')) return std::nullopt;
        if (!c.digits(2, hour) || !c.eat(':') || !c.digits(2, minute)) return std::nullopt;
        if (c.eat(':')) {
            if (!c.digits(2, second)) return std::nullopt;
            c.skip_fraction();
        }
        if (hour > 23 || minute > 59 || second > 60) return std::nullopt;
        if (c.eat('Z') || c.eat('z')) {
        } else if (c.peek() == '+' || c.peek() == '-') {
            const int sign = c.eat('-') ? -1 : (c.eat('+'), 1);
            int oh = 0, om = 0;
            if (!c.digits(2, oh)) return std::nullopt;
            c.eat(':');
            if (!c.done() && !c.digits(2, om)) return std::nullopt;
            offset_minutes = sign * (oh * 60 + om);
        }
        if (!c.done()) return std::nullopt;
    }
    std::int64_t secs = days_from_civil(year, static_cast<unsigned>(month),
                                        static_cast<unsigned>(day)) * 86400 +
                        hour * 3600 + minute * 60 + second - offset_minutes * 60;
    std::int64_t days = secs >= 0 ? secs / 86400 : (secs - 86399) / 86400;
    std::int64_t rem = secs - days * 86400;
    std::int64_t y = 0;
    unsigned m = 0, d = 0;
    civil_from_days(days, y, m, d);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02lld:%02lld:%02lldZ",
                  static_cast<long long>(y), m, d, static_cast<long long>(rem / 3600),
                  static_cast<long long>(rem % 3600 / 60), static_cast<long long>(rem % 60));
    return std::string(buf);
}

double l2_norm(const Embedding& v) {
    double sum = 0.0;
    for (float x : v) sum += static_cast<double>(x) * static_cast<double>(x);
    return std::sqrt(sum);
}

Embedding l2_normalize(const Embedding& v) {
    const double norm = l2_norm(v);
    if (norm == 0.0 || !std::isfinite(norm)) {
        throw Error(ErrorCode::EmptyInput, "cannot normalize a zero or non-finite vector");
    }
    Embedding out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = static_cast<float>(static_cast<double>(v[i]) / norm);
    }
    return out;
}

bool is_unit_norm(const Embedding& v, double tolerance) {
    return std::abs(l2_norm(v) - 1.0) <= tolerance;
}

std::string triple_content_id(std::string_view conversation_id, std::string_view session_id,
                              std::uint32_t source_message_index, std::string_view subject,
                              std::string_view predicate, std::string_view object) {
    std::string material;
    material.reserve(conversation_id.size() + session_id.size() + subject.size() +
                     predicate.size() + object.size() + 16);
    constexpr char kSep = '\x1f';
    material.append(conversation_id).push_back(kSep);
    material.append(session_id).push_back(kSep);
    material.append(std::to_string(source_message_index)).push_back(kSep);
    material.append(subject).push_back(kSep);
    material.append(predicate).push_back(kSep);
    material.append(object);
    return sha256_hex(material).substr(0, 32);
}

Triple validate_triple(const RawTriple& raw) {
    Triple t;
    t.subject = trim(raw.subject);
    t.predicate = trim(raw.predicate);
    t.object = trim(raw.object);
    t.conversation_id = trim(raw.conversation_id);
    t.session_id = trim(raw.session_id);
    if (t.subject.empty()) throw Error(ErrorCode::EmptyField, "subject is blank");
    if (t.predicate.empty()) throw Error(ErrorCode::EmptyField, "predicate is blank");
    if (t.object.empty()) throw Error(ErrorCode::EmptyField, "object is blank");
    if (t.conversation_id.empty()) throw Error(ErrorCode::EmptyField, "conversation_id is blank");
    if (t.session_id.empty()) throw Error(ErrorCode::EmptyField, "session_id is blank");
    if (raw.source_message_index < 0 || raw.source_message_index > UINT32_MAX) {
        throw Error(ErrorCode::InvalidArgument,
                    "source_message_index out of range: " + std::to_string(raw.source_message_index));
    }
    t.source_message_index = static_cast<std::uint32_t>(raw.source_message_index);
    auto ts = normalize_timestamp(raw.timestamp);
    if (!ts) throw Error(ErrorCode::InvalidArgument, "bad timestamp '" + raw.timestamp + "'");
    t.timestamp = std::move(*ts);
    if (raw.embedding) {
        if (raw.embedding->empty()) throw Error(ErrorCode::DimensionMismatch, "empty embedding");
        if (!is_unit_norm(*raw.embedding)) {
            throw Error(ErrorCode::BadEmbeddingNorm,
                        "embedding norm " + std::to_string(l2_norm(*raw.embedding)) + " is not 1");
        }
        t.embedding = raw.embedding;
    }
    t.id = triple_content_id(t.conversation_id, t.session_id, t.source_message_index, t.subject,
                             t.predicate, t.object);
    return t;
}

Summary validate_summary(Summary s) {
    s.conversation_id = trim(s.conversation_id);
    s.session_id = trim(s.session_id);
    if (s.conversation_id.empty()) throw Error(ErrorCode::EmptyField, "conversation_id is blank");
    if (s.session_id.empty()) throw Error(ErrorCode::EmptyField, "session_id is blank");
    s.text = trim(s.text);
    if (s.text.empty()) throw Error(ErrorCode::EmptyField, "summary text is blank");
    auto ts = normalize_timestamp(s.timestamp);
    if (!ts) throw Error(ErrorCode::InvalidArgument, "bad timestamp '" + s.timestamp + "'");
    s.timestamp = std::move(*ts);
    return s;
}

} // namespace memlayer
