#pragma once

#include <cctype>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

namespace mucorest {

namespace detail {

// Decodes bytes as UTF-8, replacing every invalid sequence with U+FFFD.
inline std::string utf8_lossy(std::string_view bytes) {
    static constexpr std::string_view kReplacement = "\xEF\xBF\xBD";
    std::string out;
    out.reserve(bytes.size());
    std::size_t i = 0;
    while (i < bytes.size()) {
        const auto c = static_cast<unsigned char>(bytes[i]);
        std::size_t len = 0;
        std::uint32_t min_cp = 0;
        if (c < 0x80) {
            out += static_cast<char>(c);
            ++i;
            continue;
        } else if ((c & 0xE0) == 0xC0) {
            len = 2;
            min_cp = 0x80;
        } else if ((c & 0xF0) == 0xE0) {
            len = 3;
            min_cp = 0x800;
        } else if ((c & 0xF8) == 0xF0) {
            len = 4;
            min_cp = 0x10000;
        } else {
            out += kReplacement;
            ++i;
            continue;
        }
        bool ok = i + len <= bytes.size();
        std::uint32_t cp = c & (0xFF >> (len + 1));
        for (std::size_t j = 1; ok && j < len; ++j) {
            const auto cc = static_cast<unsigned char>(bytes[i + j]);
            if ((cc & 0xC0) != 0x80) {
                ok = false;
            } else {
                cp = (cp << 6) | (cc & 0x3F);
            }
        }
        ok = ok && cp >= min_cp && cp <= 0x10FFFF && !(cp >= 0xD800 && cp <= 0xDFFF);
        if (ok) {
            out.append(bytes.substr(i, len));
            i += len;
        } else {
            out += kReplacement;
            ++i;
        }
    }
    return out;
}

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }
inline bool is_hex(char c) { return std::isxdigit(static_cast<unsigned char>(c)) != 0; }
inline bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
inline bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline std::size_t match_uuid(std::string_view s, std::size_t i) {
    constexpr std::size_t kLen = 36;
    if (i + kLen > s.size()) return 0;
    if (i > 0 && is_alnum(s[i - 1])) return 0;
    for (std::size_t j = 0; j < kLen; ++j) {
        const char c = s[i + j];
        const bool dash_slot = j == 8 || j == 13 || j == 18 || j == 23;
        if (dash_slot ? c != '-' : !is_hex(c)) return 0;
    }
    if (i + kLen < s.size() && is_alnum(s[i + kLen])) return 0;
    return kLen;
}

inline std::size_t match_digits(std::string_view s, std::size_t i, std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) {
        if (i + j >= s.size() || !is_digit(s[i + j])) return 0;
    }
    return n;
}

// YYYY-MM-DD with an optional [T ]hh:mm[:ss[.frac]][Z|+hh[:]mm] tail.
inline std::size_t match_timestamp(std::string_view s, std::size_t i) {
    if (i > 0 && is_digit(s[i - 1])) return 0;
    std::size_t p = i;
    auto lit = [&](char c) {
        if (p < s.size() && s[p] == c) {
            ++p;
            return true;
        }
        return false;
    };
    auto digits = [&](std::size_t n) {
        if (match_digits(s, p, n) == 0) return false;
        p += n;
        return true;
    };
    if (!(digits(4) && lit('-') && digits(2) && lit('-') && digits(2))) return 0;
    const std::size_t date_end = p;
    if (p < s.size() && (s[p] == 'T' || s[p] == ' ')) {
        ++p;
        if (digits(2) && lit(':') && digits(2)) {
            const std::size_t hm_end = p;
            if (lit(':') && digits(2)) {
                if (lit('.') || lit(',')) {
                    const std::size_t frac = p;
                    while (p < s.size() && is_digit(s[p])) ++p;
                    if (p == frac) p = frac - 1;
                }
            } else {
                p = hm_end;
            }
            const std::size_t before_zone = p;
            if (!lit('Z') && p < s.size() && (s[p] == '+' || s[p] == '-')) {
                ++p;
                if (digits(2)) {
                    const std::size_t hh_end = p;
                    lit(':');
                    if (!digits(2)) p = hh_end;
                } else {
                    p = before_zone;
                }
            }
        } else {
            p = date_end;
        }
    }
    if (p < s.size() && is_digit(s[p])) return 0;
    return p - i;
}

// One scrubbing pass: UUIDs, timestamps and digit runs become placeholders,
// whitespace runs collapse to one space, ends are trimmed.
inline std::string scrub_message(std::string_view text) {
    std::string replaced;
    replaced.reserve(text.size());
    for (std::size_t i = 0; i < text.size();) {
        if (std::size_t n = match_uuid(text, i)) {
            replaced += "<uuid>";
            i += n;
        } else if (std::size_t m = match_timestamp(text, i)) {
            replaced += "<ts>";
            i += m;
        } else if (is_digit(text[i])) {
            while (i < text.size() && is_digit(text[i])) ++i;
            replaced += '#';
        } else {
            replaced += text[i++];
        }
    }
    std::string out;
    out.reserve(replaced.size());
    bool pending_space = false;
    for (char c : replaced) {
        if (is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out += ' ';
        pending_space = false;
        out += c;
    }
    return out;
}

inline std::string extract_message(const std::string& text) {
    const auto doc = nlohmann::json::parse(text, nullptr, false);
    if (doc.is_object()) {
        for (const char* key : {"message", "error"}) {
            auto it = doc.find(key);
            if (it != doc.end() && it->is_string()) return it->get<std::string>();
        }
    }
    return text;
}

inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace detail

/// Client-side stand-in for a server log line: the `message`/`error` field of
/// a JSON body (or the whole body) with volatile tokens masked.
inline std::string normalize_message(std::string_view body) {
    std::string text = detail::utf8_lossy(body);
    // Iterate so that a message which is itself a JSON error envelope is
    // unwrapped too; the fixed point makes the function idempotent.
    for (int round = 0; round < 8; ++round) {
        std::string next = detail::scrub_message(detail::extract_message(text));
        if (next == text) break;
        text = std::move(next);
    }
    return text;
}

/// The H most recent normalized bodies per (operation, status).
class ResponseHistory {
public:
    explicit ResponseHistory(std::size_t capacity) : capacity_(capacity == 0 ? 1 : capacity) {}

    /// Counts exact matches among the stored bodies, then stores this one.
    std::size_t match_and_insert(const std::string& op_id, int status, const std::string& normalized_body) {
        auto& ring = rings_[{op_id, status}];
        std::size_t n = 0;
        for (const auto& b : ring) {
            if (b == normalized_body) ++n;
        }
        ring.push_back(normalized_body);
        if (ring.size() > capacity_) ring.pop_front();
        return n;
    }

    std::size_t capacity() const { return capacity_; }

    const std::deque<std::string>* ring(const std::string& op_id, int status) const {
        auto it = rings_.find({op_id, status});
        return it == rings_.end() ? nullptr : &it->second;
    }

private:
    std::size_t capacity_;
    std::map<std::pair<std::string, int>, std::deque<std::string>> rings_;
};

inline std::size_t history_match_count(ResponseHistory& history, const std::string& op_id, int status,
                                       const std::string& normalized_body) {
    return history.match_and_insert(op_id, status, normalized_body);
}

struct FailureSignature {
    std::string op_id;  // empty when signatures are not scoped per operation
    int status = 500;
    std::string normalized_message;
    std::uint64_t digest = 0;

    friend bool operator==(const FailureSignature&, const FailureSignature&) = default;
};

inline FailureSignature make_signature(std::string op_id, int status, std::string normalized_message) {
    std::uint64_t h = detail::fnv1a64(op_id);
    h = detail::fnv1a64(std::string_view("\x1f", 1), h);
    h = detail::fnv1a64(std::to_string(status), h);
    h = detail::fnv1a64(std::string_view("\x1f", 1), h);
    h = detail::fnv1a64(normalized_message, h);
    return {std::move(op_id), status, std::move(normalized_message), h};
}

struct RequestSummary {
    std::string method;
    std::string url;
    std::optional<std::string> body;
};

struct BugRecord {
    FailureSignature signature;
    std::uint64_t count = 0;
    std::uint64_t first_call_index = 0;
    std::uint64_t last_call_index = 0;
    RequestSummary sample_request;
};

struct FailureOutcome {
    bool is_new = false;
    std::uint64_t k = 0;
};

/// Deduplicated 5xx failures, kept in discovery order.
class BugLedger {
public:
    explicit BugLedger(bool per_operation = true) : per_operation_(per_operation) {}

    FailureSignature signature_for(const std::string& op_id, int status, std::string normalized_message) const {
        return make_signature(per_operation_ ? op_id : std::string(), status, std::move(normalized_message));
    }

    FailureOutcome record_failure(const FailureSignature& sig, std::uint64_t call_index,
                                  RequestSummary sample = {}) {
        const Key key{sig.digest, sig.op_id, sig.status, sig.normalized_message};
        auto [it, inserted] = index_.try_emplace(key, records_.size());
        if (inserted) {
            records_.push_back({sig, 0, call_index, call_index, std::move(sample)});
        }
        BugRecord& rec = records_[it->second];
        ++rec.count;
        rec.last_call_index = call_index;
        ++total_failures_;
        return {rec.count == 1, rec.count};
    }

    std::size_t unique_bug_count() const {
        std::size_t n = 0;
        for (const auto& r : records_) {
            if (r.signature.status >= 500 && r.signature.status < 600) ++n;
        }
        return n;
    }

    const std::vector<BugRecord>& records() const { return records_; }
    std::uint64_t total_failures() const { return total_failures_; }
    bool per_operation() const { return per_operation_; }

private:
    using Key = std::tuple<std::uint64_t, std::string, int, std::string>;
    bool per_operation_;
    std::map<Key, std::size_t> index_;
    std::vector<BugRecord> records_;
    std::uint64_t total_failures_ = 0;
};

inline FailureOutcome record_failure(BugLedger& ledger, const FailureSignature& sig, std::uint64_t call_index) {
    return ledger.record_failure(sig, call_index);
}

inline std::size_t unique_bug_count(const BugLedger& ledger) { return ledger.unique_bug_count(); }

}  // namespace mucorest
