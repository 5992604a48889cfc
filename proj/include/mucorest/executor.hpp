#pragma once

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mucorest/agent.hpp"
#include "mucorest/call.hpp"
#include "mucorest/error.hpp"
#include "mucorest/rng.hpp"
#include "mucorest/spec_model.hpp"

namespace mucorest {

namespace detail {

inline std::string ascii_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace detail

/// Scalars harvested from earlier 2xx bodies, keyed by lower-cased field name.
class ValuePool {
public:
    static constexpr std::size_t kCapacity = 64;

    void add(std::string_view name, const Value& v) {
        if (!(v.is_string() || v.is_number() || v.is_boolean())) return;
        auto& ring = values_[detail::ascii_lower(name)];
        if (std::find(ring.begin(), ring.end(), v) != ring.end()) return;
        ring.push_back(v);
        if (ring.size() > kCapacity) ring.pop_front();
    }

    // Top-level scalar fields of an object body, plus scalar fields of objects
    // found in top-level arrays (either the body itself or a field's value).
    void harvest(std::string_view body) {
        const auto doc = nlohmann::json::parse(body, nullptr, false);
        if (doc.is_discarded()) return;
        auto scan_object = [this](const nlohmann::json& obj, auto& self, bool descend) -> void {
            for (const auto& [key, v] : obj.items()) {
                if (v.is_array() && descend) {
                    for (const auto& e : v) {
                        if (e.is_object()) self(e, self, false);
                    }
                } else {
                    add(key, v);
                }
            }
        };
        if (doc.is_object()) {
            scan_object(doc, scan_object, true);
        } else if (doc.is_array()) {
            for (const auto& e : doc) {
                if (e.is_object()) scan_object(e, scan_object, false);
            }
        }
    }

    const std::deque<Value>* find(std::string_view name) const {
        auto it = values_.find(detail::ascii_lower(name));
        return it == values_.end() || it->second.empty() ? nullptr : &it->second;
    }

    std::size_t size() const {
        std::size_t n = 0;
        for (const auto& [_, ring] : values_) n += ring.size();
        return n;
    }

private:
    std::map<std::string, std::deque<Value>> values_;
};

/// Ranges the Random source draws from; bounds are inclusive.
struct RandomRanges {
    std::int64_t int_min = -(std::int64_t{1} << 31);
    std::int64_t int_max = (std::int64_t{1} << 31) - 1;
    double number_min = -1e6;
    double number_max = 1e6;
    std::size_t string_min_len = 1;
    std::size_t string_max_len = 20;
    std::size_t array_max_items = 3;

    friend bool operator==(const RandomRanges&, const RandomRanges&) = default;
};

struct GeneratedValue {
    Value value;
    SourceKind used = SourceKind::Random;
    bool fell_back = false;
};

namespace detail {

inline std::string random_alnum(Rng& rng, std::size_t len) {
    static constexpr std::string_view kChars =
        "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
    std::string s;
    s.reserve(len);
    for (std::size_t i = 0; i < len; ++i) s += kChars[rng.uniform_index(kChars.size())];
    return s;
}

inline Value random_of_type(SchemaType type, const SchemaNode* schema, Rng& rng, const RandomRanges& ranges,
                            std::size_t depth);

inline Value random_from_schema(const SchemaNode& schema, Rng& rng, const RandomRanges& ranges = {},
                                std::size_t depth = 0) {
    return random_of_type(schema.type, &schema, rng, ranges, depth);
}

inline Value random_of_type(SchemaType type, const SchemaNode* schema, Rng& rng, const RandomRanges& ranges,
                            std::size_t depth) {
    constexpr std::size_t kMaxDepth = 16;
    switch (type) {
        case SchemaType::Integer:
            return rng.uniform_int(ranges.int_min, ranges.int_max);
        case SchemaType::Number:
            return rng.uniform_real(ranges.number_min, ranges.number_max);
        case SchemaType::Boolean:
            return rng.coin();
        case SchemaType::String: {
            const auto len = rng.uniform_int(static_cast<std::int64_t>(ranges.string_min_len),
                                             static_cast<std::int64_t>(ranges.string_max_len));
            return random_alnum(rng, static_cast<std::size_t>(len));
        }
        case SchemaType::Array: {
            Value arr = Value::array();
            const auto n = rng.uniform_index(ranges.array_max_items + 1);
            for (std::uint64_t i = 0; i < n; ++i) {
                if (schema && schema->items && depth < kMaxDepth) {
                    arr.push_back(random_from_schema(*schema->items, rng, ranges, depth + 1));
                } else {
                    arr.push_back(random_of_type(SchemaType::String, nullptr, rng, ranges, depth + 1));
                }
            }
            return arr;
        }
        case SchemaType::Object: {
            Value obj = Value::object();
            if (schema && depth < kMaxDepth) {
                for (const auto& [name, child] : schema->properties) {
                    obj[name] = random_from_schema(*child, rng, ranges, depth + 1);
                }
            }
            return obj;
        }
    }
    return nullptr;
}

}  // namespace detail

/// Materializes a value for `param` from `source`. Sources with nothing to
/// offer for this parameter fall back to Random, flagged in the result.
inline GeneratedValue generate_value(const ParamDesc& param, SourceKind source, const ValuePool& pool, Rng& rng,
                                     const RandomRanges& ranges = {}) {
    switch (source) {
        case SourceKind::SpecExample:
            if (param.example_value) return {*param.example_value, source, false};
            break;
        case SourceKind::SpecDefault:
            if (param.default_value) return {*param.default_value, source, false};
            break;
        case SourceKind::EnumPick:
            if (param.enum_values && !param.enum_values->empty()) {
                const auto& values = *param.enum_values;
                return {values[rng.uniform_index(values.size())], source, false};
            }
            break;
        case SourceKind::ResponseDerived:
            if (const auto* ring = pool.find(param.name)) {
                return {(*ring)[rng.uniform_index(ring->size())], source, false};
            }
            break;
        case SourceKind::Random:
            return {detail::random_of_type(param.schema_type, param.schema.get(), rng, ranges, 0), source, false};
    }
    return {detail::random_of_type(param.schema_type, param.schema.get(), rng, ranges, 0), SourceKind::Random, true};
}

/// Percent-encodes everything outside the RFC 3986 unreserved set.
inline std::string percent_encode(std::string_view s) {
    static constexpr char kHex[] = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : s) {
        if (std::isalnum(c) || c == '-' || c == '.' || c == '_' || c == '~') {
            out += static_cast<char>(c);
        } else {
            out += '%';
            out += kHex[c >> 4];
            out += kHex[c & 0x0F];
        }
    }
    return out;
}

// Text form of a value in a path, query string or header.
inline std::string value_to_text(const Value& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_null()) return "";
    return v.dump();
}

/// Fills the path template, appends the query string, assembles body fields
/// into one JSON object and appends header parameters after `auth`.
inline ApiCall build_request(const OperationDesc& op, const std::map<std::string, Value>& values,
                             std::string_view base_url, const HeaderList& auth,
                             const std::optional<Value>& whole_body = std::nullopt) {
    for (const auto& p : op.params) {
        if (p.required && values.count(p.name) == 0) {
            throw MissingRequiredValue("no value for required parameter '" + p.name + "' of " + op.op_id);
        }
    }
    ApiCall call;
    call.op_id = op.op_id;
    call.method = op.method;
    call.param_values = values;

    std::string path;
    const std::string& tmpl = op.path_template;
    for (std::size_t i = 0; i < tmpl.size();) {
        if (tmpl[i] == '{') {
            const auto close = tmpl.find('}', i);
            const std::string name = tmpl.substr(i + 1, close - i - 1);
            auto it = values.find(name);
            if (it == values.end()) throw MissingRequiredValue("no value for path parameter '" + name + "'");
            path += percent_encode(value_to_text(it->second));
            i = close + 1;
        } else {
            path += tmpl[i++];
        }
    }

    std::string query;
    auto append_query = [&](const std::string& name, const Value& v) {
        query += query.empty() ? '?' : '&';
        query += percent_encode(name);
        query += '=';
        query += percent_encode(value_to_text(v));
    };
    Value body = Value::object();
    bool has_body_fields = false;
    call.headers = auth;
    for (const auto& p : op.params) {
        auto it = values.find(p.name);
        if (it == values.end()) continue;
        switch (p.location) {
            case ParamLocation::Path: break;
            case ParamLocation::Query:
                if (it->second.is_array()) {
                    for (const auto& e : it->second) append_query(p.name, e);
                } else {
                    append_query(p.name, it->second);
                }
                break;
            case ParamLocation::Header: call.headers.emplace_back(p.name, value_to_text(it->second)); break;
            case ParamLocation::BodyField:
                body[p.name] = it->second;
                has_body_fields = true;
                break;
        }
    }
    std::string base(base_url);
    while (!base.empty() && base.back() == '/') base.pop_back();
    call.url = base + path + query;
    if (has_body_fields) {
        call.body = body.dump();
    } else if (whole_body) {
        call.body = whole_body->dump();
    } else if (op.body_required && op.body_schema) {
        call.body = "{}";
    }
    if (call.body) call.headers.emplace_back("Content-Type", "application/json");
    return call;
}

/// Sends one request. Implementations never throw for HTTP-level outcomes;
/// transport failures come back as a response without a status.
class Transport {
public:
    virtual ~Transport() = default;
    virtual ApiResponse send(const ApiCall& call, int timeout_ms) = 0;
    // Whether the target answers at all; any HTTP status counts.
    virtual bool probe() { return true; }
};

struct ExecutorOptions {
    int timeout_ms = 10000;
    std::size_t body_cap_bytes = 64 * 1024;
    RandomRanges random;
};

/// Runs calls through a transport, caps bodies and feeds the value pool.
class Executor {
public:
    Executor(Transport& transport, ExecutorOptions options = {}) : transport_(transport), options_(options) {}

    ApiResponse execute_call(const ApiCall& call) {
        const auto start = std::chrono::steady_clock::now();
        ApiResponse resp = transport_.send(call, options_.timeout_ms);
        resp.latency_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        if (resp.status) resp.transport_error.reset();
        if (!resp.status && !resp.transport_error) resp.transport_error = "no response";
        if (resp.is_success()) pool_.harvest(resp.body);
        if (resp.body.size() > options_.body_cap_bytes) {
            resp.body.resize(options_.body_cap_bytes);
            resp.truncated = true;
        }
        return resp;
    }

    ValuePool& pool() { return pool_; }
    const ValuePool& pool() const { return pool_; }
    Transport& transport() { return transport_; }

private:
    Transport& transport_;
    ExecutorOptions options_;
    ValuePool pool_;
};

}  // namespace mucorest
