#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "mucorest/bugledger.hpp"
#include "mucorest/call.hpp"
#include "mucorest/coverage.hpp"
#include "mucorest/error.hpp"
#include "mucorest/executor.hpp"
#include "mucorest/spec_model.hpp"

namespace mucorest {

// A simulated REST service: operations with typed parameters, guarded code
// blocks that model statement coverage, and seeded 500 bugs. Loaded from a
// JSON scenario document; see scenarios/README.md for the format.

/// Predicate over the validated parameter values of one call.
struct Predicate {
    enum class Kind { Always, Present, Absent, Eq, Ne, Gt, Ge, Lt, Le, All, Any, Not, Issued };
    Kind kind = Kind::Always;
    std::string param;
    Value operand;
    std::vector<Predicate> children;
};

struct GuardedBlock {
    std::string id;
    Predicate predicate;
    std::uint64_t line_count = 0;
    bool covered = false;
};

struct BugRule {
    std::string id;
    Predicate predicate;
    int status = 500;
    std::string message_template;  // `{param}` slots take the parameter's value
};

struct SimParam {
    std::string name;
    ParamLocation location = ParamLocation::Query;
    SchemaType type = SchemaType::String;
    bool required = false;
    std::optional<std::vector<Value>> enum_values;
    std::optional<Value> default_value;
    std::optional<Value> example_value;
};

struct IssueRule {
    std::string field;
    std::int64_t start = 1;
    std::int64_t step = 1;
};

struct SimOperation {
    HttpMethod method = HttpMethod::Get;
    std::string path;
    std::vector<SimParam> params;
    std::vector<GuardedBlock> blocks;
    std::vector<BugRule> bugs;
    std::optional<IssueRule> issues;
    std::uint64_t issued_count = 0;

    std::string op_id() const { return make_op_id(method, path); }
};

namespace detail {

inline std::vector<std::string> split_path(std::string_view path) {
    std::vector<std::string> segs;
    std::size_t i = 0;
    while (i <= path.size()) {
        const auto j = path.find('/', i);
        const auto end = j == std::string_view::npos ? path.size() : j;
        if (end > i) segs.emplace_back(path.substr(i, end - i));
        if (j == std::string_view::npos) break;
        i = j + 1;
    }
    return segs;
}

inline std::string percent_decode(std::string_view s, bool plus_is_space) {
    auto hex = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '%' && i + 2 < s.size() && hex(s[i + 1]) >= 0 && hex(s[i + 2]) >= 0) {
            out += static_cast<char>(hex(s[i + 1]) * 16 + hex(s[i + 2]));
            i += 2;
        } else if (s[i] == '+' && plus_is_space) {
            out += ' ';
        } else {
            out += s[i];
        }
    }
    return out;
}

// Coerces wire text to the declared type; nullopt when it does not parse.
inline std::optional<Value> coerce_text(const std::string& text, SchemaType type) {
    switch (type) {
        case SchemaType::String: return Value(text);
        case SchemaType::Integer: {
            if (text.empty()) return std::nullopt;
            std::size_t i = (text[0] == '-' || text[0] == '+') ? 1 : 0;
            if (i == text.size()) return std::nullopt;
            for (std::size_t j = i; j < text.size(); ++j) {
                if (!is_digit(text[j])) return std::nullopt;
            }
            try {
                return Value(std::stoll(text));
            } catch (const std::out_of_range&) {
                return std::nullopt;
            }
        }
        case SchemaType::Number: {
            if (text.empty()) return std::nullopt;
            char* end = nullptr;
            const double d = std::strtod(text.c_str(), &end);
            if (end != text.c_str() + text.size()) return std::nullopt;
            return Value(d);
        }
        case SchemaType::Boolean:
            if (text == "true") return Value(true);
            if (text == "false") return Value(false);
            return std::nullopt;
        case SchemaType::Array:
        case SchemaType::Object: {
            auto v = Value::parse(text, nullptr, false);
            if (v.is_discarded()) return std::nullopt;
            return v;
        }
    }
    return std::nullopt;
}

inline bool json_has_type(const Value& v, SchemaType type) {
    switch (type) {
        case SchemaType::String: return v.is_string();
        case SchemaType::Integer: return v.is_number_integer();
        case SchemaType::Number: return v.is_number();
        case SchemaType::Boolean: return v.is_boolean();
        case SchemaType::Array: return v.is_array();
        case SchemaType::Object: return v.is_object();
    }
    return false;
}

}  // namespace detail

/// A loaded scenario plus its mutable state (covered blocks, issued ids).
/// Copying a fresh Scenario gives an independent service.
class Scenario {
public:
    std::string name;
    std::string base_path;
    bool echo_values = true;  // false: 200 bodies carry no parameter values
    std::vector<SimOperation> operations;

    std::uint64_t total_lines() const {
        std::uint64_t n = 0;
        for (const auto& op : operations) {
            for (const auto& b : op.blocks) n += b.line_count;
        }
        return n;
    }

    std::uint64_t covered_lines() const {
        std::uint64_t n = 0;
        for (const auto& op : operations) {
            for (const auto& b : op.blocks) n += b.covered ? b.line_count : 0;
        }
        return n;
    }

    std::size_t bug_count() const {
        std::size_t n = 0;
        for (const auto& op : operations) n += op.bugs.size();
        return n;
    }

    /// Serves one request. `target` is the raw request target (path plus
    /// optional query string), including the scenario's base path.
    ApiResponse handle(HttpMethod method, std::string_view target, const HeaderList& headers,
                       const std::optional<std::string>& body) {
        const auto qpos = target.find('?');
        const std::string_view raw_path = target.substr(0, qpos);
        const std::string_view raw_query = qpos == std::string_view::npos ? "" : target.substr(qpos + 1);

        std::string_view path = raw_path;
        if (!base_path.empty()) {
            if (path.substr(0, base_path.size()) != base_path) return not_found(method, raw_path);
            path.remove_prefix(base_path.size());
        }
        const auto segments = detail::split_path(path);
        for (auto& op : operations) {
            if (op.method != method) continue;
            std::map<std::string, std::string> path_values;
            if (match_path(op.path, segments, path_values)) {
                return dispatch(op, path_values, raw_query, headers, body);
            }
        }
        return not_found(method, raw_path);
    }

    /// Routes an ApiCall; the URL's scheme and authority are ignored.
    ApiResponse handle_call(const ApiCall& call) {
        std::string_view url = call.url;
        if (const auto scheme = url.find("://"); scheme != std::string_view::npos) {
            const auto slash = url.find('/', scheme + 3);
            url = slash == std::string_view::npos ? std::string_view("/") : url.substr(slash);
        }
        return handle(call.method, url, call.headers, call.body);
    }

    CoverageSnapshot synthetic_coverage_snapshot() const { return {covered_lines(), total_lines()}; }

    bool is_issued(const std::string& field, const Value& v) const {
        auto it = issued_.find(detail::ascii_lower(field));
        return it != issued_.end() && v.is_number_integer() && it->second.count(v.get<std::int64_t>()) > 0;
    }

    /// OpenAPI 3.0 description of the scenario's operations.
    nlohmann::ordered_json openapi_document() const {
        using OJson = nlohmann::ordered_json;
        OJson doc;
        doc["openapi"] = "3.0.3";
        doc["info"] = {{"title", name.empty() ? "simulated service" : name}, {"version", "1.0.0"}};
        doc["servers"] = OJson::array({OJson{{"url", base_path.empty() ? "/" : base_path}}});
        doc["paths"] = OJson::object();
        for (const auto& op : operations) {
            OJson o;
            o["operationId"] = op.op_id();
            OJson params = OJson::array();
            OJson body_props = OJson::object();
            OJson body_required = OJson::array();
            for (const auto& p : op.params) {
                OJson schema{{"type", std::string(to_string(p.type))}};
                if (p.enum_values) schema["enum"] = OJson::parse(Value(*p.enum_values).dump());
                if (p.default_value) schema["default"] = OJson::parse(p.default_value->dump());
                if (p.example_value) schema["example"] = OJson::parse(p.example_value->dump());
                if (p.location == ParamLocation::BodyField) {
                    body_props[p.name] = schema;
                    if (p.required) body_required.push_back(p.name);
                    continue;
                }
                OJson param{{"name", p.name}, {"in", std::string(to_string(p.location))}};
                param["required"] = p.required || p.location == ParamLocation::Path;
                param["schema"] = schema;
                params.push_back(param);
            }
            if (!params.empty()) o["parameters"] = params;
            if (!body_props.empty()) {
                OJson schema{{"type", "object"}, {"properties", body_props}};
                if (!body_required.empty()) schema["required"] = body_required;
                o["requestBody"] = {{"required", !body_required.empty()},
                                    {"content", {{"application/json", {{"schema", schema}}}}}};
            }
            o["responses"] = {{"200", {{"description", "OK"}}},
                              {"400", {{"description", "Invalid parameters"}}},
                              {"500", {{"description", "Internal server error"}}}};
            std::string method(to_string(op.method));
            for (auto& c : method) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            doc["paths"][op.path][method] = o;
        }
        return doc;
    }

    std::string openapi_text() const { return openapi_document().dump(2); }

private:
    static bool match_path(const std::string& tmpl, const std::vector<std::string>& segments,
                           std::map<std::string, std::string>& values) {
        const auto parts = detail::split_path(tmpl);
        if (parts.size() != segments.size()) return false;
        for (std::size_t i = 0; i < parts.size(); ++i) {
            const auto& part = parts[i];
            if (part.size() >= 2 && part.front() == '{' && part.back() == '}') {
                values[part.substr(1, part.size() - 2)] = detail::percent_decode(segments[i], false);
            } else if (part != detail::percent_decode(segments[i], false)) {
                return false;
            }
        }
        return true;
    }

    static ApiResponse not_found(HttpMethod method, std::string_view path) {
        return ApiResponse::with_status(
            404, nlohmann::json{{"error", "no route for " + std::string(to_string(method)) + " " + std::string(path)}}
                     .dump());
    }

    static ApiResponse bad_request(const std::string& message) {
        return ApiResponse::with_status(400, nlohmann::json{{"error", message}}.dump());
    }

    ApiResponse dispatch(SimOperation& op, const std::map<std::string, std::string>& path_values,
                         std::string_view raw_query, const HeaderList& headers,
                         const std::optional<std::string>& body) {
        std::multimap<std::string, std::string> query;
        for (std::size_t i = 0; i < raw_query.size();) {
            auto amp = raw_query.find('&', i);
            if (amp == std::string_view::npos) amp = raw_query.size();
            const auto pair = raw_query.substr(i, amp - i);
            if (!pair.empty()) {
                const auto eq = pair.find('=');
                query.emplace(detail::percent_decode(pair.substr(0, eq), true),
                              eq == std::string_view::npos ? "" : detail::percent_decode(pair.substr(eq + 1), true));
            }
            i = amp + 1;
        }
        std::optional<nlohmann::json> body_doc;
        bool wants_body = false;
        for (const auto& p : op.params) wants_body |= p.location == ParamLocation::BodyField;
        if (wants_body && body && !body->empty()) {
            auto doc = nlohmann::json::parse(*body, nullptr, false);
            if (doc.is_discarded() || !doc.is_object()) return bad_request("request body must be a JSON object");
            body_doc = std::move(doc);
        }

        // Validation comes first so invalid input cannot reach bug predicates.
        std::map<std::string, Value> values;
        for (const auto& p : op.params) {
            std::optional<Value> value;
            bool present = false;
            std::optional<std::string> text;
            switch (p.location) {
                case ParamLocation::Path:
                    if (auto it = path_values.find(p.name); it != path_values.end()) text = it->second;
                    break;
                case ParamLocation::Query: {
                    auto [lo, hi] = query.equal_range(p.name);
                    if (lo != hi) {
                        if (p.type == SchemaType::Array) {
                            Value arr = Value::array();
                            for (auto it = lo; it != hi; ++it) arr.push_back(it->second);
                            value = arr;
                            present = true;
                        } else {
                            text = lo->second;
                        }
                    }
                    break;
                }
                case ParamLocation::Header:
                    for (const auto& [hn, hv] : headers) {
                        if (detail::ascii_lower(hn) == detail::ascii_lower(p.name)) {
                            text = hv;
                            break;
                        }
                    }
                    break;
                case ParamLocation::BodyField:
                    if (body_doc) {
                        if (auto it = body_doc->find(p.name); it != body_doc->end() && !it->is_null()) {
                            present = true;
                            if (!detail::json_has_type(*it, p.type)) return bad_request("invalid type for " + p.name);
                            value = *it;
                        }
                    }
                    break;
            }
            if (text) {
                present = true;
                value = detail::coerce_text(*text, p.type);
                if (!value) return bad_request("invalid type for " + p.name);
            }
            if (!present) {
                if (p.required) return bad_request("missing required parameter " + p.name);
                continue;
            }
            if (p.enum_values &&
                std::find(p.enum_values->begin(), p.enum_values->end(), *value) == p.enum_values->end()) {
                return bad_request("invalid value for " + p.name);
            }
            values.emplace(p.name, std::move(*value));
        }

        for (auto& block : op.blocks) {
            if (!block.covered && eval(block.predicate, values)) block.covered = true;
        }
        for (const auto& bug : op.bugs) {
            if (eval(bug.predicate, values)) {
                nlohmann::json err{{"error", "Internal Server Error"},
                                   {"message", instantiate(bug.message_template, values)},
                                   {"status", bug.status}};
                return ApiResponse::with_status(bug.status, err.dump());
            }
        }
        nlohmann::json ok;
        ok["operation"] = op.op_id();
        ok["echo"] = nlohmann::json::object();
        if (echo_values) {
            for (const auto& [k, v] : values) ok["echo"][k] = v;
        }
        if (op.issues) {
            const std::int64_t id = op.issues->start + op.issues->step * static_cast<std::int64_t>(op.issued_count++);
            issued_[detail::ascii_lower(op.issues->field)].insert(id);
            ok[op.issues->field] = id;
        }
        return ApiResponse::with_status(200, ok.dump());
    }

    bool eval(const Predicate& p, const std::map<std::string, Value>& values) const {
        using K = Predicate::Kind;
        auto lookup = [&](const std::string& name) -> const Value* {
            auto it = values.find(name);
            return it == values.end() ? nullptr : &it->second;
        };
        auto compare = [&](auto op) {
            const Value* v = lookup(p.param);
            return v != nullptr && v->is_number() && p.operand.is_number() &&
                   op(v->get<double>(), p.operand.get<double>());
        };
        switch (p.kind) {
            case K::Always: return true;
            case K::Present: return lookup(p.param) != nullptr;
            case K::Absent: return lookup(p.param) == nullptr;
            case K::Eq: {
                const Value* v = lookup(p.param);
                return v != nullptr && *v == p.operand;
            }
            case K::Ne: {
                const Value* v = lookup(p.param);
                return v != nullptr && *v != p.operand;
            }
            case K::Gt: return compare([](double a, double b) { return a > b; });
            case K::Ge: return compare([](double a, double b) { return a >= b; });
            case K::Lt: return compare([](double a, double b) { return a < b; });
            case K::Le: return compare([](double a, double b) { return a <= b; });
            case K::All:
                for (const auto& c : p.children) {
                    if (!eval(c, values)) return false;
                }
                return true;
            case K::Any:
                for (const auto& c : p.children) {
                    if (eval(c, values)) return true;
                }
                return false;
            case K::Not: return !eval(p.children.at(0), values);
            case K::Issued: {
                const Value* v = lookup(p.param);
                return v != nullptr && is_issued(p.param, *v);
            }
        }
        return false;
    }

public:
    static std::string instantiate(const std::string& tmpl, const std::map<std::string, Value>& values) {
        std::string out;
        for (std::size_t i = 0; i < tmpl.size();) {
            const auto close = tmpl[i] == '{' ? tmpl.find('}', i) : std::string::npos;
            if (close != std::string::npos) {
                const std::string name = tmpl.substr(i + 1, close - i - 1);
                auto it = values.find(name);
                out += it == values.end() ? "null" : value_to_text(it->second);
                i = close + 1;
            } else {
                out += tmpl[i++];
            }
        }
        return out;
    }

private:
    std::map<std::string, std::set<std::int64_t>> issued_;
};

namespace detail {

class ScenarioLoader {
public:
    Scenario load(const nlohmann::json& doc) {
        if (!doc.is_object()) throw SchemaError("", "scenario must be a JSON object");
        check_keys(doc, "", {"name", "base_path", "echo", "operations"});
        Scenario s;
        s.name = optional_string(doc, "", "name").value_or("");
        const auto echo = optional_string(doc, "", "echo").value_or("values");
        if (echo != "values" && echo != "off") throw SchemaError("/echo", "must be \"values\" or \"off\"");
        s.echo_values = echo == "values";
        s.base_path = optional_string(doc, "", "base_path").value_or("");
        if (!s.base_path.empty() && s.base_path.front() != '/') {
            throw SchemaError("/base_path", "must start with '/'");
        }
        while (!s.base_path.empty() && s.base_path.back() == '/') s.base_path.pop_back();
        const auto& ops = require(doc, "", "operations");
        if (!ops.is_array() || ops.empty()) throw SchemaError("/operations", "must be a non-empty array");
        std::set<std::string> op_ids;
        std::map<std::string, std::string> normalized_messages;
        for (std::size_t i = 0; i < ops.size(); ++i) {
            const std::string ptr = "/operations/" + std::to_string(i);
            SimOperation op = load_operation(ops[i], ptr);
            if (!op_ids.insert(op.op_id()).second) throw SchemaError(ptr, "duplicate operation " + op.op_id());
            for (std::size_t b = 0; b < op.bugs.size(); ++b) {
                std::map<std::string, Value> zeros;
                for (const auto& p : op.params) zeros.emplace(p.name, 0);
                const auto norm = normalize_message(Scenario::instantiate(op.bugs[b].message_template, zeros));
                const std::string bug_ptr = ptr + "/bugs/" + std::to_string(b);
                auto [it, fresh] = normalized_messages.emplace(norm, bug_ptr);
                if (!fresh) {
                    throw SchemaError(bug_ptr + "/message", "normalizes to the same message as " + it->second);
                }
            }
            s.operations.push_back(std::move(op));
        }
        return s;
    }

private:
    static const nlohmann::json& require(const nlohmann::json& obj, const std::string& ptr, const char* key) {
        auto it = obj.find(key);
        if (it == obj.end()) throw SchemaError(ptr + "/" + key, "is required");
        return *it;
    }

    static std::optional<std::string> optional_string(const nlohmann::json& obj, const std::string& ptr,
                                                      const char* key) {
        auto it = obj.find(key);
        if (it == obj.end()) return std::nullopt;
        if (!it->is_string()) throw SchemaError(ptr + "/" + key, "must be a string");
        return it->get<std::string>();
    }

    static void check_keys(const nlohmann::json& obj, const std::string& ptr, std::set<std::string> allowed) {
        for (const auto& [k, _] : obj.items()) {
            if (allowed.count(k) == 0) throw SchemaError(ptr + "/" + k, "unknown field");
        }
    }

    SimOperation load_operation(const nlohmann::json& node, const std::string& ptr) {
        if (!node.is_object()) throw SchemaError(ptr, "operation must be an object");
        check_keys(node, ptr, {"method", "path", "params", "blocks", "bugs", "issues", "summary"});
        SimOperation op;
        const auto& m = require(node, ptr, "method");
        if (!m.is_string() || !parse_method(m.get<std::string>())) {
            throw SchemaError(ptr + "/method", "must be one of GET, POST, PUT, DELETE, PATCH");
        }
        op.method = *parse_method(m.get<std::string>());
        const auto& path = require(node, ptr, "path");
        if (!path.is_string() || path.get<std::string>().empty() || path.get<std::string>()[0] != '/') {
            throw SchemaError(ptr + "/path", "must be a string starting with '/'");
        }
        op.path = path.get<std::string>();

        std::set<std::string> names;
        if (auto it = node.find("params"); it != node.end()) {
            if (!it->is_array()) throw SchemaError(ptr + "/params", "must be an array");
            for (std::size_t i = 0; i < it->size(); ++i) {
                const std::string pptr = ptr + "/params/" + std::to_string(i);
                op.params.push_back(load_param((*it)[i], pptr));
                if (!names.insert(op.params.back().name).second) throw SchemaError(pptr + "/name", "duplicate parameter");
            }
        }
        for (const auto& seg : split_path(op.path)) {
            if (seg.size() >= 2 && seg.front() == '{' && seg.back() == '}') {
                const std::string pname = seg.substr(1, seg.size() - 2);
                const bool ok = std::any_of(op.params.begin(), op.params.end(), [&](const SimParam& p) {
                    return p.name == pname && p.location == ParamLocation::Path;
                });
                if (!ok) throw SchemaError(ptr + "/path", "placeholder {" + pname + "} has no path parameter");
            }
        }
        if (auto it = node.find("blocks"); it != node.end()) {
            if (!it->is_array()) throw SchemaError(ptr + "/blocks", "must be an array");
            for (std::size_t i = 0; i < it->size(); ++i) {
                const std::string bptr = ptr + "/blocks/" + std::to_string(i);
                const auto& b = (*it)[i];
                if (!b.is_object()) throw SchemaError(bptr, "block must be an object");
                check_keys(b, bptr, {"id", "lines", "when"});
                GuardedBlock block;
                block.id = optional_string(b, bptr, "id").value_or(op.op_id() + "#" + std::to_string(i));
                const auto& lines = require(b, bptr, "lines");
                if (!lines.is_number_integer() || lines.get<long long>() <= 0) {
                    throw SchemaError(bptr + "/lines", "must be a positive integer");
                }
                block.line_count = lines.get<std::uint64_t>();
                block.predicate = b.contains("when") ? load_predicate(b["when"], bptr + "/when", op) : Predicate{};
                op.blocks.push_back(std::move(block));
            }
        }
        if (auto it = node.find("bugs"); it != node.end()) {
            if (!it->is_array()) throw SchemaError(ptr + "/bugs", "must be an array");
            for (std::size_t i = 0; i < it->size(); ++i) {
                const std::string bptr = ptr + "/bugs/" + std::to_string(i);
                const auto& b = (*it)[i];
                if (!b.is_object()) throw SchemaError(bptr, "bug must be an object");
                check_keys(b, bptr, {"id", "when", "message"});
                BugRule bug;
                bug.id = optional_string(b, bptr, "id").value_or(op.op_id() + "!" + std::to_string(i));
                const auto msg = optional_string(b, bptr, "message");
                if (!msg || msg->empty()) throw SchemaError(bptr + "/message", "is required");
                bug.message_template = *msg;
                bug.predicate = b.contains("when") ? load_predicate(b["when"], bptr + "/when", op) : Predicate{};
                op.bugs.push_back(std::move(bug));
            }
        }
        if (auto it = node.find("issues"); it != node.end()) {
            const std::string iptr = ptr + "/issues";
            if (!it->is_object()) throw SchemaError(iptr, "must be an object");
            check_keys(*it, iptr, {"field", "start", "step"});
            IssueRule rule;
            const auto field = optional_string(*it, iptr, "field");
            if (!field || field->empty()) throw SchemaError(iptr + "/field", "is required");
            rule.field = *field;
            if (auto s = it->find("start"); s != it->end()) {
                if (!s->is_number_integer()) throw SchemaError(iptr + "/start", "must be an integer");
                rule.start = s->get<std::int64_t>();
            }
            if (auto s = it->find("step"); s != it->end()) {
                if (!s->is_number_integer() || s->get<std::int64_t>() == 0) {
                    throw SchemaError(iptr + "/step", "must be a non-zero integer");
                }
                rule.step = s->get<std::int64_t>();
            }
            op.issues = rule;
        }
        return op;
    }

    SimParam load_param(const nlohmann::json& node, const std::string& ptr) {
        if (!node.is_object()) throw SchemaError(ptr, "parameter must be an object");
        check_keys(node, ptr, {"name", "in", "type", "required", "enum", "default", "example"});
        SimParam p;
        const auto name = optional_string(node, ptr, "name");
        if (!name || name->empty()) throw SchemaError(ptr + "/name", "is required");
        p.name = *name;
        const auto in = optional_string(node, ptr, "in").value_or("query");
        if (in == "path") {
            p.location = ParamLocation::Path;
        } else if (in == "query") {
            p.location = ParamLocation::Query;
        } else if (in == "header") {
            p.location = ParamLocation::Header;
        } else if (in == "body") {
            p.location = ParamLocation::BodyField;
        } else {
            throw SchemaError(ptr + "/in", "must be path, query, header or body");
        }
        const auto type = optional_string(node, ptr, "type").value_or("string");
        const auto st = parse_schema_type(type);
        if (!st || *st == SchemaType::Object) {
            throw SchemaError(ptr + "/type", "must be string, integer, number, boolean or array");
        }
        p.type = *st;
        if (auto r = node.find("required"); r != node.end()) {
            if (!r->is_boolean()) throw SchemaError(ptr + "/required", "must be a boolean");
            p.required = r->get<bool>();
        }
        if (p.location == ParamLocation::Path) p.required = true;
        auto check_typed = [&](const Value& v, const std::string& where) {
            if (!json_has_type(v, p.type)) throw SchemaError(where, "does not match the parameter type");
        };
        if (auto e = node.find("enum"); e != node.end()) {
            if (!e->is_array() || e->empty()) throw SchemaError(ptr + "/enum", "must be a non-empty array");
            for (std::size_t i = 0; i < e->size(); ++i) check_typed((*e)[i], ptr + "/enum/" + std::to_string(i));
            p.enum_values = e->get<std::vector<Value>>();
        }
        if (auto d = node.find("default"); d != node.end()) {
            check_typed(*d, ptr + "/default");
            p.default_value = *d;
        }
        if (auto x = node.find("example"); x != node.end()) {
            check_typed(*x, ptr + "/example");
            p.example_value = *x;
        }
        return p;
    }

    Predicate load_predicate(const nlohmann::json& node, const std::string& ptr, const SimOperation& op) {
        using K = Predicate::Kind;
        if (!node.is_object() || node.size() != 1) {
            throw SchemaError(ptr, "predicate must be an object with exactly one operator");
        }
        const auto& [key, arg] = *node.items().begin();
        Predicate p;
        auto need_param = [&](const std::string& name, const std::string& where) {
            const bool known = std::any_of(op.params.begin(), op.params.end(),
                                           [&](const SimParam& sp) { return sp.name == name; });
            if (!known) throw SchemaError(where, "unknown parameter '" + name + "'");
        };
        static const std::map<std::string, K> kCompare = {{"eq", K::Eq}, {"ne", K::Ne}, {"gt", K::Gt},
                                                          {"ge", K::Ge}, {"lt", K::Lt}, {"le", K::Le}};
        const std::string arg_ptr = ptr + "/" + key;
        if (key == "always") {
            if (!arg.is_boolean() || !arg.get<bool>()) throw SchemaError(arg_ptr, "must be true");
            p.kind = K::Always;
        } else if (key == "present" || key == "absent" || key == "issued") {
            if (!arg.is_string()) throw SchemaError(arg_ptr, "must be a parameter name");
            need_param(arg.get<std::string>(), arg_ptr);
            p.kind = key == "present" ? K::Present : key == "absent" ? K::Absent : K::Issued;
            p.param = arg.get<std::string>();
        } else if (auto cmp = kCompare.find(key); cmp != kCompare.end()) {
            if (!arg.is_array() || arg.size() != 2 || !arg[0].is_string()) {
                throw SchemaError(arg_ptr, "must be [parameter, value]");
            }
            need_param(arg[0].get<std::string>(), arg_ptr + "/0");
            p.kind = cmp->second;
            p.param = arg[0].get<std::string>();
            p.operand = arg[1];
            if (p.kind != K::Eq && p.kind != K::Ne && !p.operand.is_number()) {
                throw SchemaError(arg_ptr + "/1", "ordering comparisons need a number");
            }
        } else if (key == "all" || key == "any") {
            if (!arg.is_array() || arg.empty()) throw SchemaError(arg_ptr, "must be a non-empty array");
            p.kind = key == "all" ? K::All : K::Any;
            for (std::size_t i = 0; i < arg.size(); ++i) {
                p.children.push_back(load_predicate(arg[i], arg_ptr + "/" + std::to_string(i), op));
            }
        } else if (key == "not") {
            p.kind = K::Not;
            p.children.push_back(load_predicate(arg, arg_ptr, op));
        } else {
            throw SchemaError(arg_ptr, "unknown predicate operator");
        }
        return p;
    }
};

}  // namespace detail

/// Parses and validates a scenario document. Errors carry a JSON pointer.
inline Scenario load_scenario(std::string_view document) {
    auto doc = nlohmann::json::parse(document, nullptr, false);
    if (doc.is_discarded()) throw SchemaError("", "scenario is not valid JSON");
    return detail::ScenarioLoader().load(doc);
}

inline CoverageSnapshot synthetic_coverage_snapshot(const Scenario& scenario) {
    return scenario.synthetic_coverage_snapshot();
}

inline ApiResponse handle_call(Scenario& scenario, const ApiCall& call) { return scenario.handle_call(call); }

/// Scenario plus the lock that the TCP listener and the engine share.
struct SharedScenario {
    explicit SharedScenario(Scenario s) : scenario(std::move(s)) {}
    Scenario scenario;
    std::mutex mutex;
};

/// Calls the scenario directly, no sockets involved.
class InProcessTransport final : public Transport {
public:
    explicit InProcessTransport(SharedScenario& shared) : shared_(shared) {}

    ApiResponse send(const ApiCall& call, int /*timeout_ms*/) override {
        std::lock_guard lock(shared_.mutex);
        return shared_.scenario.handle_call(call);
    }

private:
    SharedScenario& shared_;
};

class SyntheticCoverageProvider final : public CoverageProvider {
public:
    explicit SyntheticCoverageProvider(SharedScenario& shared) : shared_(shared) {}

    CoverageSnapshot read_snapshot() override {
        std::lock_guard lock(shared_.mutex);
        return shared_.scenario.synthetic_coverage_snapshot();
    }

    CoverageProviderKind kind() const override { return CoverageProviderKind::Synthetic; }

private:
    SharedScenario& shared_;
};

}  // namespace mucorest
