#pragma once

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "mucorest/error.hpp"

namespace mucorest {

// Parameter values, example/default scalars and generated bodies.
using Value = nlohmann::json;

enum class HttpMethod { Get, Post, Put, Delete, Patch };

inline std::string_view to_string(HttpMethod m) {
    switch (m) {
        case HttpMethod::Get: return "GET";
        case HttpMethod::Post: return "POST";
        case HttpMethod::Put: return "PUT";
        case HttpMethod::Delete: return "DELETE";
        case HttpMethod::Patch: return "PATCH";
    }
    return "GET";
}

inline std::optional<HttpMethod> parse_method(std::string_view s) {
    std::string upper(s);
    std::transform(upper.begin(), upper.end(), upper.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    if (upper == "GET") return HttpMethod::Get;
    if (upper == "POST") return HttpMethod::Post;
    if (upper == "PUT") return HttpMethod::Put;
    if (upper == "DELETE") return HttpMethod::Delete;
    if (upper == "PATCH") return HttpMethod::Patch;
    return std::nullopt;
}

enum class ParamLocation { Path, Query, Header, BodyField };

inline std::string_view to_string(ParamLocation l) {
    switch (l) {
        case ParamLocation::Path: return "path";
        case ParamLocation::Query: return "query";
        case ParamLocation::Header: return "header";
        case ParamLocation::BodyField: return "body_field";
    }
    return "query";
}

enum class SchemaType { String, Integer, Number, Boolean, Array, Object };

inline std::string_view to_string(SchemaType t) {
    switch (t) {
        case SchemaType::String: return "string";
        case SchemaType::Integer: return "integer";
        case SchemaType::Number: return "number";
        case SchemaType::Boolean: return "boolean";
        case SchemaType::Array: return "array";
        case SchemaType::Object: return "object";
    }
    return "string";
}

inline std::optional<SchemaType> parse_schema_type(std::string_view s) {
    if (s == "string") return SchemaType::String;
    if (s == "integer") return SchemaType::Integer;
    if (s == "number") return SchemaType::Number;
    if (s == "boolean") return SchemaType::Boolean;
    if (s == "array") return SchemaType::Array;
    if (s == "object") return SchemaType::Object;
    return std::nullopt;
}

struct SchemaNode;
using SchemaPtr = std::shared_ptr<const SchemaNode>;

struct SchemaNode {
    SchemaType type = SchemaType::String;
    std::vector<std::pair<std::string, SchemaPtr>> properties;  // document order
    std::vector<std::string> required;
    SchemaPtr items;
    std::optional<double> minimum;
    std::optional<double> maximum;
    std::optional<std::size_t> min_length;
    std::optional<std::size_t> max_length;
    std::optional<std::vector<Value>> enum_values;
    std::optional<Value> default_value;
    std::optional<Value> example_value;
    bool truncated = false;  // depth limit cut the subtree here

    bool is_required(std::string_view name) const {
        return std::find(required.begin(), required.end(), name) != required.end();
    }
};

inline bool schema_equal(const SchemaPtr& a, const SchemaPtr& b);

inline bool operator==(const SchemaNode& a, const SchemaNode& b) {
    if (a.type != b.type || a.required != b.required || a.minimum != b.minimum ||
        a.maximum != b.maximum || a.min_length != b.min_length || a.max_length != b.max_length ||
        a.enum_values != b.enum_values || a.default_value != b.default_value ||
        a.example_value != b.example_value || a.truncated != b.truncated ||
        a.properties.size() != b.properties.size() || !schema_equal(a.items, b.items)) {
        return false;
    }
    for (std::size_t i = 0; i < a.properties.size(); ++i) {
        if (a.properties[i].first != b.properties[i].first ||
            !schema_equal(a.properties[i].second, b.properties[i].second)) {
            return false;
        }
    }
    return true;
}

inline bool schema_equal(const SchemaPtr& a, const SchemaPtr& b) {
    if (!a || !b) return !a && !b;
    return a == b || *a == *b;
}

struct ParamDesc {
    std::string name;
    ParamLocation location = ParamLocation::Query;
    SchemaType schema_type = SchemaType::String;
    bool required = false;
    std::optional<std::vector<Value>> enum_values;
    std::optional<Value> default_value;
    std::optional<Value> example_value;
    SchemaPtr schema;  // full schema, used for array items and nested objects

    friend bool operator==(const ParamDesc& a, const ParamDesc& b) {
        return a.name == b.name && a.location == b.location && a.schema_type == b.schema_type &&
               a.required == b.required && a.enum_values == b.enum_values &&
               a.default_value == b.default_value && a.example_value == b.example_value &&
               schema_equal(a.schema, b.schema);
    }
};

struct OperationDesc {
    std::string op_id;  // "METHOD /path/{template}"
    HttpMethod method = HttpMethod::Get;
    std::string path_template;
    std::vector<ParamDesc> params;
    SchemaPtr body_schema;  // null when the operation takes no request body
    bool body_required = false;
    std::map<std::string, std::string> declared_responses;

    const ParamDesc* find_param(std::string_view name) const {
        for (const auto& p : params) {
            if (p.name == name) return &p;
        }
        return nullptr;
    }

    friend bool operator==(const OperationDesc& a, const OperationDesc& b) {
        return a.op_id == b.op_id && a.method == b.method && a.path_template == b.path_template &&
               a.params == b.params && schema_equal(a.body_schema, b.body_schema) &&
               a.body_required == b.body_required && a.declared_responses == b.declared_responses;
    }
};

struct ApiSpec {
    std::string base_path;
    std::vector<OperationDesc> operations;
    std::map<std::string, SchemaPtr> schemas;

    const OperationDesc* find(std::string_view op_id) const {
        for (const auto& op : operations) {
            if (op.op_id == op_id) return &op;
        }
        return nullptr;
    }

    friend bool operator==(const ApiSpec& a, const ApiSpec& b) {
        if (a.base_path != b.base_path || a.operations != b.operations ||
            a.schemas.size() != b.schemas.size()) {
            return false;
        }
        for (auto ia = a.schemas.begin(), ib = b.schemas.begin(); ia != a.schemas.end(); ++ia, ++ib) {
            if (ia->first != ib->first || !schema_equal(ia->second, ib->second)) return false;
        }
        return true;
    }
};

enum class SpecFormat { Json, Yaml };

struct SpecParseOptions {
    std::size_t max_schema_depth = 16;
};

inline std::string make_op_id(HttpMethod method, std::string_view path) {
    std::string id(to_string(method));
    id += ' ';
    id += path;
    return id;
}

namespace detail {

using OJson = nlohmann::ordered_json;

inline std::string pointer_escape(std::string_view token) {
    std::string out;
    for (char c : token) {
        if (c == '~') {
            out += "~0";
        } else if (c == '/') {
            out += "~1";
        } else {
            out += c;
        }
    }
    return out;
}

// YAML core-schema resolution of plain scalars; quoted scalars stay strings.
inline OJson yaml_scalar_to_json(const YAML::Node& node) {
    const std::string& text = node.Scalar();
    if (node.Tag() == "!") return text;
    if (text.empty() || text == "~" || text == "null" || text == "Null" || text == "NULL") {
        return nullptr;
    }
    if (text == "true" || text == "True" || text == "TRUE") return true;
    if (text == "false" || text == "False" || text == "FALSE") return false;
    {
        std::size_t i = (text[0] == '-' || text[0] == '+') ? 1 : 0;
        bool digits = i < text.size();
        for (std::size_t j = i; j < text.size(); ++j) {
            if (!std::isdigit(static_cast<unsigned char>(text[j]))) {
                digits = false;
                break;
            }
        }
        if (digits) {
            try {
                return std::stoll(text);
            } catch (const std::out_of_range&) {
                return text;
            }
        }
    }
    {
        char* end = nullptr;
        const double d = std::strtod(text.c_str(), &end);
        const bool numeric_start = std::isdigit(static_cast<unsigned char>(text[0])) ||
                                   text[0] == '-' || text[0] == '+' || text[0] == '.';
        if (numeric_start && end == text.c_str() + text.size()) return d;
    }
    return text;
}

inline OJson yaml_to_json(const YAML::Node& node) {
    switch (node.Type()) {
        case YAML::NodeType::Null:
        case YAML::NodeType::Undefined:
            return nullptr;
        case YAML::NodeType::Scalar:
            return yaml_scalar_to_json(node);
        case YAML::NodeType::Sequence: {
            OJson arr = OJson::array();
            for (const auto& item : node) arr.push_back(yaml_to_json(item));
            return arr;
        }
        case YAML::NodeType::Map: {
            OJson obj = OJson::object();
            for (const auto& kv : node) obj[kv.first.as<std::string>()] = yaml_to_json(kv.second);
            return obj;
        }
    }
    return nullptr;
}

class SpecParser {
public:
    SpecParser(const OJson& root, SpecParseOptions options) : root_(root), options_(options) {}

    ApiSpec parse() {
        if (!root_.is_object()) throw ParseError("OpenAPI document must be an object");
        if (root_.contains("swagger")) {
            throw UnsupportedFeature("Swagger 2.0 documents are not supported", "/swagger");
        }
        ApiSpec spec;
        spec.base_path = base_path_from_servers();
        if (auto it = root_.find("components"); it != root_.end() && it->is_object()) {
            if (auto schemas = it->find("schemas"); schemas != it->end() && schemas->is_object()) {
                for (const auto& [name, node] : schemas->items()) {
                    const std::string loc = "/components/schemas/" + pointer_escape(name);
                    spec.schemas.emplace(name, parse_schema(node, loc, 0));
                }
            }
        }
        const auto paths = root_.find("paths");
        if (paths == root_.end() || paths->is_null()) return spec;
        if (!paths->is_object()) throw ParseError("'paths' must be an object");
        for (const auto& [path, item_raw] : paths->items()) {
            const std::string path_loc = "/paths/" + pointer_escape(path);
            const OJson& item = deref(item_raw, path_loc);
            if (!item.is_object()) throw ParseError("path item at " + path_loc + " must be an object");
            std::vector<ParamDesc> shared_params;
            if (auto p = item.find("parameters"); p != item.end()) {
                shared_params = parse_parameters(*p, path_loc + "/parameters");
            }
            for (const auto& [key, op_node] : item.items()) {
                const auto method = parse_method(key);
                if (!method) continue;  // parameters, summary, head/options/trace
                spec.operations.push_back(
                    parse_operation(*method, path, op_node, shared_params, path_loc + "/" + key));
            }
        }
        return spec;
    }

private:
    std::string base_path_from_servers() const {
        auto servers = root_.find("servers");
        if (servers == root_.end() || !servers->is_array() || servers->empty()) return "";
        const auto& first = (*servers)[0];
        if (!first.is_object() || !first.contains("url") || !first["url"].is_string()) return "";
        std::string url = first["url"].get<std::string>();
        if (auto scheme = url.find("://"); scheme != std::string::npos) {
            const auto slash = url.find('/', scheme + 3);
            url = slash == std::string::npos ? "" : url.substr(slash);
        }
        while (!url.empty() && url.back() == '/') url.pop_back();
        return url;
    }

    const OJson& deref(const OJson& node, const std::string& location, int hops = 0) const {
        if (!node.is_object()) return node;
        auto ref = node.find("$ref");
        if (ref == node.end()) return node;
        if (!ref->is_string()) throw ParseError("$ref at " + location + " must be a string");
        const std::string target = ref->get<std::string>();
        if (target.empty() || target[0] != '#') {
            throw UnsupportedFeature("external $ref '" + target + "'", location);
        }
        if (hops > 32) throw ParseError("$ref chain too long at " + location);
        try {
            const OJson::json_pointer ptr(target.substr(1));
            return deref(root_.at(ptr), location, hops + 1);
        } catch (const nlohmann::json::exception&) {
            throw ParseError("unresolved $ref '" + target + "' at " + location);
        }
    }

    static std::optional<SchemaType> declared_type(const OJson& node) {
        auto t = node.find("type");
        if (t == node.end()) return std::nullopt;
        if (t->is_string()) return parse_schema_type(t->get<std::string>());
        if (t->is_array()) {  // 3.1 style ["string", "null"]
            for (const auto& e : *t) {
                if (e.is_string() && e.get<std::string>() != "null") {
                    return parse_schema_type(e.get<std::string>());
                }
            }
        }
        return std::nullopt;
    }

    static std::optional<Value> scalar_field(const OJson& node, const char* key) {
        auto it = node.find(key);
        if (it == node.end()) return std::nullopt;
        return Value::parse(it->dump());
    }

    SchemaPtr parse_schema(const OJson& raw, const std::string& location, std::size_t depth) const {
        const OJson& node = deref(raw, location);
        auto out = std::make_shared<SchemaNode>();
        if (!node.is_object()) return out;
        // allOf: merge object members, first declared type wins.
        if (auto all = node.find("allOf"); all != node.end() && all->is_array() && !all->empty()) {
            std::size_t idx = 0;
            for (const auto& part : *all) {
                auto sub = parse_schema(part, location + "/allOf/" + std::to_string(idx++), depth);
                if (idx == 1) *out = *sub;
                for (const auto& prop : sub->properties) out->properties.push_back(prop);
                for (const auto& r : sub->required) out->required.push_back(r);
                if (!sub->properties.empty()) out->type = SchemaType::Object;
            }
        } else if (auto one = node.find("oneOf"); one != node.end() && one->is_array() && !one->empty()) {
            *out = *parse_schema((*one)[0], location + "/oneOf/0", depth);
        } else if (auto any = node.find("anyOf"); any != node.end() && any->is_array() && !any->empty()) {
            *out = *parse_schema((*any)[0], location + "/anyOf/0", depth);
        }

        if (auto t = declared_type(node)) {
            out->type = *t;
        } else if (node.contains("properties")) {
            out->type = SchemaType::Object;
        } else if (node.contains("items")) {
            out->type = SchemaType::Array;
        }
        if (auto v = node.find("minimum"); v != node.end() && v->is_number()) out->minimum = v->get<double>();
        if (auto v = node.find("maximum"); v != node.end() && v->is_number()) out->maximum = v->get<double>();
        if (auto v = node.find("minLength"); v != node.end() && v->is_number_unsigned()) {
            out->min_length = v->get<std::size_t>();
        }
        if (auto v = node.find("maxLength"); v != node.end() && v->is_number_unsigned()) {
            out->max_length = v->get<std::size_t>();
        }
        if (auto e = node.find("enum"); e != node.end() && e->is_array() && !e->empty()) {
            std::vector<Value> values;
            for (const auto& v : *e) values.push_back(Value::parse(v.dump()));
            out->enum_values = std::move(values);
        }
        if (auto d = scalar_field(node, "default")) out->default_value = std::move(d);
        if (auto ex = scalar_field(node, "example")) {
            out->example_value = std::move(ex);
        } else if (auto exs = node.find("examples"); exs != node.end() && exs->is_array() && !exs->empty()) {
            out->example_value = Value::parse((*exs)[0].dump());
        }

        if (depth + 1 >= options_.max_schema_depth) {
            out->truncated = node.contains("properties") || node.contains("items");
            return out;
        }
        if (auto props = node.find("properties"); props != node.end() && props->is_object()) {
            for (const auto& [name, child] : props->items()) {
                out->properties.emplace_back(
                    name, parse_schema(child, location + "/properties/" + pointer_escape(name), depth + 1));
            }
        }
        if (auto req = node.find("required"); req != node.end() && req->is_array()) {
            for (const auto& r : *req) {
                if (r.is_string() && !out->is_required(r.get<std::string>())) {
                    out->required.push_back(r.get<std::string>());
                }
            }
        }
        if (auto items = node.find("items"); items != node.end()) {
            out->items = parse_schema(*items, location + "/items", depth + 1);
        }
        return out;
    }

    std::vector<ParamDesc> parse_parameters(const OJson& list, const std::string& location) const {
        if (!list.is_array()) throw ParseError("parameters at " + location + " must be an array");
        std::vector<ParamDesc> out;
        std::size_t idx = 0;
        for (const auto& raw : list) {
            const std::string loc = location + "/" + std::to_string(idx++);
            const OJson& node = deref(raw, loc);
            if (!node.is_object() || !node.contains("name") || !node.contains("in")) {
                throw ParseError("parameter at " + loc + " needs 'name' and 'in'");
            }
            const std::string in = node["in"].get<std::string>();
            ParamDesc p;
            p.name = node["name"].get<std::string>();
            if (in == "path") {
                p.location = ParamLocation::Path;
            } else if (in == "query") {
                p.location = ParamLocation::Query;
            } else if (in == "header") {
                p.location = ParamLocation::Header;
            } else {
                continue;  // cookie parameters are not exercised
            }
            p.required = p.location == ParamLocation::Path ||
                         (node.contains("required") && node["required"].is_boolean() &&
                          node["required"].get<bool>());
            if (auto s = node.find("schema"); s != node.end()) {
                p.schema = parse_schema(*s, loc + "/schema", 0);
            } else {
                p.schema = std::make_shared<SchemaNode>();
            }
            fill_from_schema(p);
            if (auto ex = scalar_field(node, "example")) {
                p.example_value = std::move(ex);
            } else if (auto exs = node.find("examples"); exs != node.end() && exs->is_object() && !exs->empty()) {
                const auto& first = exs->begin().value();
                if (first.is_object() && first.contains("value")) {
                    p.example_value = Value::parse(first["value"].dump());
                }
            }
            out.push_back(std::move(p));
        }
        return out;
    }

    static void fill_from_schema(ParamDesc& p) {
        p.schema_type = p.schema->type;
        p.enum_values = p.schema->enum_values;
        p.default_value = p.schema->default_value;
        p.example_value = p.schema->example_value;
    }

    OperationDesc parse_operation(HttpMethod method, const std::string& path, const OJson& raw,
                                  const std::vector<ParamDesc>& shared, const std::string& location) const {
        const OJson& node = deref(raw, location);
        if (!node.is_object()) throw ParseError("operation at " + location + " must be an object");
        OperationDesc op;
        op.method = method;
        op.path_template = path;
        op.op_id = make_op_id(method, path);

        std::vector<ParamDesc> own;
        if (auto p = node.find("parameters"); p != node.end()) {
            own = parse_parameters(*p, location + "/parameters");
        }
        // Operation-level parameters override path-level ones with the same (name, in).
        op.params = shared;
        for (auto& p : own) {
            auto same = std::find_if(op.params.begin(), op.params.end(), [&](const ParamDesc& q) {
                return q.name == p.name && q.location == p.location;
            });
            if (same != op.params.end()) {
                *same = std::move(p);
            } else {
                op.params.push_back(std::move(p));
            }
        }

        // Every {placeholder} needs a path parameter.
        for (std::size_t pos = path.find('{'); pos != std::string::npos; pos = path.find('{', pos + 1)) {
            const auto close = path.find('}', pos);
            if (close == std::string::npos) throw ParseError("unterminated path placeholder in " + path);
            const std::string name = path.substr(pos + 1, close - pos - 1);
            const bool declared = std::any_of(op.params.begin(), op.params.end(), [&](const ParamDesc& q) {
                return q.name == name && q.location == ParamLocation::Path;
            });
            if (!declared) {
                ParamDesc p;
                p.name = name;
                p.location = ParamLocation::Path;
                p.required = true;
                p.schema = std::make_shared<SchemaNode>();
                op.params.push_back(std::move(p));
            }
        }

        if (auto body = node.find("requestBody"); body != node.end()) {
            const std::string body_loc = location + "/requestBody";
            const OJson& rb = deref(*body, body_loc);
            op.body_required = rb.contains("required") && rb["required"].is_boolean() && rb["required"].get<bool>();
            if (auto content = rb.find("content"); content != rb.end() && content->is_object() && !content->empty()) {
                auto media = content->find("application/json");
                std::string media_key = "application/json";
                if (media == content->end()) {
                    media = content->begin();
                    media_key = media.key();
                }
                if (media->is_object() && media->contains("schema")) {
                    op.body_schema = parse_schema((*media)["schema"],
                                                  body_loc + "/content/" + pointer_escape(media_key) + "/schema", 0);
                }
            }
            if (op.body_schema && op.body_schema->type == SchemaType::Object) {
                for (const auto& [name, child] : op.body_schema->properties) {
                    ParamDesc p;
                    p.name = name;
                    p.location = ParamLocation::BodyField;
                    p.required = op.body_required && op.body_schema->is_required(name);
                    p.schema = child;
                    fill_from_schema(p);
                    op.params.push_back(std::move(p));
                }
            }
        }

        if (auto responses = node.find("responses"); responses != node.end() && responses->is_object()) {
            for (const auto& [code, resp_raw] : responses->items()) {
                const OJson& resp = deref(resp_raw, location + "/responses/" + pointer_escape(code));
                std::string description;
                if (resp.is_object() && resp.contains("description") && resp["description"].is_string()) {
                    description = resp["description"].get<std::string>();
                }
                op.declared_responses.emplace(code, std::move(description));
            }
        }
        return op;
    }

    const OJson& root_;
    SpecParseOptions options_;
};

}  // namespace detail

/// Parse an OpenAPI 3.x document (JSON or YAML) into the operation model.
/// Internal `$ref`s are inlined; external ones raise UnsupportedFeature.
inline ApiSpec parse_spec(std::string_view document, SpecFormat format, SpecParseOptions options = {}) {
    detail::OJson root;
    if (format == SpecFormat::Json) {
        try {
            root = detail::OJson::parse(document.begin(), document.end());
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(std::string("malformed JSON: ") + e.what());
        }
    } else {
        try {
            root = detail::yaml_to_json(YAML::Load(std::string(document)));
        } catch (const YAML::Exception& e) {
            throw ParseError(std::string("malformed YAML: ") + e.what());
        }
    }
    return detail::SpecParser(root, options).parse();
}

// Picks the format from the file extension; anything other than .json is YAML.
inline SpecFormat guess_spec_format(std::string_view path) {
    const auto dot = path.rfind('.');
    if (dot != std::string_view::npos && path.substr(dot) == ".json") return SpecFormat::Json;
    return SpecFormat::Yaml;
}

using FrequencyMap = std::map<std::string, std::size_t>;

/// Number of operations declaring a parameter of each name (exact,
/// case-sensitive); an operation counts at most once per name.
inline FrequencyMap parameter_frequency(const ApiSpec& spec, bool include_body_fields = true) {
    FrequencyMap freq;
    for (const auto& op : spec.operations) {
        std::set<std::string> seen;
        for (const auto& p : op.params) {
            if (!include_body_fields && p.location == ParamLocation::BodyField) continue;
            if (seen.insert(p.name).second) ++freq[p.name];
        }
    }
    return freq;
}

inline std::vector<std::string> enumerate_operations(const ApiSpec& spec) {
    std::vector<std::string> ids;
    ids.reserve(spec.operations.size());
    for (const auto& op : spec.operations) ids.push_back(op.op_id);
    return ids;
}

}  // namespace mucorest
