#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include <httplib.h>

#include "mucorest/call.hpp"
#include "mucorest/error.hpp"
#include "mucorest/executor.hpp"

namespace mucorest {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string target;  // /path?query
};

inline std::optional<SplitUrl> split_url(std::string_view url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string_view::npos) return std::nullopt;
    const auto path_start = url.find('/', scheme_end + 3);
    SplitUrl out;
    if (path_start == std::string_view::npos) {
        out.origin = std::string(url);
        out.target = "/";
    } else {
        out.origin = std::string(url.substr(0, path_start));
        out.target = std::string(url.substr(path_start));
    }
    if (out.origin.size() <= scheme_end + 3) return std::nullopt;
    return out;
}

inline std::string describe(httplib::Error e) {
    switch (e) {
        case httplib::Error::Connection: return "connection refused";
        case httplib::Error::ConnectionTimeout: return "connection timeout";
        case httplib::Error::Read: return "read error or timeout";
        case httplib::Error::Write: return "write error";
        default: return httplib::to_string(e);
    }
}

/// HTTP/1.1 transport over cpp-httplib, one keep-alive client per origin.
class HttpTransport final : public Transport {
public:
    explicit HttpTransport(std::string probe_url = {}) : probe_url_(std::move(probe_url)) {}

    ApiResponse send(const ApiCall& call, int timeout_ms) override {
        const auto parts = split_url(call.url);
        if (!parts) return ApiResponse::failed("malformed url '" + call.url + "'");
        httplib::Client* client = client_for(parts->origin, timeout_ms);
        if (client == nullptr) return ApiResponse::failed("unsupported url scheme in '" + call.url + "'");

        httplib::Headers headers;
        std::string content_type;
        for (const auto& [name, value] : call.headers) {
            if (detail::ascii_lower(name) == "content-type") {
                content_type = value;
            } else {
                headers.emplace(name, value);
            }
        }
        const std::string body = call.body.value_or("");
        if (call.body && content_type.empty()) content_type = "application/json";

        httplib::Result res{nullptr, httplib::Error::Unknown};
        switch (call.method) {
            case HttpMethod::Get: res = client->Get(parts->target, headers); break;
            case HttpMethod::Post: res = client->Post(parts->target, headers, body, content_type); break;
            case HttpMethod::Put: res = client->Put(parts->target, headers, body, content_type); break;
            case HttpMethod::Patch: res = client->Patch(parts->target, headers, body, content_type); break;
            case HttpMethod::Delete:
                res = call.body ? client->Delete(parts->target, headers, body, content_type)
                                : client->Delete(parts->target, headers);
                break;
        }
        if (!res) return ApiResponse::failed(describe(res.error()));
        return ApiResponse::with_status(res->status, res->body);
    }

    bool probe() override {
        if (probe_url_.empty()) return true;
        ApiCall call;
        call.url = probe_url_;
        return send(call, 5000).status.has_value();
    }

private:
    httplib::Client* client_for(const std::string& origin, int timeout_ms) {
        auto it = clients_.find(origin);
        if (it == clients_.end()) {
            auto client = std::make_unique<httplib::Client>(origin);
            if (!client->is_valid()) return nullptr;
            client->set_keep_alive(true);
            client->set_tcp_nodelay(true);
            it = clients_.emplace(origin, std::move(client)).first;
        }
        const auto sec = timeout_ms / 1000;
        const auto usec = (timeout_ms % 1000) * 1000;
        it->second->set_connection_timeout(sec, usec);
        it->second->set_read_timeout(sec, usec);
        it->second->set_write_timeout(sec, usec);
        return it->second.get();
    }

    std::string probe_url_;
    std::map<std::string, std::unique_ptr<httplib::Client>> clients_;
};

/// GETs a URL and returns the body; transport failures and non-2xx answers
/// raise ProviderUnavailable (used for JaCoCo reports served over HTTP).
inline std::string fetch_url(const std::string& url, int timeout_ms = 10000) {
    HttpTransport transport;
    ApiCall call;
    call.url = url;
    const auto resp = transport.send(call, timeout_ms);
    if (!resp.status) throw ProviderUnavailable("cannot fetch '" + url + "': " + resp.transport_error.value_or(""));
    if (!resp.is_success()) {
        throw ProviderUnavailable("cannot fetch '" + url + "': HTTP " + std::to_string(*resp.status));
    }
    return resp.body;
}

}  // namespace mucorest
