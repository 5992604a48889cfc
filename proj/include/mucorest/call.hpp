#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mucorest/agent.hpp"
#include "mucorest/spec_model.hpp"

namespace mucorest {

using HeaderList = std::vector<std::pair<std::string, std::string>>;

/// One materialized request.
struct ApiCall {
    std::uint64_t call_index = 0;
    std::string op_id;
    HttpMethod method = HttpMethod::Get;
    std::map<std::string, Value> param_values;
    SourceKind source = SourceKind::SpecExample;
    std::string url;
    HeaderList headers;             // auth headers first, then header parameters
    std::optional<std::string> body;  // JSON text
};

/// Outcome of one request. `status` is absent exactly when the transport failed.
struct ApiResponse {
    std::optional<int> status;
    std::string body;
    bool truncated = false;
    double latency_ms = 0.0;
    std::optional<std::string> transport_error;

    static ApiResponse with_status(int status, std::string body) {
        ApiResponse r;
        r.status = status;
        r.body = std::move(body);
        return r;
    }

    static ApiResponse failed(std::string error) {
        ApiResponse r;
        r.transport_error = std::move(error);
        return r;
    }

    bool is_success() const { return status && *status >= 200 && *status < 300; }
    bool is_server_error() const { return status && *status >= 500 && *status < 600; }
};

}  // namespace mucorest
