#pragma once

#include <nlohmann/json.hpp>

#include <string>

namespace splatsim {

struct HttpJsonConfig {
    std::string url;     // http://host:port/path
    std::string api_key; // nonempty -> Authorization: Bearer <key>
    int timeout_s = 30;
    int retries = 2; // additional attempts after the first
};

/// POST body as application/json, parse the JSON reply. Retries transport
/// errors and 5xx; throws IoError on exhaustion or 4xx (body attached) and
/// ParseError when the reply is not JSON (raw payload attached).
nlohmann::json http_post_json(const HttpJsonConfig& cfg, const nlohmann::json& body);

} // namespace splatsim
