#include "http_json.hpp"

#include "splatsim/types.hpp"

#include "httplib.h"

namespace splatsim {

using nlohmann::json;

namespace {

// http://host:port/path -> (http://host:port, /path)
std::pair<std::string, std::string> split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw ContractError("HTTP URL missing scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

} // namespace

json http_post_json(const HttpJsonConfig& cfg, const json& body) {
    const auto [base, path] = split_url(cfg.url);
    const std::string payload = body.dump();

    std::string last_error;
    for (int attempt = 0; attempt <= cfg.retries; ++attempt) {
        httplib::Client client(base);
        client.set_connection_timeout(cfg.timeout_s, 0);
        client.set_read_timeout(cfg.timeout_s, 0);
        client.set_write_timeout(cfg.timeout_s, 0);
        httplib::Headers headers;
        if (!cfg.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg.api_key);

        auto res = client.Post(path, headers, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status) + ": " + res->body;
            continue;
        }
        if (res->status < 200 || res->status >= 300)
            throw IoError("POST " + cfg.url + " returned HTTP " + std::to_string(res->status) +
                          "; payload: " + res->body);
        try {
            return json::parse(res->body);
        } catch (const json::exception& e) {
            throw ParseError("POST " + cfg.url + " reply is not JSON (" + e.what() +
                             "); payload: " + res->body);
        }
    }
    throw IoError("POST " + cfg.url + " failed after " + std::to_string(cfg.retries + 1) +
                  " attempts; last error: " + last_error);
}

} // namespace splatsim
