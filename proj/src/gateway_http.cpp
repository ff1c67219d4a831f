#include "httplib.h"

#include "cotc/gateway.hpp"

namespace cotc {

namespace {

class HttpTransport final : public Transport {
public:
    HttpTransport(const std::string& base_url, std::string api_key, std::chrono::seconds timeout)
        : api_key_(std::move(api_key)), timeout_(timeout) {
        // Split "scheme://host[:port]" from an optional path prefix.
        const auto scheme_end = base_url.find("://");
        const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
        const auto path_start = base_url.find('/', host_start);
        origin_ = path_start == std::string::npos ? base_url : base_url.substr(0, path_start);
        if (path_start != std::string::npos) prefix_ = base_url.substr(path_start);
        while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
        // Callers pass "/v1/..." paths; drop a duplicated "/v1" suffix in the base.
        if (prefix_.size() >= 3 && prefix_.compare(prefix_.size() - 3, 3, "/v1") == 0) {
            prefix_.resize(prefix_.size() - 3);
        }
    }

    HttpResult post(const std::string& path, const std::string& body) override {
        httplib::Client client(origin_);
        client.set_connection_timeout(std::chrono::seconds(10));
        client.set_read_timeout(timeout_);
        client.set_write_timeout(timeout_);
        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
        auto res = client.Post(prefix_ + path, headers, body, "application/json");
        if (!res) return {0, httplib::to_string(res.error())};
        return {res->status, res->body};
    }

private:
    std::string origin_;
    std::string prefix_;
    std::string api_key_;
    std::chrono::seconds timeout_;
};

}  // namespace

std::shared_ptr<Transport> make_http_transport(const std::string& base_url, const std::string& api_key,
                                               std::chrono::seconds timeout) {
    if (base_url.empty()) throw InvariantError("base_url", "endpoint base URL is not configured");
    return std::make_shared<HttpTransport>(base_url, api_key, timeout);
}

}  // namespace cotc
