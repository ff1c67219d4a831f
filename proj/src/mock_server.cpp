#include "httplib.h"

#include "cotc/mock.hpp"

namespace cotc {

struct MockServer::Impl {
    httplib::Server server;
};

MockServer::MockServer(std::shared_ptr<const MockEndpoint> endpoint, int port) : impl_(std::make_unique<Impl>()) {
    const auto route = [endpoint](const char* path) {
        return [endpoint, p = std::string(path)](const httplib::Request& req, httplib::Response& res) {
            const auto result = endpoint->handle(p, req.body);
            res.status = result.status;
            res.set_content(result.body, "application/json");
        };
    };
    impl_->server.Post(kChatPath, route(kChatPath));
    impl_->server.Post(kEmbeddingsPath, route(kEmbeddingsPath));
    if (port == 0) {
        port_ = impl_->server.bind_to_any_port("127.0.0.1");
    } else if (impl_->server.bind_to_port("127.0.0.1", port)) {
        port_ = port;
    } else {
        port_ = -1;
    }
    if (port_ < 0) throw Error(ErrorFamily::Usage, "mock server could not bind port " + std::to_string(port));
    thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

MockServer::~MockServer() { stop(); }

void MockServer::wait() {
    if (thread_.joinable()) thread_.join();
}

void MockServer::stop() {
    impl_->server.stop();
    if (thread_.joinable()) thread_.join();
}

std::unique_ptr<MockServer> serve_mock(const std::filesystem::path& fixture_dir, int port) {
    return std::make_unique<MockServer>(MockEndpoint::load(fixture_dir), port);
}

}  // namespace cotc
