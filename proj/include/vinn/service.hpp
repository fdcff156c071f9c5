#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace vinn {

struct ServiceConfig {
    std::filesystem::path models_dir;
    std::filesystem::path datasets_dir;
    std::filesystem::path sessions_dir = "sessions";
    std::optional<std::filesystem::path> ui_dir;  // served under / when set
};

/// JSON API over models, datasets and pruning sessions. Routes and payloads
/// are documented in docs/api.md.
///
/// Each session admits one mutation at a time; a mutation arriving while
/// another runs is rejected with 409. Reads run concurrently and see either
/// the state before or after a mutation, never in between. Every mutation is
/// written through to <sessions_dir>/<id>/session.json.
class ApiService {
public:
    explicit ApiService(ServiceConfig config);
    ~ApiService();

    ApiService(const ApiService&) = delete;
    ApiService& operator=(const ApiService&) = delete;

    /// Binds the listening socket. Port 0 picks a free port. Returns the
    /// bound port, or -1 on failure.
    int bind(const std::string& host, int port);

    /// Serves until stop(); requires a successful bind().
    bool listen();

    void stop();

    /// Blocks until the server accepts connections.
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace vinn
