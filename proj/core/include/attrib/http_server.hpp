#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "attrib/taskserver.hpp"

namespace attrib::server {

/// HTTP front end for a TaskServer:
///
///   GET  /api/health
///   GET  /api/tasks/next?annotator=ID
///   POST /api/tasks/{id}/annotation   {prediction, none_selected, utility}
///   GET  /api/progress
///
/// The annotator of a submission comes from ?annotator= or the body field
/// "annotator_id". Other paths are served from `static_dir` when given.
class HttpServer {
public:
    explicit HttpServer(TaskServer& tasks, std::optional<std::filesystem::path> static_dir = std::nullopt);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds and serves until stop(); returns false if binding fails.
    bool listen(const std::string& host, int port);
    /// Binds to a free port and returns it, or -1.
    int bind_any_port(const std::string& host);
    /// Serves on a socket bound by bind_any_port.
    bool listen_after_bind();
    void stop();
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace attrib::server
