#include "attrib/http_server.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

namespace attrib::server {
namespace {

using json = nlohmann::ordered_json;

void reply(httplib::Response& res, const Response& r) {
    res.status = http_status(r.outcome);
    if (r.outcome != Outcome::kNoContent) res.set_content(r.body.dump(), "application/json");
}

void bad_request(httplib::Response& res, const std::string& message) {
    reply(res, {Outcome::kBadRequest, json{{"error", message}}});
}

}  // namespace

struct HttpServer::Impl {
    explicit Impl(TaskServer& t) : tasks(t) {}
    TaskServer& tasks;
    httplib::Server http;
};

HttpServer::HttpServer(TaskServer& tasks, std::optional<std::filesystem::path> static_dir)
    : impl_(std::make_unique<Impl>(tasks)) {
    auto& http = impl_->http;
    auto& ts = impl_->tasks;

    http.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"status":"ok"})", "application/json");
    });

    http.Get("/api/tasks/next", [&ts](const httplib::Request& req, httplib::Response& res) {
        if (!req.has_param("annotator")) return bad_request(res, "missing annotator parameter");
        reply(res, ts.next_task(req.get_param_value("annotator")));
    });

    http.Post("/api/tasks/:id/annotation", [&ts](const httplib::Request& req, httplib::Response& res) {
        json body;
        try {
            body = json::parse(req.body);
        } catch (const nlohmann::json::parse_error&) {
            return bad_request(res, "body is not JSON");
        }
        if (!body.is_object()) return bad_request(res, "body must be a JSON object");
        std::string annotator = req.get_param_value("annotator");
        if (annotator.empty()) {
            if (auto it = body.find("annotator_id"); it != body.end() && it->is_string()) annotator = it->get<std::string>();
        }
        if (annotator.empty()) return bad_request(res, "missing annotator");

        Submission s;
        auto pred = body.find("prediction");
        if (pred == body.end() || !pred->is_array()) return bad_request(res, "prediction must be an array of integers");
        for (const auto& v : *pred) {
            if (!v.is_number_integer()) return bad_request(res, "prediction must be an array of integers");
            if (!s.prediction.insert(v.get<int>()).second) return bad_request(res, "prediction has duplicates");
        }
        auto none = body.find("none_selected");
        if (none == body.end() || !none->is_boolean()) return bad_request(res, "none_selected must be a boolean");
        s.none_selected = none->get<bool>();
        if (auto u = body.find("utility"); u != body.end() && !u->is_null()) {
            if (!u->is_number()) return bad_request(res, "utility must be a number or null");
            s.utility = u->get<double>();
        }
        reply(res, ts.submit(annotator, req.path_params.at("id"), s));
    });

    http.Get("/api/progress", [&ts](const httplib::Request&, httplib::Response& res) {
        res.set_content(ts.progress().dump(), "application/json");
    });

    if (static_dir) {
        if (!http.set_mount_point("/", static_dir->string())) {
            spdlog::warn("static directory {} does not exist", static_dir->string());
        }
    }
    http.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string what = "internal error";
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            what = e.what();
        } catch (...) {
        }
        spdlog::error("request failed: {}", what);
        res.status = 500;
        res.set_content(json{{"error", what}}.dump(), "application/json");
    });
}

HttpServer::~HttpServer() {
    stop();
}

bool HttpServer::listen(const std::string& host, int port) {
    return impl_->http.listen(host, port);
}

int HttpServer::bind_any_port(const std::string& host) {
    return impl_->http.bind_to_any_port(host);
}

bool HttpServer::listen_after_bind() {
    return impl_->http.listen_after_bind();
}

void HttpServer::stop() {
    if (impl_) impl_->http.stop();
}

void HttpServer::wait_until_ready() const {
    impl_->http.wait_until_ready();
}

}  // namespace attrib::server
