#include "stq/starter.hpp"

#include <chrono>

#include "httplib.h"
#include "json.hpp"
#include "stq/error.hpp"
#include "stq/query.hpp"

namespace stq {

using json = nlohmann::json;

namespace {

HttpResponse error_response(int status, const std::string& message) {
    return {status, json{{"error", message}}.dump()};
}

HttpResponse parse_error_response(const ParseError& e) {
    json j = {{"error", e.what()},
              {"kind", to_string(e.kind())},
              {"offset", e.offset()},
              {"message", e.message()}};
    if (!e.expected().empty()) {
        j["expected"] = e.expected();
    }
    return {400, j.dump()};
}

} // namespace

Starter::Starter(QueryEngine& engine) : engine_(engine) {}

Starter::~Starter() {
    stop();
    drain();
}

HttpResponse Starter::handle(const HttpRequest& request) {
    static constexpr std::string_view kPrefix = "/query/";
    if (request.path == "/query") {
        if (request.method != "POST") {
            return error_response(405, "use POST /query");
        }
        return post_query(request);
    }
    if (request.path.starts_with(kPrefix) && request.path.size() > kPrefix.size()) {
        if (request.method != "GET") {
            return error_response(405, "use GET /query/{id}");
        }
        return get_query(request.path.substr(kPrefix.size()));
    }
    return error_response(404, "no route for " + request.method + " " + request.path);
}

HttpResponse Starter::post_query(const HttpRequest& request) {
    std::string text;
    try {
        auto body = json::parse(request.body);
        if (!body.is_object() || !body.contains("query") || !body["query"].is_string()) {
            return error_response(400, "body must be a JSON object with a string \"query\"");
        }
        text = body["query"].get<std::string>();
    } catch (const json::exception& e) {
        return error_response(400, std::string("malformed JSON body: ") + e.what());
    }

    QueryAst ast;
    try {
        ast = parse(text);
    } catch (const ParseError& e) {
        return parse_error_response(e);
    }

    auto id = engine_.next_query_id();
    engine_.board().publish(QueryStatus{id, QueryState::Pending, {}, {}, {}, {}});

    auto sync = request.params.find("sync");
    if (sync != request.params.end() && sync->second == "true") {
        auto status = engine_.run(ast, id);
        return {200, status_to_json(status)};
    }
    {
        std::lock_guard lock(runs_mu_);
        runs_.emplace_back([this, ast = std::move(ast), id] { engine_.run(ast, id); });
    }
    return {202, json{{"query_id", id}}.dump()};
}

HttpResponse Starter::get_query(const std::string& id) {
    auto status = engine_.board().get(id);
    if (!status) {
        return error_response(404, "unknown query id: " + id);
    }
    return {200, status_to_json(*status)};
}

void Starter::drain() {
    std::vector<std::thread> runs;
    {
        std::lock_guard lock(runs_mu_);
        runs.swap(runs_);
    }
    for (auto& t : runs) {
        t.join();
    }
}

void Starter::install_routes() {
    server_ = std::make_unique<httplib::Server>();
    // The library default adds SO_REUSEPORT, which lets a second server bind
    // the same port unnoticed.
    server_->set_socket_options([](socket_t sock) {
        int yes = 1;
        ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    auto bridge = [this](const httplib::Request& req, httplib::Response& res) {
        HttpRequest r{req.method, req.path, {}, req.body};
        for (const auto& [k, v] : req.params) {
            r.params[k] = v;
        }
        auto out = handle(r);
        res.status = out.status;
        res.set_content(out.body, "application/json");
    };
    server_->Post("/query", bridge);
    server_->Get(R"(/query/.+)", bridge);
}

int Starter::start(const std::string& host, int port) {
    install_routes();
    int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (bound < 0) {
        throw IoError("cannot bind " + host + ":" + std::to_string(port));
    }
    server_thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return bound;
}

void Starter::listen(const std::string& host, int port) {
    install_routes();
    if (!server_->bind_to_port(host, port)) {
        throw IoError("cannot bind " + host + ":" + std::to_string(port));
    }
    server_->listen_after_bind();
}

void Starter::stop() {
    if (server_) {
        server_->stop();
    }
    if (server_thread_.joinable()) {
        server_thread_.join();
    }
}

} // namespace stq
