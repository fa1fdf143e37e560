#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "stq/functions.hpp"

namespace httplib {
class Server;
}

namespace stq {

/// Transport-independent request, so the endpoint logic is testable without
/// sockets.
struct HttpRequest {
    std::string method;
    std::string path;
    std::map<std::string, std::string> params; ///< query-string parameters
    std::string body;
};

struct HttpResponse {
    int status = 200;
    std::string body; ///< always JSON
};

/// The HTTP entry point. `POST /query` parses the query and hands it to the
/// coordinator on a background thread (or waits for it with `?sync=true`);
/// `GET /query/{id}` reports the status.
class Starter {
public:
    explicit Starter(QueryEngine& engine);
    /// Stops the server and waits for running queries.
    ~Starter();
    Starter(const Starter&) = delete;
    Starter& operator=(const Starter&) = delete;

    HttpResponse handle(const HttpRequest& request);

    /// Binds (port 0 picks a free one) and serves on a background thread.
    /// Returns the bound port. Throws IoError if binding fails.
    int start(const std::string& host, int port);
    /// Binds and serves on the calling thread until stop().
    void listen(const std::string& host, int port);
    void stop();

    /// Blocks until every query accepted so far has finished.
    void drain();

private:
    HttpResponse post_query(const HttpRequest& request);
    HttpResponse get_query(const std::string& id);
    void install_routes();

    QueryEngine& engine_;
    std::unique_ptr<httplib::Server> server_;
    std::thread server_thread_;
    std::mutex runs_mu_;
    std::vector<std::thread> runs_;
};

} // namespace stq
