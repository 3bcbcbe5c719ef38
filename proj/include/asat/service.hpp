#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "asat/engine.hpp"

namespace httplib {
class Server;
}

namespace asat::service {

using Params = std::multimap<std::string, std::string>;

struct Response {
    int status = 200;
    std::string body;
};

/// Request handlers, independent of the transport. Bodies are JSON; errors
/// are {"code": ..., "message": ...}.
Response get_risk(const Engine& engine, const Params& params);
Response get_timeseries(const Engine& engine, std::string_view geo_id, const Params& params);
Response get_pois(const Engine& engine, const Params& params);
Response get_posts(const Engine& engine, std::string_view geo_id, const Params& params);

/// Maps an exception thrown while serving onto a status and error body.
Response error_response(const std::exception& error);

class Server {
public:
    explicit Server(std::shared_ptr<const Engine> engine, std::size_t threads = 32);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Binds and starts serving on a background thread; port 0 picks a free
    /// port. Returns the bound port. Throws Error when binding fails.
    int start(const std::string& host, int port);
    /// Blocks until the server stops. Safe to call from several threads.
    void wait();
    /// Asks the listener to shut down; returns without waiting.
    void stop();
    int port() const noexcept { return port_; }

    /// Swaps in a new engine; requests in flight finish on the old one.
    void reload(std::shared_ptr<const Engine> engine);
    std::shared_ptr<const Engine> engine() const;

private:
    mutable std::mutex mutex_;
    std::mutex join_mutex_;
    std::shared_ptr<const Engine> engine_;
    std::unique_ptr<httplib::Server> http_;
    std::thread thread_;
    int port_ = 0;
};

}  // namespace asat::service
