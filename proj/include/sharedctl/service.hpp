#pragma once

#include "sharedctl/io.hpp"
#include "sharedctl/session.hpp"

#include <functional>
#include <memory>
#include <string>

namespace sharedctl {

struct ServiceOptions {
    std::string host = "127.0.0.1";
    /// 0 picks a free port.
    int port = 8080;
    /// WebSocket mirror port: 0 picks a free one, negative disables it.
    int ws_port = -1;
    double b_min = 0.05;
    double b_max = 0.95;
};

/**
 * HTTP session API plus an optional WebSocket mirror of session events.
 *
 *   POST /sessions                     {scenario?, result?, seed?}
 *   GET  /sessions/{id}
 *   POST /sessions/{id}/step           {"action": "up"}
 *   POST /sessions/{id}/reset
 *   GET  /sessions/{id}/export-demos
 *   GET  /meta/result
 *
 * Requests on one session run one at a time in arrival order. Synthesis runs
 * on its own thread; session creation answers 503 until it is done.
 */
class SessionService {
public:
    explicit SessionService(ServiceOptions options);
    ~SessionService();
    SessionService(const SessionService&) = delete;
    SessionService& operator=(const SessionService&) = delete;

    void set_result(const GridworldConfig& scenario, ResultDocument result);
    /// Runs `job` on the worker thread and installs its result.
    void synthesize_on_start(const GridworldConfig& scenario, std::function<ResultDocument()> job);

    /// Binds the ports and starts listening; throws ConfigError when a port is taken.
    void start();
    /// Blocks until stop().
    void wait();
    void stop();

    int port() const;
    int ws_port() const;
    bool ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace sharedctl
