#pragma once

// HTTP/JSON front end of the session store.
//
//   GET  /healthz                              200
//   GET  /sessions                             200 {"ids": [...]}
//   POST /sessions                             201 snapshot
//   GET  /sessions/{id}                        200 snapshot
//   POST /sessions/{id}/recommend?method=...   200 {recommended_load, discretized_load, method}
//   POST /sessions/{id}/outcomes               200 snapshot; body {load, outcome, idempotency_key}
//   POST /sessions/{id}/close                  200 snapshot
//
// Errors are {"error": <kind>, "message": <text>} with status 400 (malformed
// JSON), 404 (unknown session), 409 (closed session, pending recommendation,
// reused idempotency key, no GP model) or 422 (invalid values, degenerate
// posterior).

#include "fatigue/session.hpp"

#include <memory>
#include <string>

namespace fatigue::lab {

class LabService {
public:
    explicit LabService(SessionStore& store);
    ~LabService();
    LabService(const LabService&) = delete;
    LabService& operator=(const LabService&) = delete;

    // Binds to host:port; port 0 picks a free port. Returns the bound port, or -1.
    int bind(const std::string& host, int port);
    // Serves until stop(). Call after bind().
    bool run();
    void stop();
    bool is_running() const;
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace fatigue::lab
