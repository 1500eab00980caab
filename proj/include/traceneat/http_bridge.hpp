#pragma once

// HTTP transport for the bridge protocol. Needs cpp-httplib on the include
// path; the rest of the library does not.
//
//   POST /bridge      body: zero or more framed input messages
//                     reply: the latest framed frame message (empty when idle)
//   POST /disconnect  ends the active session as a player stop

#include <atomic>
#include <chrono>
#include <thread>

#include <httplib.h>

#include "traceneat/bridge.hpp"

namespace traceneat::bridge {

inline void install_routes(httplib::Server& server, SharedSession& shared) {
  server.Post("/bridge", [&shared](const httplib::Request& req, httplib::Response& res) {
    try {
      res.set_content(shared.exchange(req.body), "text/plain");
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(e.what(), "text/plain");
    }
  });
  server.Post("/disconnect", [&shared](const httplib::Request&, httplib::Response& res) {
    shared.disconnect();
    res.set_content("", "text/plain");
  });
}

/// Advances the shared session at a fixed rate until `stop` is set.
inline void run_ticks(SharedSession& shared, const std::atomic<bool>& stop, int ticks_per_second = 30) {
  const auto period = std::chrono::nanoseconds(1000000000LL / ticks_per_second);
  auto next = std::chrono::steady_clock::now();
  while (!stop) {
    shared.tick();
    next += period;
    std::this_thread::sleep_until(next);
  }
}

}  // namespace traceneat::bridge
