// Copyright 2026 The dyst Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "dyst/planner.hpp"

#include <httplib.h>
#include <json.hpp>

#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

namespace testing {

/// Scripted OpenAI-compatible server: answers each POST with the next
/// (status, content) pair and records the request bodies.
class FakePlanner {
public:
    explicit FakePlanner(std::vector<std::pair<int, std::string>> script) : script_(std::move(script)) {
        server_.Post("/v1/chat/completions", [this](const httplib::Request &req, httplib::Response &res) {
            std::lock_guard lock(mu_);
            requests_.push_back(req.body);
            auth_.push_back(req.get_header_value("Authorization"));
            auto [status, content] = next_ < script_.size() ? script_[next_++] : std::pair{500, std::string("done")};
            res.status = status;
            if (status == 200) {
                nlohmann::json reply{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}};
                res.set_content(reply.dump(), "application/json");
            } else {
                res.set_content(content, "text/plain");
            }
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakePlanner() {
        server_.stop();
        thread_.join();
    }

    dyst::PlannerConfig config(int retries = 2) const {
        dyst::PlannerConfig c;
        c.endpoint = "http://127.0.0.1:" + std::to_string(port_) + "/v1";
        c.model_name = "fake";
        c.max_retries = retries;
        c.timeout_seconds = 5;
        return c;
    }
    std::vector<std::string> requests() {
        std::lock_guard lock(mu_);
        return requests_;
    }
    std::vector<std::string> auth() {
        std::lock_guard lock(mu_);
        return auth_;
    }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::mutex mu_;
    std::vector<std::pair<int, std::string>> script_;
    std::size_t next_ = 0;
    std::vector<std::string> requests_;
    std::vector<std::string> auth_;
};

/// A loopback port nothing listens on: bound, read back, then closed.
inline int unused_port() {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw std::runtime_error("socket() failed");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    socklen_t len = sizeof addr;
    if (::bind(fd, reinterpret_cast<sockaddr *>(&addr), len) != 0 ||
        ::getsockname(fd, reinterpret_cast<sockaddr *>(&addr), &len) != 0) {
        ::close(fd);
        throw std::runtime_error("bind() failed");
    }
    ::close(fd);
    return ntohs(addr.sin_port);
}

} // namespace testing
