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

#include "dyst/error.hpp"
#include "dyst/scene.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dyst {

inline constexpr const char *kApiKeyEnv = "DYST_PLANNER_API_KEY";

struct PlannerConfig {
    /// Base URL of an OpenAI-compatible service, e.g. http://localhost:8000/v1
    std::string endpoint = "http://localhost:8000/v1";
    std::string model_name = "deepseek-reasoner";
    int max_retries = 2;
    double timeout_seconds = 120.0;
    double temperature = 0.6;

    /// Throws InvariantError when a field is out of range.
    void validate() const;
};

struct ChatMessage {
    std::string role;
    std::string text;

    bool operator==(const ChatMessage &) const = default;
};

struct PlannerTranscript {
    std::vector<ChatMessage> request_messages;
    std::string raw_response;
    int repair_attempts = 0;

    /// Every turn in order, ending with the last raw response.
    std::vector<ChatMessage> turns() const;
};

class UnrecoverablePlan : public Error {
public:
    UnrecoverablePlan(const std::string &message, PlannerTranscript transcript) :
        Error("UnrecoverablePlan", message),
        transcript_(std::move(transcript)) {}

    const PlannerTranscript &transcript() const noexcept { return transcript_; }

private:
    PlannerTranscript transcript_;
};

/// Instruction text asking the model for the four-step decomposition and a
/// scene document in the canonical schema. Throws EmptyPrompt.
std::string build_planner_prompt(std::string_view user_prompt, const LatentGeometry &geometry);

/// One chat-completion round trip.
class PlanTransport {
public:
    virtual ~PlanTransport() = default;
    virtual std::string complete(const std::vector<ChatMessage> &messages) = 0;
};

/// POSTs to {endpoint}/chat/completions. Bearer token from DYST_PLANNER_API_KEY
/// when set.
class HttpTransport : public PlanTransport {
public:
    explicit HttpTransport(PlannerConfig config);
    std::string complete(const std::vector<ChatMessage> &messages) override;

private:
    PlannerConfig config_;
};

/// Replays the assistant turns of a recorded transcript in order.
class ReplayTransport : public PlanTransport {
public:
    explicit ReplayTransport(std::vector<ChatMessage> turns);
    std::string complete(const std::vector<ChatMessage> &messages) override;

private:
    std::vector<std::string> replies_;
    std::size_t next_ = 0;
};

std::pair<std::string, PlannerTranscript> request_plan(PlanTransport &transport, std::string_view prompt);
std::pair<std::string, PlannerTranscript> request_plan(const PlannerConfig &config, std::string_view prompt);

/// First balanced JSON object in `raw`, ignoring code fences, reasoning
/// blocks and surrounding prose.
std::optional<std::string> extract_json_object(std::string_view raw);

/// Parses `raw` into a scene; on failure re-prompts through `transport` with
/// the diagnostic appended, at most config.max_retries times. When
/// `expected` is given the plan's geometry must match it.
SceneSpec coerce_plan(std::string_view raw, const PlannerConfig &config, PlannerTranscript &transcript,
                      PlanTransport &transport, const std::optional<LatentGeometry> &expected = std::nullopt);

/// Transcript file: JSON array of {"role", "text"} turns.
std::string transcript_to_json(const std::vector<ChatMessage> &turns);
std::vector<ChatMessage> transcript_from_json(std::string_view text);

} // namespace dyst
