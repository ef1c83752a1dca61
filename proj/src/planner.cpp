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

#include "dyst/planner.hpp"

#ifdef DYST_WITH_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <sstream>

namespace dyst {

using json = nlohmann::json;

void PlannerConfig::validate() const {
    if (max_retries < 0 || max_retries > 5) {
        throw InvariantError("max_retries must lie in [0, 5]", "max_retries");
    }
    if (!(timeout_seconds > 0.0)) {
        throw InvariantError("timeout must be positive", "timeout");
    }
    if (!(temperature >= 0.0)) {
        throw InvariantError("temperature must be >= 0", "temperature");
    }
    if (endpoint.empty()) {
        throw InvariantError("endpoint must be set", "endpoint");
    }
}

std::vector<ChatMessage> PlannerTranscript::turns() const {
    auto out = request_messages;
    out.push_back({"assistant", raw_response});
    return out;
}

std::string build_planner_prompt(std::string_view user_prompt, const LatentGeometry &geometry) {
    if (user_prompt.find_first_not_of(" \t\r\n") == std::string_view::npos) {
        throw EmptyPrompt("the user prompt is empty");
    }
    const auto last = geometry.frames - 1;
    std::ostringstream p;
    p << "You are the layout planner of a text-to-video generator. Work through the four steps below in order, "
         "then output one JSON scene document.\n\n"
      << "The video has " << geometry.frames << " frames (indices 0 to " << last << "). Boxes are planned on a "
      << geometry.width << " x " << geometry.height << " (width x height) latent grid, aspect ratio "
      << geometry.width << ":" << geometry.height
      << ". Give boxes as normalized [x0, y0, x1, y1] with 0 <= x0 < x1 <= 1 and 0 <= y0 < y1 <= 1; "
         "x grows to the right, y grows downward.\n\n"
      << "Step 1 - Entities and attributes. List every entity (objects, characters, animals) with its attributes "
         "(color, size, material), its actions and its spatial relations to other entities.\n\n"
      << "Step 2 - Bounding boxes. Decide whether each entity is static or dynamic. Static entities receive "
         "fixed bounding boxes: exactly one keyframe at frame 0, consistent with the overall spatial layout. "
         "Dynamic entities receive a box at frame 0 and a box at frame "
      << last
      << "; intermediate frames are filled by linear interpolation, so choose start and end boxes whose straight-line "
         "motion is physically plausible. Extra keyframes in between are allowed when the motion changes direction; "
         "keyframe frames must strictly increase. Change a box's size over time if the entity approaches or recedes.\n\n"
      << "Step 3 - Global prompt. Rewrite the user's request as one long, detailed description in the style a "
         "text-to-video model prefers: verbose, describing the entities one after another in a fixed order, with "
         "the layout from Step 2 expressed in words.\n\n"
      << "Step 4 - Entity prompts. For each entity, extract its own short description from the global prompt "
         "(for example \"a young boy dribbling a basketball\"). These become the entity descriptors.\n\n"
      << "Output exactly one JSON object and nothing after it. It must follow this schema, with no extra fields:\n"
      << "```json\n"
      << "{\n"
      << "  \"version\": \"1\",\n"
      << "  \"global_prompt\": \"<Step 3 text>\",\n"
      << "  \"geometry\": {\"frames\": " << geometry.frames << ", \"height\": " << geometry.height
      << ", \"width\": " << geometry.width << ", \"channels\": " << geometry.channels << "},\n"
      << "  \"entities\": [\n"
      << "    {\n"
      << "      \"id\": \"<unique short id>\",\n"
      << "      \"descriptor\": \"<Step 4 text>\",\n"
      << "      \"motion\": \"static\" | \"dynamic\",\n"
      << "      \"keyframes\": [{\"frame\": <integer>, \"box\": [x0, y0, x1, y1]}]\n"
      << "    }\n"
      << "  ]\n"
      << "}\n"
      << "```\n"
      << "Copy the geometry object exactly as shown.\n\n"
      << "User request:\n"
      << user_prompt << "\n";
    return p.str();
}

namespace {

struct Endpoint {
    std::string origin; // scheme://host[:port]
    std::string base_path;
};

Endpoint split_endpoint(const std::string &url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw NetworkError("endpoint must be an http:// or https:// URL: " + url);
    }
    auto path_start = url.find('/', scheme_end + 3);
    Endpoint ep;
    ep.origin = url.substr(0, path_start);
    ep.base_path = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!ep.base_path.empty() && ep.base_path.back() == '/') {
        ep.base_path.pop_back();
    }
    return ep;
}

} // namespace

HttpTransport::HttpTransport(PlannerConfig config) : config_(std::move(config)) {
    config_.validate();
}

std::string HttpTransport::complete(const std::vector<ChatMessage> &messages) {
    auto ep = split_endpoint(config_.endpoint);
    httplib::Client client(ep.origin);
    auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::duration<double>(config_.timeout_seconds));
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                                  static_cast<time_t>(timeout.count() % 1000000));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                            static_cast<time_t>(timeout.count() % 1000000));
    client.set_write_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                             static_cast<time_t>(timeout.count() % 1000000));

    json body;
    body["model"] = config_.model_name;
    body["temperature"] = config_.temperature;
    body["messages"] = json::array();
    for (const auto &m : messages) {
        body["messages"].push_back({{"role", m.role}, {"content", m.text}});
    }
    httplib::Headers headers;
    if (const char *key = std::getenv(kApiKeyEnv); key != nullptr && *key != '\0') {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    auto started = std::chrono::steady_clock::now();
    auto result = client.Post(ep.base_path + "/chat/completions", headers, body.dump(), "application/json");
    if (!result) {
        auto err = result.error();
        auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        if (err == httplib::Error::ConnectionTimeout ||
            (err == httplib::Error::Read && elapsed >= 0.9 * config_.timeout_seconds)) {
            throw TimeoutError("planner request timed out after " + std::to_string(elapsed) + " s");
        }
        throw NetworkError("planner request failed: " + httplib::to_string(err));
    }
    if (result->status < 200 || result->status >= 300) {
        throw ServiceError(result->status, result->body);
    }
    try {
        auto reply = json::parse(result->body);
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception &) {
        throw ServiceError(result->status, result->body);
    }
}

ReplayTransport::ReplayTransport(std::vector<ChatMessage> turns) {
    for (auto &t : turns) {
        if (t.role == "assistant") {
            replies_.push_back(std::move(t.text));
        }
    }
}

std::string ReplayTransport::complete(const std::vector<ChatMessage> &) {
    if (next_ >= replies_.size()) {
        throw UnrecoverablePlan("replay transcript has no further assistant turns", {});
    }
    return replies_[next_++];
}

std::pair<std::string, PlannerTranscript> request_plan(PlanTransport &transport, std::string_view prompt) {
    PlannerTranscript transcript;
    transcript.request_messages.push_back({"user", std::string(prompt)});
    transcript.raw_response = transport.complete(transcript.request_messages);
    return {transcript.raw_response, transcript};
}

std::pair<std::string, PlannerTranscript> request_plan(const PlannerConfig &config, std::string_view prompt) {
    HttpTransport transport(config);
    return request_plan(transport, prompt);
}

std::optional<std::string> extract_json_object(std::string_view raw) {
    std::string text(raw);
    // reasoning models may emit a <think> block before the answer
    for (auto open = text.find("<think>"); open != std::string::npos; open = text.find("<think>")) {
        auto close = text.find("</think>", open);
        text.erase(open, close == std::string::npos ? std::string::npos : close + 8 - open);
    }

    std::string_view body = text;
    if (auto fence = body.find("```"); fence != std::string_view::npos) {
        auto content = body.find('\n', fence);
        auto end = content == std::string_view::npos ? content : body.find("```", content);
        if (content != std::string_view::npos && end != std::string_view::npos) {
            auto inner = body.substr(content + 1, end - content - 1);
            if (inner.find('{') != std::string_view::npos) {
                body = inner;
            }
        }
    }

    auto start = body.find('{');
    if (start == std::string_view::npos) {
        return std::nullopt;
    }
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < body.size(); ++i) {
        char ch = body[i];
        if (in_string) {
            if (escaped) {
                escaped = false;
            } else if (ch == '\\') {
                escaped = true;
            } else if (ch == '"') {
                in_string = false;
            }
            continue;
        }
        if (ch == '"') {
            in_string = true;
        } else if (ch == '{') {
            ++depth;
        } else if (ch == '}') {
            if (--depth == 0) {
                return std::string(body.substr(start, i - start + 1));
            }
        }
    }
    return std::nullopt;
}

namespace {

SceneSpec parse_reply(std::string_view raw, const std::optional<LatentGeometry> &expected) {
    auto object = extract_json_object(raw);
    if (!object) {
        throw SyntaxError("no JSON object found in the reply");
    }
    auto spec = parse_scene_spec(*object);
    if (expected && !(spec.geometry == *expected)) {
        throw InvariantError("geometry must be {\"frames\": " + std::to_string(expected->frames) + ", \"height\": " +
                                 std::to_string(expected->height) + ", \"width\": " + std::to_string(expected->width) +
                                 ", \"channels\": " + std::to_string(expected->channels) + "}",
                             "geometry");
    }
    return spec;
}

} // namespace

SceneSpec coerce_plan(std::string_view raw, const PlannerConfig &config, PlannerTranscript &transcript,
                      PlanTransport &transport, const std::optional<LatentGeometry> &expected) {
    config.validate();
    std::string reply(raw);
    transcript.raw_response = reply;
    while (true) {
        std::string diagnostic;
        try {
            return parse_reply(reply, expected);
        } catch (const SyntaxError &e) {
            diagnostic = e.what();
        } catch (const SchemaError &e) {
            diagnostic = e.what();
        } catch (const InvariantError &e) {
            diagnostic = e.what();
        }
        if (transcript.repair_attempts >= config.max_retries) {
            throw UnrecoverablePlan("no valid plan after " + std::to_string(transcript.repair_attempts) +
                                        " repair attempt(s): " + diagnostic,
                                    transcript);
        }
        transcript.request_messages.push_back({"assistant", reply});
        transcript.request_messages.push_back(
            {"user", "Your previous reply could not be used:\n" + diagnostic +
                         "\nReply again with only the corrected JSON scene document."});
        try {
            reply = transport.complete(transcript.request_messages);
        } catch (const UnrecoverablePlan &e) {
            throw UnrecoverablePlan(e.what(), transcript);
        }
        transcript.raw_response = reply;
        ++transcript.repair_attempts;
    }
}

std::string transcript_to_json(const std::vector<ChatMessage> &turns) {
    auto doc = nlohmann::ordered_json::array();
    for (const auto &t : turns) {
        doc.push_back({{"role", t.role}, {"text", t.text}});
    }
    return doc.dump(2) + "\n";
}

std::vector<ChatMessage> transcript_from_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error &e) {
        throw SyntaxError(e.what());
    }
    if (!doc.is_array()) {
        throw SchemaError("transcript must be a JSON array of {role, text} turns");
    }
    std::vector<ChatMessage> turns;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto &t = doc[i];
        if (!t.is_object() || !t.contains("role") || !t.contains("text") || !t["role"].is_string() ||
            !t["text"].is_string()) {
            throw SchemaError("turn needs string fields role and text", "[" + std::to_string(i) + "]");
        }
        turns.push_back({t["role"].get<std::string>(), t["text"].get<std::string>()});
    }
    return turns;
}

} // namespace dyst
