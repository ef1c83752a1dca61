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

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace dyst {

/// Latent video grid: frames x rows x cols, with D channels per token.
struct LatentGeometry {
    std::size_t frames = 1;
    std::size_t height = 1;
    std::size_t width = 1;
    std::size_t channels = 1;

    std::size_t cells_per_frame() const { return height * width; }
    std::size_t video_tokens() const { return frames * height * width; }

    bool operator==(const LatentGeometry &) const = default;
};

/// Axis-aligned box in fractions of the frame extent, x to the right, y down.
struct NormalizedBox {
    double x0 = 0.0;
    double y0 = 0.0;
    double x1 = 1.0;
    double y1 = 1.0;

    bool valid() const { return 0.0 <= x0 && x0 < x1 && x1 <= 1.0 && 0.0 <= y0 && y0 < y1 && y1 <= 1.0; }

    bool operator==(const NormalizedBox &) const = default;
};

enum class Motion { static_, dynamic };

std::string_view to_string(Motion motion);

struct Keyframe {
    std::size_t frame = 0;
    NormalizedBox box;

    bool operator==(const Keyframe &) const = default;
};

struct EntitySpec {
    std::string id;
    std::string descriptor;
    Motion motion = Motion::static_;
    std::vector<Keyframe> keyframes;

    bool operator==(const EntitySpec &) const = default;
};

struct SceneSpec {
    std::string global_prompt;
    std::vector<EntitySpec> entities;
    LatentGeometry geometry;

    /// Index of the entity with `id`, or npos.
    std::size_t find_entity(std::string_view id) const;

    bool operator==(const SceneSpec &) const = default;
};

inline constexpr std::string_view kSceneFormatVersion = "1";

enum class Severity { error, warning };

struct Diagnostic {
    Severity severity = Severity::error;
    std::string path;
    std::string message;

    bool operator==(const Diagnostic &) const = default;
};

/// Parses a scene document. Throws SyntaxError, SchemaError or InvariantError;
/// a returned SceneSpec always validates cleanly.
SceneSpec parse_scene_spec(std::string_view text);

/// Canonical serialization (fixed field order, round-trip exact reals).
std::string serialize_scene(const SceneSpec &spec);

/// All invariant and cross-field checks. Empty iff the scene is valid.
std::vector<Diagnostic> validate_scene(const SceneSpec &spec);

/// Renders diagnostics one per line as "path: message".
std::string format_diagnostics(const std::vector<Diagnostic> &diagnostics);

} // namespace dyst
