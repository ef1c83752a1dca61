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

#include "dyst/layout.hpp"
#include "dyst/mask.hpp"
#include "dyst/scene.hpp"
#include "oracle.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

namespace testing {

inline dyst::EntitySpec static_entity(std::string id, std::string descriptor, dyst::NormalizedBox box) {
    return {std::move(id), std::move(descriptor), dyst::Motion::static_, {{0, box}}};
}

inline dyst::EntitySpec moving_entity(std::string id, std::string descriptor, std::vector<dyst::Keyframe> keys) {
    return {std::move(id), std::move(descriptor), dyst::Motion::dynamic, std::move(keys)};
}

inline dyst::SceneSpec scene(std::string global, dyst::LatentGeometry g, std::vector<dyst::EntitySpec> entities) {
    return {std::move(global), std::move(entities), g};
}

/// The twelve-token instance: global prompt of 4 words, entity "a" of 4
/// words, one frame of 2 x 2 cells with "a" on cell (0, 0).
inline dyst::SceneSpec twelve_token_scene() {
    return scene("w0 w1 w2 w3", {1, 2, 2, 4}, {static_entity("a", "x0 x1 x2 x3", {0.0, 0.0, 0.5, 0.5})});
}

inline std::string words(std::mt19937_64 &rng, std::size_t n) {
    std::string s;
    for (std::size_t k = 0; k < n; ++k) {
        s += (k ? " w" : "w") + std::to_string(rng() % 1000);
    }
    return s;
}

inline dyst::NormalizedBox random_box(std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
    if (a == b) b = std::min(1.0, a + 0.01);
    if (c == d) d = std::min(1.0, c + 0.01);
    return {std::min(a, b), std::min(c, d), std::max(a, b), std::max(c, d)};
}

/// Valid random scene with F <= max_frames, H = W <= max_side, L <= max_text.
inline dyst::SceneSpec random_scene(std::mt19937_64 &rng, std::size_t max_frames = 4, std::size_t max_side = 8,
                                    std::size_t max_text = 32, std::size_t max_entities = 4) {
    std::uniform_int_distribution<std::size_t> frames(1, max_frames), side(1, max_side),
        count(1, max_entities);
    dyst::SceneSpec s;
    auto n = side(rng);
    s.geometry = {frames(rng), n, n, 1 + rng() % 4};
    const std::size_t entities = count(rng);
    // split the text budget: every entity needs at least one token
    std::size_t budget = max_text - entities;
    std::size_t global = budget ? rng() % (budget / 2 + 1) : 0;
    budget -= global;
    s.global_prompt = words(rng, global);
    for (std::size_t e = 0; e < entities; ++e) {
        dyst::EntitySpec ent;
        ent.id = "e" + std::to_string(e);
        std::size_t extra = budget ? rng() % (budget / (entities - e) + 1) : 0;
        budget -= extra;
        ent.descriptor = words(rng, 1 + extra);
        const std::size_t F = s.geometry.frames;
        if (F >= 2 && rng() % 3 != 0) {
            ent.motion = dyst::Motion::dynamic;
            std::vector<std::size_t> at{0};
            for (std::size_t f = 1; f + 1 < F; ++f) {
                if (rng() % 3 == 0) at.push_back(f);
            }
            at.push_back(F - 1);
            for (auto f : at) ent.keyframes.push_back({f, random_box(rng)});
        } else {
            ent.motion = dyst::Motion::static_;
            ent.keyframes.push_back({0, random_box(rng)});
        }
        s.entities.push_back(std::move(ent));
    }
    return s;
}

inline std::vector<std::vector<dyst::NormalizedBox>> boxes_of(const dyst::LayoutTimeline &t) {
    std::vector<std::vector<dyst::NormalizedBox>> out;
    for (const auto &f : t.frames) out.push_back(f.boxes);
    return out;
}

inline oracle::Policy to_oracle(const dyst::MaskPolicy &p) {
    return {p.global_context, p.entity_reads_global, p.background_context};
}

/// Fresh empty directory under the system temp path.
inline std::filesystem::path temp_dir(const std::string &name) {
    auto dir = std::filesystem::temp_directory_path() / ("dyst_test_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string slurp(const std::filesystem::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline void spit(const std::filesystem::path &p, const std::string &bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << bytes;
}

} // namespace testing
