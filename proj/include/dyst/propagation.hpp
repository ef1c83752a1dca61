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

#include "dyst/exec.hpp"
#include "dyst/layout.hpp"
#include "dyst/mask.hpp"
#include "dyst/matrix.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dyst {

enum class Decay { constant, linear_to_zero };

std::string_view to_string(Decay decay);
std::optional<Decay> parse_decay(std::string_view text);

struct BlendSchedule {
    double alpha = 0.3;
    double active_fraction = 0.4;
    Decay decay = Decay::linear_to_zero;

    bool valid() const { return 0.0 <= alpha && alpha <= 1.0 && 0.0 < active_fraction && active_fraction <= 1.0; }
    /// Blend weight at `step` for base weight `w`; 0 once the schedule is inactive.
    double weight_at(double w, std::size_t step, std::size_t total_steps) const;

    bool operator==(const BlendSchedule &) const = default;
};

/// target <- blend(target, source) for one entity token in a frame f >= 1.
/// Indices address the latent (video tokens only): f*H*W + r*W + c.
struct PropagationEntry {
    std::size_t entity = 0;
    std::size_t frame = 0;
    std::size_t target = 0;
    std::size_t source = 0;
    double weight = 0.0;

    bool operator==(const PropagationEntry &) const = default;
};

struct PropagationPlan {
    LatentGeometry geometry;
    std::size_t text_len = 0;
    std::vector<std::string> entity_ids;
    std::vector<PropagationEntry> entries;
    BlendSchedule schedule;

    bool operator==(const PropagationPlan &) const = default;
};

/// Maps every cell of each entity's frame-f region (f >= 1) to the frame-0
/// cell at the same box-relative position.
PropagationPlan build_plan(const LayoutTimeline &timeline, const TokenLayout &layout, const BlendSchedule &schedule);

/// Blends reference features into targets. Sources are read from a snapshot
/// taken before any write; targets hit by several entities move toward the
/// mean of their sources. `latent` is (F*H*W) x D.
void apply_plan(MatrixView latent, const PropagationPlan &plan, std::size_t step_index, std::size_t total_steps,
                Exec exec = Exec::parallel);

Matrix apply_plan(const Matrix &latent, const PropagationPlan &plan, std::size_t step_index, std::size_t total_steps,
                  Exec exec = Exec::parallel);

struct PlanStats {
    /// entity id -> entry count per frame (index 0 always 0)
    std::map<std::string, std::vector<std::size_t>> entries_per_frame;
    /// weight -> number of entries
    std::map<double, std::size_t> weight_histogram;
    std::size_t total_entries = 0;

    bool operator==(const PlanStats &) const = default;
};

PlanStats plan_stats(const PropagationPlan &plan);

std::string plan_to_json(const PropagationPlan &plan);
PropagationPlan plan_from_json(std::string_view text);

} // namespace dyst
