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

#include "dyst/scene.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dyst {

struct Cell {
    std::size_t row = 0;
    std::size_t col = 0;

    bool operator==(const Cell &) const = default;
    auto operator<=>(const Cell &) const = default;
};

/// Half-open rectangle of latent grid cells: rows [row0, row1), cols [col0, col1).
/// Rasterized boxes are always rectangles, so this is the cell-set type.
struct CellRect {
    std::size_t row0 = 0;
    std::size_t row1 = 0;
    std::size_t col0 = 0;
    std::size_t col1 = 0;

    bool empty() const { return row0 >= row1 || col0 >= col1; }
    std::size_t size() const { return empty() ? 0 : (row1 - row0) * (col1 - col0); }
    bool contains(Cell c) const { return row0 <= c.row && c.row < row1 && col0 <= c.col && c.col < col1; }
    bool intersects(const CellRect &o) const {
        return !empty() && !o.empty() && row0 < o.row1 && o.row0 < row1 && col0 < o.col1 && o.col0 < col1;
    }
    /// Cells in row-major order.
    std::vector<Cell> cells() const;

    bool operator==(const CellRect &) const = default;
};

/// Per-frame merging of overlapping entities, or one merge over the whole clip.
enum class MergeScope { per_frame, global };

std::string_view to_string(MergeScope scope);
std::optional<MergeScope> parse_merge_scope(std::string_view text);

/// One frame of the realized layout. Vectors indexed by entity are parallel
/// to LayoutTimeline::entity_ids.
struct FrameLayout {
    std::size_t frame = 0;
    std::vector<NormalizedBox> boxes;
    std::vector<CellRect> cells;
    /// Partition of entity indices; members ascending, classes ordered by
    /// their smallest member.
    std::vector<std::vector<std::size_t>> interaction_classes;
    /// entity index -> index into interaction_classes
    std::vector<std::size_t> class_of_entity;

    bool operator==(const FrameLayout &) const = default;
};

struct LayoutTimeline {
    LatentGeometry geometry;
    MergeScope merge_scope = MergeScope::per_frame;
    std::vector<std::string> entity_ids;
    std::vector<FrameLayout> frames;

    std::size_t entity_index(std::string_view id) const;

    bool operator==(const LayoutTimeline &) const = default;
};

/// Per-frame boxes for one entity: constant for static entities, piecewise
/// linear in each corner coordinate between keyframes for dynamic ones.
std::vector<NormalizedBox> interpolate_entity(const EntitySpec &entity, std::size_t frames);

/// Cells touched by `box` on an H x W grid, clamped; never empty.
CellRect rasterize_box(const NormalizedBox &box, std::size_t height, std::size_t width);

/// Connected components of the overlap graph over `cells` (union-find).
std::vector<std::vector<std::size_t>> overlap_components(const std::vector<CellRect> &cells);

LayoutTimeline build_timeline(const SceneSpec &spec, MergeScope scope = MergeScope::per_frame);

/// JSON export; cells are written as explicit [r, c] pairs.
std::string timeline_to_json(const LayoutTimeline &timeline);
/// Reads a document produced by timeline_to_json. Throws SyntaxError or
/// SchemaError.
LayoutTimeline timeline_from_json(std::string_view text);

} // namespace dyst
