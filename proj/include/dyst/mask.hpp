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
#include "dyst/intervals.hpp"
#include "dyst/layout.hpp"
#include "dyst/scene.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dyst {

struct TextSpan {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const { return end - begin; }
    bool contains(std::size_t i) const { return begin <= i && i < end; }
    bool operator==(const TextSpan &) const = default;
};

/// Positions of every token in the joint sequence: text tokens [0, L) with the
/// global prompt span followed by one span per entity, then video tokens
/// flattened frame-major, row-major.
struct TokenLayout {
    std::size_t text_len = 0;
    TextSpan global_span;
    std::vector<std::string> entity_ids;
    std::vector<TextSpan> entity_spans;
    LatentGeometry geometry;

    std::size_t sequence_length() const { return text_len + geometry.video_tokens(); }
    std::size_t video_index(std::size_t frame, std::size_t row, std::size_t col) const {
        return text_len + frame * geometry.cells_per_frame() + row * geometry.width + col;
    }

    bool operator==(const TokenLayout &) const = default;
};

/// Whitespace-separated word count, the token unit used for prompt spans.
std::size_t count_tokens(std::string_view text);

/// Layout with span lengths taken from the word counts of the global prompt
/// and of each entity descriptor.
TokenLayout make_token_layout(const SceneSpec &spec);

/// Layout with explicit span lengths.
TokenLayout make_token_layout(const SceneSpec &spec, std::size_t global_tokens,
                              const std::vector<std::size_t> &entity_tokens);

/// Throws LayoutMismatch unless the spans are disjoint and tile [0, L).
void check_token_layout(const TokenLayout &layout);

enum class TokenKind { global_text, entity_text, entity_region, background };

struct SemanticClass {
    TokenKind kind = TokenKind::background;
    /// entity_text: the owning entity; entity_region: the interaction class.
    std::vector<std::size_t> entities;

    bool operator==(const SemanticClass &) const = default;
};

struct TokenClassTable {
    std::size_t text_len = 0;
    LatentGeometry geometry;
    std::vector<std::string> entity_ids;
    /// Per text token: -1 for the global prompt, otherwise the entity index.
    std::vector<std::int32_t> text_entity;
    /// Distinct interaction classes referenced by video tokens.
    std::vector<std::vector<std::size_t>> classes;
    /// Per video token (frame-major): index into `classes`, or -1 for background.
    std::vector<std::int32_t> video_class;

    std::size_t sequence_length() const { return text_len + video_class.size(); }
    SemanticClass class_of(std::size_t index) const;
};

/// Switches for the access rules the method leaves open.
struct MaskPolicy {
    /// Global-prompt tokens read every token and every video token reads them.
    bool global_context = true;
    /// Entity text tokens read global-prompt tokens.
    bool entity_reads_global = true;
    /// Entity-region video tokens read background video tokens.
    bool background_context = true;

    static MaskPolicy isolated() { return {false, false, false}; }
    bool operator==(const MaskPolicy &) const = default;
};

TokenClassTable assign_classes(const SceneSpec &spec, const LayoutTimeline &timeline, const TokenLayout &layout);

struct MaskMeta {
    std::uint64_t t2t = 0;
    std::uint64_t t2v = 0;
    std::uint64_t v2t = 0;
    std::uint64_t v2v = 0;
    /// Same-frame allowed pairs between video tokens covered by disjoint
    /// entity sets, one count per frame.
    std::vector<std::uint64_t> cross_entity_v2v;

    bool operator==(const MaskMeta &) const = default;
};

/// Boolean attention relation over the joint sequence, stored as coalesced
/// column intervals per row. Rows with the same semantic class share one
/// interval pattern.
class AttentionMask {
public:
    AttentionMask() = default;
    AttentionMask(std::size_t n, std::vector<IntervalList> patterns, std::vector<std::uint32_t> row_pattern);

    /// One pattern per row; validates the interval invariants and the diagonal.
    static AttentionMask from_rows(std::size_t n, std::vector<IntervalList> rows);

    std::size_t size() const { return n_; }
    std::span<const Interval> row(std::size_t i) const;
    bool query(std::size_t i, std::size_t j) const;
    std::size_t pattern_count() const { return patterns_.size(); }

    MaskMeta meta;

    /// Structural equality of the relation; `meta` is not compared.
    bool operator==(const AttentionMask &other) const;

private:
    std::size_t n_ = 0;
    std::vector<IntervalList> patterns_;
    std::vector<std::uint32_t> row_pattern_;
};

/// Compiles the four-region mask. Exec::parallel runs the shared-pattern
/// OpenMP kernel; Exec::serial is the per-pair reference evaluation.
AttentionMask compile_mask(const TokenClassTable &table, const TokenLayout &layout, const LayoutTimeline &timeline,
                           const MaskPolicy &policy, Exec exec = Exec::parallel);

MaskMeta compute_meta(const AttentionMask &mask, const TokenClassTable &table, const LayoutTimeline &timeline);

/// DYSTMSK1 little-endian encoding with trailing CRC32.
std::vector<std::uint8_t> serialize_mask(const AttentionMask &mask);
AttentionMask deserialize_mask(std::span<const std::uint8_t> bytes);

struct IndexRange {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const { return end - begin; }
};

struct BoolTile {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> data;

    bool at(std::size_t i, std::size_t j) const { return data[i * cols + j] != 0; }
    bool operator==(const BoolTile &) const = default;
};

BoolTile densify(const AttentionMask &mask, IndexRange rows, IndexRange cols);

} // namespace dyst
