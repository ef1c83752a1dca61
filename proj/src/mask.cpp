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

#include "dyst/mask.hpp"

#include "dyst/error.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace dyst {

std::size_t count_tokens(std::string_view text) {
    std::size_t count = 0;
    bool in_word = false;
    for (char ch : text) {
        bool space = ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r' || ch == '\f' || ch == '\v';
        if (!space && !in_word) {
            ++count;
        }
        in_word = !space;
    }
    return count;
}

TokenLayout make_token_layout(const SceneSpec &spec) {
    std::vector<std::size_t> entity_tokens;
    for (const auto &e : spec.entities) {
        entity_tokens.push_back(std::max<std::size_t>(1, count_tokens(e.descriptor)));
    }
    return make_token_layout(spec, count_tokens(spec.global_prompt), entity_tokens);
}

TokenLayout make_token_layout(const SceneSpec &spec, std::size_t global_tokens,
                              const std::vector<std::size_t> &entity_tokens) {
    if (entity_tokens.size() != spec.entities.size()) {
        throw LayoutMismatch("one token count per entity expected");
    }
    TokenLayout layout;
    layout.geometry = spec.geometry;
    layout.global_span = {0, global_tokens};
    std::size_t cursor = global_tokens;
    for (std::size_t e = 0; e < spec.entities.size(); ++e) {
        layout.entity_ids.push_back(spec.entities[e].id);
        layout.entity_spans.push_back({cursor, cursor + entity_tokens[e]});
        cursor += entity_tokens[e];
    }
    layout.text_len = cursor;
    return layout;
}

void check_token_layout(const TokenLayout &layout) {
    if (layout.entity_ids.size() != layout.entity_spans.size()) {
        throw LayoutMismatch("entity_ids and entity_spans differ in length");
    }
    std::vector<TextSpan> spans{layout.global_span};
    spans.insert(spans.end(), layout.entity_spans.begin(), layout.entity_spans.end());
    std::sort(spans.begin(), spans.end(), [](auto &a, auto &b) { return a.begin < b.begin || (a.begin == b.begin && a.end < b.end); });
    std::size_t cursor = 0;
    for (const auto &s : spans) {
        if (s.end < s.begin || s.begin != cursor) {
            throw LayoutMismatch("text spans must be disjoint and tile [0, L)");
        }
        cursor = s.end;
    }
    if (cursor != layout.text_len) {
        throw LayoutMismatch("text spans must cover [0, L)");
    }
}

SemanticClass TokenClassTable::class_of(std::size_t index) const {
    if (index >= sequence_length()) {
        throw IndexOutOfRange("token index " + std::to_string(index) + " outside [0, " +
                              std::to_string(sequence_length()) + ")");
    }
    if (index < text_len) {
        auto e = text_entity[index];
        if (e < 0) return {TokenKind::global_text, {}};
        return {TokenKind::entity_text, {static_cast<std::size_t>(e)}};
    }
    auto c = video_class[index - text_len];
    if (c < 0) return {TokenKind::background, {}};
    return {TokenKind::entity_region, classes[static_cast<std::size_t>(c)]};
}

TokenClassTable assign_classes(const SceneSpec &spec, const LayoutTimeline &timeline, const TokenLayout &layout) {
    if (!(layout.geometry == timeline.geometry) || !(spec.geometry == timeline.geometry)) {
        throw LayoutMismatch("geometry disagrees between scene, timeline and token layout");
    }
    check_token_layout(layout);

    TokenClassTable table;
    table.text_len = layout.text_len;
    table.geometry = timeline.geometry;
    table.entity_ids = timeline.entity_ids;
    table.text_entity.assign(layout.text_len, -1);
    for (std::size_t k = 0; k < layout.entity_ids.size(); ++k) {
        const auto &id = layout.entity_ids[k];
        auto e = timeline.entity_index(id);
        if (e == std::string::npos || spec.find_entity(id) == std::string::npos) {
            throw LayoutMismatch("token layout names entity \"" + id + "\" absent from the timeline");
        }
        for (std::size_t i = layout.entity_spans[k].begin; i < layout.entity_spans[k].end; ++i) {
            table.text_entity[i] = static_cast<std::int32_t>(e);
        }
    }

    const auto &g = timeline.geometry;
    const std::size_t hw = g.cells_per_frame();
    table.video_class.assign(g.video_tokens(), -1);
    std::map<std::vector<std::size_t>, std::int32_t> ids;
    for (const auto &frame : timeline.frames) {
        std::vector<std::int32_t> global_id(frame.interaction_classes.size());
        for (std::size_t k = 0; k < frame.interaction_classes.size(); ++k) {
            auto [it, inserted] = ids.try_emplace(frame.interaction_classes[k], static_cast<std::int32_t>(table.classes.size()));
            if (inserted) {
                table.classes.push_back(frame.interaction_classes[k]);
            }
            global_id[k] = it->second;
        }
        // overlapping entities share a class, so write order does not matter
        for (std::size_t e = 0; e < frame.cells.size(); ++e) {
            const auto &rect = frame.cells[e];
            auto cls = global_id[frame.class_of_entity[e]];
            for (std::size_t r = rect.row0; r < rect.row1; ++r) {
                for (std::size_t c = rect.col0; c < rect.col1; ++c) {
                    table.video_class[frame.frame * hw + r * g.width + c] = cls;
                }
            }
        }
    }
    return table;
}

AttentionMask::AttentionMask(std::size_t n, std::vector<IntervalList> patterns, std::vector<std::uint32_t> row_pattern) :
    n_(n),
    patterns_(std::move(patterns)),
    row_pattern_(std::move(row_pattern)) {
    if (row_pattern_.size() != n_) {
        throw InvariantError("one pattern index per row expected");
    }
    for (std::size_t i = 0; i < n_; ++i) {
        if (row_pattern_[i] >= patterns_.size()) {
            throw InvariantError("row " + std::to_string(i) + " references a missing pattern");
        }
        if (!contains(patterns_[row_pattern_[i]], i)) {
            throw InvariantError("row " + std::to_string(i) + " does not allow its diagonal");
        }
    }
    for (std::size_t p = 0; p < patterns_.size(); ++p) {
        if (!is_coalesced(patterns_[p], n_)) {
            throw InvariantError("pattern " + std::to_string(p) + " is not a coalesced interval list within [0, n)");
        }
    }
}

AttentionMask AttentionMask::from_rows(std::size_t n, std::vector<IntervalList> rows) {
    std::vector<std::uint32_t> index(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        index[i] = static_cast<std::uint32_t>(i);
    }
    return AttentionMask(n, std::move(rows), std::move(index));
}

std::span<const Interval> AttentionMask::row(std::size_t i) const {
    if (i >= n_) {
        throw IndexOutOfRange("row " + std::to_string(i) + " outside [0, " + std::to_string(n_) + ")");
    }
    return patterns_[row_pattern_[i]];
}

bool AttentionMask::query(std::size_t i, std::size_t j) const {
    if (i >= n_ || j >= n_) {
        throw IndexOutOfRange("(" + std::to_string(i) + ", " + std::to_string(j) + ") outside [0, " +
                              std::to_string(n_) + ")");
    }
    return contains(patterns_[row_pattern_[i]], j);
}

bool AttentionMask::operator==(const AttentionMask &other) const {
    if (n_ != other.n_) {
        return false;
    }
    for (std::size_t i = 0; i < n_; ++i) {
        auto a = row(i);
        auto b = other.row(i);
        if (!std::equal(a.begin(), a.end(), b.begin(), b.end())) {
            return false;
        }
    }
    return true;
}

namespace {

// Direct evaluation of the access rules for one pair. Used by the serial
// reference kernel.
bool table_allows(const TokenClassTable &t, const MaskPolicy &policy, std::size_t i, std::size_t j) {
    if (i == j) {
        return true;
    }
    const std::size_t L = t.text_len;
    auto shares = [&](std::int32_t a, std::int32_t b) {
        const auto &x = t.classes[static_cast<std::size_t>(a)];
        const auto &y = t.classes[static_cast<std::size_t>(b)];
        for (auto e : x) {
            if (std::find(y.begin(), y.end(), e) != y.end()) return true;
        }
        return false;
    };
    auto region_has = [&](std::size_t v, std::int32_t entity) {
        auto c = t.video_class[v - L];
        if (c < 0) return false;
        const auto &members = t.classes[static_cast<std::size_t>(c)];
        return std::find(members.begin(), members.end(), static_cast<std::size_t>(entity)) != members.end();
    };

    if (i < L) {
        auto ei = t.text_entity[i];
        if (ei < 0) {
            if (j < L && t.text_entity[j] < 0) return true;
            return policy.global_context;
        }
        if (j < L) {
            auto ej = t.text_entity[j];
            if (ej < 0) return policy.entity_reads_global;
            return ei == ej;
        }
        return region_has(j, ei);
    }

    auto ci = t.video_class[i - L];
    if (j < L) {
        auto ej = t.text_entity[j];
        if (ej < 0) return policy.global_context;
        return region_has(i, ej);
    }
    auto cj = t.video_class[j - L];
    if (ci >= 0 && cj >= 0) return shares(ci, cj);
    if (ci < 0 && cj < 0) return true;
    if (ci >= 0) return policy.background_context;
    return false;
}

AttentionMask compile_serial(const TokenClassTable &table, const MaskPolicy &policy) {
    const std::size_t n = table.sequence_length();
    std::vector<IntervalList> rows(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (table_allows(table, policy, i, j)) {
                append_coalesced(rows[i], j, j + 1);
            }
        }
    }
    return AttentionMask::from_rows(n, std::move(rows));
}

AttentionMask compile_parallel(const TokenClassTable &table, const TokenLayout &layout, const MaskPolicy &policy) {
    const std::size_t L = table.text_len;
    const std::size_t V = table.video_class.size();
    const std::size_t n = L + V;
    const std::size_t entities = table.entity_ids.size();
    const std::size_t classes = table.classes.size();

    std::vector<std::vector<std::uint8_t>> class_has(classes, std::vector<std::uint8_t>(entities, 0));
    for (std::size_t c = 0; c < classes; ++c) {
        for (auto e : table.classes[c]) class_has[c][e] = 1;
    }

    // Video columns whose interaction class contains each entity.
    std::vector<IntervalList> region(entities);
    IntervalList background;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t ei = 0; ei < static_cast<std::ptrdiff_t>(entities + 1); ++ei) {
        auto e = static_cast<std::size_t>(ei);
        IntervalList &out = e < entities ? region[e] : background;
        for (std::size_t v = 0; v < V; ++v) {
            auto c = table.video_class[v];
            bool hit = e < entities ? (c >= 0 && class_has[static_cast<std::size_t>(c)][e]) : c < 0;
            if (hit) append_coalesced(out, L + v, L + v + 1);
        }
    }

    // Entity text spans, by timeline entity index.
    std::vector<IntervalList> text(entities);
    for (std::size_t k = 0; k < layout.entity_ids.size(); ++k) {
        auto it = std::find(table.entity_ids.begin(), table.entity_ids.end(), layout.entity_ids[k]);
        if (it == table.entity_ids.end()) {
            throw LayoutMismatch("token layout names entity \"" + layout.entity_ids[k] + "\" absent from the class table");
        }
        auto e = static_cast<std::size_t>(it - table.entity_ids.begin());
        append_coalesced(text[e], layout.entity_spans[k].begin, layout.entity_spans[k].end);
    }
    IntervalList global_text;
    append_coalesced(global_text, layout.global_span.begin, layout.global_span.end);
    const IntervalList none;

    // Pattern slots: [global text][entity text x E][class x C][background]
    const std::size_t global_slot = 0;
    const std::size_t text_slot = 1;
    const std::size_t class_slot = text_slot + entities;
    const std::size_t background_slot = class_slot + classes;
    std::vector<IntervalList> patterns(background_slot + 1);

#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t si = 0; si < static_cast<std::ptrdiff_t>(patterns.size()); ++si) {
        auto slot = static_cast<std::size_t>(si);
        IntervalList p;
        if (slot == global_slot) {
            if (policy.global_context) {
                append_coalesced(p, 0, n);
            } else {
                p = global_text;
            }
        } else if (slot < class_slot) {
            auto e = slot - text_slot;
            p = unite(text[e], policy.entity_reads_global ? global_text : none);
            p = unite(p, region[e]);
        } else if (slot < background_slot) {
            const auto &members = table.classes[slot - class_slot];
            p = policy.global_context ? global_text : none;
            for (auto e : members) {
                p = unite(p, text[e]);
                p = unite(p, region[e]);
            }
            if (policy.background_context) {
                p = unite(p, background);
            }
        } else {
            p = unite(policy.global_context ? global_text : none, background);
        }
        patterns[slot] = std::move(p);
    }

    std::vector<std::uint32_t> row_pattern(n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
        auto i = static_cast<std::size_t>(ii);
        std::size_t slot;
        if (i < L) {
            auto e = table.text_entity[i];
            slot = e < 0 ? global_slot : text_slot + static_cast<std::size_t>(e);
        } else {
            auto c = table.video_class[i - L];
            slot = c < 0 ? background_slot : class_slot + static_cast<std::size_t>(c);
        }
        row_pattern[i] = static_cast<std::uint32_t>(slot);
    }
    return AttentionMask(n, std::move(patterns), std::move(row_pattern));
}

} // namespace

AttentionMask compile_mask(const TokenClassTable &table, const TokenLayout &layout, const LayoutTimeline &timeline,
                           const MaskPolicy &policy, Exec exec) {
    if (layout.text_len != table.text_len || !(layout.geometry == table.geometry)) {
        throw LayoutMismatch("token layout disagrees with the class table");
    }
    auto mask = exec == Exec::serial ? compile_serial(table, policy) : compile_parallel(table, layout, policy);
    mask.meta = compute_meta(mask, table, timeline);
    return mask;
}

MaskMeta compute_meta(const AttentionMask &mask, const TokenClassTable &table, const LayoutTimeline &timeline) {
    MaskMeta meta;
    const std::uint64_t L = table.text_len;
    const std::uint64_t n = mask.size();
    std::uint64_t t2t = 0, t2v = 0, v2t = 0, v2v = 0;
#pragma omp parallel for schedule(static) reduction(+ : t2t, t2v, v2t, v2v)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
        auto i = static_cast<std::uint64_t>(ii);
        auto row = mask.row(i);
        auto text = count_within(row, 0, L);
        auto video = count_within(row, L, n);
        if (i < L) {
            t2t += text;
            t2v += video;
        } else {
            v2t += text;
            v2v += video;
        }
    }
    meta.t2t = t2t;
    meta.t2v = t2v;
    meta.v2t = v2t;
    meta.v2v = v2v;

    // Cells in one frame with the same class and the same covering set are
    // interchangeable, so count per group and multiply.
    const auto &g = timeline.geometry;
    const std::size_t hw = g.cells_per_frame();
    meta.cross_entity_v2v.assign(timeline.frames.size(), 0);
    for (const auto &frame : timeline.frames) {
        std::map<std::vector<std::size_t>, std::uint64_t> groups;
        std::map<std::vector<std::size_t>, std::size_t> representative;
        std::vector<std::vector<std::size_t>> cover(hw);
        for (std::size_t e = 0; e < frame.cells.size(); ++e) {
            for (auto c : frame.cells[e].cells()) {
                cover[c.row * g.width + c.col].push_back(e);
            }
        }
        for (std::size_t k = 0; k < hw; ++k) {
            if (cover[k].empty()) continue;
            ++groups[cover[k]];
            representative.try_emplace(cover[k], k);
        }
        std::uint64_t total = 0;
        for (const auto &[a, count_a] : groups) {
            for (const auto &[b, count_b] : groups) {
                bool disjoint = std::none_of(a.begin(), a.end(),
                                             [&](auto e) { return std::find(b.begin(), b.end(), e) != b.end(); });
                if (!disjoint) continue;
                auto va = L + frame.frame * hw + representative[a];
                auto vb = L + frame.frame * hw + representative[b];
                if (mask.query(va, vb)) total += count_a * count_b;
            }
        }
        meta.cross_entity_v2v[frame.frame] = total;
    }
    return meta;
}

BoolTile densify(const AttentionMask &mask, IndexRange rows, IndexRange cols) {
    if (rows.begin > rows.end || cols.begin > cols.end || rows.end > mask.size() || cols.end > mask.size()) {
        throw IndexOutOfRange("densify range outside [0, " + std::to_string(mask.size()) + ")");
    }
    BoolTile tile{rows.size(), cols.size(), std::vector<std::uint8_t>(rows.size() * cols.size(), 0)};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (const auto &iv : mask.row(rows.begin + i)) {
            auto b = std::max<std::uint64_t>(iv.begin, cols.begin);
            auto e = std::min<std::uint64_t>(iv.end, cols.end);
            for (auto j = b; j < e; ++j) {
                tile.data[i * tile.cols + (j - cols.begin)] = 1;
            }
        }
    }
    return tile;
}

} // namespace dyst
