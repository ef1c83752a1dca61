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

#include "dyst/rules.hpp"

#include "dyst/error.hpp"

#include <algorithm>

namespace dyst {

RuleEvaluator::RuleEvaluator(const LayoutTimeline &timeline, const TokenLayout &layout, const MaskPolicy &policy) :
    text_len_(layout.text_len),
    n_(layout.sequence_length()),
    policy_(policy),
    owner_(layout.text_len, -1),
    region_(layout.geometry.video_tokens()) {
    for (std::size_t k = 0; k < layout.entity_ids.size(); ++k) {
        auto e = timeline.entity_index(layout.entity_ids[k]);
        if (e == std::string::npos) {
            throw LayoutMismatch("entity \"" + layout.entity_ids[k] + "\" missing from the timeline");
        }
        for (auto i = layout.entity_spans[k].begin; i < layout.entity_spans[k].end; ++i) {
            owner_[i] = static_cast<long>(e);
        }
    }
    for (const auto &frame : timeline.frames) {
        for (std::size_t e = 0; e < frame.cells.size(); ++e) {
            const auto &cls = frame.interaction_classes[frame.class_of_entity[e]];
            for (auto c : frame.cells[e].cells()) {
                auto &slot = region_[layout.video_index(frame.frame, c.row, c.col) - text_len_];
                slot = cls;
            }
        }
    }
}

bool RuleEvaluator::allowed(std::size_t i, std::size_t j) const {
    if (i == j) return true;
    auto region_has = [this](std::size_t v, long e) {
        const auto &r = region_[v - text_len_];
        return e >= 0 && std::find(r.begin(), r.end(), static_cast<std::size_t>(e)) != r.end();
    };

    if (is_text(i) && is_text(j)) {
        long a = owner_[i], b = owner_[j];
        if (a < 0 && b < 0) return true;
        if (a < 0) return policy_.global_context;
        if (b < 0) return policy_.entity_reads_global;
        return a == b;
    }
    if (is_text(i)) {
        return owner_[i] < 0 ? policy_.global_context : region_has(j, owner_[i]);
    }
    if (is_text(j)) {
        return owner_[j] < 0 ? policy_.global_context : region_has(i, owner_[j]);
    }
    const auto &a = region_[i - text_len_];
    const auto &b = region_[j - text_len_];
    if (a.empty() && b.empty()) return true;
    if (a.empty()) return false;
    if (b.empty()) return policy_.background_context;
    return std::any_of(a.begin(), a.end(), [&](auto e) { return std::find(b.begin(), b.end(), e) != b.end(); });
}

std::optional<std::pair<std::size_t, std::size_t>> first_rule_mismatch(const AttentionMask &mask,
                                                                       const RuleEvaluator &rules) {
    if (mask.size() != rules.size()) {
        return std::pair<std::size_t, std::size_t>{mask.size(), rules.size()};
    }
    for (std::size_t i = 0; i < mask.size(); ++i) {
        for (std::size_t j = 0; j < mask.size(); ++j) {
            if (mask.query(i, j) != rules.allowed(i, j)) {
                return std::pair{i, j};
            }
        }
    }
    return std::nullopt;
}

} // namespace dyst
