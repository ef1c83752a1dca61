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

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

namespace dyst {

/// Half-open column range [begin, end).
struct Interval {
    std::uint64_t begin = 0;
    std::uint64_t end = 0;

    std::uint64_t length() const { return end - begin; }
    bool operator==(const Interval &) const = default;
};

/// Sorted, disjoint, non-adjacent intervals.
using IntervalList = std::vector<Interval>;

/// Appends [begin, end) to a list whose last interval starts at or before
/// `begin`, coalescing with it when they touch.
inline void append_coalesced(IntervalList &list, std::uint64_t begin, std::uint64_t end) {
    if (begin >= end) {
        return;
    }
    if (!list.empty() && list.back().end >= begin) {
        list.back().end = std::max(list.back().end, end);
    } else {
        list.push_back({begin, end});
    }
}

/// Union of two coalesced lists.
inline IntervalList unite(std::span<const Interval> a, std::span<const Interval> b) {
    IntervalList out;
    out.reserve(a.size() + b.size());
    std::size_t i = 0, j = 0;
    while (i < a.size() || j < b.size()) {
        const Interval &next = (j == b.size() || (i < a.size() && a[i].begin <= b[j].begin)) ? a[i++] : b[j++];
        append_coalesced(out, next.begin, next.end);
    }
    return out;
}

inline bool contains(std::span<const Interval> list, std::uint64_t x) {
    auto it = std::upper_bound(list.begin(), list.end(), x,
                               [](std::uint64_t v, const Interval &iv) { return v < iv.begin; });
    return it != list.begin() && x < std::prev(it)->end;
}

/// Number of points of `list` inside [lo, hi).
inline std::uint64_t count_within(std::span<const Interval> list, std::uint64_t lo, std::uint64_t hi) {
    std::uint64_t total = 0;
    for (const auto &iv : list) {
        if (iv.begin >= hi) break;
        auto b = std::max(iv.begin, lo);
        auto e = std::min(iv.end, hi);
        if (b < e) total += e - b;
    }
    return total;
}

/// True when the list is sorted, disjoint, non-adjacent and within [0, n).
inline bool is_coalesced(std::span<const Interval> list, std::uint64_t n) {
    for (std::size_t k = 0; k < list.size(); ++k) {
        if (list[k].begin >= list[k].end || list[k].end > n) return false;
        if (k > 0 && list[k - 1].end >= list[k].begin) return false;
    }
    return true;
}

} // namespace dyst
