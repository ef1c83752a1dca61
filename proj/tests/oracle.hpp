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

// Brute-force reference computations for the tests. Nothing here calls into
// the library's layout, mask or propagation code: cell sets are enumerated
// cell by cell, components come from BFS over the pairwise overlap graph and
// every mask entry is decided from those sets directly.

#pragma once

#include "dyst/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

using CellSet = std::set<std::pair<std::size_t, std::size_t>>;

// Corner-wise a + t (b - a) on the keyframe segment containing f.
inline dyst::NormalizedBox interpolate(const dyst::EntitySpec &e, std::size_t f) {
    const auto &k = e.keyframes;
    if (k.size() == 1) return k[0].box;
    std::size_t s = 0;
    while (s + 2 < k.size() && k[s + 1].frame <= f) ++s;
    const auto &a = k[s];
    const auto &b = k[s + 1];
    double t = static_cast<double>(f - a.frame) / static_cast<double>(b.frame - a.frame);
    auto lerp = [t](double p, double q) { return p + t * (q - p); };
    return {lerp(a.box.x0, b.box.x0), lerp(a.box.y0, b.box.y0), lerp(a.box.x1, b.box.x1), lerp(a.box.y1, b.box.y1)};
}

// Cell (r, c) is touched when its open extent meets the box: r + 1 > y0*H and
// r < y1*H (same on columns). Falls back to the cell under the box center.
inline CellSet raster(const dyst::NormalizedBox &b, std::size_t h, std::size_t w) {
    CellSet out;
    const double H = static_cast<double>(h), W = static_cast<double>(w);
    for (std::size_t r = 0; r < h; ++r) {
        double rr = static_cast<double>(r);
        if (!(rr + 1.0 > b.y0 * H && rr < b.y1 * H)) continue;
        for (std::size_t c = 0; c < w; ++c) {
            double cc = static_cast<double>(c);
            if (cc + 1.0 > b.x0 * W && cc < b.x1 * W) out.insert({r, c});
        }
    }
    if (out.empty()) {
        auto r = std::min<std::size_t>(h - 1, static_cast<std::size_t>(std::floor((b.y0 + b.y1) / 2 * H)));
        auto c = std::min<std::size_t>(w - 1, static_cast<std::size_t>(std::floor((b.x0 + b.x1) / 2 * W)));
        out.insert({r, c});
    }
    return out;
}

inline bool overlap(const CellSet &a, const CellSet &b) {
    return std::any_of(a.begin(), a.end(), [&](const auto &x) { return b.count(x) != 0; });
}

// Component label per node; labels are the smallest member index.
inline std::vector<std::size_t> components(const std::vector<std::vector<bool>> &adj) {
    const std::size_t n = adj.size();
    std::vector<std::size_t> label(n, n);
    for (std::size_t s = 0; s < n; ++s) {
        if (label[s] != n) continue;
        std::vector<std::size_t> queue{s};
        label[s] = s;
        for (std::size_t q = 0; q < queue.size(); ++q) {
            for (std::size_t v = 0; v < n; ++v) {
                if (adj[queue[q]][v] && label[v] == n) {
                    label[v] = s;
                    queue.push_back(v);
                }
            }
        }
    }
    return label;
}

inline std::size_t words(const std::string &s) {
    std::istringstream in(s);
    std::string w;
    std::size_t n = 0;
    while (in >> w) ++n;
    return n;
}

struct Policy {
    bool global_context = true;
    bool entity_reads_global = true;
    bool background_context = true;
};

/// Reference world: per-frame cell sets and components, and the pair rules.
struct World {
    std::size_t F, H, W, L, N;
    std::size_t E;
    std::vector<std::vector<CellSet>> cells;       // [frame][entity]
    std::vector<std::vector<std::size_t>> label;   // [frame][entity] component label
    std::vector<long> owner;                       // per text token, -1 global
    Policy policy;

    // `boxes[f][e]`: the per-frame boxes under test (so rasterization and
    // classes are checked independently of interpolation rounding).
    World(const dyst::SceneSpec &spec, const std::vector<std::vector<dyst::NormalizedBox>> &boxes, Policy p,
          bool global_merge = false) :
        F(spec.geometry.frames), H(spec.geometry.height), W(spec.geometry.width), E(spec.entities.size()), policy(p) {
        for (std::size_t i = 0; i < words(spec.global_prompt); ++i) owner.push_back(-1);
        for (std::size_t e = 0; e < E; ++e) {
            auto n = std::max<std::size_t>(1, words(spec.entities[e].descriptor));
            for (std::size_t i = 0; i < n; ++i) owner.push_back(static_cast<long>(e));
        }
        L = owner.size();
        N = L + F * H * W;

        cells.resize(F);
        std::vector<std::vector<bool>> any(E, std::vector<bool>(E, false));
        std::vector<std::vector<std::vector<bool>>> adj(F, std::vector<std::vector<bool>>(E, std::vector<bool>(E)));
        for (std::size_t f = 0; f < F; ++f) {
            for (std::size_t e = 0; e < E; ++e) cells[f].push_back(raster(boxes[f][e], H, W));
            for (std::size_t a = 0; a < E; ++a) {
                for (std::size_t b = 0; b < E; ++b) {
                    adj[f][a][b] = overlap(cells[f][a], cells[f][b]);
                    if (adj[f][a][b]) any[a][b] = true;
                }
            }
        }
        for (std::size_t f = 0; f < F; ++f) label.push_back(components(global_merge ? any : adj[f]));
    }

    bool is_text(std::size_t i) const { return i < L; }

    // Entities whose component covers video token v (empty: background).
    std::vector<std::size_t> region(std::size_t v) const {
        std::size_t k = v - L;
        std::size_t f = k / (H * W), r = (k % (H * W)) / W, c = k % W;
        std::set<std::size_t> labels;
        for (std::size_t e = 0; e < E; ++e) {
            if (cells[f][e].count({r, c})) labels.insert(label[f][e]);
        }
        std::vector<std::size_t> out;
        for (std::size_t e = 0; e < E; ++e) {
            if (labels.count(label[f][e])) out.push_back(e);
        }
        return out;
    }

    bool allowed(std::size_t i, std::size_t j) const {
        if (i == j) return true;
        if (is_text(i) && is_text(j)) {
            long a = owner[i], b = owner[j];
            if (a < 0 && b < 0) return true;
            if (a < 0) return policy.global_context;
            if (b < 0) return policy.entity_reads_global;
            return a == b;
        }
        auto has = [](const std::vector<std::size_t> &r, long e) {
            return e >= 0 && std::find(r.begin(), r.end(), static_cast<std::size_t>(e)) != r.end();
        };
        if (is_text(i)) return owner[i] < 0 ? policy.global_context : has(region(j), owner[i]);
        if (is_text(j)) return owner[j] < 0 ? policy.global_context : has(region(i), owner[j]);
        auto a = region(i), b = region(j);
        if (a.empty() && b.empty()) return true;
        if (a.empty()) return false;
        if (b.empty()) return policy.background_context;
        for (auto x : a) {
            if (std::find(b.begin(), b.end(), x) != b.end()) return true;
        }
        return false;
    }

    /// Dense N x N relation, row-major.
    std::vector<char> dense() const {
        // precompute regions once
        std::vector<char> out(N * N);
        for (std::size_t i = 0; i < N; ++i) {
            for (std::size_t j = 0; j < N; ++j) out[i * N + j] = allowed(i, j);
        }
        return out;
    }

    /// Per-frame class partition as sorted sets of entity indices.
    std::set<std::vector<std::size_t>> classes(std::size_t f) const {
        std::set<std::vector<std::size_t>> out;
        for (std::size_t e = 0; e < E; ++e) {
            std::vector<std::size_t> cls;
            for (std::size_t x = 0; x < E; ++x) {
                if (label[f][x] == label[f][e]) cls.push_back(x);
            }
            out.insert(cls);
        }
        return out;
    }
};

/// k-step reachability on a dense relation (i reads j).
inline std::vector<char> reach(const std::vector<char> &rel, std::size_t n, std::size_t from, std::size_t k) {
    std::vector<char> seen(n, 0);
    seen[from] = 1;
    for (std::size_t step = 0; step < k; ++step) {
        auto next = seen;
        for (std::size_t i = 0; i < n; ++i) {
            if (!seen[i]) continue;
            for (std::size_t j = 0; j < n; ++j) {
                if (rel[i * n + j]) next[j] = 1;
            }
        }
        seen = std::move(next);
    }
    return seen;
}

} // namespace oracle
