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

#include "dyst/layout.hpp"

#include "dyst/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dyst {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::vector<Cell> CellRect::cells() const {
    std::vector<Cell> out;
    out.reserve(size());
    for (std::size_t r = row0; r < row1; ++r) {
        for (std::size_t c = col0; c < col1; ++c) {
            out.push_back({r, c});
        }
    }
    return out;
}

std::string_view to_string(MergeScope scope) {
    return scope == MergeScope::per_frame ? "per_frame" : "global";
}

std::optional<MergeScope> parse_merge_scope(std::string_view text) {
    if (text == "per_frame") return MergeScope::per_frame;
    if (text == "global") return MergeScope::global;
    return std::nullopt;
}

std::size_t LayoutTimeline::entity_index(std::string_view id) const {
    auto it = std::find(entity_ids.begin(), entity_ids.end(), id);
    return it == entity_ids.end() ? std::string::npos : static_cast<std::size_t>(it - entity_ids.begin());
}

namespace {

// Exact at both ends: t = 0 yields a, t = 1 yields b.
double lerp_exact(double a, double b, double t) {
    if (a == b) {
        return a;
    }
    return std::clamp((1.0 - t) * a + t * b, 0.0, 1.0);
}

class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) {
            // smaller root wins so component ids are canonical
            if (b < a) std::swap(a, b);
            parent_[b] = a;
        }
    }

private:
    std::vector<std::size_t> parent_;
};

std::vector<std::vector<std::size_t>> components(DisjointSets &sets, std::size_t n) {
    std::vector<std::vector<std::size_t>> out;
    std::vector<std::size_t> slot(n, std::string::npos);
    for (std::size_t i = 0; i < n; ++i) {
        auto root = sets.find(i);
        if (slot[root] == std::string::npos) {
            slot[root] = out.size();
            out.emplace_back();
        }
        out[slot[root]].push_back(i);
    }
    return out;
}

void assign_classes(FrameLayout &frame, std::vector<std::vector<std::size_t>> classes) {
    frame.interaction_classes = std::move(classes);
    frame.class_of_entity.assign(frame.cells.size(), 0);
    for (std::size_t k = 0; k < frame.interaction_classes.size(); ++k) {
        for (auto e : frame.interaction_classes[k]) {
            frame.class_of_entity[e] = k;
        }
    }
}

} // namespace

std::vector<NormalizedBox> interpolate_entity(const EntitySpec &entity, std::size_t frames) {
    std::vector<NormalizedBox> out(frames);
    const auto &kfs = entity.keyframes;
    if (kfs.empty()) {
        return out;
    }
    if (entity.motion == Motion::static_ || kfs.size() == 1) {
        std::fill(out.begin(), out.end(), kfs.front().box);
        return out;
    }
    std::size_t seg = 0;
    for (std::size_t f = 0; f < frames; ++f) {
        while (seg + 2 < kfs.size() && f > kfs[seg + 1].frame) {
            ++seg;
        }
        const auto &a = kfs[seg];
        const auto &b = kfs[seg + 1];
        if (f <= a.frame) {
            out[f] = a.box;
            continue;
        }
        if (f >= b.frame) {
            out[f] = b.box;
            continue;
        }
        double t = static_cast<double>(f - a.frame) / static_cast<double>(b.frame - a.frame);
        out[f] = {lerp_exact(a.box.x0, b.box.x0, t), lerp_exact(a.box.y0, b.box.y0, t),
                  lerp_exact(a.box.x1, b.box.x1, t), lerp_exact(a.box.y1, b.box.y1, t)};
    }
    return out;
}

CellRect rasterize_box(const NormalizedBox &box, std::size_t height, std::size_t width) {
    auto span = [](double lo, double hi, std::size_t n) {
        double scale = static_cast<double>(n);
        double first = std::floor(lo * scale);
        double last = std::ceil(hi * scale);
        auto clamp = [n](double v) { return static_cast<std::size_t>(std::clamp(v, 0.0, static_cast<double>(n))); };
        return std::pair{clamp(first), clamp(last)};
    };
    auto [r0, r1] = span(box.y0, box.y1, height);
    auto [c0, c1] = span(box.x0, box.x1, width);
    CellRect rect{r0, r1, c0, c1};
    if (rect.empty()) {
        auto center = [](double lo, double hi, std::size_t n) {
            double v = std::floor(0.5 * (lo + hi) * static_cast<double>(n));
            return std::min(static_cast<std::size_t>(std::max(v, 0.0)), n - 1);
        };
        auto r = center(box.y0, box.y1, height);
        auto c = center(box.x0, box.x1, width);
        rect = {r, r + 1, c, c + 1};
    }
    return rect;
}

std::vector<std::vector<std::size_t>> overlap_components(const std::vector<CellRect> &cells) {
    DisjointSets sets(cells.size());
    for (std::size_t a = 0; a < cells.size(); ++a) {
        for (std::size_t b = a + 1; b < cells.size(); ++b) {
            if (cells[a].intersects(cells[b])) {
                sets.unite(a, b);
            }
        }
    }
    return components(sets, cells.size());
}

LayoutTimeline build_timeline(const SceneSpec &spec, MergeScope scope) {
    const auto &g = spec.geometry;
    const std::size_t entities = spec.entities.size();

    LayoutTimeline timeline;
    timeline.geometry = g;
    timeline.merge_scope = scope;
    for (const auto &e : spec.entities) {
        timeline.entity_ids.push_back(e.id);
    }

    std::vector<std::vector<NormalizedBox>> trajectories(entities);
    for (std::size_t e = 0; e < entities; ++e) {
        trajectories[e] = interpolate_entity(spec.entities[e], g.frames);
    }

    timeline.frames.resize(g.frames);
    const auto frame_count = static_cast<std::ptrdiff_t>(g.frames);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t fi = 0; fi < frame_count; ++fi) {
        auto f = static_cast<std::size_t>(fi);
        auto &frame = timeline.frames[f];
        frame.frame = f;
        frame.boxes.resize(entities);
        frame.cells.resize(entities);
        for (std::size_t e = 0; e < entities; ++e) {
            frame.boxes[e] = trajectories[e][f];
            frame.cells[e] = rasterize_box(frame.boxes[e], g.height, g.width);
        }
        if (scope == MergeScope::per_frame) {
            assign_classes(frame, overlap_components(frame.cells));
        }
    }

    if (scope == MergeScope::global) {
        DisjointSets sets(entities);
        for (const auto &frame : timeline.frames) {
            for (const auto &cls : overlap_components(frame.cells)) {
                for (std::size_t k = 1; k < cls.size(); ++k) {
                    sets.unite(cls.front(), cls[k]);
                }
            }
        }
        auto classes = components(sets, entities);
        for (auto &frame : timeline.frames) {
            assign_classes(frame, classes);
        }
    }
    return timeline;
}

std::string timeline_to_json(const LayoutTimeline &timeline) {
    ordered_json doc;
    doc["version"] = "1";
    doc["geometry"] = ordered_json{{"frames", timeline.geometry.frames},
                                   {"height", timeline.geometry.height},
                                   {"width", timeline.geometry.width},
                                   {"channels", timeline.geometry.channels}};
    doc["merge_scope"] = to_string(timeline.merge_scope);
    doc["entities"] = timeline.entity_ids;
    auto frames = ordered_json::array();
    for (const auto &frame : timeline.frames) {
        ordered_json boxes = ordered_json::object();
        ordered_json cells = ordered_json::object();
        for (std::size_t e = 0; e < timeline.entity_ids.size(); ++e) {
            const auto &b = frame.boxes[e];
            boxes[timeline.entity_ids[e]] = {b.x0, b.y0, b.x1, b.y1};
            auto list = ordered_json::array();
            for (auto c : frame.cells[e].cells()) {
                list.push_back({c.row, c.col});
            }
            cells[timeline.entity_ids[e]] = std::move(list);
        }
        auto classes = ordered_json::array();
        for (const auto &cls : frame.interaction_classes) {
            auto ids = ordered_json::array();
            for (auto e : cls) {
                ids.push_back(timeline.entity_ids[e]);
            }
            classes.push_back(std::move(ids));
        }
        frames.push_back(ordered_json{{"frame", frame.frame},
                                      {"boxes", std::move(boxes)},
                                      {"cells", std::move(cells)},
                                      {"interaction_classes", std::move(classes)}});
    }
    doc["frames"] = std::move(frames);
    return doc.dump() + "\n";
}

LayoutTimeline timeline_from_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error &e) {
        throw SyntaxError(e.what());
    }
    try {
        LayoutTimeline t;
        const auto &g = doc.at("geometry");
        t.geometry = {g.at("frames").get<std::size_t>(), g.at("height").get<std::size_t>(),
                      g.at("width").get<std::size_t>(), g.at("channels").get<std::size_t>()};
        auto scope = parse_merge_scope(doc.at("merge_scope").get<std::string>());
        if (!scope) {
            throw SchemaError("unknown merge_scope", "merge_scope");
        }
        t.merge_scope = *scope;
        t.entity_ids = doc.at("entities").get<std::vector<std::string>>();
        const auto &frames = doc.at("frames");
        if (frames.size() != t.geometry.frames) {
            throw SchemaError("expected one entry per frame", "frames");
        }
        for (std::size_t f = 0; f < frames.size(); ++f) {
            const auto &jf = frames[f];
            std::string path = "frames[" + std::to_string(f) + "]";
            FrameLayout frame;
            frame.frame = jf.at("frame").get<std::size_t>();
            if (frame.frame != f) {
                throw SchemaError("frame indices must be 0..F-1 in order", path + ".frame");
            }
            for (const auto &id : t.entity_ids) {
                auto b = jf.at("boxes").at(id).get<std::vector<double>>();
                if (b.size() != 4) {
                    throw SchemaError("expected [x0, y0, x1, y1]", path + ".boxes." + id);
                }
                frame.boxes.push_back({b[0], b[1], b[2], b[3]});
                // cells are exported from a rectangle; recover its bounds
                CellRect rect{t.geometry.height, 0, t.geometry.width, 0};
                const auto &cells = jf.at("cells").at(id);
                for (const auto &rc : cells) {
                    auto r = rc.at(0).get<std::size_t>();
                    auto c = rc.at(1).get<std::size_t>();
                    if (r >= t.geometry.height || c >= t.geometry.width) {
                        throw SchemaError("cell outside the latent grid", path + ".cells." + id);
                    }
                    rect.row0 = std::min(rect.row0, r);
                    rect.row1 = std::max(rect.row1, r + 1);
                    rect.col0 = std::min(rect.col0, c);
                    rect.col1 = std::max(rect.col1, c + 1);
                }
                if (cells.empty() || rect.size() != cells.size()) {
                    throw SchemaError("cell set must be a non-empty rectangle", path + ".cells." + id);
                }
                frame.cells.push_back(rect);
            }
            std::vector<std::vector<std::size_t>> classes;
            for (const auto &jc : jf.at("interaction_classes")) {
                std::vector<std::size_t> members;
                for (const auto &id : jc) {
                    auto e = t.entity_index(id.get<std::string>());
                    if (e == std::string::npos) {
                        throw SchemaError("unknown entity in interaction class", path + ".interaction_classes");
                    }
                    members.push_back(e);
                }
                classes.push_back(std::move(members));
            }
            assign_classes(frame, std::move(classes));
            t.frames.push_back(std::move(frame));
        }
        return t;
    } catch (const json::exception &e) {
        throw SchemaError(e.what());
    }
}

} // namespace dyst
