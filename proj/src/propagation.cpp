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

#include "dyst/propagation.hpp"

#include "dyst/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dyst {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string_view to_string(Decay decay) {
    return decay == Decay::constant ? "constant" : "linear_to_zero";
}

std::optional<Decay> parse_decay(std::string_view text) {
    if (text == "constant") return Decay::constant;
    if (text == "linear" || text == "linear_to_zero") return Decay::linear_to_zero;
    return std::nullopt;
}

double BlendSchedule::weight_at(double w, std::size_t step, std::size_t total_steps) const {
    double active_steps = active_fraction * static_cast<double>(total_steps);
    double s = static_cast<double>(step);
    if (!(s < active_steps)) {
        return 0.0;
    }
    if (decay == Decay::constant) {
        return w;
    }
    return w * (1.0 - s / active_steps);
}

namespace {

// Position of `cell` within [lo, hi) of the current frame's box, looked up in
// the reference box and snapped to the reference cell range.
std::size_t corresponding(std::size_t cell, std::size_t n, double lo, double hi, double ref_lo, double ref_hi,
                          std::size_t ref_first, std::size_t ref_last) {
    double scale = static_cast<double>(n);
    double center = (static_cast<double>(cell) + 0.5) / scale;
    double u = std::clamp((center - lo) / (hi - lo), 0.0, 1.0);
    double x = ref_lo + u * (ref_hi - ref_lo);
    double idx = std::floor(x * scale);
    if (idx < static_cast<double>(ref_first)) return ref_first;
    if (idx > static_cast<double>(ref_last)) return ref_last;
    return static_cast<std::size_t>(idx);
}

} // namespace

PropagationPlan build_plan(const LayoutTimeline &timeline, const TokenLayout &layout, const BlendSchedule &schedule) {
    if (!(layout.geometry == timeline.geometry)) {
        throw LayoutMismatch("token layout geometry disagrees with the timeline");
    }
    PropagationPlan plan;
    plan.geometry = timeline.geometry;
    plan.text_len = layout.text_len;
    plan.entity_ids = timeline.entity_ids;
    plan.schedule = schedule;
    if (timeline.frames.empty()) {
        return plan;
    }

    const auto &g = timeline.geometry;
    const std::size_t hw = g.cells_per_frame();
    const auto &first = timeline.frames.front();
    for (std::size_t e = 0; e < timeline.entity_ids.size(); ++e) {
        const auto &ref_box = first.boxes[e];
        const auto &ref = first.cells[e];
        for (std::size_t f = 1; f < timeline.frames.size(); ++f) {
            const auto &box = timeline.frames[f].boxes[e];
            const auto &rect = timeline.frames[f].cells[e];
            for (std::size_t r = rect.row0; r < rect.row1; ++r) {
                auto sr = corresponding(r, g.height, box.y0, box.y1, ref_box.y0, ref_box.y1, ref.row0, ref.row1 - 1);
                for (std::size_t c = rect.col0; c < rect.col1; ++c) {
                    auto sc = corresponding(c, g.width, box.x0, box.x1, ref_box.x0, ref_box.x1, ref.col0, ref.col1 - 1);
                    plan.entries.push_back({e, f, f * hw + r * g.width + c, sr * g.width + sc, schedule.alpha});
                }
            }
        }
    }
    return plan;
}

namespace {

struct TargetGroup {
    std::size_t target;
    std::size_t first;
    std::size_t last;
};

// Entry order canonicalized by (target, entity, source) so the result does
// not depend on how the plan lists its entries.
std::pair<std::vector<std::size_t>, std::vector<TargetGroup>> group_by_target(const PropagationPlan &plan) {
    std::vector<std::size_t> order(plan.entries.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto &x = plan.entries[a];
        const auto &y = plan.entries[b];
        return std::tie(x.target, x.entity, x.source, x.weight) < std::tie(y.target, y.entity, y.source, y.weight);
    });
    std::vector<TargetGroup> groups;
    for (std::size_t k = 0; k < order.size(); ++k) {
        auto t = plan.entries[order[k]].target;
        if (groups.empty() || groups.back().target != t) {
            groups.push_back({t, k, k + 1});
        } else {
            groups.back().last = k + 1;
        }
    }
    return {std::move(order), std::move(groups)};
}

void blend_group(MatrixView latent, const Matrix &reference, const PropagationPlan &plan,
                 const std::vector<std::size_t> &order, const TargetGroup &group, std::size_t step,
                 std::size_t total_steps) {
    const double m = static_cast<double>(group.last - group.first);
    double mean_w = 0.0;
    for (std::size_t k = group.first; k < group.last; ++k) {
        mean_w += plan.schedule.weight_at(plan.entries[order[k]].weight, step, total_steps);
    }
    mean_w /= m;
    if (mean_w == 0.0) {
        return;
    }
    auto target = latent.row(group.target);
    for (std::size_t d = 0; d < latent.cols; ++d) {
        double acc = (1.0 - mean_w) * target[d];
        for (std::size_t k = group.first; k < group.last; ++k) {
            const auto &entry = plan.entries[order[k]];
            double w = plan.schedule.weight_at(entry.weight, step, total_steps) / m;
            acc += w * reference(entry.source, d);
        }
        target[d] = acc;
    }
}

} // namespace

void apply_plan(MatrixView latent, const PropagationPlan &plan, std::size_t step_index, std::size_t total_steps,
                Exec exec) {
    const auto &g = plan.geometry;
    if (latent.rows != g.video_tokens() || latent.cols != g.channels) {
        throw ShapeMismatch("latent is " + std::to_string(latent.rows) + "x" + std::to_string(latent.cols) +
                            ", plan expects " + std::to_string(g.video_tokens()) + "x" + std::to_string(g.channels));
    }
    if (step_index >= total_steps) {
        throw IndexOutOfRange("step index " + std::to_string(step_index) + " outside [0, " + std::to_string(total_steps) + ")");
    }
    if (plan.schedule.weight_at(1.0, step_index, total_steps) == 0.0 || plan.entries.empty()) {
        return;
    }

    // Sources all live in frame 0; snapshot it before any write.
    const std::size_t hw = g.cells_per_frame();
    Matrix reference(hw, latent.cols);
    std::copy(latent.data, latent.data + hw * latent.cols, reference.data.begin());

    const auto grouped = group_by_target(plan);
    const auto &order = grouped.first;
    const auto &groups = grouped.second;
    for (const auto &group : groups) {
        if (group.target < hw || group.target >= latent.rows) {
            throw ShapeMismatch("plan target " + std::to_string(group.target) + " outside frames 1..F-1");
        }
    }
    for (const auto &e : plan.entries) {
        if (e.source >= hw) {
            throw ShapeMismatch("plan source " + std::to_string(e.source) + " outside frame 0");
        }
    }

    if (exec == Exec::serial) {
        for (const auto &group : groups) {
            blend_group(latent, reference, plan, order, group, step_index, total_steps);
        }
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(groups.size()); ++k) {
        blend_group(latent, reference, plan, order, groups[static_cast<std::size_t>(k)], step_index, total_steps);
    }
}

Matrix apply_plan(const Matrix &latent, const PropagationPlan &plan, std::size_t step_index, std::size_t total_steps,
                  Exec exec) {
    Matrix out = latent;
    apply_plan(out.view(), plan, step_index, total_steps, exec);
    return out;
}

PlanStats plan_stats(const PropagationPlan &plan) {
    PlanStats stats;
    for (const auto &id : plan.entity_ids) {
        stats.entries_per_frame[id].assign(plan.geometry.frames, 0);
    }
    for (const auto &e : plan.entries) {
        ++stats.entries_per_frame[plan.entity_ids[e.entity]][e.frame];
        ++stats.weight_histogram[e.weight];
        ++stats.total_entries;
    }
    return stats;
}

std::string plan_to_json(const PropagationPlan &plan) {
    ordered_json doc;
    doc["version"] = "1";
    doc["geometry"] = ordered_json{{"frames", plan.geometry.frames},
                                   {"height", plan.geometry.height},
                                   {"width", plan.geometry.width},
                                   {"channels", plan.geometry.channels}};
    doc["text_len"] = plan.text_len;
    doc["index_space"] = "latent";
    doc["entities"] = plan.entity_ids;
    doc["schedule"] = ordered_json{{"alpha", plan.schedule.alpha},
                                   {"active_fraction", plan.schedule.active_fraction},
                                   {"decay", to_string(plan.schedule.decay)}};
    auto entries = ordered_json::array();
    for (const auto &e : plan.entries) {
        entries.push_back({plan.entity_ids[e.entity], e.frame, e.target, e.source, e.weight});
    }
    doc["entries"] = std::move(entries);
    return doc.dump() + "\n";
}

PropagationPlan plan_from_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error &e) {
        throw SyntaxError(e.what());
    }
    try {
        PropagationPlan plan;
        const auto &g = doc.at("geometry");
        plan.geometry = {g.at("frames").get<std::size_t>(), g.at("height").get<std::size_t>(),
                         g.at("width").get<std::size_t>(), g.at("channels").get<std::size_t>()};
        plan.text_len = doc.at("text_len").get<std::size_t>();
        if (doc.at("index_space").get<std::string>() != "latent") {
            throw SchemaError("unsupported index_space", "index_space");
        }
        plan.entity_ids = doc.at("entities").get<std::vector<std::string>>();
        const auto &s = doc.at("schedule");
        auto decay = parse_decay(s.at("decay").get<std::string>());
        if (!decay) {
            throw SchemaError("unknown decay", "schedule.decay");
        }
        plan.schedule = {s.at("alpha").get<double>(), s.at("active_fraction").get<double>(), *decay};
        for (const auto &je : doc.at("entries")) {
            auto id = je.at(0).get<std::string>();
            auto it = std::find(plan.entity_ids.begin(), plan.entity_ids.end(), id);
            if (it == plan.entity_ids.end()) {
                throw SchemaError("entry names unknown entity \"" + id + "\"", "entries");
            }
            plan.entries.push_back({static_cast<std::size_t>(it - plan.entity_ids.begin()), je.at(1).get<std::size_t>(),
                                    je.at(2).get<std::size_t>(), je.at(3).get<std::size_t>(), je.at(4).get<double>()});
        }
        return plan;
    } catch (const json::exception &e) {
        throw SchemaError(e.what());
    }
}

} // namespace dyst
