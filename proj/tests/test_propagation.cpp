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

#include "dyst/error.hpp"
#include "dyst/harness.hpp"
#include "dyst/propagation.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace dyst;
using testing::moving_entity;
using testing::static_entity;

namespace {

PropagationPlan plan_for(const SceneSpec &spec, BlendSchedule schedule = {}) {
    auto t = build_timeline(spec);
    return build_plan(t, make_token_layout(spec), schedule);
}

// Reference correspondence along one axis: cell center's relative position in
// the target box, mapped into the reference box, snapped to the reference cells.
std::size_t reference_cell(std::size_t cell, std::size_t n, double lo, double hi, double rlo, double rhi) {
    double center = (static_cast<double>(cell) + 0.5) / static_cast<double>(n);
    double u = std::min(1.0, std::max(0.0, (center - lo) / (hi - lo)));
    auto cells = oracle::raster({rlo, 0.0, rhi, 1.0}, 1, n);
    std::size_t first = cells.begin()->second, last = cells.rbegin()->second;
    auto idx = static_cast<long>(std::floor((rlo + u * (rhi - rlo)) * static_cast<double>(n)));
    return static_cast<std::size_t>(std::clamp<long>(idx, static_cast<long>(first), static_cast<long>(last)));
}

std::map<std::size_t, std::size_t> hits(const PropagationPlan &plan) {
    std::map<std::size_t, std::size_t> out;
    for (const auto &e : plan.entries) ++out[e.target];
    return out;
}

} // namespace

TEST_CASE("static entity maps onto itself") {
    auto spec = testing::scene("g", {3, 8, 8, 2}, {static_entity("s", "s", {0.25, 0.25, 0.5, 0.5})});
    auto plan = plan_for(spec);
    CHECK(plan.entries.size() == 2 * 4);
    for (const auto &e : plan.entries) {
        CHECK(e.target % 64 == e.source);
        CHECK(e.weight == plan.schedule.alpha);
    }
}

TEST_CASE("two-column translation") {
    auto spec = testing::scene("g", {2, 8, 8, 1},
                               {moving_entity("m", "m", {{0, {0.125, 0.25, 0.5, 0.5}}, {1, {0.375, 0.25, 0.75, 0.5}}})});
    auto plan = plan_for(spec);
    CHECK(plan.entries.size() == 3 * 2);
    for (const auto &e : plan.entries) {
        std::size_t r = (e.target % 64) / 8, c = e.target % 8;
        CHECK(e.frame == 1);
        CHECK(e.source == r * 8 + (c - 2));
        CHECK(e.source % 8 == reference_cell(c, 8, 0.375, 0.75, 0.125, 0.5));
    }
    auto stats = plan_stats(plan);
    CHECK(stats.entries_per_frame.at("m") == std::vector<std::size_t>{0, 6});
    CHECK(stats.total_entries == build_timeline(spec).frames[1].cells[0].size());
}

TEST_CASE("shrinking entity maps to the center cell") {
    auto spec = testing::scene("g", {2, 8, 8, 1},
                               {moving_entity("m", "m", {{0, {0.0, 0.0, 0.5, 0.5}}, {1, {0.25, 0.25, 0.375, 0.375}}})});
    auto plan = plan_for(spec);
    REQUIRE(plan.entries.size() == 1);
    CHECK(plan.entries[0].target == 64 + 2 * 8 + 2);
    CHECK(plan.entries[0].source == 2 * 8 + 2);
}

TEST_CASE("correspondence matches the reference lookup on generated scenes") {
    std::mt19937_64 rng(8);
    for (int k = 0; k < 100; ++k) {
        auto spec = testing::random_scene(rng, 5, 10, 16, 3);
        auto t = build_timeline(spec);
        auto plan = build_plan(t, make_token_layout(spec), {});
        const auto &g = spec.geometry;
        std::size_t expected = 0;
        for (std::size_t f = 1; f < g.frames; ++f) {
            for (std::size_t e = 0; e < spec.entities.size(); ++e) expected += t.frames[f].cells[e].size();
        }
        CHECK(plan.entries.size() == expected);
        std::set<std::tuple<std::size_t, std::size_t, std::size_t>> unique;
        for (const auto &en : plan.entries) {
            CHECK(unique.insert({en.entity, en.frame, en.target}).second);
            const auto &box = t.frames[en.frame].boxes[en.entity];
            const auto &ref = t.frames[0].boxes[en.entity];
            std::size_t local = en.target - en.frame * g.cells_per_frame();
            std::size_t r = local / g.width, c = local % g.width;
            CHECK(t.frames[en.frame].cells[en.entity].contains({r, c}));
            CHECK(t.frames[0].cells[en.entity].contains({en.source / g.width, en.source % g.width}));
            CHECK(en.source / g.width == reference_cell(r, g.height, box.y0, box.y1, ref.y0, ref.y1));
            CHECK(en.source % g.width == reference_cell(c, g.width, box.x0, box.x1, ref.x0, ref.x1));
        }
    }
}

TEST_CASE("blend arithmetic") {
    auto spec = testing::scene("g", {2, 1, 1, 1}, {static_entity("s", "s", {0.0, 0.0, 1.0, 1.0})});
    auto plan = plan_for(spec, {0.3, 1.0, Decay::constant});
    Matrix z(2, 1);
    z(0, 0) = 1.0;
    z(1, 0) = 0.0;
    auto out = apply_plan(z, plan, 0, 10);
    CHECK(out(1, 0) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(out(0, 0) == 1.0);

    SUBCASE("overwrite at alpha = 1") {
        plan = plan_for(spec, {1.0, 1.0, Decay::constant});
        CHECK(apply_plan(z, plan, 0, 1)(1, 0) == 1.0);
    }
    SUBCASE("identity at alpha = 0") {
        plan = plan_for(spec, {0.0, 1.0, Decay::constant});
        CHECK(apply_plan(z, plan, 0, 1) == z);
    }
    SUBCASE("inactive after the active fraction") {
        plan = plan_for(spec, {0.5, 0.4, Decay::constant});
        CHECK(apply_plan(z, plan, 3, 10)(1, 0) == 0.5);
        CHECK(apply_plan(z, plan, 4, 10) == z);
    }
    SUBCASE("linear decay") {
        plan = plan_for(spec, {0.5, 0.5, Decay::linear_to_zero});
        CHECK(apply_plan(z, plan, 2, 10)(1, 0) == doctest::Approx(0.5 * (1.0 - 2.0 / 5.0)));
        CHECK(plan.schedule.weight_at(0.5, 5, 10) == 0.0);
        CHECK(plan.schedule.weight_at(0.5, 0, 10) == 0.5);
    }
    SUBCASE("shape and step errors") {
        CHECK_THROWS_AS(apply_plan(Matrix(3, 1), plan, 0, 1), ShapeMismatch);
        CHECK_THROWS_AS(apply_plan(Matrix(2, 2), plan, 0, 1), ShapeMismatch);
        CHECK_THROWS_AS(apply_plan(z, plan, 1, 1), IndexOutOfRange);
        auto bad = plan;
        bad.entries[0].target = 0;
        CHECK_THROWS_AS(apply_plan(z, bad, 0, 1), ShapeMismatch);
    }
}

TEST_CASE("apply_plan contracts on generated scenes") {
    std::mt19937_64 rng(77);
    for (int k = 0; k < 60; ++k) {
        auto spec = testing::random_scene(rng, 5, 8, 16, 4);
        const auto &g = spec.geometry;
        BlendSchedule schedule{std::uniform_real_distribution<double>(0.05, 1.0)(rng), 1.0,
                               k % 2 ? Decay::constant : Decay::linear_to_zero};
        auto plan = plan_for(spec, schedule);
        auto z = seeded_state(g.video_tokens(), g.channels, static_cast<std::uint64_t>(k));
        const std::size_t hw = g.cells_per_frame();

        auto out = apply_plan(z, plan, 1, 4);
        CHECK(apply_plan(z, plan, 1, 4, Exec::serial) == out);

        // frame 0 untouched
        CHECK(std::equal(out.data.begin(), out.data.begin() + static_cast<std::ptrdiff_t>(hw * g.channels),
                         z.data.begin()));

        // permutation-neutral
        auto shuffled = plan;
        std::shuffle(shuffled.entries.begin(), shuffled.entries.end(), rng);
        CHECK(apply_plan(z, shuffled, 1, 4) == out);

        // convex: single-source targets stay between target and source
        auto count = hits(plan);
        for (const auto &e : plan.entries) {
            if (count[e.target] != 1) continue;
            for (std::size_t d = 0; d < g.channels; ++d) {
                double lo = std::min(z(e.target, d), z(e.source, d)), hi = std::max(z(e.target, d), z(e.source, d));
                CHECK(out(e.target, d) >= lo - 1e-15);
                CHECK(out(e.target, d) <= hi + 1e-15);
            }
        }
        // rows outside every plan target untouched
        for (std::size_t i = hw; i < g.video_tokens(); ++i) {
            if (count.count(i)) continue;
            for (std::size_t d = 0; d < g.channels; ++d) CHECK(out(i, d) == z(i, d));
        }

        // overwrite and idempotence at w = 1
        auto full = plan;
        full.schedule = {1.0, 1.0, Decay::constant};
        for (auto &e : full.entries) e.weight = 1.0;
        auto once = apply_plan(z, full, 0, 1);
        for (const auto &e : full.entries) {
            if (count[e.target] != 1) continue;
            for (std::size_t d = 0; d < g.channels; ++d) CHECK(once(e.target, d) == z(e.source, d));
        }
        CHECK(apply_plan(once, full, 0, 1) == once);

        // identity at w = 0
        auto none = plan;
        none.schedule.alpha = 0.0;
        for (auto &e : none.entries) e.weight = 0.0;
        CHECK(apply_plan(z, none, 0, 1) == z);
    }
}

TEST_CASE("geometric convergence bound") {
    auto spec = testing::scene("g", {4, 6, 6, 3},
                               {moving_entity("m", "m", {{0, {0.0, 0.0, 0.5, 0.5}}, {3, {0.5, 0.5, 1.0, 1.0}}})});
    for (double w : {0.1, 0.3, 0.5, 0.9, 1.0}) {
        auto plan = plan_for(spec, {w, 1.0, Decay::constant});
        auto z = seeded_state(spec.geometry.video_tokens(), 3, 5);
        double gap0 = 0.0;
        for (const auto &e : plan.entries) {
            for (std::size_t d = 0; d < 3; ++d) gap0 = std::max(gap0, std::abs(z(e.target, d) - z(e.source, d)));
        }
        REQUIRE(gap0 > 1e-6);
        const double bound = w == 1.0 ? 1.0 : std::ceil(std::log(1e-6 / gap0) / std::log(1.0 - w));
        std::size_t iterations = 0;
        double gap = gap0;
        while (gap >= 1e-6 && iterations < 10000) {
            apply_plan(z.view(), plan, 0, 1);
            ++iterations;
            gap = 0.0;
            for (const auto &e : plan.entries) {
                for (std::size_t d = 0; d < 3; ++d) gap = std::max(gap, std::abs(z(e.target, d) - z(e.source, d)));
            }
        }
        CHECK(static_cast<double>(iterations) <= bound);
    }
}

TEST_CASE("plan statistics") {
    auto spec = testing::scene("g", {3, 4, 4, 1}, {static_entity("s", "s", {0.0, 0.0, 0.5, 0.5})});
    auto stats = plan_stats(plan_for(spec));
    CHECK(stats.entries_per_frame.at("s") == std::vector<std::size_t>{0, 4, 4});
    CHECK(stats.weight_histogram.at(0.3) == 8);
    CHECK(stats.total_entries == 8);

    PropagationPlan empty;
    auto zero = plan_stats(empty);
    CHECK(zero.total_entries == 0);
    CHECK(zero.weight_histogram.empty());
}

TEST_CASE("plan JSON round trip") {
    std::mt19937_64 rng(4);
    for (int k = 0; k < 20; ++k) {
        auto plan = plan_for(testing::random_scene(rng), {0.1 * (k % 10), 0.4, Decay::linear_to_zero});
        auto text = plan_to_json(plan);
        CHECK(plan_from_json(text) == plan);
        CHECK(plan_to_json(plan_from_json(text)) == text);
    }
    CHECK_THROWS_AS(plan_from_json("nope"), SyntaxError);
    CHECK_THROWS_AS(plan_from_json("{}"), SchemaError);
    CHECK(parse_decay("linear") == Decay::linear_to_zero);
    CHECK(parse_decay("constant") == Decay::constant);
    CHECK(parse_decay("cosine") == std::nullopt);
}
