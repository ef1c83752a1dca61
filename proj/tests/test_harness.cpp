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
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace dyst;
using testing::static_entity;

namespace {

struct Instance {
    SceneSpec spec;
    LayoutTimeline timeline;
    TokenLayout layout;
    AttentionMask mask;
};

Instance instance(const SceneSpec &spec, MaskPolicy policy = {}) {
    Instance in{spec, build_timeline(spec), make_token_layout(spec), {}};
    in.mask = compile_mask(assign_classes(spec, in.timeline, in.layout), in.layout, in.timeline, policy);
    return in;
}

Matrix identity(std::size_t d) {
    Matrix m(d, d);
    for (std::size_t k = 0; k < d; ++k) m(k, k) = 1.0;
    return m;
}

Matrix multiply(const Matrix &a, const Matrix &b) {
    Matrix out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t k = 0; k < a.cols; ++k) {
            for (std::size_t j = 0; j < b.cols; ++j) out(i, j) += a(i, k) * b(k, j);
        }
    }
    return out;
}

// Softmax over the allowed columns only, from scratch.
std::vector<double> reference_weights(const Matrix &state, const std::vector<char> &allowed, std::size_t n,
                                      std::uint64_t seed, std::size_t i) {
    auto p = make_projections(state.cols, seed);
    auto q = multiply(state, p.query), k = multiply(state, p.key);
    std::vector<double> s(n, -INFINITY);
    double top = -INFINITY;
    for (std::size_t j = 0; j < n; ++j) {
        if (!allowed[i * n + j]) continue;
        double dot = 0.0;
        for (std::size_t d = 0; d < state.cols; ++d) dot += q(i, d) * k(j, d);
        s[j] = dot / std::sqrt(static_cast<double>(state.cols));
        top = std::max(top, s[j]);
    }
    double sum = 0.0;
    for (auto &x : s) sum += (x = std::exp(x - top));
    for (auto &x : s) x /= sum;
    return s;
}

std::vector<char> dense_of(const AttentionMask &m) {
    auto tile = densify(m, {0, m.size()}, {0, m.size()});
    return {tile.data.begin(), tile.data.end()};
}

double max_abs_diff(const Matrix &a, const Matrix &b) {
    double out = 0.0;
    for (std::size_t k = 0; k < a.data.size(); ++k) out = std::max(out, std::abs(a.data[k] - b.data[k]));
    return out;
}

} // namespace

TEST_CASE("uniform keys average the values") {
    Matrix state(2, 1);
    state(0, 0) = 1.0;
    state(1, 0) = 3.0;
    auto mask = AttentionMask::from_rows(2, {{{0, 2}}, {{0, 2}}});
    Projections p{identity(1), Matrix(1, 1), identity(1)};
    for (auto exec : {Exec::serial, Exec::parallel}) {
        auto out = masked_attention(state, mask, p, exec);
        CHECK(out(0, 0) == doctest::Approx(2.0));
        CHECK(out(1, 0) == doctest::Approx(2.0));
    }
}

TEST_CASE("diagonal-only mask passes values through") {
    auto state = seeded_state(6, 3, 1);
    std::vector<IntervalList> diag;
    for (std::uint64_t i = 0; i < 6; ++i) diag.push_back({{i, i + 1}});
    auto mask = AttentionMask::from_rows(6, diag);
    auto p = make_projections(3, 9);
    auto v = multiply(state, p.value);
    for (auto exec : {Exec::serial, Exec::parallel}) {
        CHECK(max_abs_diff(masked_attention(state, mask, p, exec), v) < 1e-12);
    }
}

TEST_CASE("twelve-token weights against an explicit softmax") {
    auto in = instance(testing::twelve_token_scene(), MaskPolicy::isolated());
    auto dense = dense_of(in.mask);
    auto state = seeded_state(12, 4, 21);
    for (std::size_t i = 0; i < 12; ++i) {
        auto w = attention_weights(state, in.mask, 5, i);
        auto ref = reference_weights(state, dense, 12, 5, i);
        double sum = 0.0;
        for (std::size_t j = 0; j < 12; ++j) {
            sum += w[j];
            if (!dense[i * 12 + j]) CHECK(w[j] == 0.0);
            CHECK(std::abs(w[j] - ref[j]) < 1e-12);
        }
        CHECK(std::abs(sum - 1.0) < 1e-6);
    }
    CHECK_THROWS_AS(attention_weights(state, in.mask, 5, 12), IndexOutOfRange);
    CHECK_THROWS_AS(masked_attention(seeded_state(11, 4, 1), in.mask, 5), ShapeMismatch);
}

TEST_CASE("serial and parallel kernels agree") {
    std::mt19937_64 rng(12);
    for (int k = 0; k < 15; ++k) {
        auto spec = testing::random_scene(rng);
        auto in = instance(spec, k % 2 ? MaskPolicy{} : MaskPolicy::isolated());
        auto state = seeded_state(in.mask.size(), spec.geometry.channels, static_cast<std::uint64_t>(k));
        auto a = masked_attention(state, in.mask, 3, Exec::serial);
        auto b = masked_attention(state, in.mask, 3, Exec::parallel);
        CHECK(max_abs_diff(a, b) < 1e-12);
    }
}

TEST_CASE("k-layer influence follows mask paths on the twelve-token instance") {
    for (auto policy : {MaskPolicy{}, MaskPolicy::isolated()}) {
        auto in = instance(testing::twelve_token_scene(), policy);
        auto dense = dense_of(in.mask);
        auto base = seeded_state(12, 4, 33);
        for (std::size_t layers = 1; layers <= 3; ++layers) {
            auto ref = stacked_attention(base, in.mask, 7, layers);
            for (std::size_t j = 0; j < 12; ++j) {
                auto moved = base;
                for (auto &x : moved.row(j)) x += 1.0;
                auto out = stacked_attention(moved, in.mask, 7, layers);
                for (std::size_t i = 0; i < 12; ++i) {
                    bool changed = false;
                    for (std::size_t d = 0; d < 4; ++d) changed = changed || out(i, d) != ref(i, d);
                    auto reach = oracle::reach(dense, 12, i, layers);
                    if (changed) CHECK(reach[j]);
                    CHECK(reachable_within(in.mask, i, layers) == std::vector<std::uint8_t>(reach.begin(), reach.end()));
                }
            }
        }
    }
}

TEST_CASE("toy denoise") {
    auto spec = testing::scene("g", {3, 4, 4, 2},
                               {testing::moving_entity("m", "m", {{0, {0.0, 0.0, 0.5, 0.5}}, {2, {0.5, 0.5, 1.0, 1.0}}})});
    auto in = instance(spec);
    auto state = seeded_state(in.mask.size(), 2, 4);

    SUBCASE("identity pipeline") {
        auto plan = build_plan(in.timeline, in.layout, {0.0, 0.4, Decay::linear_to_zero});
        Predictor zero = [](const Matrix &z, std::size_t) { return Matrix(z.rows, z.cols); };
        CHECK(toy_denoise(state, in.mask, plan, 1, 0, zero) == state);
    }
    SUBCASE("overwrite dominates") {
        auto plan = build_plan(in.timeline, in.layout, {1.0, 1.0, Decay::constant});
        auto out = toy_denoise(state, in.mask, plan, 5, 3);
        const auto L = in.layout.text_len;
        for (const auto &e : plan.entries) {
            for (std::size_t d = 0; d < 2; ++d) CHECK(out(L + e.target, d) == out(L + e.source, d));
        }
        // text rows are not updated
        for (std::size_t i = 0; i < L; ++i) CHECK(out(i, 0) == state(i, 0));
    }
    SUBCASE("determinism") {
        auto plan = build_plan(in.timeline, in.layout, {});
        auto a = toy_denoise(state, in.mask, plan, 4, 1);
        CHECK(toy_denoise(state, in.mask, plan, 4, 1) == a);
        CHECK_FALSE(toy_denoise(state, in.mask, plan, 4, 2) == a);
        CHECK_THROWS_AS(toy_denoise(state, in.mask, plan, 0, 1), IndexOutOfRange);
        CHECK_THROWS_AS(toy_denoise(seeded_state(3, 2, 1), in.mask, plan, 1, 1), ShapeMismatch);
    }
}

TEST_CASE("stub predictor is deterministic") {
    auto in = instance(testing::twelve_token_scene());
    auto state = seeded_state(12, 4, 2);
    CHECK(StubPredictor(in.mask, 5, 4)(state, 0) == StubPredictor(in.mask, 5, 4)(state, 3));
    CHECK_FALSE(StubPredictor(in.mask, 5, 4)(state, 0) == StubPredictor(in.mask, 6, 4)(state, 0));
}

TEST_CASE("leakage probe") {
    auto spec = testing::scene("a dog and a cat", {2, 6, 6, 4},
                               {static_entity("dog", "a brown dog", {0.0, 0.0, 0.33, 0.33}),
                                static_entity("cat", "a white cat", {0.5, 0.5, 1.0, 1.0})});
    auto isolated = instance(spec, MaskPolicy::isolated());
    CHECK(leakage_probe(spec, isolated.timeline, isolated.layout, isolated.mask, "dog", "cat", 1.0, 3) == 0.0);
    CHECK(leakage_probe(spec, isolated.timeline, isolated.layout, isolated.mask, "cat", "dog", 1.0, 3) == 0.0);
    CHECK(leakage_probe(spec, isolated.timeline, isolated.layout, isolated.mask, "dog", "dog", 1.0, 3) > 0.0);
    CHECK_THROWS_AS(leakage_probe(spec, isolated.timeline, isolated.layout, isolated.mask, "cow", "dog", 1.0, 3),
                    UnknownEntity);

    // default policies still give a single layer no path from dog text to cat video
    auto open = instance(spec);
    CHECK(leakage_probe(spec, open.timeline, open.layout, open.mask, "dog", "cat", 1.0, 3, 1) == 0.0);

    auto touching = testing::scene("g", {1, 6, 6, 4},
                                   {static_entity("a", "a", {0.0, 0.0, 0.6, 0.6}),
                                    static_entity("b", "b", {0.5, 0.5, 1.0, 1.0})});
    auto t = instance(touching, MaskPolicy::isolated());
    CHECK(leakage_probe(touching, t.timeline, t.layout, t.mask, "a", "b", 1.0, 3) > 0.0);
}

TEST_CASE("attention heatmap") {
    auto spec = testing::scene("w w", {2, 4, 4, 3}, {static_entity("a", "x y", {0.0, 0.0, 0.5, 0.5})});
    auto in = instance(spec, MaskPolicy::isolated());
    auto state = seeded_state(in.mask.size(), 3, 8);
    auto heat = attention_heatmap(state, in.mask, in.layout, in.layout.entity_spans[0], 1, 2);
    for (std::size_t r = 0; r < 4; ++r) {
        for (std::size_t c = 0; c < 4; ++c) CHECK((heat(r, c) > 0.0) == (r < 2 && c < 2));
    }

    std::vector<IntervalList> diag;
    for (std::uint64_t i = 0; i < in.mask.size(); ++i) diag.push_back({{i, i + 1}});
    auto self = AttentionMask::from_rows(in.mask.size(), diag);
    auto none = attention_heatmap(state, self, in.layout, in.layout.global_span, 0, 2);
    for (double x : none.data) CHECK(x == 0.0);

    auto open = instance(spec);
    auto global = attention_heatmap(state, open.mask, open.layout, open.layout.global_span, 0, 2);
    for (double x : global.data) CHECK(x > 0.0);

    CHECK_THROWS_AS(attention_heatmap(state, in.mask, in.layout, in.layout.global_span, 2, 2), IndexOutOfRange);
}

TEST_CASE("propagation lowers cross-frame variance") {
    auto spec = testing::scene("g", {4, 6, 6, 4},
                               {testing::moving_entity("m", "a red ball",
                                                       {{0, {0.0, 0.0, 0.5, 0.5}}, {3, {0.5, 0.5, 1.0, 1.0}}}),
                                static_entity("s", "a box", {0.6, 0.0, 1.0, 0.3})});
    auto in = instance(spec);
    auto with = build_plan(in.timeline, in.layout, {});
    auto without = with;
    without.entries.clear();
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto z = seeded_state(in.mask.size(), 4, seed);
        double a = entity_frame_variance(toy_denoise(z, in.mask, with, 10, seed), in.timeline, in.layout);
        double b = entity_frame_variance(toy_denoise(z, in.mask, without, 10, seed), in.timeline, in.layout);
        CHECK(a < b);
    }
}
