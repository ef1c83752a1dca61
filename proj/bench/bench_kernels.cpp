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

// Serial reference vs OpenMP kernels. Arg(0) is the frame count of a
// two-entity crossing scene on a 16x24 latent grid.

#include "dyst/harness.hpp"
#include "dyst/mask.hpp"
#include "dyst/propagation.hpp"

#include <benchmark/benchmark.h>

using namespace dyst;

namespace {

SceneSpec crossing(std::size_t frames) {
    SceneSpec s;
    s.global_prompt = "a red car drives past a man walking a dog on a sunny street";
    s.geometry = {frames, 16, 24, 8};
    EntitySpec car{"car", "a red sports car", Motion::dynamic,
                   {{0, {0.0, 0.5, 0.3, 0.9}}, {frames - 1, {0.7, 0.5, 1.0, 0.9}}}};
    EntitySpec man{"man", "a man in a blue coat", Motion::dynamic,
                   {{0, {0.8, 0.2, 0.95, 0.8}}, {frames - 1, {0.3, 0.2, 0.45, 0.8}}}};
    EntitySpec tree{"tree", "a tall tree", Motion::static_, {{0, {0.45, 0.0, 0.6, 0.5}}}};
    s.entities = {car, man, tree};
    return s;
}

struct Fixture {
    SceneSpec spec;
    LayoutTimeline timeline;
    TokenLayout layout;
    TokenClassTable table;
    AttentionMask mask;
    PropagationPlan plan;

    explicit Fixture(std::size_t frames) :
        spec(crossing(frames)), timeline(build_timeline(spec)), layout(make_token_layout(spec)),
        table(assign_classes(spec, timeline, layout)), mask(compile_mask(table, layout, timeline, {})),
        plan(build_plan(timeline, layout, {})) {}
};

void compile(benchmark::State &state, Exec exec) {
    Fixture fx(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(compile_mask(fx.table, fx.layout, fx.timeline, {}, exec));
    }
    state.counters["N"] = static_cast<double>(fx.mask.size());
}

void attention(benchmark::State &state, Exec exec) {
    Fixture fx(static_cast<std::size_t>(state.range(0)));
    auto x = seeded_state(fx.mask.size(), 8, 1);
    auto proj = make_projections(8, 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(masked_attention(x, fx.mask, proj, exec));
    }
    state.counters["N"] = static_cast<double>(fx.mask.size());
}

void propagate(benchmark::State &state, Exec exec) {
    Fixture fx(static_cast<std::size_t>(state.range(0)));
    auto z = seeded_state(fx.spec.geometry.video_tokens(), fx.spec.geometry.channels, 3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(apply_plan(z, fx.plan, 0, 10, exec));
    }
    state.counters["entries"] = static_cast<double>(fx.plan.entries.size());
}

} // namespace

BENCHMARK_CAPTURE(compile, serial, Exec::serial)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(compile, parallel, Exec::parallel)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(attention, serial, Exec::serial)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(attention, parallel, Exec::parallel)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(propagate, serial, Exec::serial)->Arg(4)->Arg(13)->Unit(benchmark::kMicrosecond);
BENCHMARK_CAPTURE(propagate, parallel, Exec::parallel)->Arg(4)->Arg(13)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
