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
#include "dyst/layout.hpp"
#include "dyst/mask.hpp"
#include "dyst/matrix.hpp"
#include "dyst/propagation.hpp"

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

namespace dyst {

/// Additive bias applied to disallowed scores before the softmax.
inline constexpr double kMaskedScore = -1e9;

/// Step size of the toy update z <- z - eta * prediction.
inline constexpr double kDenoiseStep = 0.1;

/// Query/key/value projections, each D x D.
struct Projections {
    Matrix query;
    Matrix key;
    Matrix value;
};

/// Gaussian projections with variance 1/D drawn from `seed`.
Projections make_projections(std::size_t dim, std::uint64_t seed);

/// N x D state with standard normal entries drawn from `seed`.
Matrix seeded_state(std::size_t rows, std::size_t dim, std::uint64_t seed);

/// Single-head scaled dot-product attention restricted to the mask.
/// Exec::serial is the dense reference (every column scored, disallowed
/// ones biased by kMaskedScore then zeroed); Exec::parallel scores only the
/// allowed intervals.
Matrix masked_attention(const Matrix &state, const AttentionMask &mask, const Projections &proj,
                        Exec exec = Exec::parallel);
Matrix masked_attention(const Matrix &state, const AttentionMask &mask, std::uint64_t seed,
                        Exec exec = Exec::parallel);

/// `layers` masked attention layers, layer l seeded with seed + l.
Matrix stacked_attention(const Matrix &state, const AttentionMask &mask, std::uint64_t seed, std::size_t layers);

/// Dense softmax weights of one row (length N, exact zeros where disallowed).
std::vector<double> attention_weights(const Matrix &state, const AttentionMask &mask, std::uint64_t seed,
                                      std::size_t row);

/// Predicted update for the video rows given the full state and step.
using Predictor = std::function<Matrix(const Matrix &state, std::size_t step)>;

/// Seeded random-projection stand-in for the denoising network: one masked
/// attention layer followed by a seeded output projection.
class StubPredictor {
public:
    StubPredictor(const AttentionMask &mask, std::uint64_t seed, std::size_t dim);

    Matrix operator()(const Matrix &state, std::size_t step) const;

private:
    const AttentionMask *mask_;
    std::uint64_t seed_;
    Projections projections_;
    Matrix output_;
};

/// Runs `steps` updates of the video rows [L, N), each followed by the
/// propagation plan. With no predictor, a StubPredictor seeded from `seed`
/// is used.
Matrix toy_denoise(const Matrix &initial, const AttentionMask &mask, const PropagationPlan &plan, std::size_t steps,
                   std::uint64_t seed, const Predictor &predictor = {});

/// Max |delta| over `probe`'s video output rows after shifting `perturbed`'s
/// text rows by epsilon, through `layers` stacked attention layers.
double leakage_probe(const SceneSpec &spec, const LayoutTimeline &timeline, const TokenLayout &layout,
                     const AttentionMask &mask, std::string_view perturbed, std::string_view probe, double epsilon,
                     std::uint64_t seed, std::size_t layers = 1);

/// Sequence indices of the video tokens covered by an entity in any frame.
std::vector<std::size_t> entity_video_rows(const LayoutTimeline &timeline, const TokenLayout &layout,
                                           std::size_t entity);

/// Mean attention weight from the text rows in `text_span` onto each cell of
/// `frame`, as an H x W matrix.
Matrix attention_heatmap(const Matrix &state, const AttentionMask &mask, const TokenLayout &layout, TextSpan text_span,
                         std::size_t frame, std::uint64_t seed);

/// Nodes reachable from `from` along at most `k` allowed edges (i reads j).
std::vector<std::uint8_t> reachable_within(const AttentionMask &mask, std::size_t from, std::size_t k);

/// Mean over entities of the frame-to-frame variance of the entity's mean
/// feature vector.
double entity_frame_variance(const Matrix &state, const LayoutTimeline &timeline, const TokenLayout &layout);

} // namespace dyst
