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

#include "dyst/harness.hpp"

#include "dyst/error.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>

namespace dyst {

namespace {

Matrix gaussian(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64 &rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    Matrix m(rows, cols);
    for (auto &x : m.data) {
        x = dist(rng);
    }
    return m;
}

// out = in * w for row-major in (N x D) and w (D x D).
Matrix project(const Matrix &in, const Matrix &w) {
    Matrix out(in.rows, w.cols);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(in.rows); ++ii) {
        auto i = static_cast<std::size_t>(ii);
        for (std::size_t k = 0; k < in.cols; ++k) {
            double a = in(i, k);
            for (std::size_t j = 0; j < w.cols; ++j) {
                out(i, j) += a * w(k, j);
            }
        }
    }
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        s += a[k] * b[k];
    }
    return s;
}

void check_shapes(const Matrix &state, const AttentionMask &mask, const Projections &proj) {
    if (state.rows != mask.size()) {
        throw ShapeMismatch("state has " + std::to_string(state.rows) + " rows, mask covers " +
                            std::to_string(mask.size()));
    }
    for (const Matrix *w : {&proj.query, &proj.key, &proj.value}) {
        if (w->rows != state.cols || w->cols != state.cols) {
            throw ShapeMismatch("projection must be " + std::to_string(state.cols) + "x" + std::to_string(state.cols));
        }
    }
}

// Dense reference row: every column scored, disallowed columns biased then zeroed.
void dense_row(const Matrix &q, const Matrix &k, const AttentionMask &mask, double scale, std::size_t i,
               std::vector<double> &weights) {
    const std::size_t n = k.rows;
    weights.assign(n, 0.0);
    double max_score = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
        double s = dot(q.row(i), k.row(j)) * scale + (mask.query(i, j) ? 0.0 : kMaskedScore);
        weights[j] = s;
        max_score = std::max(max_score, s);
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        weights[j] = std::exp(weights[j] - max_score);
        sum += weights[j];
    }
    for (std::size_t j = 0; j < n; ++j) {
        weights[j] /= sum;
    }
    for (std::size_t j = 0; j < n; ++j) {
        if (!mask.query(i, j)) weights[j] = 0.0;
    }
}

} // namespace

Projections make_projections(std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    double stddev = 1.0 / std::sqrt(static_cast<double>(dim));
    Projections p;
    p.query = gaussian(dim, dim, stddev, rng);
    p.key = gaussian(dim, dim, stddev, rng);
    p.value = gaussian(dim, dim, stddev, rng);
    return p;
}

Matrix seeded_state(std::size_t rows, std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return gaussian(rows, dim, 1.0, rng);
}

Matrix masked_attention(const Matrix &state, const AttentionMask &mask, const Projections &proj, Exec exec) {
    check_shapes(state, mask, proj);
    const std::size_t n = state.rows;
    const std::size_t dim = state.cols;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
    Matrix q = project(state, proj.query);
    Matrix k = project(state, proj.key);
    Matrix v = project(state, proj.value);
    Matrix out(n, dim);

    if (exec == Exec::serial) {
        std::vector<double> weights;
        for (std::size_t i = 0; i < n; ++i) {
            dense_row(q, k, mask, scale, i, weights);
            for (std::size_t j = 0; j < n; ++j) {
                for (std::size_t d = 0; d < dim; ++d) {
                    out(i, d) += weights[j] * v(j, d);
                }
            }
        }
        return out;
    }

#pragma omp parallel
    {
        std::vector<double> scores;
#pragma omp for schedule(dynamic, 16)
        for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
            auto i = static_cast<std::size_t>(ii);
            auto row = mask.row(i);
            scores.clear();
            double max_score = -std::numeric_limits<double>::infinity();
            for (const auto &iv : row) {
                for (auto j = iv.begin; j < iv.end; ++j) {
                    double s = dot(q.row(i), k.row(j)) * scale;
                    scores.push_back(s);
                    max_score = std::max(max_score, s);
                }
            }
            double sum = 0.0;
            for (auto &s : scores) {
                s = std::exp(s - max_score);
                sum += s;
            }
            std::size_t idx = 0;
            for (const auto &iv : row) {
                for (auto j = iv.begin; j < iv.end; ++j, ++idx) {
                    double w = scores[idx] / sum;
                    for (std::size_t d = 0; d < dim; ++d) {
                        out(i, d) += w * v(j, d);
                    }
                }
            }
        }
    }
    return out;
}

Matrix masked_attention(const Matrix &state, const AttentionMask &mask, std::uint64_t seed, Exec exec) {
    return masked_attention(state, mask, make_projections(state.cols, seed), exec);
}

Matrix stacked_attention(const Matrix &state, const AttentionMask &mask, std::uint64_t seed, std::size_t layers) {
    Matrix x = state;
    for (std::size_t l = 0; l < layers; ++l) {
        x = masked_attention(x, mask, seed + l);
    }
    return x;
}

std::vector<double> attention_weights(const Matrix &state, const AttentionMask &mask, std::uint64_t seed,
                                      std::size_t row) {
    auto proj = make_projections(state.cols, seed);
    check_shapes(state, mask, proj);
    if (row >= state.rows) {
        throw IndexOutOfRange("row " + std::to_string(row) + " outside [0, " + std::to_string(state.rows) + ")");
    }
    Matrix q = project(state, proj.query);
    Matrix k = project(state, proj.key);
    std::vector<double> weights;
    dense_row(q, k, mask, 1.0 / std::sqrt(static_cast<double>(state.cols)), row, weights);
    return weights;
}

StubPredictor::StubPredictor(const AttentionMask &mask, std::uint64_t seed, std::size_t dim) :
    mask_(&mask),
    seed_(seed),
    projections_(make_projections(dim, seed)) {
    std::mt19937_64 rng(seed ^ 0x5eedULL);
    output_ = gaussian(dim, dim, 1.0 / std::sqrt(static_cast<double>(dim)), rng);
}

Matrix StubPredictor::operator()(const Matrix &state, std::size_t) const {
    return project(masked_attention(state, *mask_, projections_), output_);
}

Matrix toy_denoise(const Matrix &initial, const AttentionMask &mask, const PropagationPlan &plan, std::size_t steps,
                   std::uint64_t seed, const Predictor &predictor) {
    if (steps == 0) {
        throw IndexOutOfRange("toy_denoise needs at least one step");
    }
    const std::size_t video = plan.geometry.video_tokens();
    if (initial.rows != mask.size() || initial.rows < video) {
        throw ShapeMismatch("state rows disagree with the mask or the plan geometry");
    }
    const std::size_t text = initial.rows - video;
    Predictor predict = predictor;
    if (!predict) {
        predict = StubPredictor(mask, seed, initial.cols);
    }

    Matrix z = initial;
    for (std::size_t t = 0; t < steps; ++t) {
        Matrix pred = predict(z, t);
        if (pred.rows != z.rows || pred.cols != z.cols) {
            throw ShapeMismatch("predictor output shape differs from the state");
        }
        for (std::size_t i = text; i < z.rows; ++i) {
            for (std::size_t d = 0; d < z.cols; ++d) {
                z(i, d) -= kDenoiseStep * pred(i, d);
            }
        }
        apply_plan(z.rows_view(text, video), plan, t, steps);
    }
    return z;
}

std::vector<std::size_t> entity_video_rows(const LayoutTimeline &timeline, const TokenLayout &layout,
                                           std::size_t entity) {
    std::vector<std::size_t> rows;
    for (const auto &frame : timeline.frames) {
        for (auto c : frame.cells[entity].cells()) {
            rows.push_back(layout.video_index(frame.frame, c.row, c.col));
        }
    }
    return rows;
}

double leakage_probe(const SceneSpec &spec, const LayoutTimeline &timeline, const TokenLayout &layout,
                     const AttentionMask &mask, std::string_view perturbed, std::string_view probe, double epsilon,
                     std::uint64_t seed, std::size_t layers) {
    auto text_index = std::find(layout.entity_ids.begin(), layout.entity_ids.end(), perturbed);
    auto probe_entity = timeline.entity_index(probe);
    if (spec.find_entity(perturbed) == std::string::npos || text_index == layout.entity_ids.end()) {
        throw UnknownEntity("unknown entity \"" + std::string(perturbed) + "\"");
    }
    if (spec.find_entity(probe) == std::string::npos || probe_entity == std::string::npos) {
        throw UnknownEntity("unknown entity \"" + std::string(probe) + "\"");
    }
    if (mask.size() != layout.sequence_length()) {
        throw ShapeMismatch("mask does not match the token layout");
    }

    const std::size_t dim = spec.geometry.channels;
    Matrix base = seeded_state(mask.size(), dim, seed);
    Matrix shifted = base;
    const auto &span = layout.entity_spans[static_cast<std::size_t>(text_index - layout.entity_ids.begin())];
    for (std::size_t i = span.begin; i < span.end; ++i) {
        for (auto &x : shifted.row(i)) {
            x += epsilon;
        }
    }
    Matrix a = stacked_attention(base, mask, seed + 1, layers);
    Matrix b = stacked_attention(shifted, mask, seed + 1, layers);

    double deviation = 0.0;
    for (auto i : entity_video_rows(timeline, layout, probe_entity)) {
        for (std::size_t d = 0; d < dim; ++d) {
            deviation = std::max(deviation, std::abs(a(i, d) - b(i, d)));
        }
    }
    return deviation;
}

Matrix attention_heatmap(const Matrix &state, const AttentionMask &mask, const TokenLayout &layout, TextSpan text_span,
                         std::size_t frame, std::uint64_t seed) {
    const auto &g = layout.geometry;
    if (frame >= g.frames) {
        throw IndexOutOfRange("frame " + std::to_string(frame) + " outside [0, " + std::to_string(g.frames) + ")");
    }
    if (text_span.end > layout.text_len || text_span.begin >= text_span.end) {
        throw IndexOutOfRange("text span must be a non-empty range within [0, " + std::to_string(layout.text_len) + ")");
    }
    Matrix heat(g.height, g.width);
    for (std::size_t i = text_span.begin; i < text_span.end; ++i) {
        auto weights = attention_weights(state, mask, seed, i);
        for (std::size_t r = 0; r < g.height; ++r) {
            for (std::size_t c = 0; c < g.width; ++c) {
                heat(r, c) += weights[layout.video_index(frame, r, c)];
            }
        }
    }
    for (auto &x : heat.data) {
        x /= static_cast<double>(text_span.size());
    }
    return heat;
}

std::vector<std::uint8_t> reachable_within(const AttentionMask &mask, std::size_t from, std::size_t k) {
    std::vector<std::uint8_t> seen(mask.size(), 0);
    std::vector<std::size_t> frontier{from};
    seen.at(from) = 1;
    for (std::size_t step = 0; step < k && !frontier.empty(); ++step) {
        std::vector<std::size_t> next;
        for (auto i : frontier) {
            for (const auto &iv : mask.row(i)) {
                for (auto j = iv.begin; j < iv.end; ++j) {
                    if (!seen[j]) {
                        seen[j] = 1;
                        next.push_back(j);
                    }
                }
            }
        }
        frontier = std::move(next);
    }
    return seen;
}

double entity_frame_variance(const Matrix &state, const LayoutTimeline &timeline, const TokenLayout &layout) {
    const std::size_t entities = timeline.entity_ids.size();
    const std::size_t frames = timeline.frames.size();
    const std::size_t dim = state.cols;
    if (entities == 0 || frames == 0) {
        return 0.0;
    }
    double total = 0.0;
    for (std::size_t e = 0; e < entities; ++e) {
        std::vector<std::vector<double>> means(frames, std::vector<double>(dim, 0.0));
        for (const auto &frame : timeline.frames) {
            auto cells = frame.cells[e].cells();
            for (auto c : cells) {
                auto row = state.row(layout.video_index(frame.frame, c.row, c.col));
                for (std::size_t d = 0; d < dim; ++d) means[frame.frame][d] += row[d];
            }
            for (auto &x : means[frame.frame]) x /= static_cast<double>(cells.size());
        }
        std::vector<double> grand(dim, 0.0);
        for (const auto &m : means) {
            for (std::size_t d = 0; d < dim; ++d) grand[d] += m[d] / static_cast<double>(frames);
        }
        double var = 0.0;
        for (const auto &m : means) {
            for (std::size_t d = 0; d < dim; ++d) var += (m[d] - grand[d]) * (m[d] - grand[d]);
        }
        total += var / static_cast<double>(frames);
    }
    return total / static_cast<double>(entities);
}

} // namespace dyst
