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

#include "dyst/layout.hpp"
#include "dyst/matrix.hpp"

#include <string>
#include <vector>

namespace dyst {

/// Pixels per latent cell in rendered previews.
inline constexpr double kCellPixels = 32.0;

/// One SVG per frame: the latent grid, each entity's continuous box with a
/// stable color and id label, and shaded cells where entities overlap.
std::vector<std::string> render_frames(const LayoutTimeline &timeline);

/// All frames in one SVG, switched by discrete SMIL animation at 8 fps.
std::string render_animated(const LayoutTimeline &timeline);

/// Grayscale heatmap of an H x W grid, normalized to its maximum.
std::string render_heatmap(const Matrix &heat, const std::string &title);

} // namespace dyst
