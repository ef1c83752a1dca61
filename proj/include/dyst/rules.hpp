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
#include "dyst/mask.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace dyst {

/// Evaluates the attention rules for one pair straight from the timeline and
/// the token layout, without a class table or interval storage. Used to
/// certify compiled masks.
class RuleEvaluator {
public:
    RuleEvaluator(const LayoutTimeline &timeline, const TokenLayout &layout, const MaskPolicy &policy);

    std::size_t size() const { return n_; }
    bool allowed(std::size_t i, std::size_t j) const;

private:
    bool is_text(std::size_t i) const { return i < text_len_; }

    std::size_t text_len_;
    std::size_t n_;
    MaskPolicy policy_;
    /// per text token: owning entity or -1 (global)
    std::vector<long> owner_;
    /// per video token: entities whose interaction class covers the token
    std::vector<std::vector<std::size_t>> region_;
};

/// First pair where the mask and the rules disagree, scanning all N^2 pairs.
std::optional<std::pair<std::size_t, std::size_t>> first_rule_mismatch(const AttentionMask &mask,
                                                                       const RuleEvaluator &rules);

} // namespace dyst
