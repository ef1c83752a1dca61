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

#include <iosfwd>
#include <string>
#include <vector>

namespace dyst::cli {

inline constexpr const char *kToolVersion = "0.1.0";

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kPlanner = 2,
    kNetwork = 3,
    kVerification = 4,
};

/// Entry point shared by the executable and the tests. `args` excludes argv[0].
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

/// Lowercase hex SHA-256 of `bytes`.
std::string sha256_hex(const std::string &bytes);

} // namespace dyst::cli
