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

#include <stdexcept>
#include <string>

namespace dyst {

/// Base of every error raised by the library. `kind()` is a stable
/// machine-readable tag used by the CLI's JSON diagnostics.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string &message, std::string path = {}) :
        std::runtime_error(path.empty() ? message : path + ": " + message),
        kind_(std::move(kind)),
        path_(std::move(path)) {}

    const std::string &kind() const noexcept { return kind_; }
    const std::string &path() const noexcept { return path_; }

private:
    std::string kind_;
    std::string path_;
};

#define DYST_DEFINE_ERROR(Name)                                                \
    class Name : public Error {                                                \
    public:                                                                    \
        explicit Name(const std::string &message, std::string path = {}) :     \
            Error(#Name, message, std::move(path)) {}                          \
    }

// scene documents
DYST_DEFINE_ERROR(SyntaxError);
DYST_DEFINE_ERROR(SchemaError);
DYST_DEFINE_ERROR(InvariantError);

// planner
DYST_DEFINE_ERROR(EmptyPrompt);
DYST_DEFINE_ERROR(NetworkError);
DYST_DEFINE_ERROR(TimeoutError);

// compilation and numerics
DYST_DEFINE_ERROR(LayoutMismatch);
DYST_DEFINE_ERROR(IndexOutOfRange);
DYST_DEFINE_ERROR(FormatError);
DYST_DEFINE_ERROR(ShapeMismatch);
DYST_DEFINE_ERROR(UnknownEntity);

#undef DYST_DEFINE_ERROR

/// Non-2xx reply from the planner service.
class ServiceError : public Error {
public:
    ServiceError(int status, std::string body) :
        Error("ServiceError", "planner service returned HTTP " + std::to_string(status)),
        status_(status),
        body_(std::move(body)) {}

    int status() const noexcept { return status_; }
    const std::string &body() const noexcept { return body_; }

private:
    int status_;
    std::string body_;
};

} // namespace dyst
