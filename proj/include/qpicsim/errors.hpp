// Copyright 2026 The qpicsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace qpicsim {

/// Thrown when an argument violates an operation's preconditions.
struct invalid_input : std::invalid_argument {
    explicit invalid_input(const std::string &msg) : std::invalid_argument(msg) {}
};

/// Thrown when a configuration document is malformed or inconsistent.
struct invalid_config : std::runtime_error {
    explicit invalid_config(const std::string &msg) : std::runtime_error(msg) {}
};

/// Thrown when an iterative fit fails to converge within its iteration budget.
struct fit_failure : std::runtime_error {
    explicit fit_failure(const std::string &msg) : std::runtime_error(msg) {}
};

/// Thrown when an estimator's normalization is undefined (e.g. empty side peaks).
struct estimation_error : std::runtime_error {
    explicit estimation_error(const std::string &msg) : std::runtime_error(msg) {}
};

}  // namespace qpicsim
