// Copyright (c) The sdrf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace sdrf {

/// Raised for invalid run configuration (bad keys, missing files, out-of-range
/// settings). The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised for malformed on-disk artifacts (checkpoints, images, sidecars).
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace sdrf
