// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace shelltrack {

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Input fails a precondition (bad config value, mismatched sizes, ...).
struct ValidationError : Error {
  using Error::Error;
};

/// Argument outside the operation's domain (frame index, chart point, ...).
struct DomainError : Error {
  using Error::Error;
};

/// Chart is locally degenerate: |a1 x a2| below threshold.
struct DegenerateChartError : Error {
  using Error::Error;
};

/// Evaluation produced a non-finite value where a finite one is required.
struct NonFiniteError : Error {
  using Error::Error;
};

/// Requested capability is outside the closed primitive set.
struct CapabilityError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace shelltrack
