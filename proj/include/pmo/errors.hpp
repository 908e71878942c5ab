// Copyright 2026 The pmostore Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef PMO_ERRORS_HPP_
#define PMO_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace pmo {

/// Base class for every error raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Access outside the device or a PMO boundary.
class RangeError final : public Error {
 public:
  using Error::Error;
};

/// Operation violates a model or layout constraint (overlap with an
/// uncached range, double free, torn update, ...).
class DomainError final : public Error {
 public:
  using Error::Error;
};

/// Device cannot hold the requested system layout.
class FormatError final : public Error {
 public:
  using Error::Error;
};

/// Device magic does not match; the image was never formatted.
class NotFormattedError final : public Error {
 public:
  using Error::Error;
};

class AlreadyExistsError final : public Error {
 public:
  using Error::Error;
};

class OutOfSpaceError final : public Error {
 public:
  using Error::Error;
};

class PermissionError final : public Error {
 public:
  using Error::Error;
};

/// Attach/destroy conflicts with a live attachment.
class BusyError final : public Error {
 public:
  using Error::Error;
};

class NotFoundError final : public Error {
 public:
  using Error::Error;
};

/// Caller broke a contract the interface leaves undefined (double detach,
/// psync of a detached handle, writes racing a psync). Raised only from
/// checked paths.
class UndefinedBehaviorError final : public Error {
 public:
  using Error::Error;
};

class ConfigError final : public Error {
 public:
  using Error::Error;
};

}  // namespace pmo

#endif  // PMO_ERRORS_HPP_
