// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace tagan {

/// Base class for all errors thrown by this library.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Tensor shapes do not satisfy an operation's preconditions.
class DimensionError : public Error {
public:
  explicit DimensionError(const std::string& what) : Error(what) {}
};

/// An API contract was violated (bad index, bad argument, misuse).
class ContractError : public Error {
public:
  explicit ContractError(const std::string& what) : Error(what) {}
};

/// A non-finite value was produced where finite math is required.
class NumericError : public Error {
public:
  explicit NumericError(const std::string& what) : Error(what) {}
};

/// A token cannot be resolved against a vocabulary.
class VocabularyError : public Error {
public:
  explicit VocabularyError(const std::string& what) : Error(what) {}
};

/// File or stream I/O failed; the message names the path.
class IoError : public Error {
public:
  explicit IoError(const std::string& what) : Error(what) {}
};

/// A configuration file could not be parsed or validated.
class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

}  // namespace tagan
