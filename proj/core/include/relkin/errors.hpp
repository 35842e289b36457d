#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace relkin {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Coincident nodes or zero ranges where a derivative or Jacobian needs r > 0.
class DegenerateGeometryError : public Error {
 public:
  explicit DegenerateGeometryError(const std::string& what,
                                   std::optional<std::pair<int, int>> pair = std::nullopt)
      : Error(what), pair_(pair) {}

  const std::optional<std::pair<int, int>>& pair() const noexcept { return pair_; }

 private:
  std::optional<std::pair<int, int>> pair_;
};

/// Least-squares system without full column rank.
class RankError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Spectral embedding has nothing to embed (no nonnegative spectrum).
class EmbeddingError : public Error {
 public:
  using Error::Error;
};

class IllPosedRotationError : public Error {
 public:
  using Error::Error;
};

/// Correlated (broadcast) noise structures are not modelled.
class UnsupportedCovarianceError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace relkin
