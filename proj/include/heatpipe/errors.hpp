#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace heatpipe {

/// Argument outside the domain of a model relation (non-positive absolute
/// temperature, rho_l <= rho_v, NaN input, exhausted plug, ...).
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// The plug reached the end of its liquid column (x_p >= L_0).
class PlugExhaustedError : public DomainError {
public:
  using DomainError::DomainError;
};

/// Normal equations are singular; the linear inverse problem needs regularization.
class RankDeficientError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// An objective evaluation failed inside an optimizer. Carries the position
/// (in the caller's coordinates) at which it failed.
class EvaluationError : public std::runtime_error {
public:
  EvaluationError(const std::string& what, std::vector<double> position)
      : std::runtime_error(what), position_(std::move(position)) {}

  const std::vector<double>& position() const noexcept { return position_; }

private:
  std::vector<double> position_;
};

/// Invalid configuration or malformed input file.
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// An input file is missing or unreadable.
class InputFileError : public ConfigError {
public:
  InputFileError(std::string path, const std::string& what)
      : ConfigError(what + ": " + path), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

private:
  std::string path_;
};

} // namespace heatpipe
