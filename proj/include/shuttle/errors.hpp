#pragma once

#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Core>

namespace shuttle {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A field point or parameter is outside the domain of a model function.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Input data failed structural validation (geometry, config, file contents).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A root/minimum search could not establish a unique result.
class NullSearchError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  SolverError(const std::string& what, Eigen::VectorXd best, double residual)
      : Error(what), best_(std::move(best)), residual_(residual) {}

  const Eigen::VectorXd& best_iterate() const { return best_; }
  double residual() const { return residual_; }

 private:
  Eigen::VectorXd best_;
  double residual_;
};

class EncodeError : public Error {
 public:
  EncodeError(const std::string& what, std::size_t pattern_words, std::size_t chunk_entries)
      : Error(what), pattern_words_(pattern_words), chunk_entries_(chunk_entries) {}

  std::size_t required_pattern_words() const { return pattern_words_; }
  std::size_t required_chunk_entries() const { return chunk_entries_; }

 private:
  std::size_t pattern_words_;
  std::size_t chunk_entries_;
};

class FitError : public Error {
 public:
  using Error::Error;
};

}  // namespace shuttle
