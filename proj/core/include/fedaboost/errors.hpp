#pragma once

#include <stdexcept>
#include <string>

namespace fedaboost {

// Base for every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArchitecture : public Error {
 public:
  using Error::Error;
};

// Dimension mismatch between a model, a batch, or a cache.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf input or output, or a mathematically undefined request.
class NumericError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent dataset files.
class DataError : public Error {
 public:
  using Error::Error;
};

// Partition constraints could not be met within the retry budget.
class PartitionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace fedaboost
