#pragma once

#include <initializer_list>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace pedcascade {

// Precondition violations use std::invalid_argument / std::out_of_range.

/// Malformed or inconsistent input data (files, annotations, models).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure such as a diverging training run.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws DataError when `j` is not an object or has a key outside `allowed`.
void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& what);

}  // namespace pedcascade
