#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace osre {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

using TokenId = std::int32_t;

/// Label used for instances that express none of the known relations.
inline const std::string kNotaLabel = "NOTA";

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file or record.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Well-formed record that breaks a data invariant (span bounds, overlap).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Invalid or contradictory configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Sequence longer than the encoder's position table.
class LengthError : public Error {
 public:
  using Error::Error;
};

}  // namespace osre
