#pragma once

#include <stdexcept>
#include <string>

namespace mcdp {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ShapeMismatch : public Error {
 public:
  explicit ShapeMismatch(const std::string& msg) : Error(msg) {}
};

class NonPositiveDepth : public Error {
 public:
  explicit NonPositiveDepth(const std::string& msg) : Error(msg) {}
};

class BehindCamera : public Error {
 public:
  explicit BehindCamera(const std::string& msg) : Error(msg) {}
};

class ZeroBases : public Error {
 public:
  explicit ZeroBases(const std::string& msg) : Error(msg) {}
};

class EmptyOverlap : public Error {
 public:
  explicit EmptyOverlap(const std::string& msg) : Error(msg) {}
};

class ZeroMedian : public Error {
 public:
  explicit ZeroMedian(const std::string& msg) : Error(msg) {}
};

class NonFiniteObjective : public Error {
 public:
  explicit NonFiniteObjective(const std::string& msg) : Error(msg) {}
};

class InvalidConfig : public Error {
 public:
  explicit InvalidConfig(const std::string& msg) : Error(msg) {}
};

class DegenerateSpec : public Error {
 public:
  explicit DegenerateSpec(const std::string& msg) : Error(msg) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& msg) : Error(msg) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& msg) : Error(msg) {}
};

class MissingFile : public Error {
 public:
  explicit MissingFile(const std::string& msg) : Error(msg) {}
};

}  // namespace mcdp
