#pragma once

#include <stdexcept>
#include <string>

namespace kgr {

// Matrix/tensor dimensions do not line up.
class ShapeError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Malformed input: bad file contents, ids out of range, invalid config.
class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Training produced a NaN or infinite loss component.
class NonFiniteError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// A metric is undefined for the given inputs (e.g. AUC without negatives).
class MetricError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// A model artifact failed to load (version, checksum, truncation, shapes).
class ArtifactError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace kgr
