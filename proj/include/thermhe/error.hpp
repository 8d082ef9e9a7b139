#pragma once

#include <stdexcept>
#include <string>

namespace thermhe {

// Base class for all failures raised by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : Error {
  using Error::Error;
};

struct SchemaError : Error {
  using Error::Error;
};

// Plant integration left the physically plausible envelope.
struct PlantDiverged : Error {
  using Error::Error;
};

// Loss or gradient became non-finite during optimization.
struct TrainingDiverged : Error {
  using Error::Error;
};

struct QpError : Error {
  using Error::Error;
};

struct SolverError : Error {
  using Error::Error;
};

}  // namespace thermhe
