#pragma once

#include <stdexcept>
#include <string>

namespace thnse {

/// Invalid user input: bad mesh parameters, inadmissible theta, malformed config.
class ConfigError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Failure of the nonlinear or linear solve inside a time step.
class SolverError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Unreadable or inconsistent snapshot/CSV file.
class IoError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

} // namespace thnse
