#pragma once

#include <stdexcept>
#include <string>

namespace introspect {

// Thrown when input data (bundle, dataset, report, CLI argument values)
// violates a documented invariant. Maps to CLI exit code 2.
class validation_error : public std::runtime_error {
public:
    explicit validation_error(const std::string & what) : std::runtime_error(what) {}
};

// Thrown for environment failures (I/O, missing files). Maps to CLI exit code 3.
class io_error : public std::runtime_error {
public:
    explicit io_error(const std::string & what) : std::runtime_error(what) {}
};

} // namespace introspect
