#pragma once

#include <stdexcept>
#include <string>

namespace asgdro {

// Inconsistent dimensions between a model, its parameters and a batch.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A loss, logit or gradient left the finite range (exploding parameters).
class NonFiniteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// No ascent direction: the (normalized) gradient norm is below threshold.
class ZeroGradient : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A dataset split is missing a group that an operation needs.
class EmptyGroupError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A dataset spec that cannot populate every declared group.
class InfeasibleSpec : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent experiment configuration.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace asgdro
