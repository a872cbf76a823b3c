#pragma once

#include <stdexcept>
#include <string>

namespace flaprl {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration value or violated config invariant.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Tensor, frame or layer shapes that do not line up.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Non-finite values, or probabilities outside their open interval.
class NumericError : public Error {
public:
    using Error::Error;
};

/// step() called on an episode that has already terminated.
class EpisodeFinishedError : public Error {
public:
    using Error::Error;
};

/// Replay buffer holds fewer entries than requested.
class UnderfullBufferError : public Error {
public:
    using Error::Error;
};

/// Cache does not belong to the network it is replayed against.
class ConsistencyError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class CheckpointError : public Error {
public:
    enum class Kind { bad_magic, bad_version, truncated, malformed };

    CheckpointError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

}  // namespace flaprl
