#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace splatsim {

inline constexpr const char* kToolVersion = "0.1.0";

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec3i = Eigen::Vector3i;
using Mat3 = Eigen::Matrix3d;

/// Error raised by file parsers; carries a human-readable location/context.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// Error raised when an operation's preconditions or contracts are violated.
class ContractError : public std::runtime_error {
public:
    explicit ContractError(const std::string& what) : std::runtime_error(what) {}
};

/// Error raised on I/O or network failure outside the parsers.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

inline Mat3 symmetrize(const Mat3& a) { return 0.5 * (a + a.transpose()); }

} // namespace splatsim
