#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pcsim {

using Index = Eigen::Index;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Inconsistent vector/matrix sizes between collaborating objects.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Invalid graph: bad node index, self-loop, disconnected communication graph.
class TopologyError : public Error {
public:
    using Error::Error;
};

/// Invalid physical or controller parameter (non-positive R/L/C, non-PD gain, ...).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// A node voltage carrying a constant-power load fell below the guard threshold.
class CplGuardError : public Error {
public:
    CplGuardError(const std::string& what, Index node, double voltage, double time)
        : Error(what), node_(node), voltage_(voltage), time_(time) {}

    Index node() const noexcept { return node_; }
    double voltage() const noexcept { return voltage_; }
    double time() const noexcept { return time_; }

private:
    Index node_;
    double voltage_;
    double time_;
};

/// NaN/Inf during integration or an unusable numerical result.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Newton iteration or closed-loop simulation failed to converge.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// Configuration file or flag error, with file/line/field context in the message.
class ConfigError : public Error {
public:
    using Error::Error;
};

inline void require_size(const Vec& v, Index n, const char* what) {
    if (v.size() != n) {
        throw DimensionError(std::string(what) + ": expected length " + std::to_string(n) +
                             ", got " + std::to_string(v.size()));
    }
}

inline void require_shape(const Mat& m, Index rows, Index cols, const char* what) {
    if (m.rows() != rows || m.cols() != cols) {
        throw DimensionError(std::string(what) + ": expected " + std::to_string(rows) + "x" +
                             std::to_string(cols) + ", got " + std::to_string(m.rows()) + "x" +
                             std::to_string(m.cols()));
    }
}

}  // namespace pcsim
