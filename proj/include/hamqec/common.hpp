#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <tuple>

namespace hamqec {

using cplx = std::complex<double>;
using MatC = Eigen::MatrixXcd;
using MatR = Eigen::MatrixXd;
using VecC = Eigen::VectorXcd;
using VecR = Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// exit-code families used by the CLI
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct PhysicsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct LabelingError : PhysicsError {
    using PhysicsError::PhysicsError;
};
struct LeakageError : PhysicsError {
    using PhysicsError::PhysicsError;
};
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConvergenceError : NumericalError {
    using NumericalError::NumericalError;
};
struct StabilityError : NumericalError {
    using NumericalError::NumericalError;
};

struct Coord {
    int row = 0;
    int col = 0;
    friend bool operator==(const Coord &, const Coord &) = default;
    friend auto operator<=>(const Coord &a, const Coord &b) {
        return std::tie(a.row, a.col) <=> std::tie(b.row, b.col);
    }
};

inline std::string coord_name(const Coord &c) {
    return "Q" + std::to_string(c.row) + std::to_string(c.col);
}

inline bool lattice_neighbors(const Coord &a, const Coord &b) {
    return std::abs(a.row - b.row) + std::abs(a.col - b.col) == 1;
}

inline int popcount(uint64_t x) { return __builtin_popcountll(x); }

}  // namespace hamqec
