#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace nsmpb {

/// 3-component vector in Angstrom coordinates.
struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    constexpr Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    constexpr double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    constexpr Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
    constexpr double norm2() const { return dot(*this); }
    bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed input text (PQR, TetGen files, config).
struct ParseError : Error {
    using Error::Error;
};

/// Structurally invalid mesh or mesh-file contents.
struct MeshError : Error {
    using Error::Error;
};

/// Kernel evaluation requested within the singular guard of an atom.
struct SingularityError : Error {
    using Error::Error;
};

/// Linear or nonlinear solve failure.
struct SolverError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

/// Shortest round-trippable decimal form of a double (17 significant digits).
inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace nsmpb
