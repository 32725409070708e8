#ifndef PPGI_CORE_HPP
#define PPGI_CORE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace ppgi {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

///
/// \brief Error categories. The CLI maps these onto stable exit codes.
///
enum class ErrorCode {
    InvalidArgument,
    Io,
    Format,
    Dimension,
    InsufficientData,
    EmptyMask,
    Degenerate,
    NonConvergence,
    CutLocus
};

inline const char* to_string(ErrorCode c)
{
    switch (c) {
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::Io: return "io";
    case ErrorCode::Format: return "format";
    case ErrorCode::Dimension: return "dimension";
    case ErrorCode::InsufficientData: return "insufficient data";
    case ErrorCode::EmptyMask: return "empty mask";
    case ErrorCode::Degenerate: return "degenerate";
    case ErrorCode::NonConvergence: return "non-convergence";
    case ErrorCode::CutLocus: return "cut locus";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

///
/// \brief A point on the unit sphere S^2. Construction enforces ||v|| = 1.
///
class UnitVec3 {
public:
    UnitVec3() : v_(0.0, 0.0, 1.0) {}

    /// Normalizes any non-zero vector.
    static UnitVec3 normalize(const Vec3& v)
    {
        const double n = v.norm();
        if (!(n > 0.0) || !std::isfinite(n))
            throw Error(ErrorCode::InvalidArgument, "cannot normalize a zero or non-finite vector");
        UnitVec3 u;
        u.v_ = v / n;
        return u;
    }

    /// Wraps a vector that is already unit length within tol.
    static UnitVec3 from_unit(const Vec3& v, double tol = 1e-9)
    {
        if (std::abs(v.norm() - 1.0) > tol)
            throw Error(ErrorCode::InvalidArgument, "vector is not unit length");
        UnitVec3 u;
        u.v_ = v;
        return u;
    }

    UnitVec3(double x, double y, double z) : UnitVec3(normalize(Vec3(x, y, z))) {}

    const Vec3& vec() const noexcept { return v_; }
    operator const Vec3&() const noexcept { return v_; }

    double x() const noexcept { return v_.x(); }
    double y() const noexcept { return v_.y(); }
    double z() const noexcept { return v_.z(); }

    double dot(const UnitVec3& o) const noexcept { return v_.dot(o.v_); }

    UnitVec3 operator-() const
    {
        UnitVec3 u;
        u.v_ = -v_;
        return u;
    }

private:
    Vec3 v_;
};

/// Flips v so that its largest-magnitude entry is positive (first index wins ties).
template <typename Derived>
void canonical_sign(Eigen::MatrixBase<Derived>& v)
{
    Eigen::Index imax = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i)
        if (std::abs(v(i)) > std::abs(v(imax)))
            imax = i;
    if (v(imax) < 0.0)
        v = -v;
}

inline constexpr double pi = 3.14159265358979323846;

} // namespace ppgi

#endif // PPGI_CORE_HPP
