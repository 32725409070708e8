#ifndef PPGI_MANIFOLD_HPP
#define PPGI_MANIFOLD_HPP

#include "core.hpp"
#include "log.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>

namespace ppgi {

///
/// \brief Geometry of the unit sphere S^2 and directional statistics.
///
namespace manifold {

/// Polar angle theta in [0, pi], azimuth phi in (-pi, pi].
struct SphericalCoord {
    double theta = 0.0;
    double phi = 0.0;
};

struct VmfParams {
    UnitVec3 mu;
    double kappa = 0.0;
};

/// Geodesic (great-circle) distance in [0, pi].
///
/// Evaluated as atan2(|a x b|, a.b), which equals arccos of the clamped dot
/// product but keeps full precision near 0 and pi.
inline double geodesic_dist(const UnitVec3& a, const UnitVec3& b)
{
    return std::atan2(a.vec().cross(b.vec()).norm(), a.dot(b));
}

/// Riemannian log map: the tangent vector at base pointing to p with length
/// equal to the geodesic distance. Throws CutLocus for antipodal input.
inline Vec3 sphere_log(const UnitVec3& base, const UnitVec3& p)
{
    const Vec3& b = base.vec();
    const double c = b.dot(p.vec());
    Vec3 perp = p.vec() - c * b;
    const double s = perp.norm();
    const double d = std::atan2(s, c);
    if (d == 0.0 || s == 0.0) {
        if (c < 0.0)
            throw Error(ErrorCode::CutLocus, "sphere_log: antipodal points have no unique geodesic");
        return Vec3::Zero();
    }
    if (pi - d < 1e-12)
        throw Error(ErrorCode::CutLocus, "sphere_log: antipodal points have no unique geodesic");
    return perp * (d / s);
}

/// Riemannian exp map. The tangent must be orthogonal to base within 1e-9.
inline UnitVec3 sphere_exp(const UnitVec3& base, const Vec3& tangent)
{
    const double along = base.vec().dot(tangent);
    if (std::abs(along) > 1e-9)
        throw Error(ErrorCode::InvalidArgument, "sphere_exp: tangent is not orthogonal to base");
    const double n = tangent.norm();
    if (n == 0.0)
        return base;
    return UnitVec3::normalize(std::cos(n) * base.vec() + std::sin(n) * (tangent / n));
}

struct KarcherResult {
    UnitVec3 mean;
    double grad_norm = 0.0;
    int iterations = 0;
    /// False when the points were not all inside an open hemisphere; the
    /// mean is then a best-effort local minimizer.
    bool hemisphere_ok = true;
};

/// Gradient of F(x) = (1/m) sum d^2(x, x_i) at x, returned as (2/m) sum log_x x_i
/// (the descent direction; the Euclidean gradient is its negative).
/// With skip_cut_locus, points antipodal to x contribute nothing instead of
/// throwing.
inline Vec3 karcher_gradient(const UnitVec3& x, std::span<const UnitVec3> points, bool skip_cut_locus = false)
{
    Vec3 g = Vec3::Zero();
    for (const auto& p : points) {
        if (skip_cut_locus && pi - geodesic_dist(x, p) < 1e-12)
            continue;
        g += sphere_log(x, p);
    }
    return g * (2.0 / static_cast<double>(points.size()));
}

/// Objective F(x) = (1/m) sum d^2(x, x_i).
inline double karcher_objective(const UnitVec3& x, std::span<const UnitVec3> points)
{
    double f = 0.0;
    for (const auto& p : points) {
        const double d = geodesic_dist(x, p);
        f += d * d;
    }
    return f / static_cast<double>(points.size());
}

///
/// \brief Riemannian center of mass on S^2 by fixed-step gradient descent.
///
/// Starts at the normalized Euclidean mean and iterates
/// mu <- exp_mu(mean_i log_mu x_i) until ||(2/m) sum log_mu x_i|| < tol.
///
inline KarcherResult karcher_mean(std::span<const UnitVec3> points, double tol = 1e-10, int max_iter = 100)
{
    if (points.empty())
        throw Error(ErrorCode::InvalidArgument, "karcher_mean: no points");

    Vec3 sum = Vec3::Zero();
    for (const auto& p : points)
        sum += p.vec();

    KarcherResult res;
    if (sum.norm() < 1e-12) {
        res.hemisphere_ok = false;
        sum = points.front().vec();
    }
    res.mean = UnitVec3::normalize(sum);
    for (const auto& p : points) {
        if (p.dot(res.mean) <= 0.0) {
            res.hemisphere_ok = false;
            break;
        }
    }
    if (!res.hemisphere_ok)
        log().warn("karcher_mean: points not contained in an open hemisphere, result may not be unique");

    for (int it = 0; it <= max_iter; ++it) {
        const Vec3 grad = karcher_gradient(res.mean, points, !res.hemisphere_ok);
        res.grad_norm = grad.norm();
        res.iterations = it;
        if (res.grad_norm < tol)
            return res;
        if (it == max_iter)
            break;
        // unit step along the mean of the logs
        Vec3 step = 0.5 * grad;
        step -= step.dot(res.mean.vec()) * res.mean.vec();
        res.mean = sphere_exp(res.mean, step);
    }
    throw Error(ErrorCode::NonConvergence,
                "karcher_mean: no convergence after " + std::to_string(max_iter) +
                    " iterations, gradient norm " + std::to_string(res.grad_norm));
}

inline SphericalCoord to_spherical(const UnitVec3& v)
{
    SphericalCoord s;
    s.theta = std::acos(std::clamp(v.z(), -1.0, 1.0));
    if (v.x() == 0.0 && v.y() == 0.0)
        s.phi = 0.0;
    else
        s.phi = std::atan2(v.y(), v.x());
    if (s.phi == -pi)
        s.phi = pi;
    return s;
}

inline UnitVec3 from_spherical(const SphericalCoord& s)
{
    return UnitVec3::normalize(Vec3(std::sin(s.theta) * std::cos(s.phi),
                                    std::sin(s.theta) * std::sin(s.phi),
                                    std::cos(s.theta)));
}

/// log c_3(kappa) for the vMF density on S^2, c_3 = kappa / (4 pi sinh kappa).
inline double vmf_log_normalizer(double kappa)
{
    if (!(kappa >= 0.0) || !std::isfinite(kappa))
        throw Error(ErrorCode::InvalidArgument, "vmf: kappa must be finite and >= 0");
    if (kappa == 0.0)
        return -std::log(4.0 * pi);
    if (kappa < 1e-6) // sinh(k)/k = 1 + k^2/6 + ...
        return -std::log(4.0 * pi) - std::log1p(kappa * kappa / 6.0);
    if (kappa > 700.0) // log sinh k = k + log(1 - e^{-2k}) - log 2
        return std::log(kappa) - std::log(4.0 * pi) - (kappa + std::log1p(-std::exp(-2.0 * kappa)) - std::log(2.0));
    return std::log(kappa / (4.0 * pi * std::sinh(kappa)));
}

inline double vmf_normalizer(double kappa)
{
    if (kappa > 0.0 && kappa <= 700.0 && kappa >= 1e-6)
        return kappa / (4.0 * pi * std::sinh(kappa));
    return std::exp(vmf_log_normalizer(kappa));
}

inline double vmf_pdf(const UnitVec3& x, const VmfParams& params)
{
    if (params.kappa > 700.0)
        return std::exp(vmf_log_normalizer(params.kappa) + params.kappa * params.mu.dot(x));
    return vmf_normalizer(params.kappa) * std::exp(params.kappa * params.mu.dot(x));
}

struct VmfFit {
    VmfParams params;
    /// Mean resultant length R-bar in [0, 1].
    double mean_resultant = 0.0;
    /// kappa comes from the closed-form approximation R(3 - R^2)/(1 - R^2).
    bool approximate = true;
};

inline VmfFit vmf_fit(std::span<const UnitVec3> points)
{
    if (points.size() < 2)
        throw Error(ErrorCode::InsufficientData, "vmf_fit: need at least 2 points");
    Vec3 sum = Vec3::Zero();
    for (const auto& p : points)
        sum += p.vec();
    const double n = static_cast<double>(points.size());
    VmfFit fit;
    fit.mean_resultant = std::min(1.0, sum.norm() / n);
    const double r = fit.mean_resultant;
    if (r < 1e-12) {
        fit.params.mu = UnitVec3();
        fit.params.kappa = 0.0;
        return fit;
    }
    fit.params.mu = UnitVec3::normalize(sum);
    if (1.0 - r < 1e-15) {
        fit.params.kappa = std::numeric_limits<double>::infinity();
        return fit;
    }
    fit.params.kappa = r * (3.0 - r * r) / (1.0 - r * r);
    return fit;
}

} // namespace manifold
} // namespace ppgi

#endif // PPGI_MANIFOLD_HPP
