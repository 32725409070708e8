#ifndef PPGI_FEATURES_HPP
#define PPGI_FEATURES_HPP

#include "core.hpp"
#include "csv.hpp"
#include "log.hpp"
#include "manifold.hpp"
#include "types.hpp"

#include <cmath>
#include <concepts>
#include <optional>
#include <string>
#include <vector>

namespace ppgi {
namespace features {

enum class SphereMethod { EuclidRenorm, Karcher };

inline SphereMethod parse_sphere_method(const std::string& s)
{
    if (s == "euclid_renorm" || s == "euclid")
        return SphereMethod::EuclidRenorm;
    if (s == "karcher")
        return SphereMethod::Karcher;
    throw Error(ErrorCode::InvalidArgument, "unknown pooling method '" + s + "'");
}

/// Pixels with norm below this are dropped before sphere pooling.
inline constexpr double black_cutoff = 1e-6;

/// Per-channel arithmetic mean; nullopt for an empty set.
inline std::optional<Vec3> pool_mean(const PixelSet& ps)
{
    if (ps.pixels.empty())
        return std::nullopt;
    Vec3 s = Vec3::Zero();
    for (const auto& p : ps.pixels)
        s += p;
    return s / static_cast<double>(ps.pixels.size());
}

/// Pixels projected onto the unit sphere, near-black ones dropped.
inline std::vector<UnitVec3> sphere_points(const PixelSet& ps)
{
    std::vector<UnitVec3> pts;
    pts.reserve(ps.pixels.size());
    std::size_t dropped = 0;
    for (const auto& p : ps.pixels) {
        const double n = p.norm();
        if (n < black_cutoff) {
            ++dropped;
            continue;
        }
        pts.push_back(UnitVec3::from_unit(p / n, 1e-12));
    }
    if (dropped > 0)
        log().debug("sphere pooling: dropped {} near-black pixels", dropped);
    return pts;
}

///
/// \brief Sphere-valued pooling of one frame.
///
/// EuclidRenorm is the normalized mean of p_i/||p_i||; Karcher is the
/// Riemannian center of mass of the same points. Both are invariant to any
/// positive per-pixel gain. Returns nullopt when no usable pixel remains.
///
inline std::optional<UnitVec3> pool_sphere(const PixelSet& ps, SphereMethod method = SphereMethod::EuclidRenorm)
{
    const auto pts = sphere_points(ps);
    if (pts.empty())
        return std::nullopt;
    if (method == SphereMethod::Karcher)
        return manifold::karcher_mean(pts).mean;
    Vec3 s = Vec3::Zero();
    for (const auto& u : pts)
        s += u.vec();
    if (s.norm() < 1e-12)
        return std::nullopt;
    return UnitVec3::normalize(s);
}

/// Replaces invalid entries by the previous valid value (leading invalid
/// entries take the first valid one). Throws EmptyMask if nothing is valid.
template <typename T>
void hold_last_value(std::vector<T>& samples, const std::vector<bool>& valid)
{
    std::size_t first = 0;
    while (first < valid.size() && !valid[first])
        ++first;
    if (first == valid.size())
        throw Error(ErrorCode::EmptyMask, "no frame produced a usable skin pixel set");
    for (std::size_t k = 0; k < first; ++k)
        samples[k] = samples[first];
    for (std::size_t k = first + 1; k < samples.size(); ++k)
        if (!valid[k])
            samples[k] = samples[k - 1];
}

/// Spherical angles per sample with phi unwrapped. At an exact pole phi is
/// carried over from the previous sample (0 for the first).
inline AngleTrace trace_to_angles(const SphereTrace& st)
{
    AngleTrace at;
    at.fs = st.fs;
    at.t0 = st.t0;
    at.theta.resize(st.size());
    at.phi.resize(st.size());
    double prev_raw = 0.0;
    for (std::size_t k = 0; k < st.size(); ++k) {
        const auto& v = st.samples[k];
        const auto sc = manifold::to_spherical(v);
        at.theta[k] = sc.theta;
        const bool pole = v.x() == 0.0 && v.y() == 0.0;
        const double raw = pole ? prev_raw : sc.phi;
        if (k == 0) {
            at.phi[k] = raw;
        } else {
            double d = raw - prev_raw;
            while (d > pi)
                d -= 2.0 * pi;
            while (d < -pi)
                d += 2.0 * pi;
            at.phi[k] = at.phi[k - 1] + d;
        }
        prev_raw = raw;
    }
    return at;
}

/// Largest singular value of the mean-centred n x 3 matrix of samples.
inline double centered_top_singular_value(const std::vector<Vec3>& samples)
{
    if (samples.empty())
        return 0.0;
    Vec3 m = Vec3::Zero();
    for (const auto& s : samples)
        m += s;
    m /= static_cast<double>(samples.size());
    Mat3 c = Mat3::Zero();
    for (const auto& s : samples)
        c += (s - m) * (s - m).transpose();
    Eigen::SelfAdjointEigenSolver<Mat3> es(c, Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, es.eigenvalues()(2)));
}

inline void write_sphere_csv(const std::string& path, const SphereTrace& st)
{
    auto out = csv::open_out(path);
    out << "t,x,y,z\n";
    for (std::size_t k = 0; k < st.size(); ++k) {
        const auto& v = st.samples[k];
        out << csv::fmt(st.t0 + static_cast<double>(k) / st.fs) << ',' << csv::fmt(v.x()) << ',' << csv::fmt(v.y())
            << ',' << csv::fmt(v.z()) << '\n';
    }
}

inline void write_angles_csv(const std::string& path, const AngleTrace& at)
{
    auto out = csv::open_out(path);
    out << "t,theta,phi\n";
    for (std::size_t k = 0; k < at.theta.size(); ++k)
        out << csv::fmt(at.t0 + static_cast<double>(k) / at.fs) << ',' << csv::fmt(at.theta[k]) << ','
            << csv::fmt(at.phi[k]) << '\n';
}

/// CSV `t,x,y,z` back to a SphereTrace (rows are renormalized).
inline SphereTrace read_sphere_csv(const std::string& path)
{
    const auto tab = csv::read_numeric(path, {"t", "x", "y", "z"});
    if (tab.rows.size() < 2)
        throw Error(ErrorCode::InsufficientData, path + ": need at least 2 rows");
    SphereTrace st;
    st.t0 = tab.rows.front()[0];
    st.fs = static_cast<double>(tab.rows.size() - 1) / (tab.rows.back()[0] - tab.rows.front()[0]);
    for (const auto& r : tab.rows)
        st.samples.push_back(UnitVec3::normalize(Vec3(r[1], r[2], r[3])));
    st.valid.assign(st.samples.size(), true);
    return st;
}

} // namespace features
} // namespace ppgi

#endif // PPGI_FEATURES_HPP
