#ifndef PPGI_TESTS_ORACLES_HPP
#define PPGI_TESTS_ORACLES_HPP

// Reference implementations used only by the tests. Each one is written from
// the textbook definition and does not call into the library code it checks.

#include <ppgi/rng.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <vector>

namespace oracle {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
inline constexpr double pi = 3.14159265358979323846;

inline Vec3 random_unit(ppgi::SplitMix64& rng)
{
    Vec3 v;
    do {
        v = Vec3(rng.gaussian(), rng.gaussian(), rng.gaussian());
    } while (v.norm() < 1e-8);
    return v.normalized();
}

/// Uniform random rotation from a normalized Gaussian quaternion.
inline Mat3 random_rotation(ppgi::SplitMix64& rng)
{
    Eigen::Quaterniond q(rng.gaussian(), rng.gaussian(), rng.gaussian(), rng.gaussian());
    q.normalize();
    return q.toRotationMatrix();
}

/// Orthonormal (e1, e2) completing n to a right-handed frame.
inline std::pair<Vec3, Vec3> tangent_basis(const Vec3& n)
{
    const Vec3 a = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    const Vec3 e1 = (a - a.dot(n) * n).normalized();
    return {e1, n.cross(e1)};
}

/// Point at geodesic distance r from n in direction angle a.
inline Vec3 cap_point(const Vec3& n, double r, double a)
{
    const auto [e1, e2] = tangent_basis(n);
    return std::cos(r) * n + std::sin(r) * (std::cos(a) * e1 + std::sin(a) * e2);
}

/// Uniform sample in the spherical cap of angular radius r_max around n.
inline Vec3 random_in_cap(ppgi::SplitMix64& rng, const Vec3& n, double r_max)
{
    const double z = 1.0 - rng.uniform() * (1.0 - std::cos(r_max));
    return cap_point(n, std::acos(z), 2.0 * pi * rng.uniform());
}

/// Wood (1994) rejection sampler for vMF on S^2.
inline Vec3 sample_vmf(ppgi::SplitMix64& rng, const Vec3& mu, double kappa)
{
    // For p = 3 the marginal of w = mu.x has density proportional to exp(kappa w)
    // and can be inverted in closed form.
    const double u = rng.uniform();
    const double w = 1.0 + std::log(u + (1.0 - u) * std::exp(-2.0 * kappa)) / kappa;
    const double a = 2.0 * pi * rng.uniform();
    const auto [e1, e2] = tangent_basis(mu);
    const double s = std::sqrt(std::max(0.0, 1.0 - w * w));
    return w * mu + s * (std::cos(a) * e1 + std::sin(a) * e2);
}

inline double sum_sq_geodesic(const Vec3& x, const std::vector<Vec3>& pts)
{
    double f = 0.0;
    for (const auto& p : pts) {
        const double d = std::acos(std::clamp(x.dot(p), -1.0, 1.0));
        f += d * d;
    }
    return f;
}

///
/// Brute-force minimizer of sum d^2(x, p_i) over a polar grid of spacing
/// step_rad (both radial and arc length) covering a cap of radius r_max
/// around `center`.
///
inline Vec3 karcher_grid(const std::vector<Vec3>& pts, const Vec3& center, double r_max, double step_rad)
{
    Vec3 best = center;
    double best_f = sum_sq_geodesic(center, pts);
    const auto [e1, e2] = tangent_basis(center);
    for (double r = step_rad; r <= r_max; r += step_rad) {
        const int na = std::max(6, static_cast<int>(std::ceil(2.0 * pi * std::sin(r) / step_rad)));
        for (int j = 0; j < na; ++j) {
            const double a = 2.0 * pi * j / na;
            const Vec3 x = std::cos(r) * center + std::sin(r) * (std::cos(a) * e1 + std::sin(a) * e2);
            const double f = sum_sq_geodesic(x, pts);
            if (f < best_f) {
                best_f = f;
                best = x;
            }
        }
    }
    return best;
}

/// |X[k]|^2 by the direct DFT sum.
inline double dft_power(const std::vector<double>& x, std::size_t nfft, std::size_t k)
{
    std::complex<double> s = 0.0;
    for (std::size_t n = 0; n < x.size(); ++n)
        s += x[n] * std::polar(1.0, -2.0 * pi * static_cast<double>(k * n % nfft) / static_cast<double>(nfft));
    return std::norm(s);
}

/// Frequency (Hz) of the largest direct-DFT bin within [lo, hi].
inline double dft_peak_hz(const std::vector<double>& x, double fs, double lo, double hi, std::size_t nfft = 0)
{
    if (nfft == 0)
        nfft = 4 * x.size();
    std::vector<double> y(x);
    double m = 0.0;
    for (double v : y)
        m += v;
    m /= static_cast<double>(y.size());
    for (double& v : y)
        v -= m;
    double best = -1.0, best_f = 0.0;
    for (std::size_t k = 0; k <= nfft / 2; ++k) {
        const double f = static_cast<double>(k) * fs / static_cast<double>(nfft);
        if (f < lo || f > hi)
            continue;
        const double p = dft_power(y, nfft, k);
        if (p > best) {
            best = p;
            best_f = f;
        }
    }
    return best_f;
}

/// Linear interpolation of (t, y) at tq, clamped at the ends.
inline double interp(const std::vector<double>& t, const std::vector<double>& y, double tq)
{
    if (tq <= t.front())
        return y.front();
    if (tq >= t.back())
        return y.back();
    std::size_t i = 1;
    while (t[i] < tq)
        ++i;
    const double a = (tq - t[i - 1]) / (t[i] - t[i - 1]);
    return y[i - 1] + a * (y[i] - y[i - 1]);
}

/// Instantaneous frequency (Hz) from the phase of the analytic signal,
/// computed with a direct DFT and the one-sided spectrum construction.
inline std::vector<double> hilbert_inst_freq(const std::vector<double>& x, double fs)
{
    const std::size_t n = x.size();
    std::vector<std::complex<double>> X(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> s = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            s += x[j] * std::polar(1.0, -2.0 * pi * static_cast<double>(k * j % n) / static_cast<double>(n));
        X[k] = s;
    }
    for (std::size_t k = 1; k < n; ++k) {
        if (2 * k < n)
            X[k] *= 2.0;
        else if (2 * k > n)
            X[k] = 0.0;
    }
    std::vector<double> phase(n);
    for (std::size_t j = 0; j < n; ++j) {
        std::complex<double> s = 0.0;
        for (std::size_t k = 0; k < n; ++k)
            s += X[k] * std::polar(1.0, 2.0 * pi * static_cast<double>(k * j % n) / static_cast<double>(n));
        phase[j] = std::arg(s);
    }
    std::vector<double> f(n, 0.0);
    for (std::size_t j = 1; j < n; ++j) {
        double d = phase[j] - phase[j - 1];
        while (d > pi)
            d -= 2.0 * pi;
        while (d < -pi)
            d += 2.0 * pi;
        f[j] = d * fs / (2.0 * pi);
    }
    f[0] = f[1];
    return f;
}

/// |H| of an analog Butterworth band-pass made of an order-n low-pass at
/// hi and an order-n high-pass at lo, each evaluated at the bilinear
/// pre-warped frequency of the digital frequency f.
inline double butterworth_bandpass_gain(double f, double fs, double lo, double hi, int order)
{
    auto warp = [fs](double x) { return std::tan(pi * x / fs); };
    const double w = warp(f);
    const double lp = 1.0 / std::sqrt(1.0 + std::pow(w / warp(hi), 2 * order));
    const double hp = 1.0 / std::sqrt(1.0 + std::pow(warp(lo) / w, 2 * order));
    return lp * hp;
}

///
/// Textbook single-oscillator Kalman filter with drift channel, standard
/// (non-Joseph) covariance update, fixed frequency f.
///
inline std::vector<double> plain_kalman(const std::vector<double>& y, double fs, double f, double q_osc,
                                        double q_drift, double r, double p0)
{
    const double dt = 1.0 / fs, w = 2.0 * pi * f;
    Eigen::Matrix4d F = Eigen::Matrix4d::Zero();
    F(0, 0) = std::cos(w * dt);
    F(0, 1) = std::sin(w * dt) / w;
    F(1, 0) = -w * std::sin(w * dt);
    F(1, 1) = std::cos(w * dt);
    F(2, 2) = 1.0;
    F(2, 3) = dt;
    F(3, 3) = 1.0;
    // Process noise by numerical quadrature of F(u) G G^T F(u)^T.
    Eigen::Matrix4d Q = Eigen::Matrix4d::Zero();
    const int steps = 2000;
    for (int i = 0; i < steps; ++i) {
        const double u = (i + 0.5) * dt / steps;
        Eigen::Vector2d go(std::sin(w * u) / w, std::cos(w * u));
        Eigen::Vector2d gd(u, 1.0);
        Q.block<2, 2>(0, 0) += q_osc * go * go.transpose() * (dt / steps);
        Q.block<2, 2>(2, 2) += q_drift * gd * gd.transpose() * (dt / steps);
    }
    Eigen::RowVector4d H(1.0, 0.0, 1.0, 0.0);
    Eigen::Vector4d x = Eigen::Vector4d::Zero();
    Eigen::Matrix4d P = p0 * Eigen::Matrix4d::Identity();
    std::vector<double> out;
    for (double yk : y) {
        x = F * x;
        P = F * P * F.transpose() + Q;
        const double s = (H * P * H.transpose())(0, 0) + r;
        const Eigen::Vector4d k = P * H.transpose() / s;
        x += k * (yk - H * x);
        P = (Eigen::Matrix4d::Identity() - k * H) * P;
        out.push_back(x(0));
    }
    return out;
}

/// Population variance.
inline double variance(const std::vector<double>& x)
{
    double m = 0.0;
    for (double v : x)
        m += v;
    m /= static_cast<double>(x.size());
    double s = 0.0;
    for (double v : x)
        s += (v - m) * (v - m);
    return s / static_cast<double>(x.size());
}

inline std::vector<double> sine(std::size_t n, double fs, double f, double amp = 1.0, double phase = 0.0,
                                double offset = 0.0)
{
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i)
        x[i] = offset + amp * std::sin(2.0 * pi * f * static_cast<double>(i) / fs + phase);
    return x;
}

/// Eigenvalues of a symmetric 3x3 matrix, descending, by the trigonometric
/// solution of the characteristic cubic.
inline Vec3 sym3_eigenvalues(const Mat3& a)
{
    const double p1 = a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
    const double q = a.trace() / 3.0;
    if (p1 == 0.0) {
        Vec3 d = a.diagonal();
        std::sort(d.data(), d.data() + 3, std::greater<>());
        return d;
    }
    const double p2 = (a(0, 0) - q) * (a(0, 0) - q) + (a(1, 1) - q) * (a(1, 1) - q) + (a(2, 2) - q) * (a(2, 2) - q) +
                      2.0 * p1;
    const double p = std::sqrt(p2 / 6.0);
    const Mat3 b = (a - q * Mat3::Identity()) / p;
    const double r = std::clamp(b.determinant() / 2.0, -1.0, 1.0);
    const double phi = std::acos(r) / 3.0;
    const double e1 = q + 2.0 * p * std::cos(phi);
    const double e3 = q + 2.0 * p * std::cos(phi + 2.0 * pi / 3.0);
    return Vec3(e1, 3.0 * q - e1 - e3, e3);
}

} // namespace oracle

#endif // PPGI_TESTS_ORACLES_HPP
