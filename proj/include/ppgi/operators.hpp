#ifndef PPGI_OPERATORS_HPP
#define PPGI_OPERATORS_HPP

#include "core.hpp"
#include "features.hpp"
#include "log.hpp"
#include "spectral.hpp"
#include "types.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ppgi {
namespace operators {

// ---------------------------------------------------------------------------
// Windowing

/// Window starts covering [0, n): multiples of hop, plus a final window
/// flush with the end when the grid does not reach it.
inline std::vector<std::size_t> window_starts(std::size_t n, std::size_t win, std::size_t hop)
{
    std::vector<std::size_t> starts;
    if (n < win || win == 0)
        return starts;
    for (std::size_t s = 0; s + win <= n; s += hop)
        starts.push_back(s);
    if (starts.back() + win < n)
        starts.push_back(n - win);
    return starts;
}

/// Blending weight sin^2(pi (i + 1/2) / win): a Hann window shifted half a
/// sample so it never vanishes; at hop = win/2 (even win) the weights sum to one.
inline std::vector<double> blend_window(std::size_t win)
{
    std::vector<double> w(win);
    for (std::size_t i = 0; i < win; ++i) {
        const double s = std::sin(pi * (static_cast<double>(i) + 0.5) / static_cast<double>(win));
        w[i] = s * s;
    }
    return w;
}

///
/// \brief Hann-weighted overlap-add with hop = win/2.
///
/// segment(start) returns the win output samples for the window starting at
/// start. The result is normalized by the accumulated weights, so the trace
/// edges and a trailing flush window are handled uniformly.
///
inline std::vector<double> overlap_add(std::size_t n, std::size_t win,
                                       const std::function<std::vector<double>(std::size_t)>& segment)
{
    const std::size_t hop = std::max<std::size_t>(1, win / 2);
    const auto w = blend_window(win);
    std::vector<double> acc(n, 0.0), wsum(n, 0.0);
    for (std::size_t s : window_starts(n, win, hop)) {
        const auto seg = segment(s);
        for (std::size_t i = 0; i < win; ++i) {
            acc[s + i] += w[i] * seg[i];
            wsum[s + i] += w[i];
        }
    }
    for (std::size_t k = 0; k < n; ++k)
        acc[k] = wsum[k] > 0.0 ? acc[k] / wsum[k] : 0.0;
    return acc;
}

inline std::vector<double> remove_mean(std::vector<double> x)
{
    const double m = spectral::mean(x);
    for (double& v : x)
        v -= m;
    return x;
}

// ---------------------------------------------------------------------------
// Green

/// Green channel with the full-trace mean removed.
inline PulseTrace op_green(const RgbTrace& tr)
{
    PulseTrace out;
    out.fs = tr.fs;
    out.t0 = tr.t0;
    out.op = Operator::Green;
    out.valid = tr.valid;
    out.samples.resize(tr.size());
    for (std::size_t k = 0; k < tr.size(); ++k)
        out.samples[k] = tr.samples[k].y();
    out.samples = remove_mean(std::move(out.samples));
    return out;
}

// ---------------------------------------------------------------------------
// Explicit projection (LGI)

enum class CovarianceKind { Sample, FirstDifference };

///
/// \brief Corank-1 projector P = I - V V^T removing the dominant direction V.
///
struct ProjectionOp {
    Mat3 P = Mat3::Identity();
    Vec3 V = Vec3::Zero();
    /// Covariance eigenvalues, descending.
    Vec3 eigenvalues = Vec3::Zero();
    std::size_t begin = 0;
    std::size_t end = 0;
    bool degenerate = false;
};

/// Sample covariance (1/l) sum (x - mean)(x - mean)^T, or the same of the
/// first differences.
inline Mat3 window_covariance(std::span<const Vec3> window, CovarianceKind kind = CovarianceKind::Sample)
{
    std::vector<Vec3> data;
    if (kind == CovarianceKind::FirstDifference) {
        for (std::size_t i = 1; i < window.size(); ++i)
            data.push_back(window[i] - window[i - 1]);
    } else {
        data.assign(window.begin(), window.end());
    }
    Vec3 m = Vec3::Zero();
    for (const auto& x : data)
        m += x;
    m /= static_cast<double>(data.size());
    Mat3 c = Mat3::Zero();
    for (const auto& x : data)
        c += (x - m) * (x - m).transpose();
    return c / static_cast<double>(data.size());
}

inline ProjectionOp build_projection(std::span<const Vec3> window, CovarianceKind kind = CovarianceKind::Sample)
{
    if (window.size() < 3)
        throw Error(ErrorCode::InsufficientData, "build_projection: window needs at least 3 samples");
    const Mat3 c = window_covariance(window, kind);
    Eigen::SelfAdjointEigenSolver<Mat3> es(c);
    ProjectionOp op;
    op.end = window.size();
    op.eigenvalues = es.eigenvalues().reverse();
    Vec3 scale = Vec3::Zero();
    for (const auto& x : window)
        scale = scale.cwiseMax(x.cwiseAbs());
    const double ref = std::max(1.0, scale.squaredNorm());
    if (!(op.eigenvalues(0) > 1e-28 * ref)) {
        log().warn("build_projection: covariance is zero, using P = I");
        op.degenerate = true;
        return op;
    }
    Vec3 v = es.eigenvectors().col(2);
    canonical_sign(v);
    op.V = v;
    op.P = Mat3::Identity() - v * v.transpose();
    return op;
}

enum class LgiChannel { Green, SnrBest };

struct LgiOptions {
    std::size_t window = 256;
    CovarianceKind covariance = CovarianceKind::Sample;
    LgiChannel channel = LgiChannel::Green;
    double band_lo_hz = 0.5;
    double band_hi_hz = 2.5;
};

/// Fraction of in-band power in the strongest bin of a Hann periodogram.
inline double peak_fraction(std::span<const double> x, double fs, double lo, double hi)
{
    std::size_t nfft = 1;
    while (nfft < 2 * x.size())
        nfft <<= 1;
    auto w = spectral::hann(x.size());
    std::vector<double> frame(x.size());
    const double m = spectral::mean(x);
    for (std::size_t i = 0; i < x.size(); ++i)
        frame[i] = (x[i] - m) * w[i];
    const auto p = spectral::power_spectrum(frame, nfft);
    double total = 0.0, peak = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        const double f = static_cast<double>(k) * fs / static_cast<double>(nfft);
        if (f < lo || f > hi)
            continue;
        total += p[k];
        peak = std::max(peak, p[k]);
    }
    return total > 0.0 ? peak / total : 0.0;
}

///
/// \brief Local group invariance operator.
///
/// For each window (hop = window/2) a projector is estimated from the window
/// covariance and applied to the raw samples; the selected channel of P x,
/// mean-removed per window, is blended by Hann overlap-add. Degenerate
/// windows pass the mean-removed green channel through. Emitted projectors
/// are appended to `emitted` when given.
///
inline PulseTrace op_lgi(const RgbTrace& tr, const LgiOptions& opt = {}, std::vector<ProjectionOp>* emitted = nullptr)
{
    if (opt.window < 32)
        throw Error(ErrorCode::InvalidArgument, "op_lgi: window must be at least 32 samples");
    if (tr.size() < opt.window)
        throw Error(ErrorCode::InsufficientData, "op_lgi: trace shorter than the window (" + std::to_string(tr.size()) +
                                                     " < " + std::to_string(opt.window) + ")");
    const std::size_t n = tr.size();
    const std::size_t win = opt.window;
    std::vector<ProjectionOp> ops;
    for (std::size_t s : window_starts(n, win, std::max<std::size_t>(1, win / 2))) {
        auto op = build_projection(std::span<const Vec3>(tr.samples).subspan(s, win), opt.covariance);
        op.begin = s;
        op.end = s + win;
        if (op.degenerate)
            log().info("op_lgi: degenerate window at sample {}, passing green through", s);
        ops.push_back(op);
    }
    auto channel_output = [&](int ch) {
        std::size_t idx = 0;
        return overlap_add(n, win, [&](std::size_t s) {
            const auto& op = ops[idx++];
            std::vector<double> seg(win);
            for (std::size_t i = 0; i < win; ++i) {
                const Vec3& x = tr.samples[s + i];
                seg[i] = op.degenerate ? x.y() : (op.P * x)(ch);
            }
            return remove_mean(std::move(seg));
        });
    };

    PulseTrace out;
    out.fs = tr.fs;
    out.t0 = tr.t0;
    out.op = Operator::Lgi;
    out.valid = tr.valid;
    if (opt.channel == LgiChannel::Green) {
        out.samples = channel_output(1);
    } else {
        double best = -1.0;
        for (int ch = 0; ch < 3; ++ch) {
            auto cand = channel_output(ch);
            const double score = peak_fraction(cand, tr.fs, opt.band_lo_hz, opt.band_hi_hz);
            if (score > best) {
                best = score;
                out.samples = std::move(cand);
            }
        }
    }
    if (emitted)
        emitted->insert(emitted->end(), ops.begin(), ops.end());
    return out;
}

// ---------------------------------------------------------------------------
// POS

struct PosOptions {
    /// 0 selects round(1.6 * fs).
    std::size_t window = 0;
};

///
/// \brief Plane-orthogonal-to-skin operator.
///
/// Per window: divide each channel by its window mean, project on the rows
/// (0, 1, -1) and (-2, 1, 1), combine h = s1 + (sigma(s1)/sigma(s2)) s2,
/// remove the mean; windows are blended by Hann overlap-add (hop = window/2).
///
inline PulseTrace op_pos(const RgbTrace& tr, const PosOptions& opt = {})
{
    const std::size_t win =
        opt.window > 0 ? opt.window : static_cast<std::size_t>(std::lround(1.6 * tr.fs));
    if (win < 2)
        throw Error(ErrorCode::InvalidArgument, "op_pos: window too short");
    if (tr.size() < win)
        throw Error(ErrorCode::InsufficientData, "op_pos: trace shorter than the window");
    PulseTrace out;
    out.fs = tr.fs;
    out.t0 = tr.t0;
    out.op = Operator::Pos;
    out.valid = tr.valid;
    out.samples = overlap_add(tr.size(), win, [&](std::size_t s) {
        Vec3 m = Vec3::Zero();
        for (std::size_t i = 0; i < win; ++i)
            m += tr.samples[s + i];
        m /= static_cast<double>(win);
        std::vector<double> h(win);
        if ((m.array().abs() < 1e-12).any()) {
            log().info("op_pos: zero channel mean in window at sample {}, passing green through", s);
            for (std::size_t i = 0; i < win; ++i)
                h[i] = tr.samples[s + i].y();
            return remove_mean(std::move(h));
        }
        std::vector<double> s1(win), s2(win);
        for (std::size_t i = 0; i < win; ++i) {
            const Vec3 c = tr.samples[s + i].cwiseQuotient(m);
            s1[i] = c.y() - c.z();
            s2[i] = -2.0 * c.x() + c.y() + c.z();
        }
        const double sd2 = spectral::stddev(s2);
        const double alpha = sd2 > 0.0 ? spectral::stddev(s1) / sd2 : 0.0;
        for (std::size_t i = 0; i < win; ++i)
            h[i] = s1[i] + alpha * s2[i];
        return remove_mean(std::move(h));
    });
    return out;
}

// ---------------------------------------------------------------------------
// SSR

/// Eigen-decomposition of a frame's pixel correlation matrix, eigenvalues
/// descending, eigenvector columns orthonormal with canonical signs.
struct Eigenframe {
    Mat3 U = Mat3::Identity();
    Vec3 lambda = Vec3::Zero();
    /// False when the decomposition was rank deficient (or the frame empty)
    /// and the previous eigenframe is held instead.
    bool valid = false;
};

/// C = (1/N) sum p p^T.
inline Mat3 correlation_matrix(const PixelSet& ps)
{
    Mat3 c = Mat3::Zero();
    for (const auto& p : ps.pixels)
        c += p * p.transpose();
    return ps.pixels.empty() ? c : Mat3(c / static_cast<double>(ps.pixels.size()));
}

inline Eigenframe decompose_correlation(const Mat3& c)
{
    Eigen::SelfAdjointEigenSolver<Mat3> es(c);
    Eigenframe ef;
    for (int i = 0; i < 3; ++i) {
        ef.lambda(i) = es.eigenvalues()(2 - i);
        Vec3 v = es.eigenvectors().col(2 - i);
        canonical_sign(v);
        ef.U.col(i) = v;
    }
    ef.valid = ef.lambda(0) > 0.0 && ef.lambda(2) > 1e-10 * ef.lambda(0);
    return ef;
}

inline Eigenframe ssr_eigenframe(const PixelSet& ps)
{
    if (ps.pixels.empty())
        return {};
    return decompose_correlation(correlation_matrix(ps));
}

struct SsrOptions {
    /// 0 selects round(fs).
    std::size_t window = 0;
};

///
/// \brief Spatial subspace rotation from per-frame eigenframes.
///
/// For each frame k with tau = k - l + 1 >= 0, every frame t in [tau, k] gives
///   r  = u1(t)^T [u2(tau) u3(tau)]
///   s  = (sqrt(l1(t)/l2(tau)), sqrt(l1(t)/l3(tau)))
///   sr = (s .* r) [u2(tau) u3(tau)]^T
/// and p = sr_1 - (sigma(sr_1)/sigma(sr_2)) sr_2 is added, mean-removed, into
/// the output over [tau, k]. Invalid eigenframes hold the last valid one.
///
inline PulseTrace op_ssr_from_eigenframes(std::vector<Eigenframe> frames, double fs, const SsrOptions& opt = {})
{
    const std::size_t n = frames.size();
    const std::size_t l = opt.window > 0 ? opt.window : static_cast<std::size_t>(std::lround(fs));
    if (l < 2)
        throw Error(ErrorCode::InvalidArgument, "op_ssr: window too short");
    PulseTrace out;
    out.fs = fs;
    out.op = Operator::Ssr;
    out.samples.assign(n, 0.0);
    out.valid.resize(n);
    for (std::size_t k = 0; k < n; ++k)
        out.valid[k] = frames[k].valid;
    if (std::none_of(frames.begin(), frames.end(), [](const Eigenframe& f) { return f.valid; })) {
        log().warn("op_ssr: no frame has a full-rank correlation matrix, output is zero");
        return out;
    }
    features::hold_last_value(frames, out.valid);
    if (n < l)
        throw Error(ErrorCode::InsufficientData, "op_ssr: fewer frames than the window");

    std::vector<Vec3> sr(l);
    std::vector<double> c0(l), c1(l), p(l);
    for (std::size_t k = l - 1; k < n; ++k) {
        const std::size_t tau = k + 1 - l;
        const auto& ref = frames[tau];
        for (std::size_t j = 0; j < l; ++j) {
            const auto& cur = frames[tau + j];
            const double r1 = cur.U.col(0).dot(ref.U.col(1));
            const double r2 = cur.U.col(0).dot(ref.U.col(2));
            const double s1 = std::sqrt(cur.lambda(0) / ref.lambda(1));
            const double s2 = std::sqrt(cur.lambda(0) / ref.lambda(2));
            sr[j] = s1 * r1 * ref.U.col(1) + s2 * r2 * ref.U.col(2);
            c0[j] = sr[j](0);
            c1[j] = sr[j](1);
        }
        const double sd1 = spectral::stddev(c1);
        const double ratio = sd1 > 0.0 ? spectral::stddev(c0) / sd1 : 0.0;
        for (std::size_t j = 0; j < l; ++j)
            p[j] = c0[j] - ratio * c1[j];
        const double m = spectral::mean(p);
        for (std::size_t j = 0; j < l; ++j)
            out.samples[tau + j] += p[j] - m;
    }
    return out;
}

template <typename Source>
concept PixelSource = requires(Source s) {
    { s.next() } -> std::same_as<std::optional<PixelSet>>;
};

template <PixelSource Source>
PulseTrace op_ssr(Source& src, double fs, const SsrOptions& opt = {})
{
    std::vector<Eigenframe> frames;
    bool warned = false;
    while (auto ps = src.next()) {
        if (!warned && !ps->empty() && ps->pixels.size() < 100) {
            log().warn("op_ssr: only {} pixels per frame, at least 100 recommended", ps->pixels.size());
            warned = true;
        }
        frames.push_back(ssr_eigenframe(*ps));
    }
    return op_ssr_from_eigenframes(std::move(frames), fs, opt);
}

// ---------------------------------------------------------------------------
// SPH

struct SphResult {
    /// Unwrapped azimuth with its least-squares line removed.
    PulseTrace pulse;
    /// theta and unwrapped phi.
    AngleTrace angles;
};

inline SphResult op_sph_from_sphere(const SphereTrace& st)
{
    SphResult r;
    r.angles = features::trace_to_angles(st);
    r.pulse.fs = st.fs;
    r.pulse.t0 = st.t0;
    r.pulse.op = Operator::Sph;
    r.pulse.valid = st.valid;
    r.pulse.samples = spectral::detrend_linear(r.angles.phi);
    return r;
}

/// Sphere-pools every frame, holds the last value over empty frames and
/// turns the azimuth of the pooled direction into the pulse.
template <PixelSource Source>
SphResult op_sph(Source& src, double fs, features::SphereMethod method = features::SphereMethod::EuclidRenorm)
{
    SphereTrace st;
    st.fs = fs;
    while (auto ps = src.next()) {
        auto u = features::pool_sphere(*ps, method);
        st.samples.push_back(u.value_or(UnitVec3()));
        st.valid.push_back(u.has_value());
    }
    features::hold_last_value(st.samples, st.valid);
    return op_sph_from_sphere(st);
}

// ---------------------------------------------------------------------------
// Diagnostics

/// max |lambda| over the eigenvalues of a square matrix.
inline double spectral_radius(const Eigen::MatrixXd& m)
{
    if (m.rows() != m.cols() || m.rows() == 0)
        throw Error(ErrorCode::Dimension, "spectral_radius: matrix must be square and non-empty");
    if (!m.allFinite())
        throw Error(ErrorCode::InvalidArgument, "spectral_radius: matrix must be finite");
    Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

} // namespace operators
} // namespace ppgi

#endif // PPGI_OPERATORS_HPP
