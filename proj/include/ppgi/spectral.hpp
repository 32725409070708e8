#ifndef PPGI_SPECTRAL_HPP
#define PPGI_SPECTRAL_HPP

#include "core.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ppgi {
namespace spectral {

/// Analysis constants shared by every operator and by the reference path.
struct SpectralParams {
    double band_lo_hz = 0.5;
    double band_hi_hz = 2.5;
    int filter_order = 4;
    std::size_t win = 256;
    double overlap = 0.9;
    std::size_t nfft = 2048;

    std::size_t hop() const
    {
        const auto h = static_cast<std::size_t>(std::lround(static_cast<double>(win) * (1.0 - overlap)));
        return std::max<std::size_t>(h, 1);
    }

    bool operator==(const SpectralParams&) const = default;
};

struct Spectrogram {
    /// Window centers in seconds (including the series start offset).
    std::vector<double> window_times;
    std::vector<double> freqs;
    /// power[window][bin], one-sided.
    std::vector<std::vector<double>> power;
};

struct HrSeries {
    std::vector<double> times;
    std::vector<double> bpm;
    std::vector<double> confidence;
    std::vector<bool> valid;

    std::size_t size() const { return times.size(); }
};

// ---------------------------------------------------------------------------
// IIR filtering

/// Direct-form II transposed biquad, a0 normalized to 1.
struct Biquad {
    double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;

    double dc_gain() const { return (b0 + b1 + b2) / (1.0 + a1 + a2); }
};

namespace detail {

/// Bilinear transform of an analog section (n2 s^2 + n1 s + n0)/(s^2 + d1 s + d0).
inline Biquad bilinear(double n2, double n1, double n0, double d1, double d0, double fs)
{
    const double k = 2.0 * fs;
    const double k2 = k * k;
    const double a0 = k2 + d1 * k + d0;
    Biquad q;
    q.b0 = (n2 * k2 + n1 * k + n0) / a0;
    q.b1 = (2.0 * n0 - 2.0 * n2 * k2) / a0;
    q.b2 = (n2 * k2 - n1 * k + n0) / a0;
    q.a1 = (2.0 * d0 - 2.0 * k2) / a0;
    q.a2 = (k2 - d1 * k + d0) / a0;
    return q;
}

} // namespace detail

/// Butterworth low-pass (high_pass = false) or high-pass sections of an even
/// order, designed with frequency prewarping.
inline std::vector<Biquad> butterworth(int order, double fc, double fs, bool high_pass)
{
    if (order < 2 || order % 2 != 0)
        throw Error(ErrorCode::InvalidArgument, "butterworth: order must be even and >= 2");
    if (!(fc > 0.0) || !(fc < fs / 2.0))
        throw Error(ErrorCode::InvalidArgument, "butterworth: cutoff must lie in (0, fs/2)");
    const double wc = 2.0 * fs * std::tan(pi * fc / fs);
    std::vector<Biquad> sections;
    for (int k = 0; k < order / 2; ++k) {
        // pole pair of the normalized prototype: s^2 + q s + 1
        const double q = 2.0 * std::sin(pi * (2.0 * k + 1.0) / (2.0 * order));
        if (high_pass)
            sections.push_back(detail::bilinear(1.0, 0.0, 0.0, q * wc, wc * wc, fs));
        else
            sections.push_back(detail::bilinear(0.0, 0.0, wc * wc, q * wc, wc * wc, fs));
    }
    return sections;
}

/// Butterworth high-pass at lo cascaded with a Butterworth low-pass at hi,
/// each of the given order.
inline std::vector<Biquad> design_bandpass(double fs, double lo, double hi, int order = 4)
{
    if (!(fs > 2.0 * hi))
        throw Error(ErrorCode::InvalidArgument,
                    "bandpass: sampling rate " + std::to_string(fs) + " Hz must exceed twice the upper edge");
    if (!(lo > 0.0) || !(lo < hi))
        throw Error(ErrorCode::InvalidArgument, "bandpass: need 0 < lo < hi");
    auto sos = butterworth(order, lo, fs, true);
    auto lp = butterworth(order, hi, fs, false);
    sos.insert(sos.end(), lp.begin(), lp.end());
    return sos;
}

/// Causal filtering through a cascade of sections. When init is set the
/// section states start at steady state for a constant input of x[0].
inline std::vector<double> sosfilt(std::span<const Biquad> sos, std::span<const double> x, bool init = false)
{
    std::vector<double> y(x.begin(), x.end());
    if (y.empty())
        return y;
    double level = y.front();
    for (const auto& q : sos) {
        double z1 = 0.0, z2 = 0.0;
        if (init) {
            const double out = level * q.dc_gain();
            z2 = q.b2 * level - q.a2 * out;
            z1 = q.b1 * level - q.a1 * out + z2;
            level = out;
        }
        for (double& v : y) {
            const double in = v;
            const double out = q.b0 * in + z1;
            z1 = q.b1 * in - q.a1 * out + z2;
            z2 = q.b2 * in - q.a2 * out;
            v = out;
        }
    }
    return y;
}

/// Zero-phase forward-backward filtering with odd-reflection padding.
inline std::vector<double> filtfilt(std::span<const Biquad> sos, std::span<const double> x, std::size_t padlen)
{
    const std::size_t n = x.size();
    if (n == 0)
        return {};
    padlen = std::min(padlen, n - 1);
    std::vector<double> ext;
    ext.reserve(n + 2 * padlen);
    for (std::size_t i = padlen; i >= 1; --i)
        ext.push_back(2.0 * x[0] - x[i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (std::size_t i = 1; i <= padlen; ++i)
        ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

    auto fwd = sosfilt(sos, ext, true);
    std::reverse(fwd.begin(), fwd.end());
    auto bwd = sosfilt(sos, fwd, true);
    std::reverse(bwd.begin(), bwd.end());
    return {bwd.begin() + static_cast<std::ptrdiff_t>(padlen),
            bwd.begin() + static_cast<std::ptrdiff_t>(padlen + n)};
}

/// Zero-phase band-pass between lo and hi Hz (Butterworth high-pass and
/// low-pass of the given order, run forward and backward).
inline std::vector<double> bandpass(std::span<const double> x, double fs, double lo = 0.5, double hi = 2.5,
                                    int order = 4)
{
    const auto sos = design_bandpass(fs, lo, hi, order);
    const auto padlen = static_cast<std::size_t>(std::ceil(3.0 * fs / lo));
    return filtfilt(sos, x, padlen);
}

/// Magnitude response of a section cascade at frequency f.
inline double magnitude_response(std::span<const Biquad> sos, double f, double fs)
{
    const std::complex<double> z = std::polar(1.0, -2.0 * pi * f / fs); // z^-1
    std::complex<double> h = 1.0;
    for (const auto& q : sos)
        h *= (q.b0 + q.b1 * z + q.b2 * z * z) / (1.0 + q.a1 * z + q.a2 * z * z);
    return std::abs(h);
}

// ---------------------------------------------------------------------------
// Windows and FFT

/// Periodic Hann window of length n.
inline std::vector<double> hann(std::size_t n)
{
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i)
        w[i] = 0.5 - 0.5 * std::cos(2.0 * pi * static_cast<double>(i) / static_cast<double>(n));
    return w;
}

/// One-sided power spectrum |X_k|^2 / nfft of a zero-padded frame, interior
/// bins doubled so that the bins sum to the frame energy (Parseval).
inline std::vector<double> power_spectrum(std::span<const double> frame, std::size_t nfft)
{
    if (frame.size() > nfft)
        throw Error(ErrorCode::InvalidArgument, "power_spectrum: frame longer than nfft");
    std::vector<double> buf(nfft, 0.0);
    std::copy(frame.begin(), frame.end(), buf.begin());
    std::vector<std::complex<double>> spec;
    Eigen::FFT<double> fft;
    fft.fwd(spec, buf);
    const std::size_t nbins = nfft / 2 + 1;
    std::vector<double> p(nbins);
    const double scale = 1.0 / static_cast<double>(nfft);
    for (std::size_t k = 0; k < nbins; ++k) {
        double v = std::norm(spec[k]) * scale;
        if (k != 0 && !(nfft % 2 == 0 && k == nfft / 2))
            v *= 2.0;
        p[k] = v;
    }
    return p;
}

inline std::size_t stft_window_count(std::size_t len, std::size_t win, std::size_t hop)
{
    if (len < win)
        return 0;
    return (len - win) / hop + 1;
}

///
/// \brief Short-time Fourier power spectrogram.
///
/// Hann-windowed frames of length win, hop = round(win * (1 - overlap)),
/// zero-padded to nfft. Window times are frame centers t0 + (start + win/2)/fs.
///
inline Spectrogram stft(std::span<const double> x, double fs, std::size_t win = 256, double overlap = 0.9,
                        std::size_t nfft = 2048, double t0 = 0.0)
{
    if (!(fs > 0.0))
        throw Error(ErrorCode::InvalidArgument, "stft: fs must be positive");
    if (win < 2 || nfft < win)
        throw Error(ErrorCode::InvalidArgument, "stft: need 2 <= win <= nfft");
    if (!(overlap >= 0.0 && overlap < 1.0))
        throw Error(ErrorCode::InvalidArgument, "stft: overlap must be in [0, 1)");
    if (x.size() < win)
        throw Error(ErrorCode::InsufficientData,
                    "stft: insufficient data (" + std::to_string(x.size()) + " samples, window " +
                        std::to_string(win) + ")");
    SpectralParams p;
    p.win = win;
    p.overlap = overlap;
    const std::size_t hop = p.hop();
    const auto w = hann(win);
    const std::size_t count = stft_window_count(x.size(), win, hop);

    Spectrogram sg;
    const std::size_t nbins = nfft / 2 + 1;
    sg.freqs.resize(nbins);
    for (std::size_t k = 0; k < nbins; ++k)
        sg.freqs[k] = static_cast<double>(k) * fs / static_cast<double>(nfft);
    sg.window_times.reserve(count);
    sg.power.reserve(count);
    std::vector<double> frame(win);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t start = i * hop;
        for (std::size_t j = 0; j < win; ++j)
            frame[j] = x[start + j] * w[j];
        sg.power.push_back(power_spectrum(frame, nfft));
        sg.window_times.push_back(t0 + (static_cast<double>(start) + static_cast<double>(win) / 2.0) / fs);
    }
    return sg;
}

inline Spectrogram stft(std::span<const double> x, double fs, const SpectralParams& p, double t0 = 0.0)
{
    return stft(x, fs, p.win, p.overlap, p.nfft, t0);
}

///
/// \brief Heart rate per window from the strongest in-band spectral peak.
///
/// The peak bin is refined by a parabola through it and its two neighbours;
/// confidence is peak power over total band power.
///
inline HrSeries peak_hr(const Spectrogram& sg, double lo = 0.5, double hi = 2.5)
{
    if (sg.freqs.empty() || lo < sg.freqs.front() || hi > sg.freqs.back() || !(lo < hi))
        throw Error(ErrorCode::InvalidArgument, "peak_hr: band must lie inside the spectrogram range");
    std::size_t k_lo = 0;
    while (k_lo < sg.freqs.size() && sg.freqs[k_lo] < lo)
        ++k_lo;
    std::size_t k_hi = k_lo;
    while (k_hi + 1 < sg.freqs.size() && sg.freqs[k_hi + 1] <= hi)
        ++k_hi;
    const double df = sg.freqs.size() > 1 ? sg.freqs[1] - sg.freqs[0] : 0.0;

    HrSeries hr;
    hr.times = sg.window_times;
    hr.bpm.resize(sg.power.size(), 0.0);
    hr.confidence.resize(sg.power.size(), 0.0);
    hr.valid.resize(sg.power.size(), false);
    for (std::size_t w = 0; w < sg.power.size(); ++w) {
        const auto& p = sg.power[w];
        std::size_t kmax = k_lo;
        double total = 0.0;
        for (std::size_t k = k_lo; k <= k_hi; ++k) {
            total += p[k];
            if (p[k] > p[kmax])
                kmax = k;
        }
        if (!(total > 0.0) || !std::isfinite(total))
            continue;
        double f = sg.freqs[kmax];
        if (kmax > 0 && kmax + 1 < p.size()) {
            const double a = p[kmax - 1], b = p[kmax], c = p[kmax + 1];
            const double denom = a - 2.0 * b + c;
            if (denom < 0.0) {
                const double delta = 0.5 * (a - c) / denom;
                if (std::abs(delta) <= 0.5)
                    f += delta * df;
            }
        }
        f = std::clamp(f, lo, hi);
        hr.bpm[w] = 60.0 * f;
        hr.confidence[w] = std::clamp(p[kmax] / total, 0.0, 1.0);
        hr.valid[w] = true;
    }
    return hr;
}

// ---------------------------------------------------------------------------
// Resampling

///
/// \brief Windowed-sinc resampling between arbitrary rates.
///
/// Kaiser-windowed sinc (beta 8, 64 taps either side at the slower rate) with
/// cutoff 0.85 * min(fs_in, fs_out) / 2, so down-sampling is anti-aliased.
/// Output sample k sits at time k / fs_out; the kernel is renormalized near
/// the edges to keep unit DC gain.
///
inline std::vector<double> resample(std::span<const double> x, double fs_in, double fs_out)
{
    if (!(fs_in > 0.0) || !(fs_out > 0.0))
        throw Error(ErrorCode::InvalidArgument, "resample: rates must be positive");
    if (fs_in == fs_out || x.size() < 2)
        return {x.begin(), x.end()};

    constexpr double beta = 8.0;
    constexpr double half_taps = 64.0;
    const double fc = 0.85 * std::min(fs_in, fs_out) / 2.0;
    // kernel half-width in seconds
    const double half_width = half_taps / std::min(fs_in, fs_out);
    const double i0_beta = std::cyl_bessel_i(0.0, beta);

    const auto n_in = static_cast<std::ptrdiff_t>(x.size());
    const double duration = static_cast<double>(n_in - 1) / fs_in;
    const auto n_out = static_cast<std::size_t>(std::floor(duration * fs_out + 1e-9)) + 1;
    std::vector<double> y(n_out);
    for (std::size_t k = 0; k < n_out; ++k) {
        const double t = static_cast<double>(k) / fs_out;
        const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::ceil((t - half_width) * fs_in)));
        const auto hi =
            std::min<std::ptrdiff_t>(n_in - 1, static_cast<std::ptrdiff_t>(std::floor((t + half_width) * fs_in)));
        double acc = 0.0, wsum = 0.0;
        for (std::ptrdiff_t n = lo; n <= hi; ++n) {
            const double dt = t - static_cast<double>(n) / fs_in;
            const double r = dt / half_width;
            if (std::abs(r) > 1.0)
                continue;
            const double arg = 2.0 * fc * dt;
            const double sinc = arg == 0.0 ? 1.0 : std::sin(pi * arg) / (pi * arg);
            const double kaiser = std::cyl_bessel_i(0.0, beta * std::sqrt(1.0 - r * r)) / i0_beta;
            const double h = sinc * kaiser;
            acc += h * x[static_cast<std::size_t>(n)];
            wsum += h;
        }
        y[k] = wsum != 0.0 ? acc / wsum : 0.0;
    }
    return y;
}

// ---------------------------------------------------------------------------
// Small helpers shared by operators and evaluation

inline double mean(std::span<const double> x)
{
    if (x.empty())
        return 0.0;
    double s = 0.0;
    for (double v : x)
        s += v;
    return s / static_cast<double>(x.size());
}

/// Population standard deviation.
inline double stddev(std::span<const double> x)
{
    if (x.empty())
        return 0.0;
    const double m = mean(x);
    double s = 0.0;
    for (double v : x)
        s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(x.size()));
}

/// Removes the least-squares line.
inline std::vector<double> detrend_linear(std::span<const double> x)
{
    const std::size_t n = x.size();
    std::vector<double> y(x.begin(), x.end());
    if (n < 2) {
        for (double& v : y)
            v = 0.0;
        return y;
    }
    const double tm = (static_cast<double>(n) - 1.0) / 2.0;
    const double xm = mean(x);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dt = static_cast<double>(i) - tm;
        sxy += dt * (x[i] - xm);
        sxx += dt * dt;
    }
    const double slope = sxy / sxx;
    for (std::size_t i = 0; i < n; ++i)
        y[i] = x[i] - xm - slope * (static_cast<double>(i) - tm);
    return y;
}

} // namespace spectral
} // namespace ppgi

#endif // PPGI_SPECTRAL_HPP
