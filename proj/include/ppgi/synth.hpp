#ifndef PPGI_SYNTH_HPP
#define PPGI_SYNTH_HPP

#include "core.hpp"
#include "log.hpp"
#include "rng.hpp"
#include "types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

namespace ppgi {
namespace synth {

/// Pulse frequency knot; frequencies are linearly interpolated between knots
/// and held constant outside them.
struct FreqKnot {
    double t_s = 0.0;
    double hz = 1.1;
};

inline Vec3 default_skin_tone_dir() { return Vec3(0.8, 0.5, 0.35).normalized(); }

/// Green-heavy blood absorption direction made orthogonal to the skin tone.
inline Vec3 default_pulse_dir(const Vec3& skin_dir)
{
    const Vec3 s = skin_dir.normalized();
    const Vec3 v(0.3, 0.8, 0.5);
    return (v - v.dot(s) * s).normalized();
}

///
/// \brief Scene parameters.
///
/// Pixel model, for pixel i at time t:
///   g_i(t) = 1 + motion_gain_amp * sin(2 pi motion_gain_freq_hz t + phase_i)
///   p_i(t) = g_i(t) * (tone_i * b_i + pulse_amp * sin(Phi(t)) * pulse_dir) + noise
/// with Phi(t) the integral of 2 pi f(t), b_i uniform in
/// [base_intensity_min, base_intensity_max), phase_i uniform in
/// [0, motion_phase_spread) and tone_i = normalize(skin_tone_dir +
/// tone_spread * cos(phase_i) * (skin_tone_dir x pulse_dir)). Channels are
/// clamped to [0, 1].
///
struct SynthConfig {
    double duration_s = 60.0;
    double fs = 30.0;
    std::vector<FreqKnot> pulse_freq{{0.0, 1.1}};
    double pulse_amp = 0.005;
    Vec3 skin_tone_dir = default_skin_tone_dir();
    /// Empty means "orthogonal to skin_tone_dir" (default_pulse_dir).
    std::optional<Vec3> pulse_dir;
    double motion_gain_amp = 0.0;
    double motion_gain_freq_hz = 0.3;
    double motion_phase_spread = pi / 2.0;
    double tone_spread = 0.0;
    std::size_t pixel_count = 500;
    double pixel_noise_sigma = 0.0;
    double base_intensity_min = 0.55;
    double base_intensity_max = 0.85;
    std::uint64_t seed = 1;

    double pulse_freq_at(double t) const
    {
        if (pulse_freq.empty())
            throw Error(ErrorCode::InvalidArgument, "synth: pulse frequency trajectory is empty");
        if (t <= pulse_freq.front().t_s)
            return pulse_freq.front().hz;
        for (std::size_t i = 1; i < pulse_freq.size(); ++i) {
            if (t <= pulse_freq[i].t_s) {
                const auto& a = pulse_freq[i - 1];
                const auto& b = pulse_freq[i];
                return a.hz + (b.hz - a.hz) * (t - a.t_s) / (b.t_s - a.t_s);
            }
        }
        return pulse_freq.back().hz;
    }

    /// Phi(t) = integral_0^t 2 pi f(s) ds, exact for the piecewise-linear f.
    double pulse_phase_at(double t) const
    {
        auto seg = [this](double a, double b) {
            // trapezoid is exact for linear f on [a, b]
            return (b - a) * 0.5 * (pulse_freq_at(a) + pulse_freq_at(b));
        };
        double cycles = 0.0;
        double prev = 0.0;
        for (const auto& k : pulse_freq) {
            if (k.t_s <= prev)
                continue;
            if (k.t_s >= t)
                break;
            cycles += seg(prev, k.t_s);
            prev = k.t_s;
        }
        cycles += seg(prev, t);
        return 2.0 * pi * cycles;
    }

    std::size_t frame_count() const
    {
        return static_cast<std::size_t>(std::floor(duration_s * fs + 1e-9));
    }
};

///
/// \brief Streaming generator of PixelSets with a known pulse.
///
/// Deterministic for a given config: per-pixel parameters are drawn first,
/// then noise frame by frame, all from one SplitMix64 seeded with cfg.seed.
///
class SynthScene {
public:
    explicit SynthScene(SynthConfig cfg) : cfg_(std::move(cfg)), rng_(cfg_.seed)
    {
        if (cfg_.pixel_count == 0)
            throw Error(ErrorCode::InvalidArgument, "synth: pixel_count must be positive");
        if (!(cfg_.fs > 0.0) || !(cfg_.duration_s > 0.0))
            throw Error(ErrorCode::InvalidArgument, "synth: fs and duration must be positive");
        if (std::abs(cfg_.skin_tone_dir.norm() - 1.0) > 1e-12) {
            log().warn("synth: skin_tone_dir is not unit length, normalizing");
            cfg_.skin_tone_dir = UnitVec3::normalize(cfg_.skin_tone_dir).vec();
        }
        if (cfg_.pulse_dir) {
            if (std::abs(cfg_.pulse_dir->norm() - 1.0) > 1e-12) {
                log().warn("synth: pulse_dir is not unit length, normalizing");
                cfg_.pulse_dir = UnitVec3::normalize(*cfg_.pulse_dir).vec();
            }
        } else {
            cfg_.pulse_dir = default_pulse_dir(cfg_.skin_tone_dir);
        }
        for (const auto& k : cfg_.pulse_freq)
            if (k.hz < 0.5 || k.hz > 2.5)
                log().warn("synth: pulse frequency {} Hz lies outside 0.5-2.5 Hz", k.hz);

        const Vec3 tilt = cfg_.skin_tone_dir.cross(*cfg_.pulse_dir).normalized();
        base_.resize(cfg_.pixel_count);
        phase_.resize(cfg_.pixel_count);
        tone_.resize(cfg_.pixel_count);
        for (std::size_t i = 0; i < cfg_.pixel_count; ++i) {
            base_[i] = rng_.uniform(cfg_.base_intensity_min, cfg_.base_intensity_max);
            phase_[i] = cfg_.motion_phase_spread * rng_.uniform();
            tone_[i] = (cfg_.skin_tone_dir + cfg_.tone_spread * std::cos(phase_[i]) * tilt).normalized();
        }
    }

    const SynthConfig& config() const { return cfg_; }
    std::size_t frame_count() const { return cfg_.frame_count(); }
    const Vec3& pulse_dir() const { return *cfg_.pulse_dir; }

    std::optional<PixelSet> next()
    {
        if (k_ >= frame_count())
            return std::nullopt;
        const double t = static_cast<double>(k_++) / cfg_.fs;
        const double pulse = cfg_.pulse_amp * std::sin(cfg_.pulse_phase_at(t));
        const Vec3 pulse_vec = pulse * *cfg_.pulse_dir;
        const double wt = 2.0 * pi * cfg_.motion_gain_freq_hz * t;
        PixelSet ps;
        ps.timestamp_s = t;
        ps.pixels.resize(cfg_.pixel_count);
        for (std::size_t i = 0; i < cfg_.pixel_count; ++i) {
            const double g = 1.0 + cfg_.motion_gain_amp * std::sin(wt + phase_[i]);
            Vec3 p = g * (tone_[i] * base_[i] + pulse_vec);
            if (cfg_.pixel_noise_sigma > 0.0)
                for (int c = 0; c < 3; ++c)
                    p[c] += cfg_.pixel_noise_sigma * rng_.gaussian();
            ps.pixels[i] = p.cwiseMax(0.0).cwiseMin(1.0);
        }
        return ps;
    }

    /// The clean pulse waveform pulse_amp * sin(Phi(t)) at the frame rate.
    RefSignal reference() const
    {
        RefSignal ref;
        ref.fs = cfg_.fs;
        ref.samples.resize(frame_count());
        for (std::size_t k = 0; k < ref.samples.size(); ++k)
            ref.samples[k] = cfg_.pulse_amp * std::sin(cfg_.pulse_phase_at(static_cast<double>(k) / cfg_.fs));
        return ref;
    }

private:
    SynthConfig cfg_;
    SplitMix64 rng_;
    std::vector<double> base_;
    std::vector<double> phase_;
    std::vector<Vec3> tone_;
    std::size_t k_ = 0;
};

/// Lays a PixelSet into an 8-bit frame: pixels fill a near-square grid in row
/// order, unused cells are pure blue (rejected by any skin-chroma box).
inline Frame render_frame(const PixelSet& ps, std::size_t index)
{
    const auto n = ps.pixels.size();
    const int w = std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n)))));
    const int h = std::max(1, static_cast<int>((n + static_cast<std::size_t>(w) - 1) / static_cast<std::size_t>(w)));
    Frame f;
    f.index = index;
    f.timestamp_s = ps.timestamp_s;
    f.width = w;
    f.height = h;
    f.data.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3, 0);
    for (std::size_t i = 0; i < static_cast<std::size_t>(w) * static_cast<std::size_t>(h); ++i) {
        if (i < n) {
            for (int c = 0; c < 3; ++c)
                f.data[3 * i + static_cast<std::size_t>(c)] =
                    static_cast<std::uint8_t>(std::lround(std::clamp(ps.pixels[i][c], 0.0, 1.0) * 255.0));
        } else {
            f.data[3 * i + 2] = 255;
        }
    }
    return f;
}

} // namespace synth
} // namespace ppgi

#endif // PPGI_SYNTH_HPP
