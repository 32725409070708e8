#ifndef PPGI_PIPELINE_HPP
#define PPGI_PIPELINE_HPP

#include "core.hpp"
#include "csv.hpp"
#include "features.hpp"
#include "ingest.hpp"
#include "log.hpp"
#include "operators.hpp"
#include "resonator.hpp"
#include "skin.hpp"
#include "spectral.hpp"
#include "synth.hpp"
#include "types.hpp"

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

namespace ppgi {

/// Everything downstream of the pixel stream.
struct PipelineConfig {
    spectral::SpectralParams spectral;
    resonator::ResonatorConfig resonator;
    bool use_resonator = false;
    operators::LgiOptions lgi;
    operators::PosOptions pos;
    operators::SsrOptions ssr;
    features::SphereMethod pooling = features::SphereMethod::EuclidRenorm;
    skin::ChromaThresholds skin;
};

/// Skin pixels of a frame sequence, one PixelSet per frame.
class MaskedFrameSource {
public:
    MaskedFrameSource(ingest::FrameSequence& frames, ingest::RoiTrack roi, skin::ChromaThresholds th)
        : frames_(frames), roi_(std::move(roi)), th_(th)
    {
        th_.validate();
    }

    std::optional<PixelSet> next()
    {
        auto f = frames_.next();
        if (!f)
            return std::nullopt;
        return skin::skin_mask(*f, roi_.at(f->index), th_);
    }

private:
    ingest::FrameSequence& frames_;
    ingest::RoiTrack roi_;
    skin::ChromaThresholds th_;
};

/// Per-frame pooled observations gathered in one pass over a pixel stream.
struct Observations {
    RgbTrace rgb;
    std::optional<SphereTrace> sphere;
    std::optional<std::vector<operators::Eigenframe>> eigenframes;
    std::size_t empty_frames = 0;
};

///
/// \brief Pools every PixelSet of a stream (mean, sphere, SSR eigenframe).
///
/// Empty frames are flagged and hold the previous pooled value. Throws
/// EmptyMask when more than half of the frames are empty.
///
template <operators::PixelSource Source>
Observations collect_observations(Source& src, double fs,
                                  features::SphereMethod method = features::SphereMethod::EuclidRenorm)
{
    Observations obs;
    obs.rgb.fs = fs;
    SphereTrace sphere;
    sphere.fs = fs;
    std::vector<operators::Eigenframe> eig;
    while (auto ps = src.next()) {
        auto m = features::pool_mean(*ps);
        auto u = features::pool_sphere(*ps, method);
        obs.rgb.samples.push_back(m.value_or(Vec3::Zero()));
        obs.rgb.valid.push_back(m.has_value());
        sphere.samples.push_back(u.value_or(UnitVec3()));
        sphere.valid.push_back(u.has_value());
        eig.push_back(operators::ssr_eigenframe(*ps));
        if (!m)
            ++obs.empty_frames;
    }
    if (obs.rgb.size() == 0)
        throw Error(ErrorCode::InsufficientData, "pixel stream is empty");
    if (2 * obs.empty_frames > obs.rgb.size())
        throw Error(ErrorCode::EmptyMask, std::to_string(obs.empty_frames) + " of " + std::to_string(obs.rgb.size()) +
                                              " frames have an empty skin mask");
    if (obs.empty_frames > 0)
        log().info("{} frames with empty skin mask, holding last value", obs.empty_frames);
    features::hold_last_value(obs.rgb.samples, obs.rgb.valid);
    features::hold_last_value(sphere.samples, sphere.valid);
    obs.sphere = std::move(sphere);
    obs.eigenframes = std::move(eig);
    return obs;
}

inline Observations observations_from_trace(RgbTrace tr)
{
    Observations obs;
    obs.rgb = std::move(tr);
    return obs;
}

inline PulseTrace run_operator(Operator op, const Observations& obs, const PipelineConfig& cfg)
{
    switch (op) {
    case Operator::Green:
        return operators::op_green(obs.rgb);
    case Operator::Lgi:
        return operators::op_lgi(obs.rgb, cfg.lgi);
    case Operator::Pos:
        return operators::op_pos(obs.rgb, cfg.pos);
    case Operator::Ssr: {
        if (!obs.eigenframes)
            throw Error(ErrorCode::InvalidArgument, "SSR needs per-pixel input (frames or a synthetic scene)");
        auto p = operators::op_ssr_from_eigenframes(*obs.eigenframes, obs.rgb.fs, cfg.ssr);
        p.t0 = obs.rgb.t0;
        return p;
    }
    case Operator::Sph: {
        if (!obs.sphere)
            throw Error(ErrorCode::InvalidArgument, "SPH needs per-pixel input (frames or a synthetic scene)");
        return operators::op_sph_from_sphere(*obs.sphere).pulse;
    }
    }
    throw Error(ErrorCode::InvalidArgument, "unknown operator");
}

/// Marks windows that contain a run of more than one second of held samples.
inline void invalidate_empty_runs(spectral::HrSeries& hr, const std::vector<bool>& valid, double fs,
                                  const spectral::SpectralParams& p)
{
    if (valid.empty())
        return;
    const auto max_run = static_cast<std::size_t>(std::lround(fs));
    const std::size_t hop = p.hop();
    for (std::size_t w = 0; w < hr.size(); ++w) {
        const std::size_t start = w * hop;
        std::size_t run = 0;
        for (std::size_t k = start; k < std::min(valid.size(), start + p.win); ++k) {
            run = valid[k] ? 0 : run + 1;
            if (run > max_run) {
                hr.valid[w] = false;
                break;
            }
        }
    }
}

struct Estimate {
    PulseTrace pulse;
    /// Band-passed (and, when enabled, resonator-filtered) pulse.
    PulseTrace filtered;
    spectral::HrSeries hr;
};

///
/// \brief Band-pass, STFT and peak picking of a pulse trace. With the
/// resonator enabled, the first HR estimate steers the tracker and the
/// spectrum is recomputed on its output.
///
inline Estimate estimate_hr(const PulseTrace& pulse, const PipelineConfig& cfg)
{
    const auto& p = cfg.spectral;
    Estimate e;
    e.pulse = pulse;
    e.filtered = pulse;
    e.filtered.samples = spectral::bandpass(pulse.samples, pulse.fs, p.band_lo_hz, p.band_hi_hz, p.filter_order);
    auto sg = spectral::stft(e.filtered.samples, pulse.fs, p, pulse.t0);
    e.hr = spectral::peak_hr(sg, p.band_lo_hz, p.band_hi_hz);
    if (cfg.use_resonator) {
        e.filtered = resonator::track(e.filtered, e.hr, cfg.resonator);
        sg = spectral::stft(e.filtered.samples, pulse.fs, p, pulse.t0);
        e.hr = spectral::peak_hr(sg, p.band_lo_hz, p.band_hi_hz);
    }
    invalidate_empty_runs(e.hr, pulse.valid, pulse.fs, p);
    return e;
}

/// CSV `t,bpm,confidence,valid`.
inline void write_hr_csv(const std::string& path, const spectral::HrSeries& hr)
{
    auto out = csv::open_out(path);
    out << "t,bpm,confidence,valid\n";
    for (std::size_t i = 0; i < hr.size(); ++i)
        out << csv::fmt(hr.times[i]) << ',' << csv::fmt(hr.bpm[i]) << ',' << csv::fmt(hr.confidence[i]) << ','
            << (hr.valid[i] ? 1 : 0) << '\n';
}

/// CSV `t,pulse,filtered,valid`.
inline void write_pulse_csv(const std::string& path, const Estimate& e)
{
    auto out = csv::open_out(path);
    out << "t,pulse,filtered,valid\n";
    for (std::size_t k = 0; k < e.pulse.size(); ++k)
        out << csv::fmt(e.pulse.t0 + static_cast<double>(k) / e.pulse.fs) << ',' << csv::fmt(e.pulse.samples[k]) << ','
            << csv::fmt(e.filtered.samples[k]) << ',' << (k < e.pulse.valid.size() && !e.pulse.valid[k] ? 0 : 1)
            << '\n';
}

/// Median of the valid window estimates; nullopt when none is valid.
inline std::optional<double> median_bpm(const spectral::HrSeries& hr)
{
    std::vector<double> v;
    for (std::size_t i = 0; i < hr.size(); ++i)
        if (hr.valid[i])
            v.push_back(hr.bpm[i]);
    if (v.empty())
        return std::nullopt;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

} // namespace ppgi

#endif // PPGI_PIPELINE_HPP
