#ifndef PPGI_CONFIG_HPP
#define PPGI_CONFIG_HPP

#include "core.hpp"
#include "csv.hpp"
#include "pipeline.hpp"
#include "synth.hpp"
#include "types.hpp"

#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace ppgi {
namespace config {

///
/// \brief Flat `section.key -> raw value` map read from a TOML-style file.
///
/// Supported subset: `# comments`, `[section]` headers, `key = value` with
/// value a number, `true`/`false`, a quoted string or a `[a, b, ...]` list.
///
class KeyValues {
public:
    static KeyValues parse(std::istream& in, const std::string& name = "<config>")
    {
        KeyValues kv;
        std::string line, section;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::string s(csv::trim(strip_comment(line)));
            if (s.empty())
                continue;
            const auto where = name + ":" + std::to_string(lineno);
            if (s.front() == '[') {
                if (s.back() != ']' || s.size() < 3)
                    throw Error(ErrorCode::Format, where + ": malformed section header");
                section = std::string(csv::trim(s.substr(1, s.size() - 2)));
                continue;
            }
            const auto eq = s.find('=');
            if (eq == std::string::npos)
                throw Error(ErrorCode::Format, where + ": expected key = value");
            const std::string key(csv::trim(s.substr(0, eq)));
            const std::string val(csv::trim(s.substr(eq + 1)));
            if (key.empty() || val.empty())
                throw Error(ErrorCode::Format, where + ": empty key or value");
            kv.set(section.empty() ? key : section + "." + key, val);
        }
        return kv;
    }

    static KeyValues from_file(const std::string& path)
    {
        std::ifstream in(path);
        if (!in)
            throw Error(ErrorCode::Io, "cannot open config file " + path);
        return parse(in, path);
    }

    void set(const std::string& key, const std::string& raw) { values_[key] = raw; }
    const std::map<std::string, std::string>& values() const { return values_; }

    /// Overlays `other` on top of this map.
    void merge(const KeyValues& other)
    {
        for (const auto& [k, v] : other.values_)
            values_[k] = v;
    }

private:
    static std::string strip_comment(const std::string& line)
    {
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"')
                quoted = !quoted;
            else if (line[i] == '#' && !quoted)
                return line.substr(0, i);
        }
        return line;
    }

    std::map<std::string, std::string> values_;
};

inline std::string as_string(const std::string& key, const std::string& raw)
{
    if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"')
        return raw.substr(1, raw.size() - 2);
    if (raw.find_first_of("\"[]") != std::string::npos)
        throw Error(ErrorCode::Format, key + ": malformed string '" + raw + "'");
    return raw;
}

inline double as_double(const std::string& key, const std::string& raw)
{
    double v = 0.0;
    if (!csv::parse_double(as_string(key, raw), v))
        throw Error(ErrorCode::Format, key + ": expected a number, got '" + raw + "'");
    return v;
}

inline long long as_long(const std::string& key, const std::string& raw)
{
    long long v = 0;
    if (!csv::parse_long(as_string(key, raw), v))
        throw Error(ErrorCode::Format, key + ": expected an integer, got '" + raw + "'");
    return v;
}

inline std::size_t as_size(const std::string& key, const std::string& raw)
{
    const long long v = as_long(key, raw);
    if (v < 0)
        throw Error(ErrorCode::InvalidArgument, key + ": must be non-negative");
    return static_cast<std::size_t>(v);
}

inline bool as_bool(const std::string& key, const std::string& raw)
{
    const auto s = as_string(key, raw);
    if (s == "true" || s == "on" || s == "1")
        return true;
    if (s == "false" || s == "off" || s == "0")
        return false;
    throw Error(ErrorCode::Format, key + ": expected true/false, got '" + raw + "'");
}

/// `[a, b, c]` or a bare comma-separated string.
inline std::vector<std::string> as_list(const std::string& key, const std::string& raw)
{
    std::string body = raw;
    if (!body.empty() && body.front() == '[') {
        if (body.back() != ']')
            throw Error(ErrorCode::Format, key + ": unterminated list");
        body = body.substr(1, body.size() - 2);
    } else {
        body = as_string(key, raw);
    }
    std::vector<std::string> out;
    if (csv::trim(body).empty())
        return out;
    for (const auto& item : csv::split(body, ','))
        out.push_back(as_string(key, std::string(csv::trim(item))));
    return out;
}

inline Vec3 as_vec3(const std::string& key, const std::string& raw)
{
    const auto items = as_list(key, raw);
    if (items.size() != 3)
        throw Error(ErrorCode::Format, key + ": expected 3 components");
    Vec3 v;
    for (int i = 0; i < 3; ++i)
        v(i) = as_double(key, items[static_cast<std::size_t>(i)]);
    return v;
}

/// `t:hz` knots, e.g. `["0:1.0", "60:1.5"]`.
inline std::vector<synth::FreqKnot> as_knots(const std::string& key, const std::string& raw)
{
    std::vector<synth::FreqKnot> knots;
    for (const auto& item : as_list(key, raw)) {
        const auto c = item.find(':');
        if (c == std::string::npos)
            throw Error(ErrorCode::Format, key + ": knot '" + item + "' is not t:hz");
        knots.push_back({as_double(key, item.substr(0, c)), as_double(key, item.substr(c + 1))});
    }
    if (knots.empty())
        throw Error(ErrorCode::InvalidArgument, key + ": empty trajectory");
    return knots;
}

inline std::vector<Operator> as_operators(const std::string& key, const std::string& raw)
{
    std::vector<Operator> ops;
    for (const auto& s : as_list(key, raw))
        ops.push_back(parse_operator(s));
    return ops;
}

/// Everything a CLI run can be configured with.
struct Settings {
    PipelineConfig pipeline;
    synth::SynthConfig synth;
    std::vector<Operator> operators{std::begin(all_operators), std::end(all_operators)};
    std::string frames_dir;
    std::string roi_path;
    std::string trace_path;
    std::string ref_path;
    std::string out_dir = "out";
    std::string dataset = "synthetic";
    std::string subject = "s0";
    std::vector<double> amp_sweep;
};

using Setter = std::function<void(Settings&, const std::string& key, const std::string& raw)>;

inline const std::map<std::string, Setter>& setters()
{
    static const std::map<std::string, Setter> table = [] {
        std::map<std::string, Setter> t;
#define PPGI_KEY(name, ...) t[name] = [](Settings & s, const std::string& k, const std::string& v) { __VA_ARGS__; }
        PPGI_KEY("input.frames", s.frames_dir = as_string(k, v));
        PPGI_KEY("input.roi", s.roi_path = as_string(k, v));
        PPGI_KEY("input.trace", s.trace_path = as_string(k, v));
        PPGI_KEY("input.ref", s.ref_path = as_string(k, v));
        PPGI_KEY("output.dir", s.out_dir = as_string(k, v));
        PPGI_KEY("run.operators", s.operators = as_operators(k, v));
        PPGI_KEY("run.dataset", s.dataset = as_string(k, v));
        PPGI_KEY("run.subject", s.subject = as_string(k, v));
        PPGI_KEY("run.resonator", s.pipeline.use_resonator = as_bool(k, v));

        PPGI_KEY("skin.cb_min", s.pipeline.skin.cb_min = as_double(k, v));
        PPGI_KEY("skin.cb_max", s.pipeline.skin.cb_max = as_double(k, v));
        PPGI_KEY("skin.cr_min", s.pipeline.skin.cr_min = as_double(k, v));
        PPGI_KEY("skin.cr_max", s.pipeline.skin.cr_max = as_double(k, v));

        PPGI_KEY("features.pooling", s.pipeline.pooling = features::parse_sphere_method(as_string(k, v)));

        PPGI_KEY("operators.lgi_window", s.pipeline.lgi.window = as_size(k, v));
        PPGI_KEY("operators.lgi_covariance", {
            const auto c = as_string(k, v);
            if (c == "sample")
                s.pipeline.lgi.covariance = operators::CovarianceKind::Sample;
            else if (c == "first_difference")
                s.pipeline.lgi.covariance = operators::CovarianceKind::FirstDifference;
            else
                throw Error(ErrorCode::InvalidArgument, k + ": expected sample or first_difference");
        });
        PPGI_KEY("operators.lgi_channel", {
            const auto c = as_string(k, v);
            if (c == "green")
                s.pipeline.lgi.channel = operators::LgiChannel::Green;
            else if (c == "snr_best")
                s.pipeline.lgi.channel = operators::LgiChannel::SnrBest;
            else
                throw Error(ErrorCode::InvalidArgument, k + ": expected green or snr_best");
        });
        PPGI_KEY("operators.pos_window", s.pipeline.pos.window = as_size(k, v));
        PPGI_KEY("operators.ssr_window", s.pipeline.ssr.window = as_size(k, v));

        PPGI_KEY("spectral.band_lo_hz", s.pipeline.spectral.band_lo_hz = as_double(k, v));
        PPGI_KEY("spectral.band_hi_hz", s.pipeline.spectral.band_hi_hz = as_double(k, v));
        PPGI_KEY("spectral.filter_order", s.pipeline.spectral.filter_order = static_cast<int>(as_long(k, v)));
        PPGI_KEY("spectral.win", s.pipeline.spectral.win = as_size(k, v));
        PPGI_KEY("spectral.overlap", s.pipeline.spectral.overlap = as_double(k, v));
        PPGI_KEY("spectral.nfft", s.pipeline.spectral.nfft = as_size(k, v));

        PPGI_KEY("resonator.n_harmonics", s.pipeline.resonator.n_harmonics = static_cast<int>(as_long(k, v)));
        PPGI_KEY("resonator.q_osc", s.pipeline.resonator.q_osc = as_double(k, v));
        PPGI_KEY("resonator.q_drift", s.pipeline.resonator.q_drift = as_double(k, v));
        PPGI_KEY("resonator.r_meas", s.pipeline.resonator.r_meas = as_double(k, v));
        PPGI_KEY("resonator.f_init_hz", s.pipeline.resonator.f_init_hz = as_double(k, v));
        PPGI_KEY("resonator.f_lo_hz", s.pipeline.resonator.f_lo_hz = as_double(k, v));
        PPGI_KEY("resonator.f_hi_hz", s.pipeline.resonator.f_hi_hz = as_double(k, v));
        PPGI_KEY("resonator.p0", s.pipeline.resonator.p0 = as_double(k, v));
        PPGI_KEY("resonator.smoothing_tau_s", s.pipeline.resonator.smoothing_tau_s = as_double(k, v));

        PPGI_KEY("synth.duration_s", s.synth.duration_s = as_double(k, v));
        PPGI_KEY("synth.fs", s.synth.fs = as_double(k, v));
        PPGI_KEY("synth.pulse_freq_hz", s.synth.pulse_freq = {{0.0, as_double(k, v)}});
        PPGI_KEY("synth.pulse_freq_knots", s.synth.pulse_freq = as_knots(k, v));
        PPGI_KEY("synth.pulse_amp", s.synth.pulse_amp = as_double(k, v));
        PPGI_KEY("synth.skin_tone_dir", s.synth.skin_tone_dir = as_vec3(k, v));
        PPGI_KEY("synth.pulse_dir", s.synth.pulse_dir = as_vec3(k, v));
        PPGI_KEY("synth.motion_gain_amp", s.synth.motion_gain_amp = as_double(k, v));
        PPGI_KEY("synth.motion_gain_freq_hz", s.synth.motion_gain_freq_hz = as_double(k, v));
        PPGI_KEY("synth.motion_phase_spread", s.synth.motion_phase_spread = as_double(k, v));
        PPGI_KEY("synth.tone_spread", s.synth.tone_spread = as_double(k, v));
        PPGI_KEY("synth.pixel_count", s.synth.pixel_count = as_size(k, v));
        PPGI_KEY("synth.pixel_noise_sigma", s.synth.pixel_noise_sigma = as_double(k, v));
        PPGI_KEY("synth.base_intensity_min", s.synth.base_intensity_min = as_double(k, v));
        PPGI_KEY("synth.base_intensity_max", s.synth.base_intensity_max = as_double(k, v));
        PPGI_KEY("synth.seed", s.synth.seed = static_cast<std::uint64_t>(as_long(k, v)));
        PPGI_KEY("synth.amp_sweep", {
            s.amp_sweep.clear();
            for (const auto& a : as_list(k, v))
                s.amp_sweep.push_back(as_double(k, a));
        });
#undef PPGI_KEY
        return t;
    }();
    return table;
}

/// Applies every key of `kv` to `s`; unknown keys are an error.
inline void apply(const KeyValues& kv, Settings& s)
{
    const auto& t = setters();
    for (const auto& [k, v] : kv.values()) {
        const auto it = t.find(k);
        if (it == t.end())
            throw Error(ErrorCode::InvalidArgument, "unknown config key '" + k + "'");
        it->second(s, k, v);
    }
}

/// Defaults, then the file (if any), then the overrides.
inline Settings resolve(const std::string& file, const KeyValues& overrides)
{
    Settings s;
    KeyValues kv;
    if (!file.empty())
        kv = KeyValues::from_file(file);
    kv.merge(overrides);
    apply(kv, s);
    return s;
}

} // namespace config
} // namespace ppgi

#endif // PPGI_CONFIG_HPP
