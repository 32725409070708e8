#ifndef PPGI_INGEST_HPP
#define PPGI_INGEST_HPP

#include "core.hpp"
#include "csv.hpp"
#include "log.hpp"
#include "types.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ppgi {
namespace ingest {

namespace fs = std::filesystem;

/// A per-frame read failure; carries the frame index.
class FrameError : public Error {
public:
    FrameError(ErrorCode code, std::size_t index, const std::string& what)
        : Error(code, "frame " + std::to_string(index) + ": " + what), index_(index) {}

    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

// ---------------------------------------------------------------------------
// Binary PPM (P6)

namespace detail {

inline void skip_ws_and_comments(std::istream& in)
{
    while (true) {
        const int c = in.peek();
        if (c == '#') {
            std::string dummy;
            std::getline(in, dummy);
        } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') {
            in.get();
        } else {
            return;
        }
    }
}

inline bool read_header_int(std::istream& in, long& v)
{
    skip_ws_and_comments(in);
    if (!std::isdigit(in.peek()))
        return false;
    v = 0;
    while (std::isdigit(in.peek())) {
        v = v * 10 + (in.get() - '0');
        if (v > 1 << 24)
            return false;
    }
    return true;
}

} // namespace detail

/// Decodes a binary P6 image. 16-bit samples (maxval > 255) are big-endian;
/// any maxval other than 255 is rescaled to 8 bits by rounding.
inline Frame read_ppm(std::istream& in, const std::string& name = "<stream>")
{
    char magic[2] = {0, 0};
    in.read(magic, 2);
    if (!in || magic[0] != 'P' || magic[1] != '6')
        throw Error(ErrorCode::Format, name + ": not a binary PPM (P6)");
    long w = 0, h = 0, maxval = 0;
    if (!detail::read_header_int(in, w) || !detail::read_header_int(in, h) || !detail::read_header_int(in, maxval))
        throw Error(ErrorCode::Format, name + ": malformed PPM header");
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
        throw Error(ErrorCode::Format, name + ": invalid PPM dimensions or maxval");
    const int sep = in.get();
    if (sep != ' ' && sep != '\n' && sep != '\r' && sep != '\t')
        throw Error(ErrorCode::Format, name + ": missing whitespace after PPM header");

    Frame f;
    f.width = static_cast<int>(w);
    f.height = static_cast<int>(h);
    const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3;
    f.data.resize(n);
    if (maxval < 256) {
        in.read(reinterpret_cast<char*>(f.data.data()), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in.gcount()) != n)
            throw Error(ErrorCode::Format, name + ": truncated PPM pixel data");
        if (maxval != 255)
            for (auto& v : f.data)
                v = static_cast<std::uint8_t>(std::lround(std::min<long>(v, maxval) * 255.0 / static_cast<double>(maxval)));
    } else {
        std::vector<unsigned char> raw(2 * n);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (static_cast<std::size_t>(in.gcount()) != raw.size())
            throw Error(ErrorCode::Format, name + ": truncated PPM pixel data");
        for (std::size_t i = 0; i < n; ++i) {
            const long v = std::min<long>((raw[2 * i] << 8) | raw[2 * i + 1], maxval);
            f.data[i] = static_cast<std::uint8_t>(std::lround(v * 255.0 / static_cast<double>(maxval)));
        }
    }
    return f;
}

inline Frame read_ppm(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::Io, "cannot open " + path.string());
    return read_ppm(in, path.string());
}

inline void write_ppm(std::ostream& out, const Frame& f)
{
    if (f.data.size() != static_cast<std::size_t>(f.width) * static_cast<std::size_t>(f.height) * 3)
        throw Error(ErrorCode::Dimension, "write_ppm: data size does not match width*height*3");
    out << "P6\n" << f.width << ' ' << f.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(f.data.data()), static_cast<std::streamsize>(f.data.size()));
}

inline void write_ppm(const fs::path& path, const Frame& f)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(ErrorCode::Io, "cannot write " + path.string());
    write_ppm(out, f);
}

// ---------------------------------------------------------------------------
// Frame directories

/// Sidecar meta.json: {"fps": <float>, "count": <int>}.
struct FrameMeta {
    double fps = 0.0;
    std::size_t count = 0;
};

inline FrameMeta read_meta(const fs::path& dir)
{
    const auto path = dir / "meta.json";
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::Io, "missing " + path.string());
    FrameMeta m;
    try {
        const auto j = nlohmann::json::parse(in);
        m.fps = j.at("fps").get<double>();
        m.count = j.at("count").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Format, path.string() + ": " + e.what());
    }
    if (!(m.fps > 0.0) || !std::isfinite(m.fps))
        throw Error(ErrorCode::Format, path.string() + ": fps must be positive");
    return m;
}

inline void write_meta(const fs::path& dir, const FrameMeta& m)
{
    nlohmann::json j;
    j["fps"] = m.fps;
    j["count"] = m.count;
    std::ofstream out(dir / "meta.json", std::ios::trunc);
    if (!out)
        throw Error(ErrorCode::Io, "cannot write " + (dir / "meta.json").string());
    out << j.dump() << "\n";
}

///
/// \brief Single-pass stream over a directory of numbered image files.
///
/// File stems must end in a decimal frame index (e.g. 000042.ppm or
/// frame_0042.ppm). Only one decoded frame is held at a time.
///
class FrameSequence {
public:
    FrameSequence(const fs::path& dir, const std::string& format_tag = "ppm") : dir_(dir)
    {
        if (format_tag != "ppm")
            throw Error(ErrorCode::InvalidArgument, "unsupported frame format '" + format_tag + "' (supported: ppm)");
        if (!fs::is_directory(dir))
            throw Error(ErrorCode::Io, "not a directory: " + dir.string());
        meta_ = read_meta(dir);
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (!entry.is_regular_file() || entry.path().extension() != ".ppm")
                continue;
            const std::string stem = entry.path().stem().string();
            std::size_t pos = stem.size();
            while (pos > 0 && std::isdigit(static_cast<unsigned char>(stem[pos - 1])))
                --pos;
            if (pos == stem.size())
                continue;
            files_[std::stoull(stem.substr(pos))] = entry.path();
        }
        if (files_.empty())
            throw Error(ErrorCode::Io, "no frames found in " + dir.string());
        first_ = files_.begin()->first;
        count_ = meta_.count > 0 ? meta_.count : files_.rbegin()->first - first_ + 1;
    }

    double fps() const { return meta_.fps; }
    std::size_t count() const { return count_; }

    /// Next frame in index order, or nullopt at the end. Throws FrameError
    /// for a missing or corrupt file and a Dimension error when the size
    /// changes mid-stream.
    std::optional<Frame> next()
    {
        if (pos_ >= count_)
            return std::nullopt;
        const std::size_t ordinal = pos_++;
        const std::size_t index = first_ + ordinal;
        const auto it = files_.find(index);
        if (it == files_.end())
            throw FrameError(ErrorCode::Io, index, "missing file");
        Frame f;
        try {
            f = read_ppm(it->second);
        } catch (const Error& e) {
            throw FrameError(e.code(), index, e.what());
        }
        if (width_ == 0) {
            width_ = f.width;
            height_ = f.height;
        } else if (f.width != width_ || f.height != height_) {
            throw Error(ErrorCode::Dimension, "frame " + std::to_string(index) + ": dimensions " +
                                                  std::to_string(f.width) + "x" + std::to_string(f.height) +
                                                  " differ from " + std::to_string(width_) + "x" +
                                                  std::to_string(height_));
        }
        f.index = ordinal;
        f.timestamp_s = static_cast<double>(ordinal) / meta_.fps;
        return f;
    }

private:
    fs::path dir_;
    FrameMeta meta_;
    std::map<std::size_t, fs::path> files_;
    std::size_t first_ = 0;
    std::size_t count_ = 0;
    std::size_t pos_ = 0;
    int width_ = 0;
    int height_ = 0;
};

inline std::string frame_filename(std::size_t index)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%06zu.ppm", index);
    return buf;
}

// ---------------------------------------------------------------------------
// ROI tracks

/// Per-frame boxes; frames without an entry use the last known box (or the
/// first box for frames before it).
class RoiTrack {
public:
    RoiTrack() = default;
    explicit RoiTrack(std::map<std::size_t, Box> boxes) : boxes_(std::move(boxes)) {}

    void set(std::size_t frame, const Box& b) { boxes_[frame] = b; }
    bool empty() const { return boxes_.empty(); }
    std::size_t size() const { return boxes_.size(); }

    Box at(std::size_t frame) const
    {
        if (boxes_.empty())
            throw Error(ErrorCode::InvalidArgument, "empty ROI track");
        auto it = boxes_.upper_bound(frame);
        if (it == boxes_.begin())
            return it->second;
        return std::prev(it)->second;
    }

    const std::map<std::size_t, Box>& boxes() const { return boxes_; }

private:
    std::map<std::size_t, Box> boxes_;
};

/// CSV `frame,x,y,w,h`.
inline RoiTrack read_roi_csv(const std::string& path)
{
    const auto t = csv::read_numeric(path, {"frame", "x", "y", "w", "h"});
    RoiTrack track;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& r = t.rows[i];
        for (double v : r)
            if (v != std::floor(v) || v < 0)
                throw Error(ErrorCode::Format, path + ": line " + std::to_string(t.lines[i]) +
                                                   ": ROI fields must be non-negative integers");
        Box b{static_cast<int>(r[1]), static_cast<int>(r[2]), static_cast<int>(r[3]), static_cast<int>(r[4])};
        if (b.w <= 0 || b.h <= 0)
            throw Error(ErrorCode::Format, path + ": line " + std::to_string(t.lines[i]) + ": empty box");
        track.set(static_cast<std::size_t>(r[0]), b);
    }
    if (track.empty())
        throw Error(ErrorCode::Format, path + ": no ROI rows");
    return track;
}

inline void write_roi_csv(const std::string& path, const RoiTrack& track)
{
    auto out = csv::open_out(path);
    out << "frame,x,y,w,h\n";
    for (const auto& [frame, b] : track.boxes())
        out << frame << ',' << b.x << ',' << b.y << ',' << b.w << ',' << b.h << '\n';
}

// ---------------------------------------------------------------------------
// Time series CSVs

/// Samples on a uniform grid built from possibly jittered time stamps.
struct UniformSeries {
    double fs = 0.0;
    double t0 = 0.0;
    std::vector<std::vector<double>> columns;
};

///
/// \brief Puts irregularly stamped columns on a uniform grid.
///
/// fs is 1 / median(dt). When every dt is within 1e-9 s of 1/fs the samples
/// are kept as-is; otherwise each column is linearly interpolated at
/// t0 + k/fs for k = 0 .. floor((t_end - t0) * fs).
///
inline UniformSeries uniformize(std::span<const double> t, const std::vector<std::vector<double>>& cols,
                                const std::string& what)
{
    if (t.size() < 2)
        throw Error(ErrorCode::InsufficientData, what + ": need at least 2 rows");
    std::vector<double> dt(t.size() - 1);
    for (std::size_t i = 1; i < t.size(); ++i) {
        dt[i - 1] = t[i] - t[i - 1];
        if (!(dt[i - 1] > 0.0))
            throw Error(ErrorCode::Format, what + ": time stamps not strictly increasing at row " + std::to_string(i + 1));
    }
    auto sorted = dt;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
    double med = sorted[sorted.size() / 2];
    if (sorted.size() % 2 == 0) {
        const double lower = *std::max_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2));
        med = 0.5 * (med + lower);
    }
    UniformSeries u;
    u.fs = 1.0 / med;
    u.t0 = t[0];
    const bool uniform = std::all_of(dt.begin(), dt.end(), [&](double d) { return std::abs(d - med) <= 1e-9; });
    if (uniform) {
        u.columns = cols;
        return u;
    }
    const auto n = static_cast<std::size_t>(std::floor((t.back() - t.front()) * u.fs + 1e-9)) + 1;
    u.columns.assign(cols.size(), std::vector<double>(n));
    std::size_t j = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double tk = std::min(u.t0 + static_cast<double>(k) / u.fs, t.back());
        while (j + 2 < t.size() && t[j + 1] < tk)
            ++j;
        const double a = (tk - t[j]) / (t[j + 1] - t[j]);
        for (std::size_t c = 0; c < cols.size(); ++c)
            u.columns[c][k] = cols[c][j] + a * (cols[c][j + 1] - cols[c][j]);
    }
    return u;
}

/// CSV `t,r,g,b` to a uniform RgbTrace.
inline RgbTrace read_trace_csv(const std::string& path)
{
    const auto tab = csv::read_numeric(path, {"t", "r", "g", "b"});
    std::vector<double> t;
    std::vector<std::vector<double>> cols(3);
    for (const auto& r : tab.rows) {
        t.push_back(r[0]);
        for (int c = 0; c < 3; ++c)
            cols[static_cast<std::size_t>(c)].push_back(r[static_cast<std::size_t>(c) + 1]);
    }
    const auto u = uniformize(t, cols, path);
    RgbTrace tr;
    tr.fs = u.fs;
    tr.t0 = u.t0;
    const std::size_t n = u.columns[0].size();
    tr.samples.resize(n);
    for (std::size_t k = 0; k < n; ++k)
        tr.samples[k] = Vec3(u.columns[0][k], u.columns[1][k], u.columns[2][k]);
    tr.valid.assign(n, true);
    return tr;
}

inline void write_trace_csv(const std::string& path, const RgbTrace& tr)
{
    auto out = csv::open_out(path);
    out << "t,r,g,b\n";
    for (std::size_t k = 0; k < tr.size(); ++k) {
        const auto& v = tr.samples[k];
        out << csv::fmt(tr.t0 + static_cast<double>(k) / tr.fs) << ',' << csv::fmt(v.x()) << ',' << csv::fmt(v.y())
            << ',' << csv::fmt(v.z()) << '\n';
    }
}

/// CSV `t,ppg` to a uniform RefSignal.
inline RefSignal read_ref_csv(const std::string& path)
{
    const auto tab = csv::read_numeric(path, {"t", "ppg"});
    std::vector<double> t;
    std::vector<std::vector<double>> cols(1);
    for (const auto& r : tab.rows) {
        t.push_back(r[0]);
        cols[0].push_back(r[1]);
    }
    const auto u = uniformize(t, cols, path);
    RefSignal ref;
    ref.fs = u.fs;
    ref.t0 = u.t0;
    ref.samples = u.columns[0];
    return ref;
}

inline void write_ref_csv(const std::string& path, const RefSignal& ref)
{
    auto out = csv::open_out(path);
    out << "t,ppg\n";
    for (std::size_t k = 0; k < ref.samples.size(); ++k)
        out << csv::fmt(ref.t0 + static_cast<double>(k) / ref.fs) << ',' << csv::fmt(ref.samples[k]) << '\n';
}

} // namespace ingest
} // namespace ppgi

#endif // PPGI_INGEST_HPP
