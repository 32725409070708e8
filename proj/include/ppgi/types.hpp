#ifndef PPGI_TYPES_HPP
#define PPGI_TYPES_HPP

#include "core.hpp"

#include <cctype>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace ppgi {

/// One decoded image, 8-bit RGB, row-major.
struct Frame {
    std::size_t index = 0;
    double timestamp_s = 0.0;
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    const std::uint8_t* pixel(int x, int y) const
    {
        return data.data() + 3 * (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x));
    }
};

/// Axis-aligned region of interest in pixel coordinates.
struct Box {
    int x = 0, y = 0, w = 0, h = 0;

    bool inside(int width, int height) const
    {
        return x >= 0 && y >= 0 && w > 0 && h > 0 && x + w <= width && y + h <= height;
    }
};

/// Skin pixels of one frame, channels scaled to [0, 1].
struct PixelSet {
    double timestamp_s = 0.0;
    std::vector<Vec3> pixels;

    bool empty() const { return pixels.empty(); }
};

/// Reference contact PPG.
struct RefSignal {
    std::vector<double> samples;
    double fs = 0.0;
    double t0 = 0.0;
};

/// Pooled RGB observations at a fixed rate; valid[k] is false where the skin
/// mask was empty and the value was held from a neighbour.
struct RgbTrace {
    std::vector<Vec3> samples;
    std::vector<bool> valid;
    double fs = 0.0;
    double t0 = 0.0;

    std::size_t size() const { return samples.size(); }
};

/// Pooled unit-sphere observations.
struct SphereTrace {
    std::vector<UnitVec3> samples;
    std::vector<bool> valid;
    double fs = 0.0;
    double t0 = 0.0;

    std::size_t size() const { return samples.size(); }
};

/// Spherical angles of a SphereTrace with phi unwrapped.
struct AngleTrace {
    std::vector<double> theta;
    std::vector<double> phi;
    double fs = 0.0;
    double t0 = 0.0;
};

enum class Operator { Green, Ssr, Pos, Lgi, Sph };

inline constexpr Operator all_operators[] = {Operator::Green, Operator::Ssr, Operator::Pos, Operator::Lgi,
                                             Operator::Sph};

inline const char* to_string(Operator op)
{
    switch (op) {
    case Operator::Green: return "Green";
    case Operator::Ssr: return "SSR";
    case Operator::Pos: return "POS";
    case Operator::Lgi: return "LGI";
    case Operator::Sph: return "SPH";
    }
    return "?";
}

inline Operator parse_operator(std::string s)
{
    for (auto& c : s)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (s == "green")
        return Operator::Green;
    if (s == "ssr")
        return Operator::Ssr;
    if (s == "pos")
        return Operator::Pos;
    if (s == "lgi")
        return Operator::Lgi;
    if (s == "sph")
        return Operator::Sph;
    throw Error(ErrorCode::InvalidArgument, "unknown operator '" + s + "'");
}

/// Candidate blood-volume-pulse signal.
struct PulseTrace {
    std::vector<double> samples;
    std::vector<bool> valid;
    double fs = 0.0;
    double t0 = 0.0;
    Operator op = Operator::Green;

    std::size_t size() const { return samples.size(); }
};

} // namespace ppgi

#endif // PPGI_TYPES_HPP
