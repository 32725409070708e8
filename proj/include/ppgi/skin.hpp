#ifndef PPGI_SKIN_HPP
#define PPGI_SKIN_HPP

#include "core.hpp"
#include "log.hpp"
#include "types.hpp"

#include <algorithm>
#include <string>

namespace ppgi {
namespace skin {

struct YCbCr {
    double y = 0.0;
    double cb = 128.0;
    double cr = 128.0;
};

/// Chroma box on the [0, 255] scale; bounds are inclusive.
struct ChromaThresholds {
    double cb_min = 77.0;
    double cb_max = 127.0;
    double cr_min = 133.0;
    double cr_max = 173.0;

    void validate() const
    {
        if (!(cb_min < cb_max) || !(cr_min < cr_max))
            throw Error(ErrorCode::InvalidArgument, "chroma thresholds need min < max per channel");
    }

    bool contains(const YCbCr& c) const
    {
        return c.cb >= cb_min && c.cb <= cb_max && c.cr >= cr_min && c.cr <= cr_max;
    }
};

///
/// \brief BT.601 full-range (JFIF) conversion of an RGB triple in [0, 1].
///
///   Y  =       0.299    R + 0.587    G + 0.114    B
///   Cb = 128 - 0.168736 R - 0.331264 G + 0.5      B
///   Cr = 128 + 0.5      R - 0.418688 G - 0.081312 B
///
/// with R, G, B on the [0, 255] scale. Inputs outside [0, 1] are clamped and
/// the outputs are clamped to [0, 255].
///
inline YCbCr rgb_to_ycbcr(const Vec3& rgb)
{
    Vec3 c = rgb;
    if ((c.array() < 0.0).any() || (c.array() > 1.0).any()) {
        log().warn("rgb_to_ycbcr: input outside [0,1] clamped");
        c = c.cwiseMax(0.0).cwiseMin(1.0);
    }
    const double r = 255.0 * c.x(), g = 255.0 * c.y(), b = 255.0 * c.z();
    YCbCr out;
    out.y = std::clamp(0.299 * r + 0.587 * g + 0.114 * b, 0.0, 255.0);
    out.cb = std::clamp(128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b, 0.0, 255.0);
    out.cr = std::clamp(128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b, 0.0, 255.0);
    return out;
}

/// Pixels inside roi whose chroma falls in the threshold box, scaled to
/// [0, 1] and in row-major order. An empty result means the frame has no
/// usable skin; callers hold the previous pooled value.
inline PixelSet skin_mask(const Frame& frame, const Box& roi, const ChromaThresholds& th)
{
    th.validate();
    if (!roi.inside(frame.width, frame.height))
        throw Error(ErrorCode::Dimension, "skin_mask: ROI (" + std::to_string(roi.x) + "," + std::to_string(roi.y) +
                                              "," + std::to_string(roi.w) + "," + std::to_string(roi.h) +
                                              ") exceeds frame bounds");
    PixelSet ps;
    ps.timestamp_s = frame.timestamp_s;
    ps.pixels.reserve(static_cast<std::size_t>(roi.w) * static_cast<std::size_t>(roi.h));
    for (int y = roi.y; y < roi.y + roi.h; ++y) {
        for (int x = roi.x; x < roi.x + roi.w; ++x) {
            const auto* p = frame.pixel(x, y);
            const Vec3 rgb(p[0] / 255.0, p[1] / 255.0, p[2] / 255.0);
            if (th.contains(rgb_to_ycbcr(rgb)))
                ps.pixels.push_back(rgb);
        }
    }
    return ps;
}

} // namespace skin
} // namespace ppgi

#endif // PPGI_SKIN_HPP
