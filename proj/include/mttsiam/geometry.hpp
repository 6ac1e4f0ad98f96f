#pragma once

// Bounding boxes in pixel space and in [0,1]-normalized center/size form,
// plus the overlap and distance primitives the metrics are built on.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "mttsiam/error.hpp"

namespace mttsiam {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// Pixel-space box stored as (left, top, width, height), the OTB layout.
struct BBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    Point center() const { return {x + w / 2.0, y + h / 2.0}; }
    double area() const { return w * h; }
    double right() const { return x + w; }
    double bottom() const { return y + h; }

    bool finite() const {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(w) && std::isfinite(h);
    }
    /// A box that can represent a visible target.
    bool valid() const { return finite() && w > 0.0 && h > 0.0; }

    friend bool operator==(const BBox&, const BBox&) = default;
};

/// Center/size box in units of the image dimensions.
struct NormBBox {
    double cx = 0.0;
    double cy = 0.0;
    double nw = 0.0;
    double nh = 0.0;

    friend bool operator==(const NormBBox&, const NormBBox&) = default;
};

/// Normalized corner encoding (x1, y1, x2, y2), for consumers that want corners.
struct NormCorners {
    double x1 = 0.0;
    double y1 = 0.0;
    double x2 = 0.0;
    double y2 = 0.0;
};

struct ImageDims {
    int width = 0;
    int height = 0;

    bool valid() const { return width > 0 && height > 0; }
    friend bool operator==(const ImageDims&, const ImageDims&) = default;
};

namespace detail {
inline std::atomic<std::uint64_t>& clamp_counter() {
    static std::atomic<std::uint64_t> counter{0};
    return counter;
}
}  // namespace detail

/// Number of normalizations that had to clamp a partially out-of-frame box.
inline std::uint64_t normalize_clamp_count() { return detail::clamp_counter().load(); }
inline void reset_normalize_clamp_count() { detail::clamp_counter().store(0); }

/// Normalizes `box` against `dims`. Returns nullopt (with `why` filled) for
/// degenerate boxes and for boxes lying entirely outside the image. Fields of a
/// partially outside box are clamped into range and the clamp counter bumped.
inline std::optional<NormBBox> try_normalize(const BBox& box, const ImageDims& dims,
                                             std::string* why = nullptr) {
    auto fail = [&](const char* msg) -> std::optional<NormBBox> {
        if (why) *why = msg;
        return std::nullopt;
    };
    if (!dims.valid()) return fail("image dimensions must be positive");
    if (!box.finite()) return fail("box has non-finite fields");
    if (box.w <= 0.0 || box.h <= 0.0) return fail("box has zero or negative size");
    const double W = dims.width;
    const double H = dims.height;
    if (box.right() <= 0.0 || box.bottom() <= 0.0 || box.x >= W || box.y >= H)
        return fail("box lies entirely outside the image");

    NormBBox n{(box.x + box.w / 2.0) / W, (box.y + box.h / 2.0) / H, box.w / W, box.h / H};
    const NormBBox raw = n;
    n.cx = std::clamp(n.cx, 0.0, 1.0);
    n.cy = std::clamp(n.cy, 0.0, 1.0);
    n.nw = std::min(n.nw, 1.0);
    n.nh = std::min(n.nh, 1.0);
    if (!(n == raw)) detail::clamp_counter().fetch_add(1, std::memory_order_relaxed);
    return n;
}

inline NormBBox normalize(const BBox& box, const ImageDims& dims) {
    std::string why;
    auto n = try_normalize(box, dims, &why);
    if (!n) throw GeometryError("normalize: " + why);
    return *n;
}

inline BBox denormalize(const NormBBox& n, const ImageDims& dims) {
    if (!dims.valid()) throw GeometryError("denormalize: image dimensions must be positive");
    const double W = dims.width;
    const double H = dims.height;
    const double w = n.nw * W;
    const double h = n.nh * H;
    return {n.cx * W - w / 2.0, n.cy * H - h / 2.0, w, h};
}

inline NormCorners to_corners(const NormBBox& n) {
    return {n.cx - n.nw / 2.0, n.cy - n.nh / 2.0, n.cx + n.nw / 2.0, n.cy + n.nh / 2.0};
}

inline NormBBox from_corners(const NormCorners& c) {
    return {(c.x1 + c.x2) / 2.0, (c.y1 + c.y2) / 2.0, c.x2 - c.x1, c.y2 - c.y1};
}

inline double iou(const BBox& a, const BBox& b) {
    const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
    const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

inline double center_distance(const BBox& a, const BBox& b) {
    const Point ca = a.center();
    const Point cb = b.center();
    return std::hypot(ca.x - cb.x, ca.y - cb.y);
}

/// Shifts `box` so it lies inside the image (size is kept when it fits).
inline BBox clamp_to_image(BBox box, const ImageDims& dims) {
    box.w = std::min(box.w, static_cast<double>(dims.width));
    box.h = std::min(box.h, static_cast<double>(dims.height));
    box.x = std::clamp(box.x, 0.0, dims.width - box.w);
    box.y = std::clamp(box.y, 0.0, dims.height - box.h);
    return box;
}

}  // namespace mttsiam
