#include "prf/image.hpp"

#include "prf/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace prf {

Image::Image(int w, int h, double fill)
    : width(w), height(h), data(static_cast<std::size_t>(std::max(w, 0)) * std::max(h, 0), fill) {}

Image::Image(int w, int h, std::vector<double> values) : width(w), height(h), data(std::move(values)) {}

void validate(const Image& img) {
    if (img.width <= 0 || img.height <= 0) {
        throw config_error("image has non-positive dimensions " + std::to_string(img.width) + "x" +
                           std::to_string(img.height));
    }
    if (img.data.size() != static_cast<std::size_t>(img.width) * img.height) {
        throw config_error("image data length does not match width*height");
    }
    for (double v : img.data) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
            throw config_error("image values must be finite and inside [0,1]");
        }
    }
}

std::vector<double> minmax_normalize(std::span<const double> values, double degenerate_eps) {
    std::vector<double> out(values.begin(), values.end());
    if (out.empty()) return out;
    const auto [lo, hi] = std::minmax_element(out.begin(), out.end());
    const double min = *lo;
    const double range = *hi - min;
    if (range < degenerate_eps) return out;
    for (double& v : out) v = (v - min) / range;
    return out;
}

Image minmax_normalize(const Image& img) {
    return Image(img.width, img.height, minmax_normalize(img.data));
}

Image clamp01(Image img) {
    for (double& v : img.data) v = std::clamp(v, 0.0, 1.0);
    return img;
}

} // namespace prf
