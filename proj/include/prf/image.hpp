#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace prf {

// Grayscale raster, row-major, intensities in [0,1].
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, double fill = 0.0);
    Image(int w, int h, std::vector<double> values);

    std::size_t size() const noexcept { return data.size(); }
    bool empty() const noexcept { return data.empty(); }

    double& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    double at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }

    std::span<const double> pixels() const noexcept { return data; }

    bool same_shape(const Image& other) const noexcept {
        return width == other.width && height == other.height;
    }

    friend bool operator==(const Image&, const Image&) = default;
};

// Throws config_error unless dimensions are positive, data length matches,
// and every value is finite and inside [0,1].
void validate(const Image& img);

// Affine stretch of the values onto [0,1]. Constant inputs are returned unchanged.
Image minmax_normalize(const Image& img);

// Same as above for an arbitrary field (peak deflections, kernels, ...).
std::vector<double> minmax_normalize(std::span<const double> values, double degenerate_eps = 1e-12);

Image clamp01(Image img);

} // namespace prf
