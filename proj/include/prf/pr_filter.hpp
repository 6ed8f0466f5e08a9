#pragma once

#include "prf/core_model.hpp"
#include "prf/image.hpp"

#include <map>
#include <mutex>
#include <utility>
#include <vector>

namespace prf {

// Square 2-D weight map of side 2*radius+1, row-major.
struct Kernel2D {
    int radius = 0;
    std::vector<double> weights;

    int side() const noexcept { return 2 * radius + 1; }
    double at(int dx, int dy) const { return weights[static_cast<std::size_t>(dy + radius) * side() + (dx + radius)]; }
};

// Image-to-image blind denoiser built on the coupled photoreceptor grid.
//
// Pixel p drives its cell with g_max = p * i_dark, so a white pixel cancels the dark
// current at the photocurrent peak. The output is the min-max normalized map of peak
// voltage deflections. Factorized systems are cached per image size, so one filter
// object can be shared across threads and re-driven with many images.
class PrFilter {
public:
    explicit PrFilter(NetworkParams params);

    const NetworkParams& params() const noexcept { return params_; }

    Image operator()(const Image& img) const;

    // Raw peak deflections [mV] before normalization.
    std::vector<double> peak_deflections(const Image& img) const;

private:
    FactorizedSystem system_for(int width, int height) const;

    NetworkParams params_;
    mutable std::mutex mutex_;
    mutable std::map<std::pair<int, int>, FactorizedSystem> cache_;
};

Image pr_denoise(const Image& img, const NetworkParams& params);

// Peak deflections of a (2r+1)^2 grid when only the centre cell is driven at
// g_max = i_dark, normalized to sum 1.
Kernel2D impulse_response(const NetworkParams& params, int radius);

} // namespace prf
