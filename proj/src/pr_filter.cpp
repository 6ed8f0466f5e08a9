#include "prf/pr_filter.hpp"

#include "prf/error.hpp"

#include <numeric>

namespace prf {

PrFilter::PrFilter(NetworkParams params) : params_(params) { params_.validate(); }

FactorizedSystem PrFilter::system_for(int width, int height) const {
    std::lock_guard lock(mutex_);
    const auto key = std::make_pair(width, height);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    auto system = build_system(GridTopology(width, height), params_);
    cache_.emplace(key, system);
    return system;
}

std::vector<double> PrFilter::peak_deflections(const Image& img) const {
    validate(img);
    const auto system = system_for(img.width, img.height);
    std::vector<double> drive(img.data.size());
    for (std::size_t i = 0; i < drive.size(); ++i) drive[i] = img.data[i] * params_.i_dark;
    return simulate(system, drive).peak_deflection;
}

Image PrFilter::operator()(const Image& img) const {
    const auto peaks = peak_deflections(img);
    const auto [lo, hi] = std::minmax_element(peaks.begin(), peaks.end());
    if (*hi - *lo < 1e-12) return img;
    return Image(img.width, img.height, minmax_normalize(peaks));
}

Image pr_denoise(const Image& img, const NetworkParams& params) { return PrFilter(params)(img); }

Kernel2D impulse_response(const NetworkParams& params, int radius) {
    if (radius < 1) throw config_error("impulse response radius must be >= 1");
    const int side = 2 * radius + 1;
    const auto system = build_system(GridTopology(side, side), params);
    std::vector<double> drive(static_cast<std::size_t>(side) * side, 0.0);
    drive[static_cast<std::size_t>(radius) * side + radius] = params.i_dark;
    auto peaks = simulate(system, drive).peak_deflection;
    const double total = std::accumulate(peaks.begin(), peaks.end(), 0.0);
    if (!(total > 0.0)) throw numeric_error("impulse response has zero mass (i_dark must be nonzero)");
    for (double& w : peaks) w /= total;
    return Kernel2D{radius, std::move(peaks)};
}

} // namespace prf
