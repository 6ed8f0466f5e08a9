#pragma once

#include "prf/image.hpp"
#include "prf/pr_filter.hpp"

#include <string>
#include <string_view>
#include <variant>

namespace prf {

// Baseline spatial filters. All windows are square, odd-sized and >= 3; edges use
// replicate padding.
namespace filters {

struct Average {
    int ksize = 3;
};
struct Gaussian {
    double sigma = 2.0;
    int ksize = 9;
};
// Box filter like Average, with a larger default window.
struct Mean {
    int ksize = 5;
};
struct Median {
    int ksize = 3;
};
struct AdaptiveMedian {
    int max_ksize = 7;
};
struct Max {
    int ksize = 3;
};
struct Min {
    int ksize = 3;
};

} // namespace filters

using FilterKind = std::variant<filters::Average, filters::Gaussian, filters::Mean, filters::Median,
                                filters::AdaptiveMedian, filters::Max, filters::Min>;

void validate(const FilterKind& kind);

// Throws config_error when the window does not fit inside the image.
Image apply_filter(const Image& img, const FilterKind& kind);

// Isotropic Gaussian sampled at pixel centres and normalized to sum 1.
Kernel2D gaussian_kernel(double sigma, int ksize);

std::string to_string(const FilterKind& kind);

// Inverse of to_string. Arguments may be omitted to take the defaults, e.g.
// "median", "median:5", "gaussian:1", "gaussian:1:9", "adaptive_median:7".
FilterKind parse_filter(std::string_view text);

} // namespace prf
