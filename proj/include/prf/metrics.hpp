#pragma once

#include "prf/image.hpp"

#include <limits>

namespace prf {

enum class MetricMode {
    float_values,  // metrics on the double-precision values
    quantized_8bit // both images rounded to 8-bit levels first
};

struct MetricReport {
    double psnr = 0.0;  // dB, +inf when the images are identical
    double ssim = 0.0;
};

inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

// SSIM window: 11x11 Gaussian, sigma 1.5, K1 = 0.01, K2 = 0.03, dynamic range 1,
// averaged over the fully contained ("valid") windows.
struct SsimParams {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double range = 1.0;
};

// 10*log10(1 / MSE) with peak value 1.
double psnr(const Image& ref, const Image& test, MetricMode mode = MetricMode::float_values);

double ssim(const Image& ref, const Image& test, MetricMode mode = MetricMode::float_values,
            const SsimParams& params = {});

MetricReport evaluate(const Image& ref, const Image& test, MetricMode mode = MetricMode::float_values);

double mse(const Image& a, const Image& b);

// round(v * 255) / 255
Image quantize_8bit(const Image& img);

} // namespace prf
