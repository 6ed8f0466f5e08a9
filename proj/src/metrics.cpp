#include "prf/metrics.hpp"

#include "prf/error.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <vector>

namespace prf {

namespace {

void require_same_shape(const Image& a, const Image& b) {
    if (!a.same_shape(b) || a.data.size() != b.data.size()) {
        throw config_error(fmt::format("image dimensions differ: {}x{} vs {}x{}", a.width, a.height, b.width,
                                       b.height));
    }
}

std::vector<double> gaussian_window_1d(int size, double sigma) {
    std::vector<double> w(static_cast<std::size_t>(size));
    const int r = size / 2;
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        const double d = i - r;
        w[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += w[static_cast<std::size_t>(i)];
    }
    for (double& v : w) v /= sum;
    return w;
}

// Separable weighted sum over every fully contained window. Output is
// (w - size + 1) x (h - size + 1).
std::vector<double> valid_filter(const std::vector<double>& src, int w, int h, const std::vector<double>& k) {
    const int size = static_cast<int>(k.size());
    const int ow = w - size + 1;
    const int oh = h - size + 1;
    std::vector<double> rows(static_cast<std::size_t>(ow) * h);
    for (int y = 0; y < h; ++y) {
        const double* in = &src[static_cast<std::size_t>(y) * w];
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < size; ++i) s += k[static_cast<std::size_t>(i)] * in[x + i];
            rows[static_cast<std::size_t>(y) * ow + x] = s;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(ow) * oh);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < size; ++i) s += k[static_cast<std::size_t>(i)] * rows[static_cast<std::size_t>(y + i) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = s;
        }
    }
    return out;
}

} // namespace

Image quantize_8bit(const Image& img) {
    Image out = img;
    for (double& v : out.data) v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
    return out;
}

double mse(const Image& a, const Image& b) {
    require_same_shape(a, b);
    if (a.data.empty()) throw config_error("cannot compare empty images");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.data.size());
}

double psnr(const Image& ref, const Image& test, MetricMode mode) {
    const double err = mode == MetricMode::quantized_8bit ? mse(quantize_8bit(ref), quantize_8bit(test)) : mse(ref, test);
    if (err == 0.0) return kPsnrIdentical;
    return 10.0 * std::log10(1.0 / err);
}

double ssim(const Image& ref_in, const Image& test_in, MetricMode mode, const SsimParams& params) {
    require_same_shape(ref_in, test_in);
    if (params.window < 1 || params.window % 2 == 0) throw config_error("SSIM window must be odd and positive");
    if (ref_in.width < params.window || ref_in.height < params.window) {
        throw config_error(fmt::format("SSIM needs images of at least {}x{} (got {}x{})", params.window,
                                       params.window, ref_in.width, ref_in.height));
    }
    const Image ref = mode == MetricMode::quantized_8bit ? quantize_8bit(ref_in) : ref_in;
    const Image test = mode == MetricMode::quantized_8bit ? quantize_8bit(test_in) : test_in;

    const int w = ref.width;
    const int h = ref.height;
    const auto k = gaussian_window_1d(params.window, params.sigma);
    std::vector<double> xx(ref.data.size()), yy(ref.data.size()), xy(ref.data.size());
    for (std::size_t i = 0; i < ref.data.size(); ++i) {
        xx[i] = ref.data[i] * ref.data[i];
        yy[i] = test.data[i] * test.data[i];
        xy[i] = ref.data[i] * test.data[i];
    }
    const auto mu_x = valid_filter(ref.data, w, h, k);
    const auto mu_y = valid_filter(test.data, w, h, k);
    const auto e_xx = valid_filter(xx, w, h, k);
    const auto e_yy = valid_filter(yy, w, h, k);
    const auto e_xy = valid_filter(xy, w, h, k);

    const double c1 = (params.k1 * params.range) * (params.k1 * params.range);
    const double c2 = (params.k2 * params.range) * (params.k2 * params.range);
    double acc = 0.0;
    for (std::size_t i = 0; i < mu_x.size(); ++i) {
        const double mx = mu_x[i];
        const double my = mu_y[i];
        const double vx = e_xx[i] - mx * mx;
        const double vy = e_yy[i] - my * my;
        const double cxy = e_xy[i] - mx * my;
        acc += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
    return acc / static_cast<double>(mu_x.size());
}

MetricReport evaluate(const Image& ref, const Image& test, MetricMode mode) {
    return MetricReport{psnr(ref, test, mode), ssim(ref, test, mode)};
}

} // namespace prf
