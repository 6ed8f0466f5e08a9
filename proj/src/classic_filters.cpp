#include "prf/classic_filters.hpp"

#include "prf/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fmt/format.h>
#include <vector>

namespace prf {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

void check_ksize(int ksize, const char* what) {
    if (ksize < 3 || ksize % 2 == 0) throw config_error(fmt::format("{} window must be odd and >= 3 (got {})", what, ksize));
}

int window_of(const FilterKind& kind) {
    return std::visit(overloaded{
                          [](const filters::AdaptiveMedian& f) { return f.max_ksize; },
                          [](const auto& f) { return f.ksize; },
                      },
                      kind);
}

// Replicate-padded pixel fetch.
inline double px(const Image& img, int x, int y) {
    x = std::clamp(x, 0, img.width - 1);
    y = std::clamp(y, 0, img.height - 1);
    return img.data[static_cast<std::size_t>(y) * img.width + x];
}

Image separable(const Image& img, const std::vector<double>& k) {
    const int r = static_cast<int>(k.size()) / 2;
    Image tmp(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double s = 0.0;
            for (int i = -r; i <= r; ++i) s += k[static_cast<std::size_t>(i + r)] * px(img, x + i, y);
            tmp.at(x, y) = s;
        }
    }
    Image out(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double s = 0.0;
            for (int i = -r; i <= r; ++i) s += k[static_cast<std::size_t>(i + r)] * px(tmp, x, y + i);
            out.at(x, y) = s;
        }
    }
    return out;
}

std::vector<double> gaussian_1d(double sigma, int ksize) {
    const int r = ksize / 2;
    std::vector<double> k(static_cast<std::size_t>(ksize));
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        const double w = std::exp(-(i * i) / (2.0 * sigma * sigma));
        k[static_cast<std::size_t>(i + r)] = w;
        sum += w;
    }
    for (double& w : k) w /= sum;
    return k;
}

Image box(const Image& img, int ksize) {
    return separable(img, std::vector<double>(static_cast<std::size_t>(ksize), 1.0 / ksize));
}

template <class Reduce>
Image window_reduce(const Image& img, int ksize, Reduce reduce) {
    const int r = ksize / 2;
    Image out(img.width, img.height);
    std::vector<double> win(static_cast<std::size_t>(ksize) * ksize);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            std::size_t n = 0;
            for (int dy = -r; dy <= r; ++dy) {
                for (int dx = -r; dx <= r; ++dx) win[n++] = px(img, x + dx, y + dy);
            }
            out.at(x, y) = reduce(win);
        }
    }
    return out;
}

double median_of(std::vector<double>& v) {
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
}

// Two-stage window-growing adaptive median.
Image adaptive_median(const Image& img, int max_ksize) {
    Image out(img.width, img.height);
    std::vector<double> win;
    win.reserve(static_cast<std::size_t>(max_ksize) * max_ksize);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const double center = img.at(x, y);
            double result = center;
            for (int ksize = 3; ksize <= max_ksize; ksize += 2) {
                const int r = ksize / 2;
                win.clear();
                for (int dy = -r; dy <= r; ++dy) {
                    for (int dx = -r; dx <= r; ++dx) win.push_back(px(img, x + dx, y + dy));
                }
                const auto [lo, hi] = std::minmax_element(win.begin(), win.end());
                const double zmin = *lo;
                const double zmax = *hi;
                const double zmed = median_of(win);
                if (zmin < zmed && zmed < zmax) {
                    // stage B: keep the pixel unless it is itself an extreme
                    result = (zmin < center && center < zmax) ? center : zmed;
                    break;
                }
                result = zmed;  // window exhausted: fall back to the median
            }
            out.at(x, y) = result;
        }
    }
    return out;
}

} // namespace

void validate(const FilterKind& kind) {
    std::visit(overloaded{
                   [](const filters::Gaussian& f) {
                       check_ksize(f.ksize, "gaussian");
                       if (!(f.sigma > 0.0) || !std::isfinite(f.sigma)) throw config_error("gaussian sigma must be > 0");
                   },
                   [](const filters::AdaptiveMedian& f) { check_ksize(f.max_ksize, "adaptive median"); },
                   [](const filters::Average& f) { check_ksize(f.ksize, "average"); },
                   [](const filters::Mean& f) { check_ksize(f.ksize, "mean"); },
                   [](const filters::Median& f) { check_ksize(f.ksize, "median"); },
                   [](const filters::Max& f) { check_ksize(f.ksize, "max"); },
                   [](const filters::Min& f) { check_ksize(f.ksize, "min"); },
               },
               kind);
}

Image apply_filter(const Image& img, const FilterKind& kind) {
    validate(img);
    validate(kind);
    const int window = window_of(kind);
    if (window > img.width || window > img.height) {
        throw config_error(fmt::format("{}x{} window does not fit a {}x{} image", window, window, img.width,
                                       img.height));
    }
    Image out = std::visit(
        overloaded{
            [&](const filters::Average& f) { return box(img, f.ksize); },
            [&](const filters::Mean& f) { return box(img, f.ksize); },
            [&](const filters::Gaussian& f) { return separable(img, gaussian_1d(f.sigma, f.ksize)); },
            [&](const filters::Median& f) { return window_reduce(img, f.ksize, median_of); },
            [&](const filters::AdaptiveMedian& f) { return adaptive_median(img, f.max_ksize); },
            [&](const filters::Max& f) {
                return window_reduce(img, f.ksize, [](std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); });
            },
            [&](const filters::Min& f) {
                return window_reduce(img, f.ksize, [](std::vector<double>& v) { return *std::min_element(v.begin(), v.end()); });
            },
        },
        kind);
    return clamp01(std::move(out));
}

Kernel2D gaussian_kernel(double sigma, int ksize) {
    if (ksize < 1 || ksize % 2 == 0) throw config_error("gaussian kernel size must be odd");
    if (!(sigma > 0.0)) throw config_error("gaussian sigma must be > 0");
    const auto k1 = gaussian_1d(sigma, ksize);
    Kernel2D k{ksize / 2, std::vector<double>(static_cast<std::size_t>(ksize) * ksize)};
    for (int y = 0; y < ksize; ++y) {
        for (int x = 0; x < ksize; ++x) {
            k.weights[static_cast<std::size_t>(y) * ksize + x] = k1[static_cast<std::size_t>(y)] * k1[static_cast<std::size_t>(x)];
        }
    }
    return k;
}

std::string to_string(const FilterKind& kind) {
    return std::visit(overloaded{
                          [](const filters::Average& f) { return fmt::format("average:{}", f.ksize); },
                          [](const filters::Gaussian& f) { return fmt::format("gaussian:{}:{}", f.sigma, f.ksize); },
                          [](const filters::Mean& f) { return fmt::format("mean:{}", f.ksize); },
                          [](const filters::Median& f) { return fmt::format("median:{}", f.ksize); },
                          [](const filters::AdaptiveMedian& f) { return fmt::format("adaptive_median:{}", f.max_ksize); },
                          [](const filters::Max& f) { return fmt::format("max:{}", f.ksize); },
                          [](const filters::Min& f) { return fmt::format("min:{}", f.ksize); },
                      },
                      kind);
}

FilterKind parse_filter(std::string_view text) {
    std::vector<std::string_view> parts;
    std::size_t pos = 0;
    while (true) {
        const auto colon = text.find(':', pos);
        parts.push_back(text.substr(pos, colon == std::string_view::npos ? std::string_view::npos : colon - pos));
        if (colon == std::string_view::npos) break;
        pos = colon + 1;
    }
    const std::string_view name = parts[0];
    const auto bad = [&] { return config_error(fmt::format("invalid filter spec '{}'", text)); };
    const auto number = [&](std::size_t i, auto fallback) {
        if (i >= parts.size()) return fallback;
        decltype(fallback) v{};
        const auto [ptr, ec] = std::from_chars(parts[i].data(), parts[i].data() + parts[i].size(), v);
        if (ec != std::errc() || ptr != parts[i].data() + parts[i].size()) throw bad();
        return v;
    };
    const auto arity = [&](std::size_t n) {
        if (parts.size() > n + 1) throw bad();
    };

    FilterKind kind;
    if (name == "average") {
        arity(1);
        kind = filters::Average{number(1, filters::Average{}.ksize)};
    } else if (name == "gaussian") {
        arity(2);
        kind = filters::Gaussian{number(1, filters::Gaussian{}.sigma), number(2, filters::Gaussian{}.ksize)};
    } else if (name == "mean") {
        arity(1);
        kind = filters::Mean{number(1, filters::Mean{}.ksize)};
    } else if (name == "median") {
        arity(1);
        kind = filters::Median{number(1, filters::Median{}.ksize)};
    } else if (name == "adaptive_median") {
        arity(1);
        kind = filters::AdaptiveMedian{number(1, filters::AdaptiveMedian{}.max_ksize)};
    } else if (name == "max") {
        arity(1);
        kind = filters::Max{number(1, filters::Max{}.ksize)};
    } else if (name == "min") {
        arity(1);
        kind = filters::Min{number(1, filters::Min{}.ksize)};
    } else {
        throw config_error(fmt::format("unknown filter '{}' (average, gaussian, mean, median, adaptive_median, max, min)",
                                       name));
    }
    validate(kind);
    return kind;
}

} // namespace prf
