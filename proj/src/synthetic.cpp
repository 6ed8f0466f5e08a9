#include "prf/synthetic.hpp"

#include "prf/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace prf {

namespace {

// Bilinearly interpolated random lattice with the given cell size in pixels.
std::vector<double> value_noise(int w, int h, double cell, std::mt19937_64& rng) {
    const int gw = static_cast<int>(std::ceil(w / cell)) + 2;
    const int gh = static_cast<int>(std::ceil(h / cell)) + 2;
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> lattice(static_cast<std::size_t>(gw) * gh);
    for (double& v : lattice) v = u(rng);
    std::vector<double> out(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double fx = x / cell;
            const double fy = y / cell;
            const int ix = static_cast<int>(fx);
            const int iy = static_cast<int>(fy);
            // smoothstep weights avoid visible lattice creases
            double tx = fx - ix;
            double ty = fy - iy;
            tx = tx * tx * (3.0 - 2.0 * tx);
            ty = ty * ty * (3.0 - 2.0 * ty);
            auto L = [&](int a, int b) { return lattice[static_cast<std::size_t>(b) * gw + a]; };
            const double top = L(ix, iy) * (1.0 - tx) + L(ix + 1, iy) * tx;
            const double bot = L(ix, iy + 1) * (1.0 - tx) + L(ix + 1, iy + 1) * tx;
            out[static_cast<std::size_t>(y) * w + x] = top * (1.0 - ty) + bot * ty;
        }
    }
    return out;
}

double soft_step(double signed_dist, double softness) { return 0.5 * (1.0 + std::tanh(-signed_dist / softness)); }

} // namespace

Image synthetic_scene(int width, int height, RngSeed seed) {
    if (width < 1 || height < 1) throw config_error("synthetic scene needs positive dimensions");
    std::mt19937_64 rng(seed.value);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double scale = std::min(width, height);
    Image img(width, height);

    // illumination gradient
    const double angle = 2.0 * std::numbers::pi * unit(rng);
    const double base = 0.3 + 0.4 * unit(rng);
    const double slope = (0.1 + 0.3 * unit(rng)) / scale;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            img.at(x, y) = base + slope * ((x - width / 2.0) * std::cos(angle) + (y - height / 2.0) * std::sin(angle));
        }
    }

    // soft-edged ellipses and rotated rectangles
    const int shapes = 4 + static_cast<int>(unit(rng) * 6);
    for (int s = 0; s < shapes; ++s) {
        const double cx = unit(rng) * width;
        const double cy = unit(rng) * height;
        const double ra = (0.08 + 0.25 * unit(rng)) * scale;
        const double rb = (0.08 + 0.25 * unit(rng)) * scale;
        const double rot = std::numbers::pi * unit(rng);
        const double level = 0.1 + 0.8 * unit(rng);
        const double softness = 0.5 + 1.5 * unit(rng);
        const bool ellipse = unit(rng) < 0.5;
        const double c = std::cos(rot);
        const double sn = std::sin(rot);
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                const double dx = x - cx;
                const double dy = y - cy;
                const double u = (c * dx + sn * dy) / ra;
                const double v = (-sn * dx + c * dy) / rb;
                const double d = ellipse ? (std::sqrt(u * u + v * v) - 1.0) * std::min(ra, rb)
                                         : (std::max(std::abs(u), std::abs(v)) - 1.0) * std::min(ra, rb);
                const double alpha = soft_step(d, softness);
                img.at(x, y) = (1.0 - alpha) * img.at(x, y) + alpha * level;
            }
        }
    }

    // one grating patch
    {
        const double cx = unit(rng) * width;
        const double cy = unit(rng) * height;
        const double radius = (0.15 + 0.15 * unit(rng)) * scale;
        const double period = 4.0 + 8.0 * unit(rng);
        const double dir = std::numbers::pi * unit(rng);
        const double amp = 0.05 + 0.1 * unit(rng);
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                const double r = std::hypot(x - cx, y - cy);
                const double alpha = soft_step(r - radius, 2.0);
                const double phase = 2.0 * std::numbers::pi * ((x * std::cos(dir) + y * std::sin(dir)) / period);
                img.at(x, y) += alpha * amp * std::sin(phase);
            }
        }
    }

    // multi-octave texture, amplitude halves per octave
    double amp = 0.06 * (0.5 + unit(rng));
    for (double cell = scale / 4.0; cell >= 2.0; cell /= 2.0, amp *= 0.55) {
        const auto field = value_noise(width, height, cell, rng);
        for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] += amp * field[i];
    }

    for (double& v : img.data) v = std::clamp(v, 0.05, 0.95);
    return img;
}

std::vector<Image> synthetic_corpus(std::size_t count, int width, int height, RngSeed seed) {
    std::vector<Image> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(synthetic_scene(width, height, derive_seed(seed, i)));
    return out;
}

} // namespace prf
