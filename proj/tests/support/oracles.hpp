#pragma once

// Independent reference implementations used by the unit and acceptance tests.
// Everything here is written from the textbook definitions and shares no code
// with the library beyond the plain data types.

#include "prf/core_model.hpp"
#include "prf/image.hpp"
#include "prf/sta_lab.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace oracle {

// Normalized double exponential written out directly.
inline double kernel(double t, double tau1, double tau2) {
    if (t < 0.0) return 0.0;
    const double tp = tau1 * tau2 / (tau1 - tau2) * std::log(tau1 / tau2);
    const double peak = std::exp(-tp / tau1) - std::exp(-tp / tau2);
    return (std::exp(-t / tau1) - std::exp(-t / tau2)) / peak;
}

// Dense 4-neighbour grid ODE for the deflection u = v - v_rest:
//   c_m du_i/dt = -g_leak u_i - g_gap sum_j (u_i - u_j) - drive_i(t)
// where drive_i(t) is supplied as a callback. Classic RK4 with fixed step h.
struct GridOde {
    int w = 1;
    int h = 1;
    prf::NetworkParams p;
    std::function<double(std::size_t, double)> drive;

    std::vector<double> rhs(double t, const std::vector<double>& u) const {
        std::vector<double> du(u.size());
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const std::size_t i = static_cast<std::size_t>(y * w + x);
                double gap = 0.0;
                const int nx[4] = {x - 1, x + 1, x, x};
                const int ny[4] = {y, y, y - 1, y + 1};
                for (int k = 0; k < 4; ++k) {
                    if (nx[k] < 0 || nx[k] >= w || ny[k] < 0 || ny[k] >= h) continue;
                    gap += u[i] - u[static_cast<std::size_t>(ny[k] * w + nx[k])];
                }
                du[i] = (-p.g_leak * u[i] - p.g_gap * gap - drive(i, t)) / p.c_m;
            }
        }
        return du;
    }

    // Returns u sampled every `sample_every` steps (including t = 0).
    std::vector<std::vector<double>> run(double t_end, double step, int sample_every) const {
        std::vector<double> u(static_cast<std::size_t>(w * h), 0.0);
        std::vector<std::vector<double>> out{u};
        const auto n = static_cast<long>(std::llround(t_end / step));
        auto axpy = [](const std::vector<double>& a, const std::vector<double>& b, double s) {
            std::vector<double> r(a.size());
            for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + s * b[i];
            return r;
        };
        for (long k = 0; k < n; ++k) {
            const double t = static_cast<double>(k) * step;
            const auto k1 = rhs(t, u);
            const auto k2 = rhs(t + step / 2, axpy(u, k1, step / 2));
            const auto k3 = rhs(t + step / 2, axpy(u, k2, step / 2));
            const auto k4 = rhs(t + step, axpy(u, k3, step));
            for (std::size_t i = 0; i < u.size(); ++i) u[i] += step / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
            if ((k + 1) % sample_every == 0) out.push_back(u);
        }
        return out;
    }
};

// Peak |u| per cell for a static drive field.
inline std::vector<double> rk4_peaks(int w, int h, const prf::NetworkParams& p, const std::vector<double>& g,
                                     double step = 0.001) {
    GridOde ode{w, h, p, [&](std::size_t i, double t) { return g[i] * kernel(t, p.tau1, p.tau2); }};
    const auto samples = ode.run(p.t_end, step, 1);
    std::vector<double> peak(g.size(), 0.0);
    for (const auto& u : samples) {
        for (std::size_t i = 0; i < u.size(); ++i) peak[i] = std::max(peak[i], std::abs(u[i]));
    }
    return peak;
}

inline double naive_mse(const prf::Image& a, const prf::Image& b) {
    long double s = 0.0L;
    for (int y = 0; y < a.height; ++y) {
        for (int x = 0; x < a.width; ++x) {
            const long double d = static_cast<long double>(a.at(x, y)) - b.at(x, y);
            s += d * d;
        }
    }
    return static_cast<double>(s / (static_cast<long double>(a.width) * a.height));
}

inline double naive_psnr(const prf::Image& a, const prf::Image& b) {
    const double m = naive_mse(a, b);
    if (m == 0.0) return INFINITY;
    return 10.0 * std::log10(1.0 / m);
}

// Direct 2-D windowed SSIM: for every valid 11x11 window, weighted moments with the
// full (non-separated) Gaussian weight matrix.
inline double naive_ssim(const prf::Image& a, const prf::Image& b) {
    const int win = 11;
    const double sigma = 1.5;
    std::vector<double> w(static_cast<std::size_t>(win * win));
    double total = 0.0;
    for (int j = 0; j < win; ++j) {
        for (int i = 0; i < win; ++i) {
            const double dx = i - win / 2;
            const double dy = j - win / 2;
            w[static_cast<std::size_t>(j * win + i)] = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
            total += w[static_cast<std::size_t>(j * win + i)];
        }
    }
    for (auto& v : w) v /= total;
    const double c1 = 0.01 * 0.01;
    const double c2 = 0.03 * 0.03;
    double acc = 0.0;
    int count = 0;
    for (int y0 = 0; y0 + win <= a.height; ++y0) {
        for (int x0 = 0; x0 + win <= a.width; ++x0) {
            double ma = 0, mb = 0;
            for (int j = 0; j < win; ++j) {
                for (int i = 0; i < win; ++i) {
                    const double k = w[static_cast<std::size_t>(j * win + i)];
                    ma += k * a.at(x0 + i, y0 + j);
                    mb += k * b.at(x0 + i, y0 + j);
                }
            }
            double va = 0, vb = 0, cov = 0;
            for (int j = 0; j < win; ++j) {
                for (int i = 0; i < win; ++i) {
                    const double k = w[static_cast<std::size_t>(j * win + i)];
                    const double da = a.at(x0 + i, y0 + j) - ma;
                    const double db = b.at(x0 + i, y0 + j) - mb;
                    va += k * da * da;
                    vb += k * db * db;
                    cov += k * da * db;
                }
            }
            acc += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    }
    return acc / count;
}

// Pixel-area integral of a unit Gaussian over [i-1/2, i+1/2].
inline double gaussian_cell_mass(int i, double sigma) {
    const double s = sigma * std::sqrt(2.0);
    return 0.5 * (std::erf((i + 0.5) / s) - std::erf((i - 0.5) / s));
}

// Event-triggered mean by a plain loop over events: each event in a bin with a full
// history adds the frames shown at the start of that bin and the bins-1 before it.
inline std::vector<double> naive_triggered_mean(const prf::StimulusMovie& m, const std::vector<double>& events,
                                                double window, int bins) {
    const double bw = window / bins;
    const std::size_t p = m.pixel_count();
    const auto total = static_cast<std::size_t>(std::floor(m.duration() / bw + 1e-9));
    std::vector<double> sum(static_cast<std::size_t>(bins) * p, 0.0);
    std::size_t n = 0;
    for (double t : events) {
        const auto bin = static_cast<std::size_t>(std::floor(t / bw + 1e-9));
        if (bin + 1 < static_cast<std::size_t>(bins) || bin >= total) continue;
        for (int lag = 0; lag < bins; ++lag) {
            const double start = static_cast<double>(bin - static_cast<std::size_t>(lag)) * bw;
            auto f = static_cast<std::size_t>(std::floor(start / m.frame_dt + 1e-9));
            f = std::min(f, m.frames.size() - 1);
            for (std::size_t i = 0; i < p; ++i) sum[static_cast<std::size_t>(lag) * p + i] += m.frames[f][i];
        }
        ++n;
    }
    for (double& v : sum) v /= static_cast<double>(n);
    return sum;
}

// Linear-threshold cell: per response bin, project the preceding stimulus on `kernel`
// (lags x pixels, bin width == frame_dt) and emit one event when it exceeds `threshold`.
// Event times sit at bin centres.
inline std::vector<double> ln_cell_events(const prf::StimulusMovie& m, const std::vector<double>& kernel, int bins,
                                          double threshold) {
    const std::size_t p = m.pixel_count();
    std::vector<double> events;
    for (std::size_t f = static_cast<std::size_t>(bins) - 1; f < m.frames.size(); ++f) {
        double s = 0.0;
        for (int lag = 0; lag < bins; ++lag) {
            const auto& frame = m.frames[f - static_cast<std::size_t>(lag)];
            for (std::size_t i = 0; i < p; ++i) s += kernel[static_cast<std::size_t>(lag) * p + i] * frame[i];
        }
        if (s > threshold) events.push_back((static_cast<double>(f) + 0.5) * m.frame_dt);
    }
    return events;
}

inline double correlation(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

} // namespace oracle
