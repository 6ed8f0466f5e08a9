#include "prf/sta_lab.hpp"

#include "prf/error.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numeric>
#include <random>

namespace prf {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

RowMatrix as_matrix(const StimulusMovie& movie) {
    const auto n = static_cast<Eigen::Index>(movie.frames.size());
    const auto p = static_cast<Eigen::Index>(movie.pixel_count());
    RowMatrix x(n, p);
    for (Eigen::Index f = 0; f < n; ++f) {
        const auto& frame = movie.frames[static_cast<std::size_t>(f)];
        if (static_cast<Eigen::Index>(frame.size()) != p) throw config_error("movie frame has the wrong pixel count");
        x.row(f) = Eigen::Map<const Eigen::RowVectorXd>(frame.data(), p);
    }
    return x;
}

void check_movie(const StimulusMovie& movie) {
    if (movie.width <= 0 || movie.height <= 0) throw config_error("movie has non-positive dimensions");
    if (!(movie.frame_dt > 0.0)) throw config_error("movie frame_dt must be > 0");
    if (movie.frames.empty()) throw config_error("movie has no frames");
}

double gaussian_at(double sigma, double r2) { return std::exp(-r2 / (2.0 * sigma * sigma)); }

} // namespace

StimulusMovie white_movie(StimulusFamily family, int width, int height, std::size_t n_frames, double frame_dt,
                          RngSeed seed) {
    if (family == StimulusFamily::natural_patches) throw config_error("natural patches need a corpus");
    StimulusMovie movie{width, height, frame_dt, family, false, {}};
    check_movie(StimulusMovie{width, height, frame_dt, family, false, {DriveField{}}});
    std::mt19937_64 rng(seed.value);
    std::normal_distribution<double> normal(0.0, 1.0);
    // Laplace(b) has variance 2 b^2.
    std::exponential_distribution<double> expo(std::sqrt(2.0));
    std::uniform_int_distribution<int> coin(0, 1);
    movie.frames.assign(n_frames, DriveField(movie.pixel_count()));
    for (auto& frame : movie.frames) {
        for (double& v : frame) {
            if (family == StimulusFamily::gaussian_white) {
                v = normal(rng);
            } else {
                const double mag = expo(rng);
                v = coin(rng) ? mag : -mag;
            }
        }
    }
    return movie;
}

StimulusMovie natural_movie(std::span<const Image> corpus, int width, int height, std::size_t n_frames,
                            double frame_dt, RngSeed seed) {
    if (corpus.empty()) throw config_error("natural patches need a nonempty corpus");
    for (const auto& img : corpus) {
        if (img.width < width || img.height < height) throw config_error("corpus image smaller than the patch");
    }
    StimulusMovie movie{width, height, frame_dt, StimulusFamily::natural_patches, false, {}};
    check_movie(StimulusMovie{width, height, frame_dt, movie.family, false, {DriveField{}}});
    std::mt19937_64 rng(seed.value);
    std::uniform_int_distribution<std::size_t> pick(0, corpus.size() - 1);
    movie.frames.assign(n_frames, DriveField(movie.pixel_count()));
    for (auto& frame : movie.frames) {
        const auto& img = corpus[pick(rng)];
        const int x0 = std::uniform_int_distribution<int>(0, img.width - width)(rng);
        const int y0 = std::uniform_int_distribution<int>(0, img.height - height)(rng);
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) frame[static_cast<std::size_t>(y) * width + x] = img.at(x0 + x, y0 + y);
        }
    }
    const auto moments = movie_moments(movie);
    double var = 0.0;
    for (std::size_t i = 0; i < movie.pixel_count(); ++i) var += moments.covariance[i * movie.pixel_count() + i];
    var /= static_cast<double>(movie.pixel_count());
    const double scale = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
    for (auto& frame : movie.frames) {
        for (std::size_t i = 0; i < frame.size(); ++i) frame[i] = (frame[i] - moments.mean[i]) * scale;
    }
    return movie;
}

MovieMoments movie_moments(const StimulusMovie& movie) {
    check_movie(movie);
    const RowMatrix x = as_matrix(movie);
    const Eigen::RowVectorXd mean = x.colwise().mean();
    const RowMatrix centered = x.rowwise() - mean;
    const RowMatrix cov = (centered.transpose() * centered) / static_cast<double>(x.rows());
    MovieMoments m;
    m.mean.assign(mean.data(), mean.data() + mean.size());
    m.covariance.assign(cov.data(), cov.data() + cov.size());
    return m;
}

ZcaTransform fit_zca(const StimulusMovie& movie, double eps) {
    check_movie(movie);
    const std::size_t p = movie.pixel_count();
    if (movie.frames.size() < p) {
        throw config_error(fmt::format("ZCA needs at least as many frames as pixels ({} < {})", movie.frames.size(), p));
    }
    const auto moments = movie_moments(movie);
    const auto pi = static_cast<Eigen::Index>(p);
    Eigen::Map<const RowMatrix> cov(moments.covariance.data(), pi, pi);
    const double scale = cov.trace() / static_cast<double>(p);
    if (!(scale > 0.0)) throw numeric_error("stimulus covariance is zero");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov / scale);
    if (eig.info() != Eigen::Success) throw numeric_error("covariance eigendecomposition failed");
    const Eigen::VectorXd lambda = eig.eigenvalues();
    if (lambda.minCoeff() < eps) {
        throw numeric_error(fmt::format("stimulus covariance is rank deficient (smallest scaled eigenvalue {:.3e} < "
                                        "eps {:.1e})",
                                        lambda.minCoeff(), eps));
    }
    const Eigen::VectorXd inv_sqrt = (lambda.array() + eps).rsqrt();
    const RowMatrix w = eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose() / std::sqrt(scale);

    ZcaTransform zca;
    zca.mean = moments.mean;
    zca.matrix.assign(w.data(), w.data() + w.size());
    zca.min_eigenvalue = lambda.minCoeff();
    return zca;
}

StimulusMovie apply_zca(const StimulusMovie& movie, const ZcaTransform& zca) {
    check_movie(movie);
    const auto p = static_cast<Eigen::Index>(movie.pixel_count());
    if (zca.mean.size() != movie.pixel_count()) throw config_error("ZCA transform does not match the movie size");
    Eigen::Map<const RowMatrix> w(zca.matrix.data(), p, p);
    Eigen::Map<const Eigen::RowVectorXd> mean(zca.mean.data(), p);
    StimulusMovie out = movie;
    out.whitened = true;
    for (auto& frame : out.frames) {
        Eigen::Map<Eigen::RowVectorXd> row(frame.data(), p);
        const Eigen::RowVectorXd centered = row - mean;
        row = centered * w;  // w is symmetric
    }
    return out;
}

StimulusMovie zca_whiten(const StimulusMovie& movie, double eps) { return apply_zca(movie, fit_zca(movie, eps)); }

std::vector<double> detect_spikelets(std::span<const double> trace, double dt, const SpikeletParams& params) {
    if (trace.size() < 3) throw config_error("spikelet detection needs at least 3 samples");
    if (!(dt > 0.0)) throw config_error("dt must be > 0");
    const std::size_t n = trace.size();

    struct Peak {
        std::size_t index;
        double height;
    };
    std::vector<Peak> peaks;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double v = trace[i];
        if (!(v > trace[i - 1] && v > trace[i + 1])) continue;
        // Prominence: walk outwards until higher ground, tracking the lowest point.
        double left_min = v;
        for (std::size_t j = i; j-- > 0;) {
            if (trace[j] > v) break;
            left_min = std::min(left_min, trace[j]);
        }
        double right_min = v;
        for (std::size_t j = i + 1; j < n; ++j) {
            if (trace[j] > v) break;
            right_min = std::min(right_min, trace[j]);
        }
        if (v - std::max(left_min, right_min) >= params.prominence) peaks.push_back({i, v});
    }

    // Refractory suppression, highest peaks first.
    const double gap = params.refractory / dt;
    std::vector<std::size_t> order(peaks.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return peaks[a].height > peaks[b].height; });
    std::vector<bool> keep(peaks.size(), true);
    for (std::size_t k : order) {
        if (!keep[k]) continue;
        for (std::size_t j = k; j-- > 0 && static_cast<double>(peaks[k].index - peaks[j].index) < gap;) keep[j] = false;
        for (std::size_t j = k + 1; j < peaks.size() && static_cast<double>(peaks[j].index - peaks[k].index) < gap; ++j) {
            keep[j] = false;
        }
    }
    std::vector<double> times;
    for (std::size_t k = 0; k < peaks.size(); ++k) {
        if (keep[k]) times.push_back(static_cast<double>(peaks[k].index) * dt);
    }
    return times;
}

StaAccumulator::StaAccumulator(const StimulusMovie& movie, double window, int bins)
    : movie_(&movie), bin_width_(0.0), bins_(bins), n_bins_total_(0) {
    check_movie(movie);
    if (bins < 1) throw config_error("STA needs at least one lag bin");
    if (!(window > 0.0)) throw config_error("STA window must be > 0");
    bin_width_ = window / bins;
    if (bin_width_ < movie.frame_dt * (1.0 - 1e-12)) {
        throw config_error(fmt::format("STA window {} ms over {} bins is finer than the frame interval {} ms", window,
                                       bins, movie.frame_dt));
    }
    if (window > movie.duration()) {
        throw config_error(fmt::format("STA window {} ms exceeds the recording ({} ms)", window, movie.duration()));
    }
    n_bins_total_ = static_cast<std::size_t>(std::floor(movie.duration() / bin_width_ + 1e-9));
    sum_.assign(static_cast<std::size_t>(bins) * movie.pixel_count(), 0.0);
}

std::vector<double> StaAccumulator::stimulus_before(std::size_t bin) const {
    const std::size_t p = movie_->pixel_count();
    std::vector<double> x(static_cast<std::size_t>(bins_) * p);
    for (int b = 0; b < bins_; ++b) {
        const double t = static_cast<double>(bin - static_cast<std::size_t>(b)) * bin_width_;
        const auto f = std::min(static_cast<std::size_t>(std::floor(t / movie_->frame_dt + 1e-9)), movie_->frames.size() - 1);
        std::copy(movie_->frames[f].begin(), movie_->frames[f].end(), x.begin() + static_cast<std::ptrdiff_t>(b * p));
    }
    return x;
}

bool StaAccumulator::add_bin(std::size_t bin, std::size_t count) {
    if (count == 0) return true;
    if (bin + 1 < static_cast<std::size_t>(bins_) || bin >= n_bins_total_) return false;
    const auto x = stimulus_before(bin);
    const double y = static_cast<double>(count);
    for (std::size_t i = 0; i < x.size(); ++i) sum_[i] += y * x[i];
    n_spikes_ += count;
    return true;
}

void StaAccumulator::add_events(std::span<const double> event_times) {
    // y_i: event count per response bin
    std::vector<std::size_t> bins;
    bins.reserve(event_times.size());
    for (double t : event_times) {
        if (!(t >= 0.0)) continue;
        bins.push_back(static_cast<std::size_t>(std::floor(t / bin_width_ + 1e-9)));
    }
    std::sort(bins.begin(), bins.end());
    for (std::size_t i = 0; i < bins.size();) {
        std::size_t j = i;
        while (j < bins.size() && bins[j] == bins[i]) ++j;
        add_bin(bins[i], j - i);
        i = j;
    }
}

void StaAccumulator::merge(const StaAccumulator& other) {
    if (other.movie_ != movie_ || other.bins_ != bins_ || other.bin_width_ != bin_width_) {
        throw config_error("cannot merge STA accumulators over different stimuli");
    }
    for (std::size_t i = 0; i < sum_.size(); ++i) sum_[i] += other.sum_[i];
    n_spikes_ += other.n_spikes_;
}

std::vector<double> StaAccumulator::average() const {
    if (n_spikes_ == 0) throw numeric_error("no spikelets with a full stimulus history");
    std::vector<double> out(sum_);
    for (double& v : out) v /= static_cast<double>(n_spikes_);
    return out;
}

StaResult compute_sta(const StimulusMovie& stimulus, std::span<const double> events, double window, int bins,
                      std::size_t probe_pixel) {
    if (events.empty()) throw config_error("STA needs at least one event");
    if (probe_pixel >= stimulus.pixel_count()) throw config_error("probe pixel out of range");
    StaAccumulator acc(stimulus, window, bins);
    acc.add_events(events);

    StaResult r;
    r.width = stimulus.width;
    r.height = stimulus.height;
    r.bins = bins;
    r.bin_width = acc.bin_width();
    r.sta = acc.average();
    r.n_spikes = acc.n_spikes();

    const std::size_t p = stimulus.pixel_count();
    r.temporal_filter.resize(static_cast<std::size_t>(bins));
    double peak = 0.0;
    for (int b = 0; b < bins; ++b) {
        const double v = r.sta[static_cast<std::size_t>(b) * p + probe_pixel];
        r.temporal_filter[static_cast<std::size_t>(b)] = v;
        if (std::abs(v) > peak) {
            peak = std::abs(v);
            r.selected_bin = b;
        }
    }
    if (peak > 0.0) {
        for (double& v : r.temporal_filter) v /= peak;
    }
    r.selected_lag = r.selected_bin * r.bin_width;
    const auto first = r.sta.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(r.selected_bin) * p);
    r.spatial_map.assign(first, first + static_cast<std::ptrdiff_t>(p));
    return r;
}

GaussianFit fit_gaussian_to_map(std::span<const double> map, int width, int height) {
    if (width <= 0 || height <= 0 || map.size() != static_cast<std::size_t>(width) * height) {
        throw config_error("map size does not match its dimensions");
    }
    std::size_t arg = 0;
    double best = -1.0;
    double energy = 0.0;
    for (std::size_t i = 0; i < map.size(); ++i) {
        energy += map[i] * map[i];
        if (std::abs(map[i]) > best) {
            best = std::abs(map[i]);
            arg = i;
        }
    }
    const auto [lo, hi] = std::minmax_element(map.begin(), map.end());
    if (!(best > 0.0) || *hi - *lo < 1e-15 * std::max(1.0, best)) throw numeric_error("cannot fit a Gaussian to a flat map");
    for (std::size_t i = 0; i < map.size(); ++i) {
        if (i != arg && std::abs(map[i]) >= best * (1.0 - 1e-12)) throw numeric_error("map has no unique extremum");
    }

    GaussianFit fit;
    fit.center_x = static_cast<int>(arg % static_cast<std::size_t>(width));
    fit.center_y = static_cast<int>(arg / static_cast<std::size_t>(width));

    // For fixed sigma the optimal amplitude is closed form; minimize the profile over sigma.
    auto profile = [&](double sigma, double* amplitude) {
        double mg = 0.0;
        double gg = 0.0;
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                const double dx = x - fit.center_x;
                const double dy = y - fit.center_y;
                const double g = gaussian_at(sigma, dx * dx + dy * dy);
                mg += map[static_cast<std::size_t>(y) * width + x] * g;
                gg += g * g;
            }
        }
        const double a = mg / gg;
        if (amplitude) *amplitude = a;
        return energy - a * mg;  // RSS at the optimal amplitude
    };

    constexpr double kSigmaFloor = 0.05;
    const double sigma_ceiling = std::max(width, height);
    // Coarse log-grid scan, then golden-section refinement around the best bracket.
    constexpr int kGrid = 200;
    double best_rss = std::numeric_limits<double>::infinity();
    int best_k = 0;
    auto grid_sigma = [&](int k) { return kSigmaFloor * std::pow(sigma_ceiling / kSigmaFloor, static_cast<double>(k) / kGrid); };
    for (int k = 0; k <= kGrid; ++k) {
        const double rss = profile(grid_sigma(k), nullptr);
        if (rss < best_rss) {
            best_rss = rss;
            best_k = k;
        }
    }
    double a = std::log(grid_sigma(std::max(best_k - 1, 0)));
    double b = std::log(grid_sigma(std::min(best_k + 1, kGrid)));
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - phi * (b - a);
    double d = a + phi * (b - a);
    double fc = profile(std::exp(c), nullptr);
    double fd = profile(std::exp(d), nullptr);
    for (int it = 0; it < 200 && b - a > 1e-12; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = profile(std::exp(c), nullptr);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = profile(std::exp(d), nullptr);
        }
    }
    fit.sigma = std::exp(0.5 * (a + b));
    const double rss = profile(fit.sigma, &fit.amplitude);
    fit.residual = energy > 0.0 ? rss / energy : 0.0;
    fit.at_lower_bound = best_k == 0 || fit.sigma <= kSigmaFloor * 1.01;
    return fit;
}

std::vector<double> render_fit(const GaussianFit& fit, int width, int height) {
    std::vector<double> out(static_cast<std::size_t>(width) * height);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double dx = x - fit.center_x;
            const double dy = y - fit.center_y;
            out[static_cast<std::size_t>(y) * width + x] = fit.amplitude * gaussian_at(fit.sigma, dx * dx + dy * dy);
        }
    }
    return out;
}

double tail_mass(std::span<const double> map, int width, int height, int cx, int cy, int radius) {
    double s = 0.0;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            if (std::max(std::abs(x - cx), std::abs(y - cy)) >= radius) s += std::abs(map[static_cast<std::size_t>(y) * width + x]);
        }
    }
    return s;
}

StaRun run_sta_experiment(const StaExperiment& ex, std::span<const Image> corpus) {
    StimulusMovie movie = ex.family == StimulusFamily::natural_patches
                              ? natural_movie(corpus, ex.grid, ex.grid, ex.n_frames, ex.frame_dt, ex.seed)
                              : white_movie(ex.family, ex.grid, ex.grid, ex.n_frames, ex.frame_dt, ex.seed);
    if (ex.whiten) movie = zca_whiten(movie);

    StaRun run;
    const GridTopology topology(ex.grid, ex.grid);
    run.probe_cell = topology.index(ex.grid / 2, ex.grid / 2);
    const auto system = build_system(topology, ex.params);

    std::vector<DriveField> drive(movie.frames.size(), DriveField(movie.pixel_count()));
    for (std::size_t f = 0; f < movie.frames.size(); ++f) {
        for (std::size_t i = 0; i < movie.pixel_count(); ++i) {
            double g = ex.params.i_dark * (ex.mean_level + ex.contrast * movie.frames[f][i]);
            if (g < 0.0) {
                g = 0.0;
                ++run.clipped_samples;
            }
            drive[f][i] = g;
        }
    }
    const std::size_t record[] = {run.probe_cell};
    const auto traces = simulate_timevarying(system, drive, movie.frame_dt, record);
    const auto events = detect_spikelets(traces.traces[0], ex.params.dt, ex.spikelets);
    if (events.empty()) throw numeric_error("no spikelets detected in the probe trace");

    run.result = compute_sta(movie, events, ex.window, ex.bins, run.probe_cell);

    const auto& m = run.result.spatial_map;
    const int cx = ex.grid / 2;
    const int cy = ex.grid / 2;
    const double centre = m[run.probe_cell];
    bool extremum = true;
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (i != run.probe_cell && std::abs(m[i]) >= std::abs(centre)) extremum = false;
    }
    bool opposite = true;
    for (int nb : topology.neighbors(run.probe_cell)) {
        if (!(m[static_cast<std::size_t>(nb)] * centre < 0.0)) opposite = false;
    }
    run.off_center = extremum && opposite;
    (void)cx;
    (void)cy;
    try {
        run.fit = fit_gaussian_to_map(m, ex.grid, ex.grid);
    } catch (const Error&) {
        run.fit = GaussianFit{};
    }
    return run;
}

} // namespace prf
