#pragma once

#include "prf/core_model.hpp"
#include "prf/image.hpp"
#include "prf/noise_forge.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace prf {

enum class StimulusFamily { gaussian_white, laplacian_white, natural_patches };

// Zero-mean stimulus frames over a width x height patch; one frame every frame_dt ms.
struct StimulusMovie {
    int width = 0;
    int height = 0;
    double frame_dt = 10.0;
    StimulusFamily family = StimulusFamily::gaussian_white;
    bool whitened = false;
    std::vector<DriveField> frames;

    std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width) * height; }
    double duration() const noexcept { return frame_dt * static_cast<double>(frames.size()); }
};

// Unit-variance i.i.d. Gaussian or Laplacian frames.
StimulusMovie white_movie(StimulusFamily family, int width, int height, std::size_t n_frames, double frame_dt,
                          RngSeed seed);

// Random patches cut from the corpus, mean-subtracted per pixel and scaled to unit
// average variance.
StimulusMovie natural_movie(std::span<const Image> corpus, int width, int height, std::size_t n_frames,
                            double frame_dt, RngSeed seed);

// Per-pixel mean of each movie pixel and the biased (1/N) covariance.
struct MovieMoments {
    std::vector<double> mean;
    std::vector<double> covariance;  // P x P, row-major
};
MovieMoments movie_moments(const StimulusMovie& movie);

struct ZcaTransform {
    std::vector<double> mean;
    std::vector<double> matrix;  // symmetric P x P, row-major
    double min_eigenvalue = 0.0; // of the unit-trace-scaled covariance
};

// Symmetric whitening W = U diag(1/sqrt(lambda + eps)) U^T, computed on the covariance
// rescaled to unit average variance. Rejects covariances whose smallest scaled
// eigenvalue is below eps.
ZcaTransform fit_zca(const StimulusMovie& movie, double eps = 1e-5);
StimulusMovie apply_zca(const StimulusMovie& movie, const ZcaTransform& zca);
StimulusMovie zca_whiten(const StimulusMovie& movie, double eps = 1e-5);

struct SpikeletParams {
    double prominence = 0.5;  // mV
    double refractory = 5.0;  // ms
};

// Strict local maxima whose topographic prominence reaches the threshold; among events
// closer than the refractory gap only the highest survives. Returns times (index * dt).
std::vector<double> detect_spikelets(std::span<const double> trace, double dt, const SpikeletParams& params = {});

// Spike-triggered sum: every response bin i with count y_i adds y_i * x_i, where
// x_i stacks the stimulus frames at lags 0..bins-1 before the bin. Shards can be merged.
class StaAccumulator {
public:
    StaAccumulator(const StimulusMovie& movie, double window, int bins);

    // Adds `count` events falling into time bin `bin` (width window/bins). Returns false
    // when the bin lacks a full stimulus history.
    bool add_bin(std::size_t bin, std::size_t count = 1);
    void add_events(std::span<const double> event_times);
    void merge(const StaAccumulator& other);

    std::size_t n_spikes() const noexcept { return n_spikes_; }
    double bin_width() const noexcept { return bin_width_; }
    int bins() const noexcept { return bins_; }
    // Stimulus vector preceding a response bin: lags x pixels.
    std::vector<double> stimulus_before(std::size_t bin) const;
    // sum / n_spikes, lags x pixels.
    std::vector<double> average() const;

private:
    const StimulusMovie* movie_;
    double bin_width_;
    int bins_;
    std::size_t n_bins_total_;
    std::size_t n_spikes_ = 0;
    std::vector<double> sum_;
};

struct StaResult {
    int width = 0;
    int height = 0;
    int bins = 0;
    double bin_width = 0.0;             // ms
    std::vector<double> sta;            // bins x pixels, lag 0 first
    std::vector<double> temporal_filter; // probe-pixel lag profile, max |.| = 1
    std::vector<double> spatial_map;    // STA at the selected lag
    int selected_bin = 0;
    double selected_lag = 0.0;          // ms before the event
    std::size_t n_spikes = 0;
};

// Throws config_error for empty events or a window longer than the recording, and
// numeric_error when no event has a full stimulus history.
StaResult compute_sta(const StimulusMovie& stimulus, std::span<const double> events, double window, int bins,
                      std::size_t probe_pixel);

struct GaussianFit {
    double sigma = 0.0;      // cells
    double amplitude = 0.0;  // signed
    double residual = 0.0;   // RSS / sum of squares of the map
    int center_x = 0;
    int center_y = 0;
    bool at_lower_bound = false;  // sigma hit the search floor: map is delta-like
};

// Least-squares isotropic Gaussian centred on the unique |extremum|.
GaussianFit fit_gaussian_to_map(std::span<const double> map, int width, int height);

// Sampled Gaussian of the fit evaluated on the map's grid.
std::vector<double> render_fit(const GaussianFit& fit, int width, int height);

// Sum of |w| over cells at Chebyshev distance >= radius from (cx, cy).
double tail_mass(std::span<const double> map, int width, int height, int cx, int cy, int radius);

struct StaExperiment {
    int grid = 10;
    NetworkParams params{};
    StimulusFamily family = StimulusFamily::gaussian_white;
    bool whiten = false;
    std::size_t n_frames = 20000;
    double frame_dt = 10.0;
    // Drive = i_dark * (mean_level + contrast * stimulus), clipped at 0.
    double mean_level = 0.5;
    double contrast = 0.15;
    double window = 200.0;
    int bins = 20;
    SpikeletParams spikelets{};
    RngSeed seed{1};
};

struct StaRun {
    StaResult result;
    std::size_t probe_cell = 0;
    std::size_t clipped_samples = 0;
    GaussianFit fit;
    bool off_center = false;   // centre is the |extremum| and all 4 neighbours have opposite sign
};

// Full pipeline: stimulus synthesis, optional whitening, grid simulation, spikelet
// detection and STA at the centre cell. natural_patches needs a corpus.
StaRun run_sta_experiment(const StaExperiment& experiment, std::span<const Image> corpus = {});

} // namespace prf
