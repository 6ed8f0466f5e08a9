#pragma once

#include "prf/core_model.hpp"
#include "prf/image.hpp"
#include "prf/noise_forge.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace prf {

struct MixtureComponent {
    double weight = 0.0;
    double mean = 0.0;
    double sigma = 0.0;
};

struct MixtureFit {
    std::vector<MixtureComponent> components;
    int n_components = 0;
    double bic = 0.0;
    double log_likelihood = 0.0;
    int iterations = 0;
    bool converged = true;          // false: best-so-far after the iteration cap
    bool monotone = true;           // log-likelihood never decreased between EM steps
    std::vector<double> bic_by_k;   // index k-1
};

struct GmmOptions {
    int restarts = 20;
    int max_iterations = 500;
    // Stop once the mean per-sample log-likelihood changes by less than this.
    double tolerance = 1e-8;
    std::uint64_t seed = 0x5eed;
};

// processed - clean, flattened.
std::vector<double> residual(const Image& clean, const Image& processed);

// EM for k = 1..max_k (k-means++ initialised restarts), BIC-selected.
// Throws numeric_error for zero-variance samples.
MixtureFit fit_gmm(std::span<const double> samples, int max_k = 4, const GmmOptions& options = {});
MixtureFit fit_gmm_fixed_k(std::span<const double> samples, int k, const GmmOptions& options = {});

// 101 uniform bins over [-1, 1]; values outside land in the edge bins.
std::vector<std::size_t> residual_histogram(std::span<const double> samples, int bins = 101, double lo = -1.0,
                                            double hi = 1.0);

struct ProfileRow {
    std::string image_id;
    bool excluded = false;
    std::string reason;
    MixtureFit before;
    MixtureFit after;
    std::vector<std::size_t> hist_before;
    std::vector<std::size_t> hist_after;
};

struct RegularizationReport {
    std::vector<ProfileRow> rows;
    // counts of selected component numbers, index k-1
    std::vector<std::size_t> k_before_hist;
    std::vector<std::size_t> k_after_hist;
    std::size_t included = 0;

    double fraction_after_single() const;
    double fraction_after_not_more() const;
    double fraction_before_single() const;
};

struct ProfileOptions {
    int max_k = 4;
    GmmOptions gmm{};
    RngSeed seed{2024};
};

// Before: noisy - clean. After: pr(noisy) - pr(clean), so filter blur is not counted as noise.
RegularizationReport regularization_report(std::span<const Image> corpus, std::span<const std::string> ids,
                                           const NoiseSpec& spec, const NetworkParams& params,
                                           const ProfileOptions& options = {});

} // namespace prf
