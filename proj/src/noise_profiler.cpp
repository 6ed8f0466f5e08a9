#include "prf/noise_profiler.hpp"

#include "prf/error.hpp"
#include "prf/parallel.hpp"
#include "prf/pr_filter.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <numbers>
#include <random>

namespace prf {

namespace {

struct Moments {
    double mean = 0.0;
    double var = 0.0;
};

Moments moments(std::span<const double> x) {
    double m = 0.0;
    for (double v : x) m += v;
    m /= static_cast<double>(x.size());
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return {m, s / static_cast<double>(x.size())};
}

// k-means++ seeding followed by a few Lloyd sweeps; returns component guesses.
std::vector<MixtureComponent> kmeans_init(std::span<const double> x, int k, std::mt19937_64& rng, double var_floor) {
    const std::size_t n = x.size();
    std::vector<double> centres;
    centres.push_back(x[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)]);
    std::vector<double> d2(n);
    while (static_cast<int>(centres.size()) < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (double c : centres) best = std::min(best, (x[i] - c) * (x[i] - c));
            d2[i] = best;
            total += best;
        }
        if (!(total > 0.0)) {
            centres.push_back(centres.back());
            continue;
        }
        double r = std::uniform_real_distribution<double>(0.0, total)(rng);
        std::size_t pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
            r -= d2[i];
            if (r <= 0.0) {
                pick = i;
                break;
            }
        }
        centres.push_back(x[pick]);
    }

    std::vector<int> label(n, 0);
    std::vector<double> sum(static_cast<std::size_t>(k));
    std::vector<double> sq(static_cast<std::size_t>(k));
    std::vector<std::size_t> count(static_cast<std::size_t>(k));
    for (int sweep = 0; sweep < 10; ++sweep) {
        std::fill(sum.begin(), sum.end(), 0.0);
        std::fill(count.begin(), count.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            for (int j = 1; j < k; ++j) {
                if (std::abs(x[i] - centres[static_cast<std::size_t>(j)]) < std::abs(x[i] - centres[static_cast<std::size_t>(best)])) best = j;
            }
            label[i] = best;
            sum[static_cast<std::size_t>(best)] += x[i];
            ++count[static_cast<std::size_t>(best)];
        }
        for (int j = 0; j < k; ++j) {
            if (count[static_cast<std::size_t>(j)] > 0) centres[static_cast<std::size_t>(j)] = sum[static_cast<std::size_t>(j)] / static_cast<double>(count[static_cast<std::size_t>(j)]);
        }
    }
    std::fill(sq.begin(), sq.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto j = static_cast<std::size_t>(label[i]);
        sq[j] += (x[i] - centres[j]) * (x[i] - centres[j]);
    }
    const Moments all = moments(x);
    std::vector<MixtureComponent> comps(static_cast<std::size_t>(k));
    for (std::size_t j = 0; j < comps.size(); ++j) {
        if (count[j] == 0) {
            comps[j] = {1.0 / k, centres[j], std::sqrt(all.var)};
            continue;
        }
        const double var = std::max(sq[j] / static_cast<double>(count[j]), var_floor);
        comps[j] = {static_cast<double>(count[j]) / static_cast<double>(n), centres[j], std::sqrt(var)};
        comps[j].weight = std::max(comps[j].weight, 1e-6);
    }
    double wsum = 0.0;
    for (const auto& c : comps) wsum += c.weight;
    for (auto& c : comps) c.weight /= wsum;
    return comps;
}

struct EmOutcome {
    std::vector<MixtureComponent> comps;
    double ll = -std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
    bool monotone = true;
};

EmOutcome run_em(std::span<const double> x, std::vector<MixtureComponent> comps, const GmmOptions& opt,
                 double var_floor, double centre) {
    const std::size_t n = x.size();
    const auto k = static_cast<Eigen::Index>(comps.size());
    const double log_2pi = std::log(2.0 * std::numbers::pi);
    constexpr Eigen::Index kBlock = 512;
    Eigen::ArrayXd logc(k), inv2v(k), mean(k), s0(k), s1(k), s2(k);
    Eigen::ArrayXXd resp(kBlock, k);

    EmOutcome out;
    double prev = -std::numeric_limits<double>::infinity();
    for (int it = 0; it < opt.max_iterations; ++it) {
        // E-step fused with the M-step sufficient statistics, taken about the
        // sample mean so the variance update stays well conditioned.
        for (Eigen::Index j = 0; j < k; ++j) {
            const auto& c = comps[static_cast<std::size_t>(j)];
            const double var = c.sigma * c.sigma;
            logc(j) = std::log(c.weight) - 0.5 * (log_2pi + std::log(var));
            inv2v(j) = 0.5 / var;
            mean(j) = c.mean;
        }
        s0.setZero();
        s1.setZero();
        s2.setZero();
        double ll = 0.0;
        for (std::size_t first = 0; first < n; first += kBlock) {
            const auto m = static_cast<Eigen::Index>(std::min<std::size_t>(kBlock, n - first));
            const Eigen::Map<const Eigen::ArrayXd> xb(x.data() + first, m);
            auto r = resp.topRows(m);
            for (Eigen::Index j = 0; j < k; ++j) r.col(j) = logc(j) - (xb - mean(j)).square() * inv2v(j);
            const Eigen::ArrayXd mx = r.rowwise().maxCoeff();
            r.colwise() -= mx;
            r = r.exp();
            const Eigen::ArrayXd total = r.rowwise().sum();
            ll += (mx + total.log()).sum();
            r.colwise() /= total;
            const Eigen::ArrayXd xc = xb - centre;
            s0 += r.colwise().sum().transpose();
            r.colwise() *= xc;
            s1 += r.colwise().sum().transpose();
            r.colwise() *= xc;
            s2 += r.colwise().sum().transpose();
        }
        // ll belongs to the parameters entering this E-step.
        if (ll < prev - 1e-9 * std::abs(prev)) out.monotone = false;
        out.comps = comps;
        out.ll = ll;
        out.iterations = it;
        if (it > 0 && std::abs(ll - prev) / static_cast<double>(n) < opt.tolerance) {
            out.converged = true;
            break;
        }
        prev = ll;

        for (Eigen::Index j = 0; j < k; ++j) {
            auto& c = comps[static_cast<std::size_t>(j)];
            if (!(s0(j) > 1e-12)) {
                // Dead component: leave it in place with negligible weight.
                c.weight = 1e-300;
                continue;
            }
            const double mu = s1(j) / s0(j);
            const double var = std::max(s2(j) / s0(j) - mu * mu, var_floor);
            c = {s0(j) / static_cast<double>(n), centre + mu, std::sqrt(var)};
        }
    }
    return out;
}

} // namespace

std::vector<double> residual(const Image& clean, const Image& processed) {
    if (!clean.same_shape(processed) || clean.data.size() != processed.data.size()) {
        throw config_error(fmt::format("residual needs equal dimensions ({}x{} vs {}x{})", clean.width, clean.height,
                                       processed.width, processed.height));
    }
    std::vector<double> r(clean.data.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = processed.data[i] - clean.data[i];
    return r;
}

MixtureFit fit_gmm_fixed_k(std::span<const double> x, int k, const GmmOptions& opt) {
    if (k < 1 || k > 4) throw config_error("component count must lie in [1, 4]");
    if (x.size() < 100) throw config_error(fmt::format("GMM fitting needs >= 100 samples (got {})", x.size()));
    for (double v : x) {
        if (!std::isfinite(v)) throw numeric_error("GMM samples must be finite");
    }
    const Moments all = moments(x);
    if (!(all.var > 1e-24)) throw numeric_error("degenerate samples: zero variance");
    const double var_floor = 1e-8 * all.var;

    MixtureFit fit;
    fit.n_components = k;
    if (k == 1) {
        // Closed form maximum likelihood.
        const double ll = -0.5 * static_cast<double>(x.size()) * (std::log(2.0 * std::numbers::pi * all.var) + 1.0);
        fit.components = {{1.0, all.mean, std::sqrt(all.var)}};
        fit.log_likelihood = ll;
    } else {
        const int restarts = std::max(1, opt.restarts);
        std::vector<EmOutcome> outcomes(static_cast<std::size_t>(restarts));
        parallel_for(outcomes.size(), [&](std::size_t r) {
            std::mt19937_64 rng(opt.seed ^ (0x9e3779b97f4a7c15ULL * (r + 1)) ^ (static_cast<std::uint64_t>(k) << 48));
            outcomes[r] = run_em(x, kmeans_init(x, k, rng, var_floor), opt, var_floor, all.mean);
        });
        const auto best = std::max_element(outcomes.begin(), outcomes.end(),
                                           [](const EmOutcome& a, const EmOutcome& b) { return a.ll < b.ll; });
        fit.components = best->comps;
        fit.log_likelihood = best->ll;
        fit.iterations = best->iterations;
        fit.converged = best->converged;
        for (const auto& o : outcomes) fit.monotone = fit.monotone && o.monotone;
        std::sort(fit.components.begin(), fit.components.end(),
                  [](const MixtureComponent& a, const MixtureComponent& b) { return a.mean < b.mean; });
        double wsum = 0.0;
        for (const auto& c : fit.components) wsum += c.weight;
        for (auto& c : fit.components) c.weight /= wsum;
    }
    const double params = 3.0 * k - 1.0;
    fit.bic = -2.0 * fit.log_likelihood + params * std::log(static_cast<double>(x.size()));
    return fit;
}

MixtureFit fit_gmm(std::span<const double> x, int max_k, const GmmOptions& opt) {
    if (max_k < 1 || max_k > 4) throw config_error("max_k must lie in [1, 4]");
    MixtureFit best;
    std::vector<double> bics;
    for (int k = 1; k <= max_k; ++k) {
        auto fit = fit_gmm_fixed_k(x, k, opt);
        bics.push_back(fit.bic);
        if (k == 1 || fit.bic < best.bic) {
            const bool monotone = best.monotone && fit.monotone;
            best = std::move(fit);
            best.monotone = monotone;
        } else {
            best.monotone = best.monotone && fit.monotone;
        }
    }
    best.bic_by_k = std::move(bics);
    return best;
}

std::vector<std::size_t> residual_histogram(std::span<const double> samples, int bins, double lo, double hi) {
    if (bins < 1 || !(hi > lo)) throw config_error("invalid histogram binning");
    std::vector<std::size_t> h(static_cast<std::size_t>(bins), 0);
    for (double v : samples) {
        const double pos = (v - lo) / (hi - lo) * bins;
        const int b = std::clamp(static_cast<int>(std::floor(pos)), 0, bins - 1);
        ++h[static_cast<std::size_t>(b)];
    }
    return h;
}

double RegularizationReport::fraction_after_single() const {
    if (included == 0) return 0.0;
    return static_cast<double>(k_after_hist.empty() ? 0 : k_after_hist[0]) / static_cast<double>(included);
}

double RegularizationReport::fraction_before_single() const {
    if (included == 0) return 0.0;
    return static_cast<double>(k_before_hist.empty() ? 0 : k_before_hist[0]) / static_cast<double>(included);
}

double RegularizationReport::fraction_after_not_more() const {
    if (included == 0) return 0.0;
    std::size_t ok = 0;
    for (const auto& r : rows) {
        if (!r.excluded && r.after.n_components <= r.before.n_components) ++ok;
    }
    return static_cast<double>(ok) / static_cast<double>(included);
}

RegularizationReport regularization_report(std::span<const Image> corpus, std::span<const std::string> ids,
                                           const NoiseSpec& spec, const NetworkParams& params,
                                           const ProfileOptions& options) {
    if (corpus.empty()) throw config_error("regularization report needs a nonempty corpus");
    if (!ids.empty() && ids.size() != corpus.size()) throw config_error("image id count does not match the corpus");
    const PrFilter pr(params);

    RegularizationReport report;
    report.rows.resize(corpus.size());
    report.k_before_hist.assign(static_cast<std::size_t>(options.max_k), 0);
    report.k_after_hist.assign(static_cast<std::size_t>(options.max_k), 0);

    for (std::size_t i = 0; i < corpus.size(); ++i) {
        auto& row = report.rows[i];
        row.image_id = ids.empty() ? fmt::format("img{:03}", i) : ids[i];
        const Image& clean = corpus[i];
        const Image noisy = add_noise(clean, spec, derive_seed(options.seed, i));
        const auto before = residual(clean, noisy);
        const auto after = residual(pr(clean), pr(noisy));
        row.hist_before = residual_histogram(before);
        row.hist_after = residual_histogram(after);
        try {
            row.before = fit_gmm(before, options.max_k, options.gmm);
            row.after = fit_gmm(after, options.max_k, options.gmm);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::numeric) throw;
            row.excluded = true;
            row.reason = e.what();
            continue;
        }
        ++report.included;
        ++report.k_before_hist[static_cast<std::size_t>(row.before.n_components - 1)];
        ++report.k_after_hist[static_cast<std::size_t>(row.after.n_components - 1)];
    }
    return report;
}

} // namespace prf
