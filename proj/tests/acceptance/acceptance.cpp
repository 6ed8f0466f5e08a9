// Acceptance run: one PASS/FAIL line per criterion, numbered 1-11.
// Usage: acceptance [criterion numbers...]   (default: all)

#include "prf/bench.hpp"
#include "prf/classic_filters.hpp"
#include "prf/core_model.hpp"
#include "prf/metrics.hpp"
#include "prf/noise_forge.hpp"
#include "prf/noise_profiler.hpp"
#include "prf/pr_filter.hpp"
#include "prf/sta_lab.hpp"
#include "prf/synthetic.hpp"

#include "../support/oracles.hpp"
#include "../support/temp_dir.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

using namespace prf;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

// Tolerances and sizes pinned for the acceptance run.
constexpr double kIdentityTol = 1e-6;
constexpr double kRk4RelTol = 0.01;
constexpr double kSymmetryTol = 1e-9;
constexpr int kLiftImages = 10;
constexpr int kLiftSize = 128;
constexpr double kLiftNoisyTarget = 9.4;
constexpr double kLiftNoisyTol = 0.3;
constexpr double kLiftPsnrGain = 6.0;
constexpr double kLiftSsimGain = 0.25;
constexpr double kBlindTol = 0.5;
constexpr int kProfileImages = 10;
constexpr int kProfileSize = 128;
constexpr double kProfileTarget = 9.0;
constexpr double kAfterSingleFraction = 0.5;
constexpr double kNotMoreFraction = 0.7;
constexpr double kLnCorrelation = 0.95;
constexpr std::size_t kLnMinSpikes = 10000;
constexpr int kMetricPairs = 50;
constexpr double kPsnrTol = 1e-6;
constexpr double kSsimTol = 1e-9;

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

Image random_image(int w, int h, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Image img(w, h);
    for (double& v : img.data) v = u(rng);
    return img;
}

Outcome identity_at_zero_coupling() {
    NetworkParams p;
    p.g_gap = 0.0;
    const PrFilter pr(p);
    std::mt19937_64 rng(1);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        const int w = 8 + static_cast<int>(rng() % 57);
        const int h = 8 + static_cast<int>(rng() % 57);
        const Image img = i % 2 ? random_image(w, h, rng) : synthetic_scene(w, h, RngSeed{static_cast<std::uint64_t>(i)});
        const Image out = pr(img);
        const Image ref = minmax_normalize(img);
        for (std::size_t k = 0; k < out.size(); ++k) worst = std::max(worst, std::abs(out.data[k] - ref.data[k]));
    }
    return {worst <= kIdentityTol, fmt::format("20 images, max |pr - minmax| = {:.3e} (tol {:.0e})", worst, kIdentityTol)};
}

Outcome solver_fidelity() {
    NetworkParams p;
    double worst = 0.0;
    const auto single = simulate(build_system(GridTopology(1, 1), p), std::vector<double>{p.i_dark}).peak_deflection;
    worst = std::max(worst, rel(single[0], oracle::rk4_peaks(1, 1, p, {p.i_dark})[0]));
    const auto sys = build_system(GridTopology(3, 3), p);
    std::vector<double> centre(9, 0.0);
    centre[4] = p.i_dark;
    const std::vector<double> pattern{10, 20, 30, 40, 0, 5, 15, 25, 35};
    for (const auto& g : {centre, pattern}) {
        const auto be = simulate(sys, g).peak_deflection;
        const auto rk = oracle::rk4_peaks(3, 3, p, g, 0.001);
        for (std::size_t i = 0; i < 9; ++i) worst = std::max(worst, rel(be[i], rk[i]));
    }
    return {worst < kRk4RelTol, fmt::format("1x1 and two 3x3 drives vs RK4 (h = 0.001 ms): max rel err {:.4f} (tol {})", worst,
                                            kRk4RelTol)};
}

Outcome impulse_shape() {
    const int r = 5;
    const Kernel2D k = impulse_response(NetworkParams{}, r);
    double asym = 0.0;
    for (int y = -r; y <= r; ++y) {
        for (int x = -r; x <= r; ++x) {
            const double v = k.at(x, y);
            for (double o : {k.at(-x, y), k.at(x, -y), k.at(-x, -y), k.at(y, x), k.at(-y, x), k.at(y, -x), k.at(-y, -x)}) {
                asym = std::max(asym, std::abs(o - v));
            }
        }
    }
    bool monotone = true;
    for (int d = 0; d < r; ++d) monotone = monotone && k.at(d + 1, 0) < k.at(d, 0);
    const auto fit = fit_gaussian_to_map(k.weights, k.side(), k.side());
    const auto model = render_fit(fit, k.side(), k.side());
    const double tail = tail_mass(k.weights, k.side(), k.side(), r, r, 2);
    const double tail_fit = tail_mass(model, k.side(), k.side(), r, r, 2);
    const bool pass = asym <= kSymmetryTol && monotone && tail > tail_fit;
    return {pass, fmt::format("g_gap 10: asymmetry {:.1e}, axis-monotone {}, tail mass r>=2 {:.5f} vs Gaussian fit "
                              "(sigma {:.4f}) {:.5f}",
                              asym, monotone ? "yes" : "no", tail, fit.sigma, tail_fit)};
}

struct LiftNumbers {
    bool noisy_in_band = true;
    double noisy_psnr = 0.0, noisy_ssim = 0.0;
    double best_g = 0.0, best_psnr = 0.0, best_ssim = 0.0;
    double best_ssim_any = 0.0;
    double gauss_ssim = 0.0;
    std::string per_g;
};

const LiftNumbers& lift_numbers() {
    static const LiftNumbers n = [] {
        LiftNumbers out;
        const auto corpus = synthetic_corpus(kLiftImages, kLiftSize, kLiftSize, RngSeed{7});
        NoiseSpec spec;
        spec.params = GaussianNoise{0.3};
        spec.target_psnr = kLiftNoisyTarget;
        std::vector<Image> noisy;
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            noisy.push_back(add_noise(corpus[i], spec, derive_seed(RngSeed{2024}, i)));
            const double p = psnr(corpus[i], noisy.back());
            out.noisy_in_band = out.noisy_in_band && std::abs(p - kLiftNoisyTarget) <= kLiftNoisyTol;
            out.noisy_psnr += p / kLiftImages;
            out.noisy_ssim += ssim(corpus[i], noisy.back()) / kLiftImages;
        }
        out.best_psnr = -1e9;
        for (double g : {5.0, 10.0, 20.0}) {
            NetworkParams params;
            params.g_gap = g;
            const PrFilter pr(params);
            double mp = 0.0, ms = 0.0;
            for (std::size_t i = 0; i < corpus.size(); ++i) {
                const Image den = pr(noisy[i]);
                mp += psnr(corpus[i], den) / kLiftImages;
                ms += ssim(corpus[i], den) / kLiftImages;
            }
            out.per_g += fmt::format(" g{}:{:.2f}dB/{:.4f}", g, mp, ms);
            if (mp > out.best_psnr) {
                out.best_g = g;
                out.best_psnr = mp;
                out.best_ssim = ms;
            }
            out.best_ssim_any = std::max(out.best_ssim_any, ms);
        }
        for (double sigma : {1.0, 2.0}) {
            double ms = 0.0;
            for (std::size_t i = 0; i < corpus.size(); ++i) {
                ms += ssim(corpus[i], apply_filter(noisy[i], filters::Gaussian{sigma, 9})) / kLiftImages;
            }
            out.gauss_ssim = std::max(out.gauss_ssim, ms);
        }
        return out;
    }();
    return n;
}

Outcome denoising_lift() {
    const auto& n = lift_numbers();
    const double dp = n.best_psnr - n.noisy_psnr;
    const double ds = n.best_ssim - n.noisy_ssim;
    const bool pass = n.noisy_in_band && dp >= kLiftPsnrGain && ds >= kLiftSsimGain;
    return {pass, fmt::format("{} images {}^2, noisy {:.3f} dB/{:.4f} (all within {}+-{}: {}); best g_gap {} -> "
                              "{:+.2f} dB, {:+.4f} SSIM;{}",
                              kLiftImages, kLiftSize, n.noisy_psnr, n.noisy_ssim, kLiftNoisyTarget, kLiftNoisyTol,
                              n.noisy_in_band ? "yes" : "no", n.best_g, dp, ds, n.per_g)};
}

Outcome ssim_dominance() {
    const auto& n = lift_numbers();
    return {n.best_ssim_any > n.gauss_ssim,
            fmt::format("best PR SSIM {:.4f} vs best Gaussian filter (sigma 1 or 2, k9) {:.4f}", n.best_ssim_any, n.gauss_ssim)};
}

Outcome blind_calibration() {
    const auto corpus = synthetic_corpus(10, 128, 128, RngSeed{11});
    double worst = 0.0;
    int count = 0;
    for (bool with_gaussian : {true, false}) {
        const std::vector<double> targets = with_gaussian ? std::vector<double>{9, 12, 15} : std::vector<double>{9, 14, 18};
        for (double t : targets) {
            for (std::size_t i = 0; i < corpus.size(); ++i) {
                const Image noisy = blind_mixture(corpus[i], with_gaussian, t, derive_seed(RngSeed{5}, i, static_cast<std::uint64_t>(t)));
                worst = std::max(worst, std::abs(psnr(corpus[i], noisy) - t));
                ++count;
            }
        }
    }
    return {worst <= kBlindTol, fmt::format("{} blind mixtures (targets 9/12/15 with Gaussian, 9/14/18 without): max "
                                            "|PSNR - target| {:.3f} dB (tol {})",
                                            count, worst, kBlindTol)};
}

Outcome noise_regularization() {
    const auto corpus = synthetic_corpus(kProfileImages, kProfileSize, kProfileSize, RngSeed{7});
    NoiseSpec spec;
    spec.params = BlindNoise{false};
    spec.target_psnr = kProfileTarget;
    const auto rep = regularization_report(corpus, {}, spec, NetworkParams{});
    const double single = rep.fraction_after_single();
    const double not_more = rep.fraction_after_not_more();
    std::string ks;
    for (const auto& r : rep.rows) ks += fmt::format(" {}->{}", r.before.n_components, r.after.n_components);
    const bool pass = rep.included >= static_cast<std::size_t>(kProfileImages) && single > kAfterSingleFraction &&
                      not_more > kNotMoreFraction;
    return {pass, fmt::format("{} images {}^2, blind non-Gaussian at {} dB: after k=1 on {:.2f} (need > {}), after <= "
                              "before on {:.2f} (need > {}); k before->after:{}",
                              rep.included, kProfileSize, kProfileTarget, single, kAfterSingleFraction, not_more,
                              kNotMoreFraction, ks)};
}

Outcome sta_oracle() {
    // Linear-threshold cell on white Gaussian frames.
    const int w = 4, h = 4, bins = 5;
    std::vector<double> kernel(static_cast<std::size_t>(bins) * w * h);
    for (int b = 0; b < bins; ++b) {
        const double temporal = std::exp(-std::pow(b - 1.5, 2) / 2.0) - 0.3 * std::exp(-std::pow(b - 3.5, 2) / 2.0);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                kernel[(static_cast<std::size_t>(b) * h + y) * w + x] =
                    temporal * std::exp(-(std::pow(x - 1.5, 2) + std::pow(y - 1.2, 2)) / 1.5);
            }
        }
    }
    const auto movie = white_movie(StimulusFamily::gaussian_white, w, h, 40000, 10.0, RngSeed{41});
    const auto events = oracle::ln_cell_events(movie, kernel, bins, 1.0);
    const auto r = compute_sta(movie, events, bins * 10.0, bins, 5);
    const double corr = oracle::correlation(r.sta, kernel);

    // Exact agreement with the naive loop on integer and real-valued fixtures.
    bool exact = true;
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        StimulusMovie m{3, 3, 5.0, StimulusFamily::gaussian_white, false, {}};
        m.frames.assign(400, DriveField(9));
        std::uniform_int_distribution<int> level(-3, 3);
        std::normal_distribution<double> normal;
        for (auto& f : m.frames) {
            for (double& v : f) v = trial % 2 ? static_cast<double>(level(rng)) : normal(rng);
        }
        std::vector<double> ev;
        std::uniform_real_distribution<double> when(0.0, m.duration());
        if (trial % 2) {
            for (int i = 0; i < 300; ++i) ev.push_back(when(rng));
        } else {
            for (int bin = 0; bin < 400; bin += 1 + static_cast<int>(rng() % 4)) ev.push_back((bin + 0.25) * 5.0);
        }
        std::sort(ev.begin(), ev.end());
        exact = exact && compute_sta(m, ev, 20.0, 4, 0).sta == oracle::naive_triggered_mean(m, ev, 20.0, 4);
    }
    const bool pass = r.n_spikes >= kLnMinSpikes && corr > kLnCorrelation && exact;
    return {pass, fmt::format("LN cell: n_s {}, r(STA, kernel) {:.4f} (need > {}); accumulator == naive mean on 10 "
                              "fixtures: {}",
                              r.n_spikes, corr, kLnCorrelation, exact ? "yes" : "no")};
}

Outcome off_center() {
    StaExperiment ex;  // 10x10 grid, g_gap 10, white Gaussian frames
    const auto run = run_sta_experiment(ex);
    const auto& m = run.result.spatial_map;
    const double c = m[run.probe_cell];
    const std::size_t n = static_cast<std::size_t>(ex.grid);
    const double nb = (m[run.probe_cell - 1] + m[run.probe_cell + 1] + m[run.probe_cell - n] + m[run.probe_cell + n]) / 4.0;
    return {run.off_center, fmt::format("n_s {}, centre {:+.4f}, mean neighbour {:+.4f}, latency {} ms, fit sigma {:.3f} "
                                        "(reported only)",
                                        run.result.n_spikes, c, nb, run.result.selected_lag, run.fit.sigma)};
}

Outcome metric_oracles() {
    std::mt19937_64 rng(10);
    double dp = 0.0, ds = 0.0;
    for (int i = 0; i < kMetricPairs; ++i) {
        const int w = 11 + static_cast<int>(rng() % 54);
        const int h = 11 + static_cast<int>(rng() % 54);
        const Image a = random_image(w, h, rng);
        Image b = a;
        std::normal_distribution<double> noise(0.0, 0.02 + 0.01 * (i % 10));
        for (double& v : b.data) v = std::clamp(v + noise(rng), 0.0, 1.0);
        dp = std::max(dp, std::abs(psnr(a, b) - oracle::naive_psnr(a, b)));
        ds = std::max(ds, std::abs(ssim(a, b) - oracle::naive_ssim(a, b)));
    }
    const Image x = random_image(40, 30, rng, 0.0, 0.9);
    Image y = x;
    for (double& v : y.data) v += 0.1;
    const double p20 = psnr(x, y);
    const bool pass = dp <= kPsnrTol && ds <= kSsimTol && std::abs(p20 - 20.0) <= 1e-9;
    return {pass, fmt::format("{} pairs: max |dPSNR| {:.2e} dB, max |dSSIM| {:.2e}; psnr(x, x+0.1) = {:.12f}", kMetricPairs, dp,
                              ds, p20)};
}

Outcome determinism() {
    testing::TempDir dir;
    BenchConfig cfg = BenchConfig::defaults();
    cfg.out = dir / "a";
    const Corpus corpus = corpus_for(cfg);
    run_benchmark(cfg, corpus);
    BenchConfig again = cfg;
    again.out = dir / "b";
    run_benchmark(again, corpus);
    bool same = true;
    std::size_t files = 0;
    for (const auto& e : std::filesystem::recursive_directory_iterator(cfg.out)) {
        if (!e.is_regular_file()) continue;
        const auto twin = again.out / std::filesystem::relative(e.path(), cfg.out);
        same = same && testing::slurp(e.path()) == testing::slurp(twin);
        ++files;
    }
    return {same && files > 2, fmt::format("desk-scale benchmark ({} images, {} noises, {} filters) run twice: {} CSV files "
                                           "byte-identical: {}",
                                           corpus.images.size(), cfg.noises.size(), cfg.filters.size(), files,
                                           same ? "yes" : "no")};
}

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
};

} // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all{
        {1, "identity at zero coupling", identity_at_zero_coupling},
        {2, "solver fidelity", solver_fidelity},
        {3, "impulse-response shape", impulse_shape},
        {4, "denoising lift", denoising_lift},
        {5, "SSIM over Gaussian baseline", ssim_dominance},
        {6, "blind-noise calibration", blind_calibration},
        {7, "noise regularization", noise_regularization},
        {8, "STA oracle", sta_oracle},
        {9, "off-center sign structure", off_center},
        {10, "metric oracles", metric_oracles},
        {11, "benchmark determinism", determinism},
    };
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

    int failed = 0;
    for (const auto& c : all) {
        if (!wanted.empty() && !wanted.contains(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, fmt::format("threw: {}", e.what())};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        fmt::print("{} {:>2} {}: {} [{:.1f} s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail, secs);
        std::fflush(stdout);
        if (!o.pass) ++failed;
    }
    return failed == 0 ? 0 : 1;
}
