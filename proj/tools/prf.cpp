// prf: command-line front end for the photoreceptor-network denoiser.

#include "prf/bench.hpp"
#include "prf/classic_filters.hpp"
#include "prf/config.hpp"
#include "prf/error.hpp"
#include "prf/image_io.hpp"
#include "prf/metrics.hpp"
#include "prf/noise_forge.hpp"
#include "prf/noise_profiler.hpp"
#include "prf/pr_filter.hpp"
#include "prf/sta_lab.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <fmt/format.h>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace prf;

namespace {

enum Exit : int { ok = 0, bad_config = 2, bad_io = 3, bad_numeric = 4, bad_format = 5 };

int exit_code(ErrorKind k) {
    switch (k) {
    case ErrorKind::config: return bad_config;
    case ErrorKind::io: return bad_io;
    case ErrorKind::numeric: return bad_numeric;
    case ErrorKind::format: return bad_format;
    }
    return bad_config;
}

// Options shared by the config-driven subcommands.
struct Common {
    std::string config;
    std::vector<std::string> sets;
    std::optional<double> g_gap;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> metric_mode;
};

KeyValueConfig gather(const Common& c) {
    KeyValueConfig kv = c.config.empty() ? KeyValueConfig::parse("", "<defaults>") : KeyValueConfig::load(c.config);
    for (const auto& s : c.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw config_error(fmt::format("--set expects key=value, got '{}'", s));
        kv.set(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
    }
    if (c.g_gap) kv.set("g_gap", fmt::format("{}", *c.g_gap));
    if (c.seed) kv.set("seed", fmt::format("{}", *c.seed));
    if (c.out) kv.set("out", *c.out);
    if (c.metric_mode) kv.set("metric_mode", *c.metric_mode);
    return kv;
}

void announce(std::string_view cmd, const std::string& text) {
    fmt::print(stderr, "# prf {}: effective configuration\n", cmd);
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto end = std::min(text.find('\n', pos), text.size());
        fmt::print(stderr, "#   {}\n", text.substr(pos, end - pos));
        pos = end + 1;
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error(fmt::format("cannot write {}", path.string()));
    out << text;
    if (!out) throw io_error(fmt::format("write failed for {}", path.string()));
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw io_error(fmt::format("cannot create {}: {}", dir.string(), ec.message()));
}

// Signed field rendered onto [0,1] with zero at mid-grey.
Image signed_to_image(std::span<const double> v, int w, int h) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    Image img(w, h, 0.5);
    if (m > 0.0) {
        for (std::size_t i = 0; i < v.size(); ++i) img.data[i] = 0.5 + 0.5 * v[i] / m;
    }
    return img;
}

// ---- denoise -------------------------------------------------------------

struct DenoiseArgs {
    std::string input;
    std::string output;
    std::string filter = "pr";
    std::optional<double> g_gap;
    std::optional<double> sigma;
    std::optional<int> ksize;
    std::string reference;
    std::string metric_mode = "float";
    std::vector<std::string> sets;
};

int cmd_denoise(const DenoiseArgs& a) {
    KeyValueConfig kv = KeyValueConfig::parse("", "<command line>");
    for (const auto& s : a.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw config_error(fmt::format("--set expects key=value, got '{}'", s));
        kv.set(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
    }
    if (a.g_gap) kv.set("g_gap", fmt::format("{}", *a.g_gap));
    NetworkParams model = read_model(kv);
    kv.reject_unused();

    BenchFilter f = parse_bench_filter(a.filter);
    if (f.kind == BenchFilter::Kind::pr && a.filter == "pr") f.g_gap = model.g_gap;
    if (f.kind == BenchFilter::Kind::pr) model.g_gap = f.g_gap;
    if (f.kind == BenchFilter::Kind::classic) {
        std::visit(
            [&](auto& k) {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, filters::Gaussian>) {
                    if (a.sigma) k.sigma = *a.sigma;
                    if (a.ksize) k.ksize = *a.ksize;
                } else if constexpr (std::is_same_v<K, filters::AdaptiveMedian>) {
                    if (a.ksize) k.max_ksize = *a.ksize;
                } else {
                    if (a.ksize) k.ksize = *a.ksize;
                }
            },
            f.classic);
        validate(f.classic);
    }
    MetricMode mode = MetricMode::float_values;
    if (a.metric_mode == "8bit") {
        mode = MetricMode::quantized_8bit;
    } else if (a.metric_mode != "float") {
        throw config_error(fmt::format("--metric-mode must be float or 8bit (got '{}')", a.metric_mode));
    }

    announce("denoise", fmt::format("input={}\noutput={}\nfilter={}\nreference={}\nmetric_mode={}\n{}", a.input, a.output,
                                    f.label(), a.reference, a.metric_mode, model_text(model)));

    ImageInfo info;
    const Image in = read_image(a.input, &info);
    if (info.converted_from_color) fmt::print(stderr, "note: {} is colour, converted with Rec. 601 luma\n", a.input);
    validate(in);
    Image out;
    switch (f.kind) {
    case BenchFilter::Kind::noisy: out = in; break;
    case BenchFilter::Kind::classic: out = apply_filter(in, f.classic); break;
    case BenchFilter::Kind::pr: out = pr_denoise(in, model); break;
    }
    write_image(out, a.output);

    if (!a.reference.empty()) {
        const Image ref = read_image(a.reference);
        validate(ref);
        const auto before = evaluate(ref, in, mode);
        const auto after = evaluate(ref, out, mode);
        fmt::print(stderr, "input:  PSNR {:.4f} dB  SSIM {:.4f}\n", before.psnr, before.ssim);
        fmt::print(stderr, "output: PSNR {:.4f} dB  SSIM {:.4f}\n", after.psnr, after.ssim);
    }
    return ok;
}

// ---- noise ---------------------------------------------------------------

int cmd_noise(const std::string& input, const std::string& spec_text, std::uint64_t seed, const std::string& output) {
    const NoiseSpec spec = parse_noise_spec(spec_text);
    announce("noise", fmt::format("input={}\nnoise={}\nseed={}\noutput={}\n", input, to_string(spec), seed, output));
    const Image in = read_image(input);
    validate(in);
    const auto res = add_noise_detailed(in, spec, RngSeed{seed});
    write_image(res.noisy, output);
    fmt::print(stderr, "noisy PSNR {:.4f} dB (multiplier {:.6g}, {} calibration steps)\n", res.achieved_psnr,
               res.multiplier, res.iterations);
    return ok;
}

// ---- benchmark -----------------------------------------------------------

int cmd_benchmark(const Common& c, const std::vector<std::string>& filters) {
    KeyValueConfig kv = gather(c);
    if (!filters.empty()) kv.set("filters", fmt::format("{}", fmt::join(filters, ";")));
    // --g-gap on a benchmark retargets the PR columns rather than the model default.
    std::optional<std::string> gg;
    if (c.g_gap) {
        gg = fmt::format("{}", *c.g_gap);
        kv.set("g_gap", "10");
    }
    BenchConfig cfg = BenchConfig::from(kv);
    if (gg) {
        for (auto& f : cfg.filters) {
            if (f.kind == BenchFilter::Kind::pr) f.g_gap = *c.g_gap;
        }
    }
    announce("benchmark", cfg.to_text());
    const Corpus corpus = corpus_for(cfg);
    const auto report = run_benchmark(cfg, corpus);
    std::size_t resumed = 0;
    std::size_t failures = 0;
    for (const auto& cell : report.cells) {
        resumed += cell.resumed ? 1 : 0;
        failures += cell.rows.size() - cell.ok_count();
    }
    fmt::print(stderr, "{} cells ({} resumed), {} images, {} failed rows -> {}\n", report.cells.size(), resumed,
               corpus.images.size(), failures, (cfg.out / "report.csv").string());
    for (const auto& cell : report.cells) {
        fmt::print("{:<40} {:<18} PSNR {:8.4f}  SSIM {:.4f}\n", cell.noise, cell.filter,
                   cell.mean_psnr(cfg.metrics == BenchMetrics::quantized_8bit ? 1 : 0),
                   cell.mean_ssim(cfg.metrics == BenchMetrics::quantized_8bit ? 1 : 0));
    }
    return ok;
}

// ---- sta -----------------------------------------------------------------

int cmd_sta(const Common& c) {
    KeyValueConfig kv = gather(c);
    StaExperiment ex;
    ex.params = read_model(kv, ex.params);
    ex.grid = kv.get_int("grid", ex.grid);
    ex.n_frames = static_cast<std::size_t>(kv.get_int("n_frames", static_cast<int>(ex.n_frames)));
    ex.frame_dt = kv.get_double("frame_dt", ex.frame_dt);
    ex.mean_level = kv.get_double("mean_level", ex.mean_level);
    ex.contrast = kv.get_double("contrast", ex.contrast);
    ex.window = kv.get_double("window", ex.window);
    ex.bins = kv.get_int("bins", ex.bins);
    ex.whiten = kv.get_bool("whiten", ex.whiten);
    ex.spikelets.prominence = kv.get_double("spikelet_prominence", ex.spikelets.prominence);
    ex.spikelets.refractory = kv.get_double("spikelet_refractory", ex.spikelets.refractory);
    ex.seed = RngSeed{kv.get_u64("seed", ex.seed.value)};
    const std::string family = kv.get_string("stimulus", "gaussian");
    if (family == "gaussian") {
        ex.family = StimulusFamily::gaussian_white;
    } else if (family == "laplacian") {
        ex.family = StimulusFamily::laplacian_white;
    } else if (family == "natural") {
        ex.family = StimulusFamily::natural_patches;
    } else {
        throw config_error(fmt::format("stimulus must be gaussian, laplacian or natural (got '{}')", family));
    }
    const std::string corpus_dir = kv.get_string("corpus", "");
    const fs::path out = kv.get_string("out", "sta_out");
    kv.reject_unused();

    announce("sta", fmt::format("grid={}\nn_frames={}\nframe_dt={}\nmean_level={}\ncontrast={}\nwindow={}\nbins={}\n"
                                "whiten={}\nspikelet_prominence={}\nspikelet_refractory={}\nseed={}\nstimulus={}\n"
                                "corpus={}\nout={}\n{}",
                                ex.grid, ex.n_frames, ex.frame_dt, ex.mean_level, ex.contrast, ex.window, ex.bins,
                                ex.whiten ? 1 : 0, ex.spikelets.prominence, ex.spikelets.refractory, ex.seed.value,
                                family, corpus_dir, out.string(), model_text(ex.params)));

    Corpus corpus;
    if (ex.family == StimulusFamily::natural_patches) {
        corpus = corpus_dir.empty() ? make_synthetic_corpus(10, 128, ex.seed.value) : load_corpus(corpus_dir);
    }
    const StaRun run = run_sta_experiment(ex, corpus.images);
    const StaResult& r = run.result;
    ensure_dir(out);

    std::string temporal = "lag_ms,value\n";
    for (int b = 0; b < r.bins; ++b) {
        temporal += fmt::format("{:.17g},{:.17g}\n", (b + 0.5) * r.bin_width, r.temporal_filter[static_cast<std::size_t>(b)]);
    }
    write_text(out / "temporal.csv", temporal);
    std::string spatial = "x,y,value\n";
    for (int y = 0; y < r.height; ++y) {
        for (int x = 0; x < r.width; ++x) {
            spatial += fmt::format("{},{},{:.17g}\n", x, y, r.spatial_map[static_cast<std::size_t>(y * r.width + x)]);
        }
    }
    write_text(out / "spatial.csv", spatial);
    write_pgm(signed_to_image(r.spatial_map, r.width, r.height), out / "spatial.pgm");
    const std::string summary =
        fmt::format("n_spikes={}\nbin_width_ms={}\nselected_lag_ms={}\nprobe_cell={}\nclipped_samples={}\n"
                    "fit_sigma={}\nfit_amplitude={}\nfit_residual={}\nfit_at_lower_bound={}\noff_center={}\n",
                    r.n_spikes, r.bin_width, r.selected_lag, run.probe_cell, run.clipped_samples, run.fit.sigma,
                    run.fit.amplitude, run.fit.residual, run.fit.at_lower_bound ? 1 : 0, run.off_center ? 1 : 0);
    write_text(out / "summary.txt", summary);
    fmt::print("{}", summary);
    return ok;
}

// ---- profile -------------------------------------------------------------

int cmd_profile(const Common& c) {
    KeyValueConfig kv = gather(c);
    const NetworkParams model = read_model(kv);
    const NoiseSpec spec = parse_noise_spec(kv.get_string("noise", "blind:include_gaussian=0,target_psnr=9"));
    const std::string corpus_dir = kv.get_string("corpus", "");
    const auto count = static_cast<std::size_t>(kv.get_int("synthetic_count", 10));
    const int size = kv.get_int("synthetic_size", 128);
    ProfileOptions opt;
    opt.max_k = kv.get_int("max_k", opt.max_k);
    opt.gmm.restarts = kv.get_int("restarts", opt.gmm.restarts);
    opt.gmm.max_iterations = kv.get_int("max_iterations", opt.gmm.max_iterations);
    opt.gmm.tolerance = kv.get_double("tolerance", opt.gmm.tolerance);
    opt.seed = RngSeed{kv.get_u64("seed", opt.seed.value)};
    const fs::path out = kv.get_string("out", "profile_out");
    kv.reject_unused();
    spec.validate();

    announce("profile", fmt::format("noise={}\ncorpus={}\nsynthetic_count={}\nsynthetic_size={}\nmax_k={}\nrestarts={}\n"
                                    "max_iterations={}\ntolerance={}\nseed={}\nout={}\n{}",
                                    to_string(spec), corpus_dir, count, size, opt.max_k, opt.gmm.restarts,
                                    opt.gmm.max_iterations, opt.gmm.tolerance, opt.seed.value, out.string(),
                                    model_text(model)));

    const Corpus corpus = corpus_dir.empty() ? make_synthetic_corpus(count, size, opt.seed.value) : load_corpus(corpus_dir);
    const auto rep = regularization_report(corpus.images, corpus.ids, spec, model, opt);
    ensure_dir(out);

    std::string counts = "n_components,images_before,images_after\n";
    for (int k = 1; k <= opt.max_k; ++k) {
        const auto i = static_cast<std::size_t>(k - 1);
        counts += fmt::format("{},{},{}\n", k, rep.k_before_hist[i], rep.k_after_hist[i]);
    }
    write_text(out / "component_counts.csv", counts);

    std::string rows = "image,k_before,k_after,bic_before,bic_after,excluded\n";
    for (const auto& r : rep.rows) {
        const auto bics = [](const MixtureFit& f) {
            std::vector<std::string> s;
            for (double b : f.bic_by_k) s.push_back(fmt::format("{:.10g}", b));
            return fmt::format("{}", fmt::join(s, ";"));
        };
        rows += fmt::format("{},{},{},{},{},{}\n", csv_escape(r.image_id), r.excluded ? 0 : r.before.n_components,
                            r.excluded ? 0 : r.after.n_components, bics(r.before), bics(r.after), csv_escape(r.reason));
    }
    write_text(out / "fits.csv", rows);

    // Residual histograms pooled over the included images.
    std::vector<std::size_t> hb;
    std::vector<std::size_t> ha;
    for (const auto& r : rep.rows) {
        if (r.excluded) continue;
        hb.resize(r.hist_before.size());
        ha.resize(r.hist_after.size());
        for (std::size_t i = 0; i < hb.size(); ++i) hb[i] += r.hist_before[i];
        for (std::size_t i = 0; i < ha.size(); ++i) ha[i] += r.hist_after[i];
    }
    std::string hist = "bin_center,before,after\n";
    for (std::size_t i = 0; i < hb.size(); ++i) {
        const double centre = -1.0 + (static_cast<double>(i) + 0.5) * 2.0 / static_cast<double>(hb.size());
        hist += fmt::format("{:.6f},{},{}\n", centre, hb[i], ha[i]);
    }
    write_text(out / "residual_histogram.csv", hist);

    fmt::print("images {} (excluded {})\n", rep.rows.size(), rep.rows.size() - rep.included);
    fmt::print("after == 1 component: {:.2f}\nafter <= before: {:.2f}\nbefore == 1 component: {:.2f}\n",
               rep.fraction_after_single(), rep.fraction_after_not_more(), rep.fraction_before_single());
    return ok;
}

// ---- impulse -------------------------------------------------------------

int cmd_impulse(const Common& c, int radius) {
    KeyValueConfig kv = gather(c);
    const NetworkParams model = read_model(kv);
    const fs::path out = kv.get_string("out", "impulse_out");
    kv.reject_unused();
    announce("impulse", fmt::format("radius={}\nout={}\n{}", radius, out.string(), model_text(model)));

    const Kernel2D k = impulse_response(model, radius);
    ensure_dir(out);
    std::string csv = "dx,dy,weight\n";
    for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) csv += fmt::format("{},{},{:.17g}\n", dx, dy, k.at(dx, dy));
    }
    write_text(out / "impulse.csv", csv);
    Image img(k.side(), k.side());
    const double peak = k.at(0, 0);
    for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = peak > 0.0 ? k.weights[i] / peak : 0.0;
    write_pgm(img, out / "impulse.pgm");
    fmt::print("centre weight {:.6f}, axis profile:", k.at(0, 0));
    for (int d = 0; d <= radius; ++d) fmt::print(" {:.6f}", k.at(d, 0));
    fmt::print("\n");
    return ok;
}

void add_common(CLI::App* sub, Common& c, bool with_metric_mode) {
    sub->add_option("--config", c.config, "key=value config file");
    sub->add_option("--set", c.sets, "override a config key (key=value), repeatable");
    sub->add_option("--g-gap", c.g_gap, "gap-junction conductance [nS]");
    sub->add_option("--seed", c.seed, "base RNG seed");
    sub->add_option("--out", c.out, "output directory");
    if (with_metric_mode) sub->add_option("--metric-mode", c.metric_mode, "float, 8bit or both");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Photoreceptor-network image filter, baselines and analysis tools"};
    app.require_subcommand(1);

    DenoiseArgs den;
    auto* d = app.add_subcommand("denoise", "filter one image");
    d->add_option("input", den.input, "PGM, PNG or PRF1 image")->required();
    d->add_option("--out", den.output, "output path (.pgm, .png or .prf)")->required();
    d->add_option("--filter", den.filter, "pr, pr:<g_gap>, noisy or a classic filter such as gaussian:2:9");
    d->add_option("--g-gap", den.g_gap, "gap-junction conductance for pr [nS]");
    d->add_option("--sigma", den.sigma, "Gaussian filter sigma");
    d->add_option("--ksize", den.ksize, "window size for classic filters");
    d->add_option("--reference", den.reference, "clean image; prints PSNR/SSIM to stderr");
    d->add_option("--metric-mode", den.metric_mode, "float or 8bit");
    d->add_option("--set", den.sets, "override a model key (key=value), repeatable");

    std::string n_in;
    std::string n_spec = "gaussian:sigma=0.1";
    std::uint64_t n_seed = 1;
    std::string n_out;
    auto* n = app.add_subcommand("noise", "add seeded noise to one image");
    n->add_option("input", n_in, "PGM, PNG or PRF1 image")->required();
    n->add_option("--noise", n_spec, "compact noise spec, e.g. laplacian:b=0.05 or blind:target_psnr=12");
    n->add_option("--seed", n_seed, "RNG seed");
    n->add_option("--out", n_out, "output path (.pgm, .png or .prf)")->required();

    Common bench;
    std::vector<std::string> bench_filters;
    auto* b = app.add_subcommand("benchmark", "noise x filter sweep with PSNR/SSIM report");
    add_common(b, bench, true);
    b->add_option("--filter", bench_filters, "replace the filter list, repeatable");

    Common sta;
    auto* s = app.add_subcommand("sta", "spike-triggered average of the centre cell");
    add_common(s, sta, false);

    Common prof;
    auto* p = app.add_subcommand("profile", "residual-noise Gaussian mixture profile before/after filtering");
    add_common(p, prof, false);

    Common imp;
    int radius = 4;
    auto* i = app.add_subcommand("impulse", "normalized impulse response of the network");
    add_common(i, imp, false);
    i->add_option("--radius", radius, "kernel radius in cells");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? ok : bad_config;
    }

    try {
        if (*d) return cmd_denoise(den);
        if (*n) return cmd_noise(n_in, n_spec, n_seed, n_out);
        if (*b) return cmd_benchmark(bench, bench_filters);
        if (*s) return cmd_sta(sta);
        if (*p) return cmd_profile(prof);
        if (*i) return cmd_impulse(imp, radius);
    } catch (const Error& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return bad_numeric;
    }
    return ok;
}
