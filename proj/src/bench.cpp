#include "prf/bench.hpp"

#include "prf/error.hpp"
#include "prf/image_io.hpp"
#include "prf/metrics.hpp"
#include "prf/parallel.hpp"
#include "prf/pr_filter.hpp"
#include "prf/synthetic.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <sstream>

namespace prf {

namespace fs = std::filesystem;

std::string BenchFilter::label() const {
    switch (kind) {
    case Kind::noisy: return "noisy";
    case Kind::pr: return fmt::format("pr:{}", g_gap);
    case Kind::classic: return to_string(classic);
    }
    return {};
}

BenchFilter parse_bench_filter(std::string_view text) {
    BenchFilter f;
    if (text == "noisy") return f;
    if (text == "pr" || text.starts_with("pr:")) {
        f.kind = BenchFilter::Kind::pr;
        if (text.size() > 3) {
            const auto arg = text.substr(3);
            const auto [ptr, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), f.g_gap);
            if (ec != std::errc() || ptr != arg.data() + arg.size() || !(f.g_gap >= 0.0) || !std::isfinite(f.g_gap)) {
                throw config_error(fmt::format("invalid PR filter spec '{}'", text));
            }
        }
        return f;
    }
    f.kind = BenchFilter::Kind::classic;
    f.classic = parse_filter(text);
    return f;
}

namespace {

const char* metrics_name(BenchMetrics m) {
    switch (m) {
    case BenchMetrics::float_values: return "float";
    case BenchMetrics::quantized_8bit: return "8bit";
    case BenchMetrics::both: return "both";
    }
    return "?";
}

bool mode_enabled(BenchMetrics m, int mode) {
    return m == BenchMetrics::both || (mode == 0 ? m == BenchMetrics::float_values : m == BenchMetrics::quantized_8bit);
}

// FNV-1a, used to key cell files on everything that determines their contents.
std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string slug(std::string_view s) {
    std::string out;
    for (char c : s) {
        const bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.';
        out.push_back(keep ? c : '-');
    }
    return out.substr(0, 40);
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt::format("{:.17g}", *v) : std::string(); }

std::optional<double> parse_opt(const std::string& s) {
    if (s.empty()) return std::nullopt;
    if (s == "inf") return std::numeric_limits<double>::infinity();
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw format_error(fmt::format("bad number '{}' in cell file", s));
    return v;
}

constexpr std::string_view kHeader = "noise,filter,image,noise_seed,psnr_float,ssim_float,psnr_8bit,ssim_8bit,error";

std::string row_line(const BenchCell& cell, const BenchRow& r) {
    return fmt::format("{},{},{},{},{},{},{},{},{}", csv_escape(cell.noise), csv_escape(cell.filter),
                       csv_escape(r.image_id), r.noise_seed, fmt_opt(r.psnr[0]), fmt_opt(r.ssim[0]), fmt_opt(r.psnr[1]),
                       fmt_opt(r.ssim[1]), csv_escape(r.error));
}

void write_atomic(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw io_error(fmt::format("cannot write {}", tmp.string()));
        out << text;
        out.flush();
        if (!out) throw io_error(fmt::format("write failed for {}", tmp.string()));
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw io_error(fmt::format("cannot rename {} to {}: {}", tmp.string(), path.string(), ec.message()));
}

std::string cell_text(const BenchCell& cell) {
    std::string text(kHeader);
    text += '\n';
    for (const auto& r : cell.rows) {
        text += row_line(cell, r);
        text += '\n';
    }
    return text;
}

// Returns nullopt when the file is missing or does not describe exactly this corpus.
std::optional<BenchCell> read_cell(const fs::path& path, const BenchCell& expected_shape) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::string line;
    if (!std::getline(in, line) || line != kHeader) return std::nullopt;
    BenchCell cell = expected_shape;
    cell.resumed = true;
    for (auto& r : cell.rows) {
        if (!std::getline(in, line)) return std::nullopt;
        const auto f = csv_split(line);
        if (f.size() != 9 || f[0] != cell.noise || f[1] != cell.filter || f[2] != r.image_id) return std::nullopt;
        r.psnr[0] = parse_opt(f[4]);
        r.ssim[0] = parse_opt(f[5]);
        r.psnr[1] = parse_opt(f[6]);
        r.ssim[1] = parse_opt(f[7]);
        r.error = f[8];
    }
    if (std::getline(in, line) && !line.empty()) return std::nullopt;
    return cell;
}

bool is_image_extension(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".pgm" || ext == ".png" || ext == ".prf" || ext == ".f32" || ext == ".ppm";
}

double mean_of(const std::vector<BenchRow>& rows, bool psnr, int mode) {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& r : rows) {
        const auto& v = psnr ? r.psnr[mode] : r.ssim[mode];
        if (!r.error.empty() || !v) continue;
        s += *v;
        ++n;
    }
    return n == 0 ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(n);
}

} // namespace

std::string csv_escape(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += (c == '\n' || c == '\r') ? ' ' : c;
    }
    out += '"';
    return out;
}

std::vector<std::string> csv_split(std::string_view line) {
    std::vector<std::string> out(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                out.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                out.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.emplace_back();
        } else {
            out.back() += c;
        }
    }
    return out;
}

double BenchCell::mean_psnr(int mode) const { return mean_of(rows, true, mode); }
double BenchCell::mean_ssim(int mode) const { return mean_of(rows, false, mode); }

std::size_t BenchCell::ok_count() const {
    return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const BenchRow& r) { return r.error.empty(); }));
}

NetworkParams read_model(const KeyValueConfig& kv, NetworkParams p) {
    p.c_m = kv.get_double("c_m", p.c_m);
    p.g_leak = kv.get_double("g_leak", p.g_leak);
    p.e_leak = kv.get_double("e_leak", p.e_leak);
    p.g_gap = kv.get_double("g_gap", p.g_gap);
    p.i_dark = kv.get_double("i_dark", p.i_dark);
    p.tau1 = kv.get_double("tau1", p.tau1);
    p.tau2 = kv.get_double("tau2", p.tau2);
    p.dt = kv.get_double("dt", p.dt);
    p.t_end = kv.get_double("t_end", p.t_end);
    p.validate();
    return p;
}

std::string model_text(const NetworkParams& p) {
    return fmt::format("c_m={}\ng_leak={}\ne_leak={}\ng_gap={}\ni_dark={}\ntau1={}\ntau2={}\ndt={}\nt_end={}\n", p.c_m,
                       p.g_leak, p.e_leak, p.g_gap, p.i_dark, p.tau1, p.tau2, p.dt, p.t_end);
}

BenchConfig BenchConfig::defaults() {
    BenchConfig cfg;
    for (double target : {9.4, 12.0, 15.0}) {
        NoiseSpec s;
        s.params = GaussianNoise{};
        s.target_psnr = target;
        cfg.noises.push_back(s);
    }
    for (const char* f : {"noisy", "adaptive_median:7", "average:3", "gaussian:2:9", "max:3", "mean:5", "median:3", "min:3",
                          "pr:10"}) {
        cfg.filters.push_back(parse_bench_filter(f));
    }
    return cfg;
}

void BenchConfig::validate() const {
    if (noises.empty()) throw config_error("benchmark needs at least one noise spec");
    if (filters.empty()) throw config_error("benchmark needs at least one filter");
    if (corpus.empty() && (synthetic_count == 0 || synthetic_size < 16)) {
        throw config_error("synthetic corpus needs count >= 1 and size >= 16");
    }
    for (const auto& n : noises) n.validate();
    for (const auto& f : filters) {
        if (f.kind == BenchFilter::Kind::classic) prf::validate(f.classic);
    }
    NetworkParams m = model;
    m.validate();
}

BenchConfig BenchConfig::from(const KeyValueConfig& kv) {
    BenchConfig cfg = defaults();
    cfg.corpus = kv.get_string("corpus", "");
    cfg.synthetic_count = static_cast<std::size_t>(kv.get_int("synthetic_count", static_cast<int>(cfg.synthetic_count)));
    cfg.synthetic_size = kv.get_int("synthetic_size", cfg.synthetic_size);
    if (kv.has("noise")) {
        cfg.noises.clear();
        for (const auto& s : kv.get_list("noise", {})) cfg.noises.push_back(parse_noise_spec(s));
    }
    if (kv.has("filters")) {
        cfg.filters.clear();
        for (const auto& s : kv.get_list("filters", {})) cfg.filters.push_back(parse_bench_filter(s));
    }
    cfg.seed = kv.get_u64("seed", cfg.seed);
    cfg.out = kv.get_string("out", cfg.out.string());
    const std::string mode = kv.get_string("metric_mode", metrics_name(cfg.metrics));
    if (mode == "float") {
        cfg.metrics = BenchMetrics::float_values;
    } else if (mode == "8bit") {
        cfg.metrics = BenchMetrics::quantized_8bit;
    } else if (mode == "both") {
        cfg.metrics = BenchMetrics::both;
    } else {
        throw config_error(fmt::format("metric_mode must be float, 8bit or both (got '{}')", mode));
    }
    cfg.model = read_model(kv, cfg.model);
    kv.reject_unused();
    cfg.validate();
    return cfg;
}

std::string BenchConfig::to_text() const {
    std::vector<std::string> n;
    for (const auto& s : noises) n.push_back(to_string(s));
    std::vector<std::string> f;
    for (const auto& x : filters) f.push_back(x.label());
    return fmt::format("corpus={}\nsynthetic_count={}\nsynthetic_size={}\nnoise={}\nfilters={}\nseed={}\nout={}\n"
                       "metric_mode={}\n{}",
                       corpus.string(), synthetic_count, synthetic_size, fmt::join(n, ";"), fmt::join(f, ";"), seed,
                       out.string(), metrics_name(metrics), model_text(model));
}

Corpus load_corpus(const fs::path& dir) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw io_error(fmt::format("corpus directory {} does not exist", dir.string()));
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && is_image_extension(entry.path())) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    Corpus c;
    for (const auto& p : files) {
        Image img = read_image(p);
        validate(img);
        c.images.push_back(std::move(img));
        c.ids.push_back(p.filename().string());
    }
    if (c.images.empty()) throw io_error(fmt::format("no images found in {}", dir.string()));
    return c;
}

Corpus make_synthetic_corpus(std::size_t count, int size, std::uint64_t seed) {
    Corpus c;
    c.images = synthetic_corpus(count, size, size, RngSeed{seed});
    for (std::size_t i = 0; i < count; ++i) c.ids.push_back(fmt::format("synthetic{:03}", i));
    return c;
}

Corpus corpus_for(const BenchConfig& cfg) {
    if (cfg.corpus.empty()) return make_synthetic_corpus(cfg.synthetic_count, cfg.synthetic_size, cfg.seed);
    return load_corpus(cfg.corpus);
}

BenchReport run_benchmark(const BenchConfig& cfg, const Corpus& corpus) {
    cfg.validate();
    if (corpus.images.empty() || corpus.ids.size() != corpus.images.size()) {
        throw config_error("benchmark corpus must be nonempty with one id per image");
    }
    const fs::path cell_dir = cfg.out / "cells";
    std::error_code ec;
    fs::create_directories(cell_dir, ec);
    if (ec) throw io_error(fmt::format("cannot create {}: {}", cell_dir.string(), ec.message()));

    // One shared filter object per coupling so factorizations are reused.
    std::map<double, std::unique_ptr<PrFilter>> pr;
    for (const auto& f : cfg.filters) {
        if (f.kind == BenchFilter::Kind::pr && !pr.contains(f.g_gap)) {
            NetworkParams p = cfg.model;
            p.g_gap = f.g_gap;
            pr.emplace(f.g_gap, std::make_unique<PrFilter>(p));
        }
    }

    const std::string fingerprint_base =
        fmt::format("{}|{}|{}|{}", cfg.seed, metrics_name(cfg.metrics), model_text(cfg.model), fmt::join(corpus.ids, "/"));
    const std::size_t n_img = corpus.images.size();

    BenchReport report;
    for (std::size_t ni = 0; ni < cfg.noises.size(); ++ni) {
        const NoiseSpec& spec = cfg.noises[ni];
        std::vector<BenchCell> cells(cfg.filters.size());
        std::vector<fs::path> paths(cfg.filters.size());
        std::vector<std::size_t> pending;
        for (std::size_t fi = 0; fi < cfg.filters.size(); ++fi) {
            BenchCell& cell = cells[fi];
            cell.noise = to_string(spec);
            cell.filter = cfg.filters[fi].label();
            cell.rows.resize(n_img);
            for (std::size_t i = 0; i < n_img; ++i) {
                cell.rows[i].image_id = corpus.ids[i];
                cell.rows[i].noise_seed = derive_seed(RngSeed{cfg.seed}, ni, i).value;
            }
            const auto key = fnv1a(fmt::format("{}|{}|{}", fingerprint_base, cell.noise, cell.filter));
            paths[fi] = cell_dir / fmt::format("{:03}_{:03}_{}_{}_{:016x}.csv", ni, fi, slug(cell.noise), slug(cell.filter), key);
            if (auto done = read_cell(paths[fi], cell)) {
                cell = std::move(*done);
            } else {
                pending.push_back(fi);
            }
        }

        if (!pending.empty()) {
            parallel_for(n_img, [&](std::size_t i) {
                const Image& clean = corpus.images[i];
                Image noisy;
                std::string noise_error;
                try {
                    noisy = add_noise(clean, spec, RngSeed{cells[pending.front()].rows[i].noise_seed});
                } catch (const Error& e) {
                    noise_error = fmt::format("noise: {}", e.what());
                }
                for (std::size_t fi : pending) {
                    BenchRow& row = cells[fi].rows[i];
                    if (!noise_error.empty()) {
                        row.error = noise_error;
                        continue;
                    }
                    try {
                        const BenchFilter& f = cfg.filters[fi];
                        Image out;
                        switch (f.kind) {
                        case BenchFilter::Kind::noisy: out = noisy; break;
                        case BenchFilter::Kind::classic: out = apply_filter(noisy, f.classic); break;
                        case BenchFilter::Kind::pr: out = (*pr.at(f.g_gap))(noisy); break;
                        }
                        for (int mode = 0; mode < 2; ++mode) {
                            if (!mode_enabled(cfg.metrics, mode)) continue;
                            const auto m = evaluate(clean, out, mode == 0 ? MetricMode::float_values : MetricMode::quantized_8bit);
                            row.psnr[mode] = m.psnr;
                            row.ssim[mode] = m.ssim;
                        }
                    } catch (const Error& e) {
                        row.psnr[0] = row.psnr[1] = row.ssim[0] = row.ssim[1] = std::nullopt;
                        row.error = e.what();
                    }
                }
            });
            for (std::size_t fi : pending) write_atomic(paths[fi], cell_text(cells[fi]));
        }
        for (auto& c : cells) report.cells.push_back(std::move(c));
    }

    std::string all(kHeader);
    all += '\n';
    std::string summary = "noise,filter,n_images,n_ok,mean_psnr_float,mean_ssim_float,mean_psnr_8bit,mean_ssim_8bit\n";
    for (const auto& cell : report.cells) {
        for (const auto& r : cell.rows) {
            all += row_line(cell, r);
            all += '\n';
        }
        const auto mean = [&](bool psnr, int mode) {
            const double v = psnr ? cell.mean_psnr(mode) : cell.mean_ssim(mode);
            return std::isnan(v) ? std::string() : fmt::format("{:.17g}", v);
        };
        summary += fmt::format("{},{},{},{},{},{},{},{}\n", csv_escape(cell.noise), csv_escape(cell.filter), cell.rows.size(),
                               cell.ok_count(), mean(true, 0), mean(false, 0), mean(true, 1), mean(false, 1));
    }
    write_atomic(cfg.out / "report.csv", all);
    write_atomic(cfg.out / "summary.csv", summary);
    return report;
}

} // namespace prf
