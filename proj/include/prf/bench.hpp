#pragma once

#include "prf/classic_filters.hpp"
#include "prf/config.hpp"
#include "prf/core_model.hpp"
#include "prf/image.hpp"
#include "prf/noise_forge.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace prf {

// One benchmark column: the untouched noisy image, a classic filter, or the
// PR filter at a given coupling.
struct BenchFilter {
    enum class Kind { noisy, classic, pr };
    Kind kind = Kind::noisy;
    FilterKind classic;
    double g_gap = 10.0;

    std::string label() const;
};

// "noisy", "pr:<g_gap>" or any classic filter spec.
BenchFilter parse_bench_filter(std::string_view text);

enum class BenchMetrics { float_values, quantized_8bit, both };

struct BenchConfig {
    // Directory of PGM/PNG/PRF1 images. Empty means a synthetic corpus.
    std::filesystem::path corpus;
    std::size_t synthetic_count = 10;
    int synthetic_size = 128;
    std::vector<NoiseSpec> noises;
    std::vector<BenchFilter> filters;
    std::uint64_t seed = 2024;
    std::filesystem::path out = "bench_out";
    BenchMetrics metrics = BenchMetrics::both;
    NetworkParams model;  // everything but g_gap, which comes from each pr:<g> filter

    void validate() const;

    static BenchConfig defaults();
    // Keys: corpus, synthetic_count, synthetic_size, noise (';'-separated compact
    // specs), filters, seed, out, metric_mode (float|8bit|both), plus model keys.
    static BenchConfig from(const KeyValueConfig& kv);
    std::string to_text() const;
};

// Model keys shared by every subcommand: c_m, g_leak, e_leak, g_gap, i_dark, tau1, tau2, dt, t_end.
NetworkParams read_model(const KeyValueConfig& kv, NetworkParams base = {});
std::string model_text(const NetworkParams& p);

struct Corpus {
    std::vector<Image> images;
    std::vector<std::string> ids;
};

// Sorted directory listing of readable images; unrelated files are skipped.
Corpus load_corpus(const std::filesystem::path& dir);
Corpus make_synthetic_corpus(std::size_t count, int size, std::uint64_t seed);
Corpus corpus_for(const BenchConfig& cfg);

struct BenchRow {
    std::string image_id;
    std::uint64_t noise_seed = 0;
    // Index 0 float metrics, index 1 8-bit metrics; absent when not requested or failed.
    std::optional<double> psnr[2];
    std::optional<double> ssim[2];
    std::string error;
};

struct BenchCell {
    std::string noise;
    std::string filter;
    std::vector<BenchRow> rows;  // one per corpus image, corpus order
    bool resumed = false;

    // Mean over rows without error; NaN when none succeeded or the mode is off.
    double mean_psnr(int mode) const;
    double mean_ssim(int mode) const;
    std::size_t ok_count() const;
};

struct BenchReport {
    std::vector<BenchCell> cells;  // noise-major, filter-minor
};

// Runs every (noise x filter) cell, writing one CSV per cell under out/cells
// (atomically, via rename) and skipping cells already on disk. Finishes with
// out/report.csv (per-image rows) and out/summary.csv (means).
BenchReport run_benchmark(const BenchConfig& cfg, const Corpus& corpus);

std::string csv_escape(std::string_view field);
std::vector<std::string> csv_split(std::string_view line);

} // namespace prf
