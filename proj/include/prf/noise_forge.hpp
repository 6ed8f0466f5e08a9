#pragma once

#include "prf/image.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace prf {

enum class NoiseFamily : std::uint8_t {
    gaussian,
    intensity_dependent_gaussian,
    laplacian,
    salt_pepper,
    uniform,
};

std::string_view to_string(NoiseFamily family);

struct GaussianNoise {
    double sigma = 0.1;
};
// Per-pixel sigma(x) = sigma0 + k * x.
struct IntensityGaussianNoise {
    double sigma0 = 0.05;
    double k = 0.1;
};
struct LaplacianNoise {
    double b = 0.07;
};
struct SaltPepperNoise {
    double p_salt = 0.05;
    double p_pepper = 0.05;
};
// U(-a, a)
struct UniformNoise {
    double a = 0.17;
};
// Pixelwise partition among the regular families with randomized parameters.
struct BlindNoise {
    bool include_gaussian = true;
};

using NoiseParams =
    std::variant<GaussianNoise, IntensityGaussianNoise, LaplacianNoise, SaltPepperNoise, UniformNoise, BlindNoise>;

struct NoiseSpec {
    NoiseParams params = GaussianNoise{};
    // When set, the amplitude is rescaled per image until the noisy PSNR hits this value.
    // Required for blind noise.
    std::optional<double> target_psnr;

    bool is_blind() const noexcept { return std::holds_alternative<BlindNoise>(params); }
    void validate() const;
};

struct RngSeed {
    std::uint64_t value = 0;
};

// Compact single-line form used on the command line and in configs, e.g.
//   gaussian:sigma=0.1
//   idg:sigma0=0.05,k=0.1,target_psnr=12
//   blind:include_gaussian=0,target_psnr=14
std::string to_string(const NoiseSpec& spec);
NoiseSpec parse_noise_spec(std::string_view compact);

// Multi-line key=value form ("family=..." plus one parameter per line).
std::string to_config_text(const NoiseSpec& spec);
NoiseSpec parse_noise_config(std::string_view text);

// Random parameter ranges of the blind mixture; each family's scale is drawn uniformly
// inside its range once per image, then all amplitudes share one calibrated multiplier.
struct BlindRanges {
    double gaussian_sigma[2] = {0.05, 0.15};
    double idg_sigma0[2] = {0.02, 0.08};
    double idg_k[2] = {0.05, 0.15};
    double laplacian_b[2] = {0.03, 0.10};
    double sp_prob[2] = {0.02, 0.08};
    double uniform_a[2] = {0.10, 0.30};
};

struct CalibrationOptions {
    double tolerance_db = 0.5;   // acceptance band around the target
    double stop_db = 0.01;       // bisection stops once this close
    int max_iterations = 50;
};

struct NoiseOutcome {
    Image noisy;
    // Family applied to each pixel; for regular noise every entry is the same.
    std::vector<NoiseFamily> assignment;
    double multiplier = 1.0;
    double achieved_psnr = 0.0;
    int iterations = 0;
    // Drawn (or given) parameters before the multiplier is applied.
    std::vector<NoiseParams> family_params;
};

// Additive noise clamped to [0,1]. Calibrates to spec.target_psnr when set.
Image add_noise(const Image& img, const NoiseSpec& spec, RngSeed seed);
NoiseOutcome add_noise_detailed(const Image& img, const NoiseSpec& spec, RngSeed seed,
                                const CalibrationOptions& calibration = {}, const BlindRanges& ranges = {});

// Throws numeric_error when the target cannot be reached within the iteration budget.
Image blind_mixture(const Image& img, bool include_gaussian, double target_psnr, RngSeed seed);
NoiseOutcome blind_mixture_detailed(const Image& img, bool include_gaussian, double target_psnr, RngSeed seed,
                                    const CalibrationOptions& calibration = {}, const BlindRanges& ranges = {});

// Deterministic seed derivation for (base seed, stream ids).
RngSeed derive_seed(RngSeed base, std::uint64_t a, std::uint64_t b = 0);

} // namespace prf
