#include "prf/noise_forge.hpp"

#include "prf/error.hpp"
#include "prf/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fmt/format.h>
#include <map>
#include <random>

namespace prf {

namespace {

// Per-pixel standard variates. The noisy image is a deterministic function of these,
// the family parameters and the amplitude multiplier, so calibration re-uses one draw.
struct PixelDraw {
    NoiseFamily family;
    double z;   // N(0,1), Laplace(1), U(-1,1) or U(0,1) for salt & pepper
    double u;   // salt vs pepper selector
};

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

NoiseFamily family_of(const NoiseParams& p) {
    switch (p.index()) {
    case 0: return NoiseFamily::gaussian;
    case 1: return NoiseFamily::intensity_dependent_gaussian;
    case 2: return NoiseFamily::laplacian;
    case 3: return NoiseFamily::salt_pepper;
    case 4: return NoiseFamily::uniform;
    default: throw config_error("blind noise has no single family");
    }
}

PixelDraw draw_variates(NoiseFamily family, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    PixelDraw d{family, 0.0, 0.0};
    switch (family) {
    case NoiseFamily::gaussian:
    case NoiseFamily::intensity_dependent_gaussian:
        d.z = std::normal_distribution<double>(0.0, 1.0)(rng);
        break;
    case NoiseFamily::laplacian: {
        const double mag = std::exponential_distribution<double>(1.0)(rng);
        d.z = unit(rng) < 0.5 ? -mag : mag;
        break;
    }
    case NoiseFamily::salt_pepper:
        d.z = unit(rng);
        d.u = unit(rng);
        break;
    case NoiseFamily::uniform:
        d.z = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
        break;
    }
    return d;
}

double apply_pixel(double x, const PixelDraw& d, const NoiseParams& params, double m) {
    double y = x;
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, GaussianNoise>) {
                y = x + m * p.sigma * d.z;
            } else if constexpr (std::is_same_v<T, IntensityGaussianNoise>) {
                y = x + m * (p.sigma0 + p.k * x) * d.z;
            } else if constexpr (std::is_same_v<T, LaplacianNoise>) {
                y = x + m * p.b * d.z;
            } else if constexpr (std::is_same_v<T, SaltPepperNoise>) {
                const double total = p.p_salt + p.p_pepper;
                if (total > 0.0 && d.z < std::min(1.0, m * total)) y = d.u < p.p_salt / total ? 1.0 : 0.0;
            } else if constexpr (std::is_same_v<T, UniformNoise>) {
                y = x + m * p.a * d.z;
            }
        },
        params);
    return std::clamp(y, 0.0, 1.0);
}

constexpr double kMaxMultiplier = 1e6;

// Pure salt & pepper saturates once every pixel is hit.
double multiplier_cap(const NoiseParams& params) {
    if (const auto* sp = std::get_if<SaltPepperNoise>(&params)) {
        const double total = sp->p_salt + sp->p_pepper;
        if (total > 0.0) return std::min(kMaxMultiplier, 1.0 / total);
    }
    return kMaxMultiplier;
}

Image render(const Image& img, const std::vector<PixelDraw>& draws, const std::vector<NoiseParams>& family_params,
             double m) {
    Image out(img.width, img.height);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const auto& d = draws[i];
        out.data[i] = apply_pixel(img.data[i], d, family_params[static_cast<std::size_t>(d.family)], m);
    }
    return out;
}

NoiseOutcome calibrate(const Image& img, std::vector<PixelDraw> draws, std::vector<NoiseParams> family_params,
                       double target, double cap, const CalibrationOptions& opt) {
    NoiseOutcome out;
    out.family_params = family_params;
    out.assignment.reserve(draws.size());
    for (const auto& d : draws) out.assignment.push_back(d.family);

    auto measure = [&](double m) {
        Image noisy = render(img, draws, family_params, m);
        const double p = psnr(img, noisy);
        return std::make_pair(std::move(noisy), p);
    };

    // PSNR falls as the multiplier grows; bracket the target first.
    double lo = 0.0;
    double hi = std::min(1.0, cap);
    auto [noisy, achieved] = measure(hi);
    int iterations = 0;
    while (achieved > target && hi < cap && iterations < opt.max_iterations) {
        lo = hi;
        hi = std::min(2.0 * hi, cap);
        std::tie(noisy, achieved) = measure(hi);
        ++iterations;
    }
    double m = hi;
    while (std::abs(achieved - target) > opt.stop_db && iterations < opt.max_iterations) {
        m = 0.5 * (lo + hi);
        std::tie(noisy, achieved) = measure(m);
        if (achieved > target) {
            lo = m;
        } else {
            hi = m;
        }
        ++iterations;
    }
    if (!(std::abs(achieved - target) <= opt.tolerance_db)) {
        throw numeric_error(fmt::format("noise calibration failed: reached {:.3f} dB for target {:.3f} dB after {} "
                                        "iterations",
                                        achieved, target, iterations));
    }
    out.noisy = std::move(noisy);
    out.multiplier = m;
    out.achieved_psnr = achieved;
    out.iterations = iterations;
    return out;
}

double uniform_in(const double (&range)[2], std::mt19937_64& rng) {
    return std::uniform_real_distribution<double>(range[0], range[1])(rng);
}

void check_ranges(const BlindRanges& r) {
    for (const auto* range : {&r.gaussian_sigma, &r.idg_sigma0, &r.idg_k, &r.laplacian_b, &r.sp_prob, &r.uniform_a}) {
        if (!((*range)[0] >= 0.0 && (*range)[0] <= (*range)[1])) throw config_error("invalid blind parameter range");
    }
}

// --- text forms ---------------------------------------------------------------

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

double parse_double(std::string_view key, std::string_view v) {
    v = trim(v);
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
        throw config_error(fmt::format("noise parameter {}: '{}' is not a number", key, v));
    }
    return out;
}

bool parse_flag(std::string_view key, std::string_view v) {
    v = trim(v);
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw config_error(fmt::format("noise parameter {}: '{}' is not a boolean", key, v));
}

NoiseSpec build_spec(std::string_view family, const std::map<std::string, std::string, std::less<>>& kv) {
    NoiseSpec spec;
    std::map<std::string, bool, std::less<>> used;
    auto get = [&](std::string_view key, double fallback) {
        auto it = kv.find(key);
        if (it == kv.end()) return fallback;
        used[std::string(key)] = true;
        return parse_double(key, it->second);
    };
    if (family == "gaussian") {
        spec.params = GaussianNoise{get("sigma", GaussianNoise{}.sigma)};
    } else if (family == "idg" || family == "intensity_dependent_gaussian") {
        spec.params = IntensityGaussianNoise{get("sigma0", IntensityGaussianNoise{}.sigma0),
                                             get("k", IntensityGaussianNoise{}.k)};
    } else if (family == "laplacian") {
        spec.params = LaplacianNoise{get("b", LaplacianNoise{}.b)};
    } else if (family == "salt_pepper" || family == "sp") {
        spec.params = SaltPepperNoise{get("p_salt", SaltPepperNoise{}.p_salt), get("p_pepper", SaltPepperNoise{}.p_pepper)};
    } else if (family == "uniform") {
        spec.params = UniformNoise{get("a", UniformNoise{}.a)};
    } else if (family == "blind") {
        BlindNoise blind;
        if (auto it = kv.find("include_gaussian"); it != kv.end()) {
            used["include_gaussian"] = true;
            blind.include_gaussian = parse_flag("include_gaussian", it->second);
        }
        spec.params = blind;
    } else {
        throw config_error(fmt::format("unknown noise family '{}'", family));
    }
    if (auto it = kv.find("target_psnr"); it != kv.end()) {
        used["target_psnr"] = true;
        spec.target_psnr = parse_double("target_psnr", it->second);
    }
    for (const auto& [key, value] : kv) {
        if (!used.count(key)) throw config_error(fmt::format("unknown parameter '{}' for noise family '{}'", key, family));
    }
    spec.validate();
    return spec;
}

std::string fmt_num(double v) { return fmt::format("{}", v); }

std::vector<std::pair<std::string, std::string>> spec_fields(const NoiseSpec& spec) {
    std::vector<std::pair<std::string, std::string>> f;
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, GaussianNoise>) {
                f.emplace_back("sigma", fmt_num(p.sigma));
            } else if constexpr (std::is_same_v<T, IntensityGaussianNoise>) {
                f.emplace_back("sigma0", fmt_num(p.sigma0));
                f.emplace_back("k", fmt_num(p.k));
            } else if constexpr (std::is_same_v<T, LaplacianNoise>) {
                f.emplace_back("b", fmt_num(p.b));
            } else if constexpr (std::is_same_v<T, SaltPepperNoise>) {
                f.emplace_back("p_salt", fmt_num(p.p_salt));
                f.emplace_back("p_pepper", fmt_num(p.p_pepper));
            } else if constexpr (std::is_same_v<T, UniformNoise>) {
                f.emplace_back("a", fmt_num(p.a));
            } else {
                f.emplace_back("include_gaussian", p.include_gaussian ? "1" : "0");
            }
        },
        spec.params);
    if (spec.target_psnr) f.emplace_back("target_psnr", fmt_num(*spec.target_psnr));
    return f;
}

std::string_view family_name(const NoiseSpec& spec) {
    return spec.is_blind() ? std::string_view("blind") : to_string(family_of(spec.params));
}

} // namespace

std::string_view to_string(NoiseFamily family) {
    switch (family) {
    case NoiseFamily::gaussian: return "gaussian";
    case NoiseFamily::intensity_dependent_gaussian: return "idg";
    case NoiseFamily::laplacian: return "laplacian";
    case NoiseFamily::salt_pepper: return "salt_pepper";
    case NoiseFamily::uniform: return "uniform";
    }
    return "?";
}

void NoiseSpec::validate() const {
    auto nonneg = [](double v, const char* name) {
        if (!std::isfinite(v) || v < 0.0) throw config_error(fmt::format("noise parameter {} must be >= 0", name));
    };
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, GaussianNoise>) {
                nonneg(p.sigma, "sigma");
            } else if constexpr (std::is_same_v<T, IntensityGaussianNoise>) {
                nonneg(p.sigma0, "sigma0");
                nonneg(p.k, "k");
            } else if constexpr (std::is_same_v<T, LaplacianNoise>) {
                nonneg(p.b, "b");
            } else if constexpr (std::is_same_v<T, SaltPepperNoise>) {
                nonneg(p.p_salt, "p_salt");
                nonneg(p.p_pepper, "p_pepper");
                if (p.p_salt > 1.0 || p.p_pepper > 1.0 || p.p_salt + p.p_pepper > 1.0 + 1e-12) {
                    throw config_error("salt & pepper probabilities must lie in [0,1] and sum to <= 1");
                }
            } else if constexpr (std::is_same_v<T, UniformNoise>) {
                nonneg(p.a, "a");
            } else if constexpr (std::is_same_v<T, BlindNoise>) {
                if (!target_psnr) throw config_error("blind noise requires target_psnr");
            }
        },
        params);
    if (target_psnr && (!std::isfinite(*target_psnr) || *target_psnr <= 0.0)) {
        throw config_error("target_psnr must be a positive number of dB");
    }
}

std::string to_string(const NoiseSpec& spec) {
    std::string out(family_name(spec));
    const auto fields = spec_fields(spec);
    for (std::size_t i = 0; i < fields.size(); ++i) {
        out += (i == 0 ? ':' : ',');
        out += fields[i].first + "=" + fields[i].second;
    }
    return out;
}

NoiseSpec parse_noise_spec(std::string_view compact) {
    compact = trim(compact);
    const auto colon = compact.find(':');
    const auto family = trim(compact.substr(0, colon));
    std::map<std::string, std::string, std::less<>> kv;
    if (colon != std::string_view::npos) {
        std::string_view rest = compact.substr(colon + 1);
        while (!rest.empty()) {
            const auto comma = rest.find(',');
            const auto item = trim(rest.substr(0, comma));
            rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
            if (item.empty()) continue;
            const auto eq = item.find('=');
            if (eq == std::string_view::npos) throw config_error(fmt::format("noise parameter '{}' lacks '='", item));
            kv[std::string(trim(item.substr(0, eq)))] = std::string(trim(item.substr(eq + 1)));
        }
    }
    return build_spec(family, kv);
}

std::string to_config_text(const NoiseSpec& spec) {
    std::string out = fmt::format("family={}\n", family_name(spec));
    for (const auto& [k, v] : spec_fields(spec)) out += k + "=" + v + "\n";
    return out;
}

NoiseSpec parse_noise_config(std::string_view text) {
    std::map<std::string, std::string, std::less<>> kv;
    std::string family;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        auto line = trim(text.substr(0, nl));
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw config_error(fmt::format("config line '{}' lacks '='", line));
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        if (key == "family") {
            family = value;
        } else {
            kv[key] = value;
        }
    }
    if (family.empty()) throw config_error("noise config has no 'family' key");
    return build_spec(family, kv);
}

RngSeed derive_seed(RngSeed base, std::uint64_t a, std::uint64_t b) {
    return RngSeed{splitmix64(splitmix64(splitmix64(base.value) ^ a) ^ (b * 0x2545f4914f6cdd1dULL))};
}

NoiseOutcome add_noise_detailed(const Image& img, const NoiseSpec& spec, RngSeed seed,
                                const CalibrationOptions& calibration, const BlindRanges& ranges) {
    spec.validate();
    if (const auto* blind = std::get_if<BlindNoise>(&spec.params)) {
        return blind_mixture_detailed(img, blind->include_gaussian, *spec.target_psnr, seed, calibration, ranges);
    }
    validate(img);
    const NoiseFamily family = family_of(spec.params);
    std::mt19937_64 rng(seed.value);
    std::vector<PixelDraw> draws;
    draws.reserve(img.data.size());
    for (std::size_t i = 0; i < img.data.size(); ++i) draws.push_back(draw_variates(family, rng));

    std::vector<NoiseParams> family_params(5, spec.params);
    if (spec.target_psnr) {
        auto out = calibrate(img, std::move(draws), family_params, *spec.target_psnr,
                             multiplier_cap(spec.params), calibration);
        out.family_params = {spec.params};
        return out;
    }
    NoiseOutcome out;
    out.noisy = render(img, draws, family_params, 1.0);
    out.assignment.assign(img.data.size(), family);
    out.achieved_psnr = psnr(img, out.noisy);
    out.family_params = {spec.params};
    return out;
}

Image add_noise(const Image& img, const NoiseSpec& spec, RngSeed seed) {
    return add_noise_detailed(img, spec, seed).noisy;
}

NoiseOutcome blind_mixture_detailed(const Image& img, bool include_gaussian, double target_psnr, RngSeed seed,
                                    const CalibrationOptions& calibration, const BlindRanges& ranges) {
    validate(img);
    check_ranges(ranges);
    if (!std::isfinite(target_psnr) || target_psnr <= 0.0) throw config_error("target_psnr must be positive");

    std::mt19937_64 param_rng(derive_seed(seed, 0x9a7a).value);
    std::vector<NoiseParams> family_params{
        GaussianNoise{uniform_in(ranges.gaussian_sigma, param_rng)},
        IntensityGaussianNoise{uniform_in(ranges.idg_sigma0, param_rng), uniform_in(ranges.idg_k, param_rng)},
        LaplacianNoise{uniform_in(ranges.laplacian_b, param_rng)},
        SaltPepperNoise{uniform_in(ranges.sp_prob, param_rng), uniform_in(ranges.sp_prob, param_rng)},
        UniformNoise{uniform_in(ranges.uniform_a, param_rng)},
    };

    std::vector<NoiseFamily> pool;
    if (include_gaussian) pool = {NoiseFamily::gaussian, NoiseFamily::intensity_dependent_gaussian};
    pool.insert(pool.end(), {NoiseFamily::laplacian, NoiseFamily::salt_pepper, NoiseFamily::uniform});

    std::mt19937_64 rng(seed.value);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    std::vector<PixelDraw> draws;
    draws.reserve(img.data.size());
    for (std::size_t i = 0; i < img.data.size(); ++i) draws.push_back(draw_variates(pool[pick(rng)], rng));

    return calibrate(img, std::move(draws), std::move(family_params), target_psnr, kMaxMultiplier, calibration);
}

Image blind_mixture(const Image& img, bool include_gaussian, double target_psnr, RngSeed seed) {
    return blind_mixture_detailed(img, include_gaussian, target_psnr, seed).noisy;
}

} // namespace prf
