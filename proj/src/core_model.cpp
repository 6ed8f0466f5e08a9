#include "prf/core_model.hpp"

#include "prf/error.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

namespace prf {

namespace {

// tau2 / ((tau1 - tau2) * (tau2/tau1)^(tau1/(tau1-tau2))), the factor that puts the
// double-exponential peak at exactly 1.
double kernel_norm(const NetworkParams& p) {
    return p.tau2 / ((p.tau1 - p.tau2) * std::pow(p.tau2 / p.tau1, p.tau1 / (p.tau1 - p.tau2)));
}

bool taus_equal(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b)); }

std::size_t steps_per(double span, double dt, const char* what) {
    const double ratio = span / dt;
    const double rounded = std::round(ratio);
    if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
        throw config_error(fmt::format("{} ({} ms) must be a positive integer multiple of dt ({} ms)", what,
                                       span, dt));
    }
    return static_cast<std::size_t>(rounded);
}

void check_finite(const Eigen::VectorXd& u, double t) {
    if (!u.allFinite()) {
        throw numeric_error(fmt::format("non-finite membrane voltage at t = {} ms", t));
    }
}

} // namespace

void NetworkParams::validate() const {
    auto positive = [](double v, const char* name) {
        if (!std::isfinite(v) || v <= 0.0) throw config_error(fmt::format("{} must be > 0 (got {})", name, v));
    };
    positive(c_m, "c_m");
    positive(g_leak, "g_leak");
    positive(tau1, "tau1");
    positive(tau2, "tau2");
    positive(dt, "dt");
    positive(t_end, "t_end");
    if (!std::isfinite(g_gap) || g_gap < 0.0) throw config_error(fmt::format("g_gap must be >= 0 (got {})", g_gap));
    if (!std::isfinite(e_leak)) throw config_error("e_leak must be finite");
    if (!std::isfinite(i_dark)) throw config_error("i_dark must be finite");
    if (taus_equal(tau1, tau2)) throw config_error("tau1 == tau2 makes the photocurrent kernel singular");
}

std::vector<std::string> NetworkParams::warnings() const {
    std::vector<std::string> out;
    if (t_end < 5.0 * std::max(tau1, tau2)) {
        out.push_back(fmt::format("t_end = {} ms is shorter than 5*max(tau1, tau2) = {} ms; the photocurrent "
                                  "has not settled",
                                  t_end, 5.0 * std::max(tau1, tau2)));
    }
    return out;
}

std::size_t NetworkParams::step_count() const { return steps_per(t_end, dt, "t_end"); }

double photocurrent_kernel(double t, const NetworkParams& p) {
    if (taus_equal(p.tau1, p.tau2)) throw config_error("tau1 == tau2 makes the photocurrent kernel singular");
    if (!(t >= 0.0)) throw config_error(fmt::format("photocurrent time must be >= 0 (got {})", t));
    return kernel_norm(p) * (std::exp(-t / p.tau1) - std::exp(-t / p.tau2));
}

double photocurrent_peak_time(const NetworkParams& p) {
    if (taus_equal(p.tau1, p.tau2)) throw config_error("tau1 == tau2 makes the photocurrent kernel singular");
    return p.tau1 * p.tau2 / (p.tau1 - p.tau2) * std::log(p.tau1 / p.tau2);
}

double photocurrent(double t, const NetworkParams& p, double g_max) {
    return p.i_dark - g_max * photocurrent_kernel(t, p);
}

GridTopology::GridTopology(int width, int height) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) {
        throw config_error(fmt::format("grid must be at least 1x1 (got {}x{})", width, height));
    }
    offsets_.reserve(cell_count() + 1);
    adjacency_.reserve(4 * cell_count());
    offsets_.push_back(0);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            if (y > 0) adjacency_.push_back(static_cast<int>(index(x, y - 1)));
            if (x > 0) adjacency_.push_back(static_cast<int>(index(x - 1, y)));
            if (x + 1 < width) adjacency_.push_back(static_cast<int>(index(x + 1, y)));
            if (y + 1 < height) adjacency_.push_back(static_cast<int>(index(x, y + 1)));
            offsets_.push_back(adjacency_.size());
        }
    }
}

std::span<const int> GridTopology::neighbors(std::size_t cell) const {
    return std::span<const int>(adjacency_).subspan(offsets_[cell], offsets_[cell + 1] - offsets_[cell]);
}

FactorizedSystem::FactorizedSystem(GridTopology topology, NetworkParams params) {
    params.validate();
    const std::size_t n = topology.cell_count();
    const double base = params.c_m / params.dt + params.g_leak;

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(n + 4 * n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto nb = topology.neighbors(i);
        const auto row = static_cast<int>(i);
        triplets.emplace_back(row, row, base + static_cast<double>(nb.size()) * params.g_gap);
        if (params.g_gap > 0.0) {
            for (int j : nb) triplets.emplace_back(row, j, -params.g_gap);
        }
    }
    SparseMatrix matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    matrix.setFromTriplets(triplets.begin(), triplets.end());
    matrix.makeCompressed();

    auto state = std::make_shared<State>();
    state->topology = std::move(topology);
    state->params = params;
    state->matrix = std::move(matrix);
    if (n == 1) {
        state->scalar = true;
        state->diag = state->matrix.coeff(0, 0);
    } else {
        state->llt.compute(state->matrix);
        if (state->llt.info() != Eigen::Success) {
            throw numeric_error("system matrix factorization failed (matrix is not positive definite)");
        }
    }
    state_ = std::move(state);
}

void FactorizedSystem::solve_in_place(Eigen::VectorXd& x) const {
    if (state_->scalar) {
        x[0] /= state_->diag;
        return;
    }
    x = state_->llt.solve(x);
}

FactorizedSystem build_system(const GridTopology& topology, const NetworkParams& params) {
    return FactorizedSystem(topology, params);
}

SimResult simulate(const FactorizedSystem& system, std::span<const double> drive, const SimOptions& options) {
    const auto& p = system.params();
    const std::size_t n = system.cell_count();
    if (drive.size() != n) {
        throw config_error(fmt::format("drive has {} entries, network has {} cells", drive.size(), n));
    }
    for (double d : drive) {
        if (!std::isfinite(d) || d < 0.0) throw config_error("drive amplitudes must be finite and >= 0");
    }

    const std::size_t steps = p.step_count();
    const double leak_in = p.c_m / p.dt;
    const Eigen::Map<const Eigen::VectorXd> g(drive.data(), static_cast<Eigen::Index>(n));

    SimResult result;
    result.v_rest = p.v_rest();
    result.peak_deflection.assign(n, 0.0);
    if (options.record_traces) {
        result.trace_cells = options.record_cells;
        if (result.trace_cells.empty()) {
            result.trace_cells.resize(n);
            for (std::size_t i = 0; i < n; ++i) result.trace_cells[i] = i;
        }
        for (auto c : result.trace_cells) {
            if (c >= n) throw config_error(fmt::format("record cell {} out of range", c));
        }
        result.times.reserve(steps + 1);
        result.times.push_back(0.0);
        result.traces.assign(result.trace_cells.size(), std::vector<double>{});
        for (auto& tr : result.traces) {
            tr.reserve(steps + 1);
            tr.push_back(result.v_rest);
        }
    }

    Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t step = 1; step <= steps; ++step) {
        const double t = static_cast<double>(step) * p.dt;
        const double k = photocurrent_kernel(t, p);
        u = leak_in * u - k * g;
        system.solve_in_place(u);
        for (std::size_t i = 0; i < n; ++i) {
            result.peak_deflection[i] = std::max(result.peak_deflection[i], std::abs(u[static_cast<Eigen::Index>(i)]));
        }
        if (options.record_traces) {
            result.times.push_back(t);
            for (std::size_t k2 = 0; k2 < result.trace_cells.size(); ++k2) {
                result.traces[k2].push_back(result.v_rest + u[static_cast<Eigen::Index>(result.trace_cells[k2])]);
            }
        }
    }
    check_finite(u, p.t_end);
    return result;
}

TraceSet simulate_timevarying(const FactorizedSystem& system, std::span<const DriveField> frames, double frame_dt,
                              std::span<const std::size_t> record) {
    const auto& p = system.params();
    const std::size_t n = system.cell_count();
    if (frames.empty()) throw config_error("stimulus movie has no frames");
    for (const auto& f : frames) {
        if (f.size() != n) throw config_error(fmt::format("frame has {} entries, network has {} cells", f.size(), n));
        for (double g : f) {
            if (!(g >= 0.0) || !std::isfinite(g)) throw config_error("frame drive must be finite and >= 0");
        }
    }
    for (auto c : record) {
        if (c >= n) throw config_error(fmt::format("record cell {} out of range", c));
    }
    const std::size_t per_frame = steps_per(frame_dt, p.dt, "frame_dt");
    const std::size_t steps = per_frame * frames.size();

    const double leak_in = p.c_m / p.dt;
    const double norm = kernel_norm(p);
    const double decay1 = std::exp(-p.dt / p.tau1);
    const double decay2 = std::exp(-p.dt / p.tau2);

    TraceSet out;
    out.v_rest = p.v_rest();
    out.cells.assign(record.begin(), record.end());
    out.times.reserve(steps + 1);
    out.times.push_back(0.0);
    out.traces.assign(record.size(), std::vector<double>{});
    for (auto& tr : out.traces) {
        tr.reserve(steps + 1);
        tr.push_back(out.v_rest);
    }

    const auto as_vec = [n](const DriveField& f) {
        return Eigen::Map<const Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(n));
    };
    // The drive holds each frame's value until the next onset. Every change in
    // g_max starts a new kernel response, so the photocurrent is a sum of shifted
    // K(t) weighted by the frame-to-frame differences. Two exponential filter
    // states carry that sum: response = norm * (a1 - a2).
    Eigen::VectorXd a1 = as_vec(frames[0]);
    Eigen::VectorXd a2 = a1;
    Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));

    for (std::size_t step = 1; step <= steps; ++step) {
        a1 *= decay1;
        a2 *= decay2;
        if (step % per_frame == 0 && step / per_frame < frames.size()) {
            const std::size_t f = step / per_frame;
            const Eigen::VectorXd change = as_vec(frames[f]) - as_vec(frames[f - 1]);
            a1 += change;
            a2 += change;
        }
        u = leak_in * u - norm * (a1 - a2);
        system.solve_in_place(u);
        out.times.push_back(static_cast<double>(step) * p.dt);
        for (std::size_t k = 0; k < record.size(); ++k) {
            out.traces[k].push_back(out.v_rest + u[static_cast<Eigen::Index>(record[k])]);
        }
        if (step % 1024 == 0) check_finite(u, out.times.back());
    }
    check_finite(u, out.times.back());
    return out;
}

} // namespace prf
