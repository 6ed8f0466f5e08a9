#pragma once

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace prf {

// Physical constants of the reduced (passive) photoreceptor grid.
// Units: pF, nS, mV, pA, ms. nS * mV = pA and pF * mV / ms = pA.
struct NetworkParams {
    double c_m = 20.0;      // membrane capacitance [pF]
    double g_leak = 1.0;    // leak conductance [nS]
    double e_leak = -70.0;  // leak reversal [mV]
    double g_gap = 10.0;    // gap-junction conductance [nS], the filter's only knob
    double i_dark = 40.0;   // dark current [pA]
    double tau1 = 64.0;     // photocurrent time constant [ms]
    double tau2 = 68.0;     // photocurrent time constant [ms]
    double dt = 1.0;        // backward-Euler step [ms]
    double t_end = 300.0;   // simulated duration [ms]

    // Throws config_error on invalid values (including tau1 == tau2).
    void validate() const;

    // Soft problems that do not prevent a run, e.g. t_end < 5*max(tau1, tau2).
    std::vector<std::string> warnings() const;

    // Uniform steady state with the dark current flowing and no light.
    double v_rest() const noexcept { return e_leak + i_dark / g_leak; }

    std::size_t step_count() const;
};

// Normalized double-exponential light response. K(0) = 0 and the peak value is exactly 1.
double photocurrent_kernel(double t, const NetworkParams& params);

// Time at which photocurrent_kernel peaks: tau1*tau2/(tau1-tau2) * ln(tau1/tau2).
double photocurrent_peak_time(const NetworkParams& params);

// Photocurrent into one cell: i_dark - g_max * K(t). Light suppresses the dark current.
double photocurrent(double t, const NetworkParams& params, double g_max);

// Rectangular grid with 4-connected neighbours and truncated edges.
class GridTopology {
public:
    GridTopology(int width, int height);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t cell_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }
    std::size_t index(int x, int y) const noexcept { return static_cast<std::size_t>(y) * width_ + x; }

    std::span<const int> neighbors(std::size_t cell) const;
    std::size_t degree(std::size_t cell) const { return neighbors(cell).size(); }

    // Undirected edge count.
    std::size_t edge_count() const noexcept { return adjacency_.size() / 2; }

private:
    int width_;
    int height_;
    std::vector<std::size_t> offsets_;
    std::vector<int> adjacency_;
};

// Backward-Euler system matrix of the coupled grid, factorized once.
//
//   (c_m/dt + g_leak + deg(i)*g_gap) u_i - g_gap * sum_j u_j = (c_m/dt) u_i^prev + drive_i
//
// The state u is the deflection from v_rest. Immutable after construction; copies share
// the factorization and concurrent solves are safe.
class FactorizedSystem {
public:
    using SparseMatrix = Eigen::SparseMatrix<double>;

    FactorizedSystem(GridTopology topology, NetworkParams params);

    const GridTopology& topology() const noexcept { return state_->topology; }
    const NetworkParams& params() const noexcept { return state_->params; }
    const SparseMatrix& matrix() const noexcept { return state_->matrix; }
    std::size_t nonzeros() const noexcept { return static_cast<std::size_t>(state_->matrix.nonZeros()); }
    std::size_t cell_count() const noexcept { return state_->topology.cell_count(); }

    // x <- A^{-1} x
    void solve_in_place(Eigen::VectorXd& x) const;

private:
    struct State {
        GridTopology topology{1, 1};
        NetworkParams params;
        SparseMatrix matrix;
        Eigen::SimplicialLLT<SparseMatrix> llt;
        bool scalar = false;
        double diag = 0.0;
    };
    std::shared_ptr<const State> state_;
};

FactorizedSystem build_system(const GridTopology& topology, const NetworkParams& params);

struct SimOptions {
    bool record_traces = false;
    // Cells whose traces are kept. Empty with record_traces set means every cell.
    std::vector<std::size_t> record_cells;
};

struct SimResult {
    // max_t |v(t) - v_rest| per cell [mV]
    std::vector<double> peak_deflection;
    double v_rest = 0.0;
    // Sample times [ms] starting at 0; filled only when traces are recorded.
    std::vector<double> times;
    std::vector<std::size_t> trace_cells;
    // Absolute membrane voltage [mV], traces[k][n] for cell trace_cells[k] at times[n].
    std::vector<std::vector<double>> traces;
};

// Integrates from rest to t_end with photocurrent i_dark - drive[i] * K(t) in every cell.
SimResult simulate(const FactorizedSystem& system, std::span<const double> drive,
                   const SimOptions& options = {});

// Per-cell amplitude field for one stimulus frame [pA].
using DriveField = std::vector<double>;

struct TraceSet {
    double v_rest = 0.0;
    std::vector<double> times;
    std::vector<std::size_t> cells;
    std::vector<std::vector<double>> traces;
};

// Piecewise-constant drive: frame f holds from t = f * frame_dt until the next frame.
// K is read as the response to a step in g_max, so each cell receives
//   i_dark - sum_f (frames[f][i] - frames[f-1][i]) * K(t - f*frame_dt),  frames[-1] = 0.
// A single frame therefore reproduces simulate(). Runs for frames.size() * frame_dt.
TraceSet simulate_timevarying(const FactorizedSystem& system, std::span<const DriveField> frames,
                              double frame_dt, std::span<const std::size_t> record);

} // namespace prf
