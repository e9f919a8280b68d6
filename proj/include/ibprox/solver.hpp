#pragma once

#include "ibprox/block.hpp"
#include "ibprox/errors.hpp"
#include "ibprox/schedule.hpp"
#include "ibprox/trace.hpp"

namespace ibprox {

/// Per-outer-loop snapshot kept for the Lyapunov diagnostics: the output
/// iterate, per block the value it had just before its last update within
/// the loop, and the parameters the schedule will use for each block's first
/// update of the next loop.
struct OuterRecord {
    int k = 0;
    double objective = 0.0;
    BlockVector x;
    BlockVector x_before_last;
    std::vector<UpdateParams> next_first;
};

using History = std::vector<OuterRecord>;

struct SolverOptions {
    bool keep_history = false;
};

struct SolveResult {
    BlockVector x;
    Trace trace;
    History history;
};

/// Thrown by the runaway guard; carries the last iterate whose objective was
/// still finite and the trace up to that point.
class SolverDivergenceError : public DivergenceError {
public:
    SolverDivergenceError(const std::string& what, double last_objective, BlockVector last,
                          Trace trace)
        : DivergenceError(what, last_objective), last_iterate(std::move(last)),
          trace(std::move(trace)) {}
    BlockVector last_iterate;
    Trace trace;
};

/// Inertial block proximal loop: per update, extrapolate the block with the
/// scheduled inertia and take the problem's exact block prox at that anchor.
/// Requires has_block_prox(). Every block is visited each outer loop; the
/// per-block "previous value" used for extrapolation is refreshed on every
/// update, including repeat visits within a loop.
SolveResult ibp_outer_loop(const BlockProblem& problem, const SolverSchedule& schedule,
                           BlockVector start, const Budget& budget, Rng& rng,
                           const SolverOptions& options = {});

/// Inertial block proximal gradient loop: two extrapolation points per
/// update, one where the gradient is evaluated (grad_inertia) and one
/// anchoring the proximal distance (inertia); the update is the proximal
/// gradient map of the pair. Requires partial_grad and lipschitz_est; the
/// current Lipschitz estimate is handed to the schedule callback.
SolveResult ibpg_outer_loop(const BlockProblem& problem, const SolverSchedule& schedule,
                            BlockVector start, const Budget& budget, Rng& rng,
                            const SolverOptions& options = {});

/// One point of the sufficient-decrease diagnostic.
struct LyapunovRecord {
    int k = 0;
    double objective = 0.0;       ///< F at the loop output
    double momentum_penalty = 0.0;///< delta * sum_i carry_i * ||x_i - x_i^before||^2
    double total = 0.0;
};

/// Computable Lyapunov values over a recorded run (Euclidean generators,
/// carry coefficients rebuilt from the recorded next-first parameters). When
/// the schedule satisfies the IBP feasibility condition the sequence is
/// non-increasing; with zero inertia it reduces to the objective values.
std::vector<LyapunovRecord> lyapunov_trace(const History& history, const SolverSchedule& schedule);

/// Shared runaway guard: objective must stay finite and within 1e12x of the
/// |initial| scale.
bool objective_diverged(double objective, double initial_scale);

}  // namespace ibprox
