#pragma once

#include <functional>
#include <vector>

#include "ibprox/block.hpp"
#include "ibprox/rng.hpp"

namespace ibprox {

enum class OrderPolicy { kCyclic, kRandomPermutation };

/// Parameters of one block update. `inertia` weights the extrapolation of
/// the proximal anchor, `grad_inertia` the extrapolation of the gradient
/// point (IBPG only; the two coincide in single-point schemes), `step` is the
/// proximal stepsize.
struct UpdateParams {
    double inertia = 0.0;
    double step = 1.0;
    double grad_inertia = 0.0;
};

/// What a schedule callback sees when asked for the parameters of one
/// update: outer index k (1-based), block index, how many times this block
/// has been updated within the current outer loop (1-based), and the current
/// and previous Lipschitz estimates (NaN for proximal-only runs).
struct ScheduleContext {
    int k = 0;
    int block = 0;
    int update = 0;
    double lipschitz = 0.0;
    double lipschitz_prev = 0.0;
};

/// Must be a pure function of the context; the solvers may evaluate it more
/// than once per update when history retention is enabled.
using ScheduleFn = std::function<UpdateParams(const ScheduleContext&)>;

/// Per-run solver configuration: the global constants used by the parameter
/// checkers and diagnostics, the inner-loop length, the block order policy
/// and the per-update parameter callback. Per-block generators default to
/// Euclidean when the list is empty.
struct SolverSchedule {
    double nu = 0.5;
    double delta = 1.01;
    double kappa = 2.0;
    int inner_length = 0;  ///< T_k; 0 means one update per block
    OrderPolicy order = OrderPolicy::kCyclic;
    ScheduleFn params;
    std::vector<BregmanGenerator> generators;

    const BregmanGenerator& generator(int block) const {
        return generators.empty() ? BregmanGenerator::euclidean()
                                  : generators[static_cast<std::size_t>(block)];
    }
};

/// Block visit order for one outer loop of length t_k over s blocks. Cyclic
/// repeats 0..s-1 and requires t_k to be a multiple of s; random concatenates
/// independent uniform permutations. Either way every block appears at least
/// once, which the solvers rely on.
std::vector<int> select_blocks(OrderPolicy policy, int s, int t_k, Rng& rng);

}  // namespace ibprox
