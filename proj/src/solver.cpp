#include "ibprox/solver.hpp"

#include <cmath>
#include <utility>

#include "ibprox/errors.hpp"

namespace ibprox {

namespace {

constexpr double kRunawayFactor = 1e12;

struct LoopShared {
    const BlockProblem& problem;
    const SolverSchedule& schedule;
    const Budget& budget;
    const SolverOptions& options;
    int s;
    int inner_length;
};

LoopShared make_shared_state(const BlockProblem& problem, const SolverSchedule& schedule,
                             const Budget& budget, const SolverOptions& options) {
    const int s = problem.block_count();
    if (s < 1) throw DimensionError("solver: problem has no blocks");
    if (!budget.valid()) throw Error("solver: budget needs an iteration or wall-clock limit");
    if (!schedule.params) throw Error("solver: schedule has no parameter callback");
    if (!schedule.generators.empty() && static_cast<int>(schedule.generators.size()) != s) {
        throw DimensionError("solver: generator list does not match block count");
    }
    const int t_k = schedule.inner_length > 0 ? schedule.inner_length : s;
    return {problem, schedule, budget, options, s, t_k};
}

/// Body shared by the two loops; `update` performs one block update given
/// (block, params) and has access to the iterate and the previous values.
template <typename UpdateFn>
SolveResult run_outer_loops(const LoopShared& shared, BlockVector start, Rng& rng,
                            UpdateFn&& update) {
    const BlockProblem& problem = shared.problem;
    BlockVector x = std::move(start);
    BlockVector before = x;  // per block: value before its latest update
    std::vector<double> lips(static_cast<std::size_t>(shared.s), -1.0);

    SolveResult result;
    RunClock clock(shared.budget.deterministic());
    double objective = problem.eval_objective(x);
    result.trace.push_back({0, clock.elapsed(0), objective, problem.rel_error(x)});
    const double initial_scale = std::max(1.0, std::abs(objective));
    if (objective_diverged(objective, initial_scale)) {
        throw SolverDivergenceError("solver: initial objective is not finite", objective, x,
                                    result.trace);
    }
    BlockVector last_ok = x;

    for (int k = 1;; ++k) {
        if (shared.budget.max_outer >= 0 && k > shared.budget.max_outer) break;
        if (shared.budget.seconds > 0.0 && clock.wall_seconds() >= shared.budget.seconds) break;

        const std::vector<int> order =
            select_blocks(shared.schedule.order, shared.s, shared.inner_length, rng);
        std::vector<int> visits(static_cast<std::size_t>(shared.s), 0);
        for (int i : order) {
            const std::size_t bi = static_cast<std::size_t>(i);
            ScheduleContext ctx;
            ctx.k = k;
            ctx.block = i;
            ctx.update = ++visits[bi];
            update(ctx, x, before, lips);
        }

        const double previous_objective = objective;
        objective = problem.eval_objective(x);
        if (objective_diverged(objective, initial_scale)) {
            throw SolverDivergenceError("solver: objective diverged at outer iteration " +
                                            std::to_string(k),
                                        previous_objective, std::move(last_ok), result.trace);
        }
        result.trace.push_back({k, clock.elapsed(k), objective, problem.rel_error(x)});

        if (shared.options.keep_history) {
            OuterRecord rec;
            rec.k = k;
            rec.objective = objective;
            rec.x = x;
            rec.x_before_last = before;
            rec.next_first.resize(static_cast<std::size_t>(shared.s));
            for (int i = 0; i < shared.s; ++i) {
                ScheduleContext ctx;
                ctx.k = k + 1;
                ctx.block = i;
                ctx.update = 1;
                ctx.lipschitz = lips[static_cast<std::size_t>(i)];
                ctx.lipschitz_prev = lips[static_cast<std::size_t>(i)];
                rec.next_first[static_cast<std::size_t>(i)] = shared.schedule.params(ctx);
            }
            result.history.push_back(std::move(rec));
        }
        last_ok = x;
    }
    result.x = std::move(x);
    return result;
}

}  // namespace

bool objective_diverged(double objective, double initial_scale) {
    return !std::isfinite(objective) || std::abs(objective) > kRunawayFactor * initial_scale;
}

SolveResult ibp_outer_loop(const BlockProblem& problem, const SolverSchedule& schedule,
                           BlockVector start, const Budget& budget, Rng& rng,
                           const SolverOptions& options) {
    if (!problem.has_block_prox()) {
        throw UnsupportedError("ibp_outer_loop: problem does not provide an exact block prox");
    }
    for (int i = 0; i < problem.block_count(); ++i) {
        if (!schedule.generator(i).is_euclidean) {
            throw UnsupportedError("ibp_outer_loop: exact block proxes are Euclidean-only");
        }
    }
    const LoopShared shared = make_shared_state(problem, schedule, budget, options);
    return run_outer_loops(
        shared, std::move(start), rng,
        [&](const ScheduleContext& ctx, BlockVector& x, BlockVector& before,
            std::vector<double>&) {
            const UpdateParams p = schedule.params(ctx);
            const int i = ctx.block;
            const Vector anchor = extrapolate(x[i], before[i], p.inertia);
            Vector next = problem.block_prox(i, x, anchor, p.step);
            before[i] = std::move(x[i]);
            x[i] = std::move(next);
        });
}

SolveResult ibpg_outer_loop(const BlockProblem& problem, const SolverSchedule& schedule,
                            BlockVector start, const Budget& budget, Rng& rng,
                            const SolverOptions& options) {
    const LoopShared shared = make_shared_state(problem, schedule, budget, options);
    return run_outer_loops(
        shared, std::move(start), rng,
        [&](const ScheduleContext& base_ctx, BlockVector& x, BlockVector& before,
            std::vector<double>& lips) {
            const int i = base_ctx.block;
            const std::size_t bi = static_cast<std::size_t>(i);
            ScheduleContext ctx = base_ctx;
            ctx.lipschitz = problem.lipschitz_est(i, x);
            ctx.lipschitz_prev = lips[bi] < 0.0 ? ctx.lipschitz : lips[bi];
            const UpdateParams p = schedule.params(ctx);
            lips[bi] = ctx.lipschitz;

            const Vector anchor = extrapolate(x[i], before[i], p.inertia);
            const Vector grad_point = extrapolate(x[i], before[i], p.grad_inertia);
            // gradient of f in block i evaluated at the extrapolated point
            Vector save = std::move(x[i]);
            x[i] = grad_point;
            const Vector grad = problem.partial_grad(i, x);
            x[i] = std::move(save);

            Vector next = bregman_gprox(
                grad, anchor, p.step,
                [&](const Vector& v, double step) { return problem.prox_r(i, v, step); },
                schedule.generator(i));
            before[i] = std::move(x[i]);
            x[i] = std::move(next);
        });
}

std::vector<LyapunovRecord> lyapunov_trace(const History& history, const SolverSchedule& schedule) {
    if (history.empty()) throw Error("lyapunov_trace: history is empty (run with keep_history)");
    std::vector<LyapunovRecord> records;
    records.reserve(history.size());
    for (const auto& rec : history) {
        if (rec.x_before_last.count() != rec.x.count()) {
            throw Error("lyapunov_trace: history record lacks the pre-update iterate");
        }
        LyapunovRecord out;
        out.k = rec.k;
        out.objective = rec.objective;
        for (int i = 0; i < rec.x.count(); ++i) {
            const UpdateParams& p = rec.next_first[static_cast<std::size_t>(i)];
            const BregmanGenerator& gen = schedule.generator(i);
            const double carry = (gen.l_h * p.inertia) * (gen.l_h * p.inertia) /
                                 (2.0 * schedule.nu * gen.sigma * p.step);
            out.momentum_penalty += schedule.delta * carry *
                                    (rec.x[i] - rec.x_before_last[i]).squaredNorm();
        }
        out.total = out.objective + out.momentum_penalty;
        records.push_back(out);
    }
    return records;
}

}  // namespace ibprox
