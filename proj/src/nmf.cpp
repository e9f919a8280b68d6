#include "ibprox/nmf.hpp"

#include <cmath>
#include <utility>

#include "ibprox/errors.hpp"
#include "ibprox/solver.hpp"

namespace ibprox {

namespace {

// Lipschitz estimates feed stepsizes and the acceptance comparisons, so the
// internal power-iteration calls run well below the module default tolerance.
constexpr double kLipTol = 1e-12;
constexpr int kLipMaxIter = 10000;

double psd_norm(const Matrix& m) {
    return operator_norm_psd(m, kLipTol, kLipMaxIter).value;
}

int repeat_cap(const NmfOptions& opt, Index other_dim, int rank) {
    const int flop_cap =
        1 + static_cast<int>(std::floor(opt.repeat_rho * static_cast<double>(other_dim) /
                                        static_cast<double>(rank)));
    return std::max(1, std::min(opt.repeat_cap, flop_cap));
}

/// Runs `step` up to `cap` times, stopping early once the improvement
/// reported by `objective` drops below `tol` times the first improvement.
/// With cap == 1 the objective is never evaluated.
template <typename StepFn, typename ObjectiveFn>
void repeated_updates(int cap, double tol, StepFn&& step, ObjectiveFn&& objective) {
    if (cap <= 1) {
        step();
        return;
    }
    double before = objective();
    double first_gain = 0.0;
    for (int t = 1; t <= cap; ++t) {
        step();
        if (t == cap) break;
        const double after = objective();
        const double gain = before - after;
        before = after;
        if (t == 1) {
            first_gain = gain;
            if (!(gain > 0.0)) break;
        } else if (gain < tol * first_gain) {
            break;
        }
    }
}

/// Same rule when the step itself returns its exact objective gain (used by
/// the column updates, where the gain is a cheap by-product).
template <typename StepFn>
void repeated_updates_with_gain(int cap, double tol, StepFn&& step) {
    double first_gain = 0.0;
    for (int t = 1; t <= cap; ++t) {
        const double gain = step();
        if (t == cap) break;
        if (t == 1) {
            first_gain = gain;
            if (!(gain > 0.0)) break;
        } else if (gain < tol * first_gain) {
            break;
        }
    }
}

// Block objectives from the Gram caches:
//   f = 0.5 ||X||^2 - <U, XV^T> + 0.5 <U^T U, V V^T>
double block_objective_u(const NmfState& st, double normx2) {
    return 0.5 * normx2 - st.u.cwiseProduct(st.xvt).sum() +
           0.5 * (st.u.transpose() * st.u).cwiseProduct(st.vvt).sum();
}

double block_objective_v(const NmfState& st, double normx2) {
    return 0.5 * normx2 - st.v.cwiseProduct(st.utx).sum() +
           0.5 * (st.v * st.v.transpose()).cwiseProduct(st.utu).sum();
}

double cached_objective(const NmfState& st, const Matrix& x, double normx2) {
    if (st.v_cache_valid) return block_objective_v(st, normx2);
    if (st.u_cache_valid) return block_objective_u(st, normx2);
    return nmf_objective(x, st.u, st.v);
}

void refresh_u_caches(NmfState& st, const Matrix& x) {
    st.vvt.noalias() = st.v * st.v.transpose();
    st.xvt.noalias() = x * st.v.transpose();
    st.u_cache_valid = true;
}

void refresh_v_caches(NmfState& st, const Matrix& x) {
    st.utu.noalias() = st.u.transpose() * st.u;
    st.utx.noalias() = st.u.transpose() * x;
    st.v_cache_valid = true;
}

/// Trace bookkeeping shared by all run paths: records one point per outer
/// loop, applies the runaway guard and the optional relerror stop.
class NmfTraceDriver {
public:
    NmfTraceDriver(const NmfOptions& opt, double normx, double initial_objective)
        : options_(opt), clock_(opt.budget.deterministic()), normx_(normx) {
        initial_scale_ = std::max(1.0, std::abs(initial_objective));
        record(0, initial_objective);
    }

    double relerror(double objective) const {
        if (normx_ == 0.0) return 0.0;
        return std::sqrt(std::max(0.0, 2.0 * objective)) / normx_;
    }

    /// Appends a record; returns true when the run should stop.
    bool record(int k, double objective) {
        const double rel = relerror(objective);
        trace_.push_back({k, clock_.elapsed(k), objective, rel});
        diverged_ = objective_diverged(objective, initial_scale_);
        stopped_ = diverged_ ||
                   (options_.stop_relerror > 0.0 && rel <= options_.stop_relerror);
        return stopped_;
    }

    bool budget_allows(int k) const {
        if (stopped_) return false;
        const Budget& b = options_.budget;
        if (b.max_outer >= 0 && k > b.max_outer) return false;
        if (b.seconds > 0.0 && clock_.wall_seconds() >= b.seconds) return false;
        return true;
    }

    bool diverged() const { return diverged_; }
    Trace take_trace() { return std::move(trace_); }
    const Trace& trace() const { return trace_; }

private:
    const NmfOptions& options_;
    RunClock clock_;
    double normx_;
    double initial_scale_ = 1.0;
    bool diverged_ = false;
    bool stopped_ = false;
    Trace trace_;
};

[[noreturn]] void throw_divergence(NmfTraceDriver& driver, NmfState state) {
    const Trace& t = driver.trace();
    const double last = t.size() >= 2 ? t[t.size() - 2].objective : t.back().objective;
    throw NmfDivergenceError("nmf: objective diverged at outer iteration " +
                                 std::to_string(t.back().k),
                             last, std::move(state), driver.take_trace());
}

std::vector<int> group_order(OrderPolicy policy, int groups, Rng& rng) {
    return select_blocks(policy, groups, groups, rng);
}

// ---------------------------------------------------------------------------
// proximal gradient family (plain, accelerated, and the matched-constant
// coordinate baseline)

NmfRunResult run_ibpg_family(const NmfInstance& inst, const NmfFactors& init,
                             const NmfOptions& opt, std::uint64_t seed, double gamma_tilde,
                             double alpha_breve, bool accelerated) {
    const Matrix& x = inst.x;
    const int r = inst.rank;
    NmfState st;
    st.u = init.u;
    st.v = init.v;
    st.u_prev = st.u;
    st.v_prev = st.v;

    const double normx2 = x.squaredNorm();
    Rng rng(seed);
    NmfTraceDriver driver(opt, std::sqrt(normx2), nmf_objective(x, st.u, st.v));
    if (driver.diverged()) throw_divergence(driver, std::move(st));

    const int cap_u = accelerated ? repeat_cap(opt, x.cols(), r) : 1;
    const int cap_v = accelerated ? repeat_cap(opt, x.rows(), r) : 1;
    double t = 1.0;
    bool lip_seeded = false;

    for (int k = 1; driver.budget_allows(k); ++k) {
        t = nesterov_t_step(t);
        for (int block : group_order(opt.order, 2, rng)) {
            if (block == 0) {
                refresh_u_caches(st, x);
                st.lip_u = psd_norm(st.vvt);
                if (!lip_seeded) st.lip_u_prev = st.lip_u;
                const UpdateParams p =
                    ibpg_nmf_schedule(t, st.lip_u, st.lip_u_prev, gamma_tilde, alpha_breve);
                st.lip_u_prev = st.lip_u;
                repeated_updates(
                    cap_u, opt.repeat_tol,
                    [&] {
                        const Matrix anchor = st.u + p.inertia * (st.u - st.u_prev);
                        const Matrix grad_point = st.u + p.grad_inertia * (st.u - st.u_prev);
                        Matrix next =
                            (anchor - p.step * (grad_point * st.vvt - st.xvt)).cwiseMax(0.0);
                        st.u_prev = std::move(st.u);
                        st.u = std::move(next);
                        st.v_cache_valid = false;
                    },
                    [&] { return block_objective_u(st, normx2); });
            } else {
                refresh_v_caches(st, x);
                st.lip_v = psd_norm(st.utu);
                if (!lip_seeded) st.lip_v_prev = st.lip_v;
                const UpdateParams p =
                    ibpg_nmf_schedule(t, st.lip_v, st.lip_v_prev, gamma_tilde, alpha_breve);
                st.lip_v_prev = st.lip_v;
                repeated_updates(
                    cap_v, opt.repeat_tol,
                    [&] {
                        const Matrix anchor = st.v + p.inertia * (st.v - st.v_prev);
                        const Matrix grad_point = st.v + p.grad_inertia * (st.v - st.v_prev);
                        Matrix next =
                            (anchor - p.step * (st.utu * grad_point - st.utx)).cwiseMax(0.0);
                        st.v_prev = std::move(st.v);
                        st.v = std::move(next);
                        st.u_cache_valid = false;
                    },
                    [&] { return block_objective_v(st, normx2); });
            }
        }
        lip_seeded = true;
        if (driver.record(k, cached_objective(st, x, normx2))) {
            if (driver.diverged()) throw_divergence(driver, std::move(st));
            break;
        }
    }
    return {std::move(st), driver.take_trace()};
}

// ---------------------------------------------------------------------------
// proximal variant on 2r blocks (columns of U, rows of V), closed-form updates

NmfRunResult run_ibp(const NmfInstance& inst, const NmfFactors& init, const NmfOptions& opt,
                     std::uint64_t seed) {
    const Matrix& x = inst.x;
    const int r = inst.rank;
    NmfState st;
    st.u = init.u;
    st.v = init.v;
    st.u_prev = st.u;
    st.v_prev = st.v;

    const double normx2 = x.squaredNorm();
    const double inv_step = opt.ibp_inv_step;
    Rng rng(seed);
    NmfTraceDriver driver(opt, std::sqrt(normx2), nmf_objective(x, st.u, st.v));
    if (driver.diverged()) throw_divergence(driver, std::move(st));

    const int cap_u = repeat_cap(opt, x.cols(), r);
    const int cap_v = repeat_cap(opt, x.rows(), r);
    std::vector<int> cols(static_cast<std::size_t>(r));
    for (int i = 0; i < r; ++i) cols[static_cast<std::size_t>(i)] = i;

    double inertia = opt.ibp_inertia0;
    for (int k = 1; driver.budget_allows(k); ++k) {
        if (k > 1) inertia = std::min(opt.ibp_inertia_cap, opt.ibp_inertia_growth * inertia);
        for (int block : group_order(opt.order, 2, rng)) {
            std::vector<int> order = cols;
            if (opt.order == OrderPolicy::kRandomPermutation) rng.shuffle(order);
            if (block == 0) {
                refresh_u_caches(st, x);
                for (int i : order) {
                    repeated_updates_with_gain(cap_u, opt.repeat_tol, [&] {
                        const double c = st.vvt(i, i);
                        Vector b = st.xvt.col(i) - st.u * st.vvt.col(i) + st.u.col(i) * c;
                        const Vector anchor =
                            st.u.col(i) + inertia * (st.u.col(i) - st.u_prev.col(i));
                        Vector next = ((b + inv_step * anchor) / (c + inv_step)).cwiseMax(0.0);
                        const double gain = (next - st.u.col(i)).dot(b) -
                                            0.5 * c * (next.squaredNorm() -
                                                       st.u.col(i).squaredNorm());
                        st.u_prev.col(i) = st.u.col(i);
                        st.u.col(i) = next;
                        return gain;
                    });
                }
                st.v_cache_valid = false;
            } else {
                refresh_v_caches(st, x);
                for (int i : order) {
                    repeated_updates_with_gain(cap_v, opt.repeat_tol, [&] {
                        const double c = st.utu(i, i);
                        Eigen::RowVectorXd b =
                            st.utx.row(i) - st.utu.row(i) * st.v + st.v.row(i) * c;
                        const Eigen::RowVectorXd anchor =
                            st.v.row(i) + inertia * (st.v.row(i) - st.v_prev.row(i));
                        Eigen::RowVectorXd next =
                            ((b + inv_step * anchor) / (c + inv_step)).cwiseMax(0.0);
                        const double gain = (next - st.v.row(i)).dot(b) -
                                            0.5 * c * (next.squaredNorm() -
                                                       st.v.row(i).squaredNorm());
                        st.v_prev.row(i) = st.v.row(i);
                        st.v.row(i) = next;
                        return gain;
                    });
                }
                st.u_cache_valid = false;
            }
        }
        if (driver.record(k, cached_objective(st, x, normx2))) {
            if (driver.diverged()) throw_divergence(driver, std::move(st));
            break;
        }
    }
    return {std::move(st), driver.take_trace()};
}

// ---------------------------------------------------------------------------
// alternating least squares baselines

/// One full (U, V) pass of the accelerated HALS baseline, with repeated
/// column/row sweeps under the shared repeat rule. Returns the objective
/// computed from the final caches.
double ahals_pass(const Matrix& x, NmfState& st, const NmfOptions& opt, double normx2, int cap_u,
                  int cap_v) {
    refresh_u_caches(st, x);
    repeated_updates(
        cap_u, opt.repeat_tol,
        [&] {
            for (int i = 0; i < st.vvt.rows(); ++i) {
                const double c = st.vvt(i, i);
                if (c <= 0.0) continue;  // vanished row: leave the column unchanged
                Vector b = st.xvt.col(i) - st.u * st.vvt.col(i) + st.u.col(i) * c;
                st.u.col(i) = (b / c).cwiseMax(0.0);
            }
            st.v_cache_valid = false;
        },
        [&] { return block_objective_u(st, normx2); });
    st.v_cache_valid = false;

    refresh_v_caches(st, x);
    repeated_updates(
        cap_v, opt.repeat_tol,
        [&] {
            for (int i = 0; i < st.utu.rows(); ++i) {
                const double c = st.utu(i, i);
                if (c <= 0.0) continue;
                Eigen::RowVectorXd b = st.utx.row(i) - st.utu.row(i) * st.v + st.v.row(i) * c;
                st.v.row(i) = (b / c).cwiseMax(0.0);
            }
            st.u_cache_valid = false;
        },
        [&] { return block_objective_v(st, normx2); });
    st.u_cache_valid = false;
    return block_objective_v(st, normx2);
}

NmfRunResult run_ahals(const NmfInstance& inst, const NmfFactors& init, const NmfOptions& opt) {
    const Matrix& x = inst.x;
    NmfState st;
    st.u = init.u;
    st.v = init.v;
    st.u_prev = st.u;
    st.v_prev = st.v;

    const double normx2 = x.squaredNorm();
    NmfTraceDriver driver(opt, std::sqrt(normx2), nmf_objective(x, st.u, st.v));
    if (driver.diverged()) throw_divergence(driver, std::move(st));
    const int cap_u = repeat_cap(opt, x.cols(), inst.rank);
    const int cap_v = repeat_cap(opt, x.rows(), inst.rank);

    for (int k = 1; driver.budget_allows(k); ++k) {
        st.u_prev = st.u;
        st.v_prev = st.v;
        const double objective = ahals_pass(x, st, opt, normx2, cap_u, cap_v);
        if (driver.record(k, objective)) {
            if (driver.diverged()) throw_divergence(driver, std::move(st));
            break;
        }
    }
    return {std::move(st), driver.take_trace()};
}

NmfRunResult run_eahals(const NmfInstance& inst, const NmfFactors& init, const NmfOptions& opt) {
    const Matrix& x = inst.x;
    NmfState st;
    st.u = init.u;
    st.v = init.v;
    st.u_prev = st.u;
    st.v_prev = st.v;

    const double normx2 = x.squaredNorm();
    double objective = nmf_objective(x, st.u, st.v);
    NmfTraceDriver driver(opt, std::sqrt(normx2), objective);
    if (driver.diverged()) throw_divergence(driver, std::move(st));
    const int cap_u = repeat_cap(opt, x.cols(), inst.rank);
    const int cap_v = repeat_cap(opt, x.rows(), inst.rank);

    // extrapolated inputs to the next pass and the growth/restart coefficient
    Matrix ue = st.u, ve = st.v;
    double coeff = opt.eah_start;

    for (int k = 1; driver.budget_allows(k); ++k) {
        NmfState cand;
        cand.u = ue;
        cand.v = ve;
        const double cand_objective = ahals_pass(x, cand, opt, normx2, cap_u, cap_v);
        if (cand_objective > objective) {
            // restart to the previous iterate and shrink the coefficient
            ue = st.u;
            ve = st.v;
            coeff /= opt.eah_decay;
        } else {
            ue = cand.u + coeff * (cand.u - st.u);
            ve = cand.v + coeff * (cand.v - st.v);
            coeff = std::min(1.0, coeff * opt.eah_growth);
            st.u_prev = std::move(st.u);
            st.v_prev = std::move(st.v);
            st.u = std::move(cand.u);
            st.v = std::move(cand.v);
            objective = cand_objective;
        }
        if (driver.record(k, objective)) {
            if (driver.diverged()) throw_divergence(driver, std::move(st));
            break;
        }
    }
    return {std::move(st), driver.take_trace()};
}

}  // namespace

void NmfInstance::validate() const {
    if (rank < 1) throw Error("nmf: rank must be at least 1");
    if (rank >= std::min(x.rows(), x.cols())) {
        throw Error("nmf: rank must be below min(rows, cols)");
    }
    if (!x.allFinite()) throw Error("nmf: data matrix has non-finite entries");
    if ((x.array() < 0.0).any()) throw Error("nmf: data matrix has negative entries");
}

NmfAlgo parse_nmf_algo(const std::string& name) {
    if (name == "IBP") return NmfAlgo::kIbp;
    if (name == "IBPG") return NmfAlgo::kIbpg;
    if (name == "IBPG-A") return NmfAlgo::kIbpgA;
    if (name == "APGC") return NmfAlgo::kApgc;
    if (name == "A-HALS") return NmfAlgo::kAHals;
    if (name == "E-A-HALS") return NmfAlgo::kEAHals;
    throw Error("unknown nmf algorithm: " + name);
}

std::string nmf_algo_name(NmfAlgo algo) {
    switch (algo) {
        case NmfAlgo::kIbp: return "IBP";
        case NmfAlgo::kIbpg: return "IBPG";
        case NmfAlgo::kIbpgA: return "IBPG-A";
        case NmfAlgo::kApgc: return "APGC";
        case NmfAlgo::kAHals: return "A-HALS";
        case NmfAlgo::kEAHals: default: return "E-A-HALS";
    }
}

double nmf_objective(const Matrix& x, const Matrix& u, const Matrix& v) {
    if (u.rows() != x.rows() || v.cols() != x.cols() || u.cols() != v.rows()) {
        throw DimensionError("nmf_objective: factor shapes do not match the data");
    }
    return 0.5 * (x - u * v).squaredNorm();
}

Matrix nmf_gradients(const Matrix& x, const Matrix& u, const Matrix& v, NmfBlock block) {
    if (u.rows() != x.rows() || v.cols() != x.cols() || u.cols() != v.rows()) {
        throw DimensionError("nmf_gradients: factor shapes do not match the data");
    }
    if (block == NmfBlock::kU) {
        return u * (v * v.transpose()) - x * v.transpose();
    }
    return (u.transpose() * u) * v - u.transpose() * x;
}

double nesterov_t_step(double t_prev) {
    if (!(t_prev >= 1.0)) throw Error("nesterov_t_step: needs t >= 1");
    return 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_prev * t_prev));
}

UpdateParams ibpg_nmf_schedule(double t_k, double lip_cur, double lip_prev, double gamma_tilde,
                               double alpha_breve) {
    if (!(lip_cur > 0.0) || !(lip_prev > 0.0)) {
        throw Error("ibpg_nmf_schedule: Lipschitz constants must be positive");
    }
    UpdateParams p;
    p.grad_inertia = std::min((t_k - 1.0) / t_k, gamma_tilde * std::sqrt(lip_prev / lip_cur));
    p.inertia = alpha_breve * p.grad_inertia;
    p.step = 1.0 / lip_cur;
    return p;
}

Vector ibp_column_update(const Matrix& x, const Matrix& u, const Matrix& v, int col, double step,
                         const Vector& anchor) {
    if (!(step > 0.0)) throw Error("ibp_column_update: step must be positive");
    if (col < 0 || col >= u.cols()) throw DimensionError("ibp_column_update: column out of range");
    if (anchor.size() != u.rows()) throw DimensionError("ibp_column_update: anchor size mismatch");
    const Vector vrow = v.row(col).transpose();
    const double c = vrow.squaredNorm();
    const Vector b = x * vrow - u * (v * vrow) + u.col(col) * c;
    const double inv_step = 1.0 / step;
    return ((b + inv_step * anchor) / (c + inv_step)).cwiseMax(0.0);
}

bool hals_column_update(const Matrix& x, const Matrix& u, const Matrix& v, int col, Vector& out) {
    if (col < 0 || col >= u.cols()) throw DimensionError("hals_column_update: column out of range");
    const Vector vrow = v.row(col).transpose();
    const double c = vrow.squaredNorm();
    if (c <= 0.0) return false;
    const Vector b = x * vrow - u * (v * vrow) + u.col(col) * c;
    out = (b / c).cwiseMax(0.0);
    return true;
}

NmfRunResult run_nmf(const NmfInstance& instance, NmfAlgo algo, const NmfFactors& init,
                     const NmfOptions& options, std::uint64_t seed) {
    instance.validate();
    if (init.u.rows() != instance.rows() || init.u.cols() != instance.rank ||
        init.v.rows() != instance.rank || init.v.cols() != instance.cols()) {
        throw DimensionError("run_nmf: init factor shapes do not match the instance");
    }
    if (!options.budget.valid()) throw Error("run_nmf: budget needs an iteration or time limit");

    switch (algo) {
        case NmfAlgo::kIbp:
            return run_ibp(instance, init, options, seed);
        case NmfAlgo::kIbpg:
            return run_ibpg_family(instance, init, options, seed, options.gamma_tilde,
                                   options.alpha_breve, /*accelerated=*/false);
        case NmfAlgo::kIbpgA:
            return run_ibpg_family(instance, init, options, seed, options.gamma_tilde,
                                   options.alpha_breve, /*accelerated=*/true);
        case NmfAlgo::kApgc:
            // the coordinate baseline is the plain proximal-gradient loop with
            // both extrapolation coefficients forced to 0.9999
            return run_ibpg_family(instance, init, options, seed, 0.9999, 0.9999,
                                   /*accelerated=*/false);
        case NmfAlgo::kAHals:
            return run_ahals(instance, init, options);
        case NmfAlgo::kEAHals:
        default:
            return run_eahals(instance, init, options);
    }
}

}  // namespace ibprox
