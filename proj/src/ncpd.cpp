#include "ibprox/ncpd.hpp"

#include <cmath>
#include <utility>
#include <vector>

#include "ibprox/nmf.hpp"
#include "ibprox/solver.hpp"

namespace ibprox {

namespace {

constexpr double kLipTol = 1e-12;
constexpr int kLipMaxIter = 10000;

void check_factor_shapes(const NcpdFactors& factors) {
    const Index r = factors[0].cols();
    if (factors[1].cols() != r || factors[2].cols() != r) {
        throw DimensionError("ncpd: factors must share a column count");
    }
}

/// Entrywise product of the kept factors' Grams, i.e. the Gram of the
/// skipped Khatri-Rao chain.
Matrix chain_gram(const NcpdFactors& factors, int skip) {
    check_factor_shapes(factors);
    const Index r = factors[0].cols();
    Matrix g = Matrix::Ones(r, r);
    for (int mode = 1; mode <= 3; ++mode) {
        if (mode == skip) continue;
        const Matrix& f = factors[static_cast<std::size_t>(mode - 1)];
        g = g.cwiseProduct(f.transpose() * f);
    }
    return g;
}

int repeat_cap(const NcpdOptions& opt, const Tensor3& t, int mode, int rank) {
    const double other =
        static_cast<double>(t.size()) / static_cast<double>(t.dim(mode - 1));
    const int flop_cap =
        1 + static_cast<int>(std::floor(opt.repeat_rho * other / static_cast<double>(rank)));
    return std::max(1, std::min(opt.repeat_cap, flop_cap));
}

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

/// 0.5 ||T - cp||^2 from the cached MTTKRP and chain Gram of `mode`:
/// 0.5 (||T||^2 - 2 <M, X> + <X^T X, G>).
double cached_objective(double normt2, const Matrix& x, const Matrix& mttkrp, const Matrix& gram) {
    return 0.5 * (normt2 - 2.0 * x.cwiseProduct(mttkrp).sum() +
                  (x.transpose() * x).cwiseProduct(gram).sum());
}

struct FactorVisit {
    Matrix mttkrp;  ///< T_[i] * B
    Matrix gram;    ///< B^T B
    double lipschitz = 0.0;
};

FactorVisit make_visit(const std::array<Matrix, 3>& unfoldings, const NcpdFactors& factors,
                       int mode) {
    FactorVisit v;
    const Matrix chain = build_khatri_chain(factors, mode);
    v.mttkrp.noalias() = unfoldings[static_cast<std::size_t>(mode - 1)] * chain;
    v.gram = chain_gram(factors, mode);
    v.lipschitz = operator_norm_psd(v.gram, kLipTol, kLipMaxIter).value;
    return v;
}

}  // namespace

void NcpdInstance::validate() const {
    if (rank < 1) throw Error("ncpd: rank must be at least 1");
    if (!t.mode1().allFinite()) throw Error("ncpd: tensor has non-finite entries");
    if ((t.mode1().array() < 0.0).any()) throw Error("ncpd: tensor has negative entries");
}

NcpdAlgo parse_ncpd_algo(const std::string& name) {
    if (name == "IBPG-A") return NcpdAlgo::kIbpgA;
    if (name == "APGC") return NcpdAlgo::kApgc;
    if (name == "A-HALS") return NcpdAlgo::kAHals;
    throw Error("unknown ncpd algorithm: " + name);
}

std::string ncpd_algo_name(NcpdAlgo algo) {
    switch (algo) {
        case NcpdAlgo::kIbpgA: return "IBPG-A";
        case NcpdAlgo::kApgc: return "APGC";
        case NcpdAlgo::kAHals: default: return "A-HALS";
    }
}

Matrix build_khatri_chain(const NcpdFactors& factors, int skip) {
    if (skip < 1 || skip > 3) throw DimensionError("build_khatri_chain: skip must be 1, 2 or 3");
    check_factor_shapes(factors);
    Matrix chain;
    bool started = false;
    for (int mode = 3; mode >= 1; --mode) {
        if (mode == skip) continue;
        const Matrix& f = factors[static_cast<std::size_t>(mode - 1)];
        if (!started) {
            chain = f;
            started = true;
        } else {
            chain = khatri_rao(chain, f);
        }
    }
    return chain;
}

Tensor3 cp_reconstruct(const NcpdFactors& factors) {
    check_factor_shapes(factors);
    const Matrix mode1 = factors[0] * build_khatri_chain(factors, 1).transpose();
    return Tensor3::from_mode1(mode1, factors[0].rows(), factors[1].rows(), factors[2].rows());
}

Matrix ncpd_gradient(const Tensor3& t, const NcpdFactors& factors, int mode) {
    if (mode < 1 || mode > 3) throw DimensionError("ncpd_gradient: mode must be 1, 2 or 3");
    check_factor_shapes(factors);
    for (int m = 0; m < 3; ++m) {
        if (factors[static_cast<std::size_t>(m)].rows() != t.dim(m)) {
            throw DimensionError("ncpd_gradient: factor rows do not match tensor dims");
        }
    }
    const Matrix chain = build_khatri_chain(factors, mode);
    const Matrix& x = factors[static_cast<std::size_t>(mode - 1)];
    return x * (chain.transpose() * chain) - mode_unfold(t, mode) * chain;
}

double ncpd_lipschitz(const NcpdFactors& factors, int mode) {
    if (mode < 1 || mode > 3) throw DimensionError("ncpd_lipschitz: mode must be 1, 2 or 3");
    return operator_norm_psd(chain_gram(factors, mode), kLipTol, kLipMaxIter).value;
}

NcpdRunResult run_ncpd(const NcpdInstance& instance, NcpdAlgo algo, const NcpdFactors& init,
                       const NcpdOptions& options, std::uint64_t seed) {
    instance.validate();
    check_factor_shapes(init);
    for (int m = 0; m < 3; ++m) {
        if (init[static_cast<std::size_t>(m)].rows() != instance.t.dim(m) ||
            init[static_cast<std::size_t>(m)].cols() != instance.rank) {
            throw DimensionError("run_ncpd: init factor shapes do not match the instance");
        }
    }
    if (!options.budget.valid()) throw Error("run_ncpd: budget needs an iteration or time limit");

    // the matched-constant coordinate baseline: both extrapolation
    // coefficients capped at 0.9999, single repeats
    double gamma_tilde = options.gamma_tilde;
    double alpha_breve = options.alpha_breve;
    bool accelerated = algo == NcpdAlgo::kIbpgA;
    if (algo == NcpdAlgo::kApgc) {
        gamma_tilde = 0.9999;
        alpha_breve = 0.9999;
    }

    const Tensor3& t = instance.t;
    const int r = instance.rank;
    const std::array<Matrix, 3> unfoldings = {mode_unfold(t, 1), mode_unfold(t, 2),
                                              mode_unfold(t, 3)};
    const double normt2 = t.mode1().squaredNorm();
    const double normt = std::sqrt(normt2);

    NcpdState st;
    st.x = init;
    st.x_prev = init;

    Rng rng(seed);
    RunClock clock(options.budget.deterministic());
    Trace trace;
    double objective = 0.5 * (cp_reconstruct(st.x).mode1() - t.mode1()).squaredNorm();
    auto relerror = [&](double obj) {
        return normt == 0.0 ? 0.0 : std::sqrt(std::max(0.0, 2.0 * obj)) / normt;
    };
    trace.push_back({0, clock.elapsed(0), objective, relerror(objective)});
    const double initial_scale = std::max(1.0, std::abs(objective));
    if (objective_diverged(objective, initial_scale)) {
        throw NcpdDivergenceError("ncpd: initial objective is not finite", objective,
                                  std::move(st), std::move(trace));
    }
    if (options.stop_relerror > 0.0 && trace.back().relerror <= options.stop_relerror) {
        return {std::move(st), std::move(trace)};
    }

    const std::array<int, 3> caps = {
        accelerated ? repeat_cap(options, t, 1, r) : 1,
        accelerated ? repeat_cap(options, t, 2, r) : 1,
        accelerated ? repeat_cap(options, t, 3, r) : 1,
    };

    bool lip_seeded = false;
    for (int k = 1;; ++k) {
        if (options.budget.max_outer >= 0 && k > options.budget.max_outer) break;
        if (options.budget.seconds > 0.0 && clock.wall_seconds() >= options.budget.seconds) break;

        double hat_w = 0.0;
        if (!options.advance_t_per_factor) {
            const double t_next = nesterov_t_step(st.t);
            hat_w = (st.t - 1.0) / t_next;
            st.t = t_next;
        }

        std::vector<int> order = select_blocks(options.order, 3, 3, rng);
        Matrix last_mttkrp, last_gram;
        int last_idx = 0;
        for (int idx : order) {
            const int mode = idx + 1;
            const std::size_t mi = static_cast<std::size_t>(idx);
            if (options.advance_t_per_factor) {
                const double t_next = nesterov_t_step(st.t);
                hat_w = (st.t - 1.0) / t_next;
                st.t = t_next;
            }

            FactorVisit visit = make_visit(unfoldings, st.x, mode);
            st.lip_cur[mi] = visit.lipschitz;
            if (!lip_seeded) st.lip_prev[mi] = visit.lipschitz;
            if (!(visit.lipschitz > 0.0)) {
                throw Error("ncpd: zero Lipschitz constant (factor collapsed)");
            }

            Matrix& x = st.x[mi];
            Matrix& xp = st.x_prev[mi];
            if (algo == NcpdAlgo::kAHals) {
                repeated_updates(
                    caps[mi], options.repeat_tol,
                    [&] {
                        for (int j = 0; j < visit.gram.rows(); ++j) {
                            const double c = visit.gram(j, j);
                            if (c <= 0.0) continue;
                            Vector b = visit.mttkrp.col(j) - x * visit.gram.col(j) + x.col(j) * c;
                            x.col(j) = (b / c).cwiseMax(0.0);
                        }
                    },
                    [&] { return cached_objective(normt2, x, visit.mttkrp, visit.gram); });
                xp = x;
            } else {
                const double w =
                    std::min(hat_w, gamma_tilde * std::sqrt(st.lip_prev[mi] / st.lip_cur[mi]));
                const double step = 1.0 / visit.lipschitz;
                repeated_updates(
                    caps[mi], options.repeat_tol,
                    [&] {
                        const Matrix grad_point = x + w * (x - xp);
                        const Matrix anchor = x + alpha_breve * w * (x - xp);
                        Matrix next =
                            (anchor - step * (grad_point * visit.gram - visit.mttkrp))
                                .cwiseMax(0.0);
                        xp = std::move(x);
                        x = std::move(next);
                    },
                    [&] { return cached_objective(normt2, x, visit.mttkrp, visit.gram); });
            }
            st.lip_prev[mi] = st.lip_cur[mi];
            last_mttkrp = std::move(visit.mttkrp);
            last_gram = std::move(visit.gram);
            last_idx = idx;
        }
        lip_seeded = true;

        objective = cached_objective(normt2, st.x[static_cast<std::size_t>(last_idx)],
                                     last_mttkrp, last_gram);
        const double rel = relerror(objective);
        trace.push_back({k, clock.elapsed(k), objective, rel});
        if (objective_diverged(objective, initial_scale)) {
            const double last =
                trace.size() >= 2 ? trace[trace.size() - 2].objective : objective;
            throw NcpdDivergenceError("ncpd: objective diverged at sweep " + std::to_string(k),
                                      last, std::move(st), std::move(trace));
        }
        if (options.stop_relerror > 0.0 && rel <= options.stop_relerror) break;
    }

    return {std::move(st), std::move(trace)};
}

}  // namespace ibprox
