#pragma once

#include <cstdint>
#include <string>

#include "ibprox/errors.hpp"
#include "ibprox/matops.hpp"
#include "ibprox/schedule.hpp"
#include "ibprox/trace.hpp"

namespace ibprox {

/// min 0.5 ||X - UV||_F^2 over U >= 0 (m x r), V >= 0 (r x n).
struct NmfInstance {
    Matrix x;
    int rank = 0;

    Index rows() const { return x.rows(); }
    Index cols() const { return x.cols(); }
    /// Checks nonnegativity and 1 <= rank < min(m, n).
    void validate() const;
};

struct NmfFactors {
    Matrix u;  ///< m x r
    Matrix v;  ///< r x n
};

enum class NmfAlgo { kIbp, kIbpg, kIbpgA, kApgc, kAHals, kEAHals };

NmfAlgo parse_nmf_algo(const std::string& name);
std::string nmf_algo_name(NmfAlgo algo);

struct NmfOptions {
    Budget budget;
    OrderPolicy order = OrderPolicy::kCyclic;

    // proximal-gradient schedule constants
    double gamma_tilde = 0.99;  ///< cap on the gradient-point inertia
    double alpha_breve = 1.01;  ///< anchor inertia as a multiple of the gradient one

    // proximal (column/row) variant constants
    double ibp_inv_step = 0.001;     ///< 1/beta of the closed-form update
    double ibp_inertia0 = 0.6;       ///< inertia at the first outer loop
    double ibp_inertia_growth = 1.01;
    double ibp_inertia_cap = 1.0;

    // inner-repeat rule shared by the accelerated variants: repeat a block's
    // update while the count stays below min(cap, 1 + floor(rho * other / r))
    // and the last repeat still improved the block objective by at least
    // `tol` times the first repeat's improvement
    double repeat_rho = 0.5;
    int repeat_cap = 10;
    double repeat_tol = 1e-2;

    // extrapolated-restart baseline constants
    double eah_start = 0.5;
    double eah_growth = 1.05;
    double eah_decay = 1.5;

    /// Stop once relerror falls to or below this (0 disables). The budget is
    /// still the hard limit.
    double stop_relerror = 0.0;
};

/// Complete solver state; previous factors and Gram caches are exposed so
/// diagnostics and tests can inspect them.
struct NmfState {
    Matrix u, v;
    Matrix u_prev, v_prev;  ///< values before each factor's latest update
    Matrix vvt, xvt;        ///< V V^T and X V^T, valid while V is unchanged
    bool u_cache_valid = false;
    Matrix utu, utx;        ///< U^T U and U^T X, valid while U is unchanged
    bool v_cache_valid = false;
    double lip_u = 0, lip_v = 0;            ///< current ||VV^T||, ||U^T U||
    double lip_u_prev = 0, lip_v_prev = 0;  ///< previous outer loop's values
};

struct NmfRunResult {
    NmfState state;
    Trace trace;
};

/// Raised by the runaway guard; carries the last state reached and the trace
/// up to the diverging iteration.
class NmfDivergenceError : public DivergenceError {
public:
    NmfDivergenceError(const std::string& what, double last_objective, NmfState state, Trace trace)
        : DivergenceError(what, last_objective), state(std::move(state)), trace(std::move(trace)) {}
    NmfState state;
    Trace trace;
};

/// 0.5 ||X - UV||_F^2.
double nmf_objective(const Matrix& x, const Matrix& u, const Matrix& v);

/// Gradient of the objective in one factor: U V V^T - X V^T for the left
/// factor, U^T U V - U^T X for the right one.
enum class NmfBlock { kU, kV };
Matrix nmf_gradients(const Matrix& x, const Matrix& u, const Matrix& v, NmfBlock block);

/// Momentum recurrence t -> (1 + sqrt(1 + 4 t^2)) / 2, t_0 = 1; strictly
/// increasing.
double nesterov_t_step(double t_prev);

/// Per-block schedule of the proximal-gradient runs: step 1/L, gradient
/// inertia min((t_k - 1)/t_k, gamma_tilde * sqrt(L_prev/L)), anchor inertia
/// alpha_breve times that.
UpdateParams ibpg_nmf_schedule(double t_k, double lip_cur, double lip_prev, double gamma_tilde,
                               double alpha_breve);

/// Closed-form inertial proximal update of column `col` of U with anchor
/// column `anchor` and stepsize `step`:
/// max(0, (X v^T - (UV) v^T + U_col (v v^T) + anchor/step) / (v v^T + 1/step))
/// where v is row `col` of V. Rows of V are updated by the same routine on
/// the transposed problem.
Vector ibp_column_update(const Matrix& x, const Matrix& u, const Matrix& v, int col, double step,
                         const Vector& anchor);

/// The 1/step -> 0 limit of ibp_column_update. Returns false and leaves
/// `out` untouched when row `col` of V vanishes (no update possible).
bool hals_column_update(const Matrix& x, const Matrix& u, const Matrix& v, int col, Vector& out);

NmfRunResult run_nmf(const NmfInstance& instance, NmfAlgo algo, const NmfFactors& init,
                     const NmfOptions& options, std::uint64_t seed);

}  // namespace ibprox
