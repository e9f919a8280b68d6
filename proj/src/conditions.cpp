#include "ibprox/conditions.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "ibprox/errors.hpp"
#include "ibprox/matops.hpp"

namespace ibprox {

namespace {

void require_nu_delta(double nu, double delta) {
    if (!(nu > 0.0 && nu < 1.0)) throw Error("parameter check: nu must lie in (0, 1)");
    if (!(delta > 1.0)) throw Error("parameter check: delta must exceed 1");
}

double square(double v) { return v * v; }

}  // namespace

void ConditionReport::write_csv(std::ostream& out) const {
    out << "variant,i,k,m,lhs,rhs,margin,feasible\n";
    for (const auto& e : entries) {
        out << variant << ',' << e.block << ',' << e.k << ',' << e.update << ','
            << format_g17(e.lhs) << ',' << format_g17(e.rhs) << ',' << format_g17(e.margin) << ','
            << (e.feasible ? 1 : 0) << '\n';
    }
}

ConditionReport check_ibp_condition(const std::vector<IbpParams>& blocks, double nu, double delta,
                                    IbpVariant variant) {
    require_nu_delta(nu, delta);
    ConditionReport report;
    report.variant = variant == IbpVariant::kBase ? "ibp" : "ibp-block-convex";
    report.feasible = true;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const IbpParams& p = blocks[b];
        const std::size_t d = p.inertia.size();
        if (d == 0 || p.step.size() != d) {
            throw Error("check_ibp_condition: block " + std::to_string(b + 1) +
                        " needs matching non-empty inertia and step sequences");
        }
        auto carry = [&](std::size_t m) {
            if (!(p.step[m] > 0.0)) throw Error("check_ibp_condition: steps must be positive");
            return square(p.l_h * p.inertia[m]) / (2.0 * nu * p.sigma * p.step[m]);
        };
        for (std::size_t m = 0; m < d; ++m) {
            ConditionEntry e;
            e.block = static_cast<int>(b + 1);
            e.update = static_cast<int>(m + 1);
            const double decrease = (1.0 - nu) * p.sigma / p.step[m];
            e.lhs = variant == IbpVariant::kBase ? decrease / 2.0 : 2.0 * decrease;
            e.rhs = delta * carry((m + 1) % d);
            e.margin = e.lhs - e.rhs;
            e.feasible = e.margin >= 0.0;
            report.feasible = report.feasible && e.feasible;
            report.entries.push_back(e);
        }
    }
    return report;
}

ConditionReport check_ibpg_condition(const std::vector<IbpgParams>& blocks, double nu, double delta,
                                     double kappa, IbpgVariant variant) {
    require_nu_delta(nu, delta);
    if (variant == IbpgVariant::kBase && !(kappa > 1.0)) {
        throw Error("check_ibpg_condition: base variant needs kappa > 1");
    }
    ConditionReport report;
    report.variant = variant == IbpgVariant::kBase
                         ? "ibpg"
                         : (variant == IbpgVariant::kConvexReg ? "ibpg-convex-r" : "ibpg-block-convex");
    report.feasible = true;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const IbpgParams& p = blocks[b];
        const std::size_t d = p.inertia.size();
        if (d == 0 || p.grad_inertia.size() != d || p.lipschitz.size() != d) {
            throw Error("check_ibpg_condition: block " + std::to_string(b + 1) +
                        " needs matching non-empty parameter sequences");
        }
        if (variant == IbpgVariant::kBlockConvex && (p.sigma != 1.0 || p.l_h != 1.0)) {
            throw UnsupportedError(
                "check_ibpg_condition: block-convex variant assumes the Euclidean generator");
        }
        auto carry = [&](std::size_t m) {
            if (!(p.lipschitz[m] > 0.0))
                throw Error("check_ibpg_condition: Lipschitz constants must be positive");
            switch (variant) {
                case IbpgVariant::kBase:
                    return 0.5 * square(p.grad_inertia[m] + kappa * p.l_h * p.inertia[m] / p.sigma) *
                           p.lipschitz[m] / (nu * (kappa - 1.0));
                case IbpgVariant::kConvexReg:
                    return 0.5 * square(p.grad_inertia[m] + p.l_h * p.inertia[m] / p.sigma) *
                           p.lipschitz[m] / nu;
                case IbpgVariant::kBlockConvex:
                default:
                    return (square(p.grad_inertia[m]) +
                            square(p.grad_inertia[m] - p.inertia[m]) / nu) *
                           p.lipschitz[m] / 2.0;
            }
        };
        for (std::size_t m = 0; m < d; ++m) {
            ConditionEntry e;
            e.block = static_cast<int>(b + 1);
            e.update = static_cast<int>(m + 1);
            const double l = p.lipschitz[m];
            e.lhs = variant == IbpgVariant::kBase ? (1.0 - nu) * (kappa - 1.0) * l / 2.0
                                                  : (1.0 - nu) * l / 2.0;
            e.rhs = delta * carry((m + 1) % d);
            e.margin = e.lhs - e.rhs;
            e.feasible = e.margin >= 0.0;
            report.feasible = report.feasible && e.feasible;
            report.entries.push_back(e);
        }
    }
    return report;
}

double max_feasible_ibp_inertia(double nu, double delta, IbpVariant variant, double sigma,
                                double l_h) {
    require_nu_delta(nu, delta);
    const double base = sigma / l_h * std::sqrt(nu * (1.0 - nu) / delta);
    return variant == IbpVariant::kBase ? base : 2.0 * base;
}

double max_feasible_ibpg_delta(double inertia, double grad_inertia, double nu, double kappa,
                               IbpgVariant variant, double sigma, double l_h) {
    if (!(nu > 0.0 && nu < 1.0)) throw Error("parameter check: nu must lie in (0, 1)");
    double denom = 0.0;
    switch (variant) {
        case IbpgVariant::kBase:
            if (!(kappa > 1.0)) throw Error("max_feasible_ibpg_delta: base variant needs kappa > 1");
            denom = square(grad_inertia + kappa * l_h * inertia / sigma) / (nu * (1.0 - nu)) /
                    square(kappa - 1.0);
            break;
        case IbpgVariant::kConvexReg:
            denom = square(grad_inertia + l_h * inertia / sigma) / (nu * (1.0 - nu));
            break;
        case IbpgVariant::kBlockConvex:
            if (sigma != 1.0 || l_h != 1.0) {
                throw UnsupportedError(
                    "max_feasible_ibpg_delta: block-convex variant assumes the Euclidean generator");
            }
            denom = (square(grad_inertia) + square(grad_inertia - inertia) / nu) / (1.0 - nu);
            break;
    }
    if (denom <= 0.0) return std::numeric_limits<double>::infinity();
    return 1.0 / denom;
}

}  // namespace ibprox
