#include "ibprox/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "ibprox/bench.hpp"
#include "ibprox/conditions.hpp"
#include "ibprox/errors.hpp"

namespace ibprox {

namespace {

const std::map<std::string, OrderPolicy> kOrderNames = {
    {"cyclic", OrderPolicy::kCyclic},
    {"random", OrderPolicy::kRandomPermutation},
};

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

/// Expands a flat "key = value" config file into flags appended to the
/// argument list. Keys mirror the long option names without the leading
/// dashes; flags given explicitly on the command line win.
std::vector<std::string> expand_config_file(const std::vector<std::string>& args) {
    std::string path;
    std::vector<std::string> out;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[i + 1];
            ++i;
            continue;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            continue;
        }
        out.push_back(args[i]);
    }
    if (path.empty()) return out;

    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw Error("config file " + path + ": line " + std::to_string(lineno) +
                        " is not \"key = value\"");
        }
        const std::string key = trim(stripped.substr(0, eq));
        std::string value = trim(stripped.substr(eq + 1));
        if (key.empty()) {
            throw Error("config file " + path + ": empty key on line " + std::to_string(lineno));
        }
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
            value = value.substr(1, value.size() - 2);
        }
        const std::string flag = "--" + key;
        if (std::find(out.begin(), out.end(), flag) != out.end()) continue;
        out.push_back(flag);
        out.push_back(value);
    }
    return out;
}

struct GenArgs {
    std::string kind = "low-rank";
    long long m = 0, n = 0;
    long long dim_i = 0, dim_j = 0, dim_k = 0;
    int rank = 0;
    std::uint64_t seed = 0;
    std::string out;
};

struct RunArgs {
    RunConfig config;
    std::string algo;
    std::uint64_t seed = 0;
    double stop_relerror = 0.0;
};

struct CheckArgs {
    std::string method = "ibpg";
    std::string variant = "block-convex";
    double nu = 0.0099;
    std::optional<double> delta;
    double kappa = 2.0;
    double gamma_tilde = 0.99;
    double alpha_breve = 1.01;
    std::optional<double> alpha;
    double inv_beta = 0.001;
    double lipschitz = 1.0;
    std::string out;
};

void add_dims(CLI::App* cmd, RunConfig& cfg) {
    cmd->add_option("--m", cfg.m, "matrix rows");
    cmd->add_option("--n", cfg.n, "matrix columns");
    cmd->add_option("--I", cfg.dim_i, "tensor first dimension");
    cmd->add_option("--J", cfg.dim_j, "tensor second dimension");
    cmd->add_option("--K", cfg.dim_k, "tensor third dimension");
    cmd->add_option("--rank", cfg.rank, "factorization rank");
}

void add_overrides(CLI::App* cmd, ScheduleOverrides& o) {
    cmd->add_option("--gamma-tilde", [&o](const CLI::results_t& r) {
        o.gamma_tilde = std::stod(r.at(0));
        return true;
    }, "cap on the gradient-point extrapolation coefficient");
    cmd->add_option("--alpha-breve", [&o](const CLI::results_t& r) {
        o.alpha_breve = std::stod(r.at(0));
        return true;
    }, "anchor extrapolation as a multiple of the gradient one");
    cmd->add_option("--repeat-cap", [&o](const CLI::results_t& r) {
        o.repeat_cap = std::stoi(r.at(0));
        return true;
    }, "hard cap on inner block repeats");
    cmd->add_option("--ibp-inv-beta", [&o](const CLI::results_t& r) {
        o.ibp_inv_step = std::stod(r.at(0));
        return true;
    }, "1/beta of the proximal column updates");
}

/// A tensor file's header line has three integers, a matrix's two.
bool sniff_tensor_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    std::getline(in, line);
    std::istringstream ss(line);
    int tokens = 0;
    std::string tok;
    while (ss >> tok) ++tokens;
    return tokens == 3;
}

void finish_problem_kind(RunConfig& cfg, const std::string& kind) {
    if (cfg.dim_i > 0 || cfg.dim_j > 0 || cfg.dim_k > 0) {
        cfg.problem = RunConfig::Problem::kNcpd;
    } else if (!cfg.data_file.empty() && sniff_tensor_file(cfg.data_file)) {
        cfg.problem = RunConfig::Problem::kNcpd;
    }
    if (kind == "low-rank") {
        cfg.kind = SyntheticKind::kLowRank;
    } else if (kind == "full-rank") {
        cfg.kind = SyntheticKind::kFullRank;
    } else {
        throw Error("unknown --kind: " + kind + " (expected low-rank or full-rank)");
    }
}

int do_gen(const GenArgs& args) {
    if (args.out.empty()) throw Error("gen: --out is required");
    if (args.dim_i > 0 || args.dim_j > 0 || args.dim_k > 0) {
        if (args.dim_i < 1 || args.dim_j < 1 || args.dim_k < 1) {
            throw Error("gen: tensors need all of --I, --J, --K");
        }
        if (args.rank < 1) throw Error("gen: tensors need --rank");
        const NcpdInstance inst =
            gen_synthetic_ncpd(args.dim_i, args.dim_j, args.dim_k, args.rank, args.seed);
        save_tensor(args.out, inst.t);
    } else {
        if (args.m < 1 || args.n < 1) throw Error("gen: matrices need --m and --n");
        SyntheticKind kind;
        if (args.kind == "low-rank") {
            kind = SyntheticKind::kLowRank;
            if (args.rank < 1) throw Error("gen: low-rank matrices need --rank");
        } else if (args.kind == "full-rank") {
            kind = SyntheticKind::kFullRank;
        } else {
            throw Error("unknown --kind: " + args.kind);
        }
        const NmfInstance inst = gen_synthetic_nmf(kind, args.m, args.n,
                                                   std::max(args.rank, 1), args.seed);
        save_matrix(args.out, inst.x);
    }
    std::cout << "wrote " << args.out << "\n";
    return 0;
}

int do_run(RunArgs& args) {
    RunConfig& cfg = args.config;
    cfg.algos = {args.algo};
    cfg.seeds = {args.seed};
    cfg.validate();

    const BenchResult result = run_benchmark(cfg);
    if (!cfg.out_dir.empty()) {
        std::cout << "wrote traces.csv, ranking.csv, curves.csv under " << cfg.out_dir << "\n";
    }
    const auto& last = result.traces.back();
    std::cout << "final: k=" << last.point.k << " objective=" << format_g17(last.point.objective)
              << " relerror=" << format_g17(last.point.relerror) << "\n";
    return 0;
}

int do_bench(RunConfig& cfg) {
    cfg.validate();
    const BenchResult result = run_benchmark(cfg);
    result.ranking.write_csv(std::cout);
    if (!cfg.out_dir.empty()) {
        std::cout << "wrote traces.csv, ranking.csv, curves.csv under " << cfg.out_dir << "\n";
    }
    return 0;
}

int do_check_params(const CheckArgs& args) {
    ConditionReport report;
    if (args.method == "ibpg") {
        IbpgVariant variant;
        if (args.variant == "base") {
            variant = IbpgVariant::kBase;
        } else if (args.variant == "convex-r") {
            variant = IbpgVariant::kConvexReg;
        } else if (args.variant == "block-convex") {
            variant = IbpgVariant::kBlockConvex;
        } else {
            throw Error("check-params: unknown variant " + args.variant);
        }
        const double gamma = args.gamma_tilde;
        const double alpha = args.alpha_breve * args.gamma_tilde;
        const double delta_max =
            max_feasible_ibpg_delta(alpha, gamma, args.nu, args.kappa, variant);
        const double delta =
            args.delta.value_or(delta_max > 1.0 ? 0.5 * (1.0 + delta_max) : 1.0 + 1e-9);

        IbpgParams params;
        params.inertia = {alpha};
        params.grad_inertia = {gamma};
        params.lipschitz = {args.lipschitz};
        report = check_ibpg_condition({params}, args.nu, delta, args.kappa, variant);

        std::cout << "method: ibpg (" << report.variant << ")\n"
                  << "gamma = " << format_g17(gamma) << ", alpha = " << format_g17(alpha)
                  << ", nu = " << format_g17(args.nu) << "\n"
                  << "feasible for 1 < delta < " << format_g17(delta_max) << "\n"
                  << "at delta = " << format_g17(delta)
                  << ": margin = " << format_g17(report.entries.front().margin) << " -> "
                  << (report.feasible ? "feasible" : "infeasible") << "\n";
    } else if (args.method == "ibp") {
        IbpVariant variant;
        if (args.variant == "base") {
            variant = IbpVariant::kBase;
        } else if (args.variant == "block-convex") {
            variant = IbpVariant::kBlockConvex;
        } else {
            throw Error("check-params: unknown variant " + args.variant + " for ibp");
        }
        const double delta = args.delta.value_or(1.01);
        const double alpha_max = max_feasible_ibp_inertia(args.nu, delta, variant);
        std::cout << "method: ibp (" << (variant == IbpVariant::kBase ? "base" : "block-convex")
                  << ")\n"
                  << "nu = " << format_g17(args.nu) << ", delta = " << format_g17(delta) << "\n"
                  << "max feasible alpha = " << format_g17(alpha_max) << "\n";
        const double alpha = args.alpha.value_or(alpha_max);
        IbpParams params;
        params.inertia = {alpha};
        params.step = {1.0 / args.inv_beta};
        report = check_ibp_condition({params}, args.nu, delta, variant);
        std::cout << "at alpha = " << format_g17(alpha)
                  << ", 1/beta = " << format_g17(args.inv_beta)
                  << ": margin = " << format_g17(report.entries.front().margin) << " -> "
                  << (report.feasible ? "feasible" : "infeasible") << "\n";
    } else {
        throw Error("check-params: unknown method " + args.method + " (expected ibp or ibpg)");
    }

    if (!args.out.empty()) {
        std::ofstream out(args.out);
        if (!out) throw IoError("cannot write " + args.out);
        report.write_csv(out);
    }
    return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"inertial block proximal methods for NMF and NCPD"};
    app.require_subcommand(1);

    // flat "key = value" config files are expanded into flags up front; the
    // registered option only documents the flag
    std::string config_path;
    GenArgs gen;
    CLI::App* gen_cmd = app.add_subcommand("gen", "generate a synthetic instance file");
    gen_cmd->add_option("--config", config_path, "flat key = value config file");
    gen_cmd->add_option("--kind", gen.kind, "low-rank or full-rank");
    gen_cmd->add_option("--m", gen.m, "matrix rows");
    gen_cmd->add_option("--n", gen.n, "matrix columns");
    gen_cmd->add_option("--I", gen.dim_i, "tensor first dimension");
    gen_cmd->add_option("--J", gen.dim_j, "tensor second dimension");
    gen_cmd->add_option("--K", gen.dim_k, "tensor third dimension");
    gen_cmd->add_option("--rank", gen.rank, "construction rank");
    gen_cmd->add_option("--seed", gen.seed, "generator seed");
    gen_cmd->add_option("--out", gen.out, "output file");

    RunArgs run;
    std::string run_kind = "low-rank";
    std::string run_order = "cyclic";
    CLI::App* run_cmd = app.add_subcommand("run", "run one algorithm on one instance");
    run_cmd->add_option("--config", config_path, "flat key = value config file");
    run_cmd->add_option("--kind", run_kind, "low-rank or full-rank synthetic data");
    add_dims(run_cmd, run.config);
    run_cmd->add_option("--algo", run.algo, "algorithm name")->required();
    run_cmd->add_option("--seed", run.seed, "initialization seed");
    run_cmd->add_option("--data", run.config.data_file, "instance file (overrides the generator)");
    run_cmd->add_option("--data-seed", run.config.data_seed, "synthetic data seed");
    run_cmd->add_option("--time-budget", run.config.time_budget, "wall-clock budget in seconds");
    run_cmd->add_option("--max-iters", run.config.max_outer,
                        "outer-iteration budget (deterministic mode)");
    run_cmd->add_option("--order", run_order, "block order: cyclic or random")
        ->check(CLI::IsMember({"cyclic", "random"}));
    run_cmd->add_option("--out", run.config.out_dir, "output directory");
    add_overrides(run_cmd, run.config.overrides);

    RunConfig bench;
    std::string bench_kind = "low-rank";
    std::string bench_order = "cyclic";
    std::string bench_emin;
    CLI::App* bench_cmd = app.add_subcommand("bench", "multi-algorithm multi-seed experiment");
    bench_cmd->add_option("--config", config_path, "flat key = value config file");
    bench_cmd->add_option("--kind", bench_kind, "low-rank or full-rank synthetic data");
    add_dims(bench_cmd, bench);
    bench_cmd->add_option("--algo", bench.algos, "algorithms (repeat or comma-separate)")
        ->delimiter(',');
    bench_cmd->add_option("--seeds", bench.seeds, "initialization seeds")->delimiter(',');
    bench_cmd->add_option("--data", bench.data_file, "instance file (overrides the generator)");
    bench_cmd->add_option("--data-seed", bench.data_seed, "synthetic data seed");
    bench_cmd->add_option("--time-budget", bench.time_budget, "wall-clock budget per run");
    bench_cmd->add_option("--max-iters", bench.max_outer,
                          "outer-iteration budget (deterministic mode)");
    bench_cmd->add_option("--order", bench_order, "block order: cyclic or random")
        ->check(CLI::IsMember({"cyclic", "random"}));
    bench_cmd->add_option("--emin", bench_emin, "E(k) floor policy: zero or best-observed")
        ->check(CLI::IsMember({"zero", "best-observed"}));
    bench_cmd->add_option("--out", bench.out_dir, "output directory");
    add_overrides(bench_cmd, bench.overrides);

    CheckArgs check;
    CLI::App* check_cmd =
        app.add_subcommand("check-params", "feasibility report for solver parameters");
    check_cmd->add_option("--config", config_path, "flat key = value config file");
    check_cmd->add_option("--method", check.method, "ibp or ibpg");
    check_cmd->add_option("--variant", check.variant, "base, convex-r or block-convex");
    check_cmd->add_option("--nu", check.nu, "nu in (0,1)");
    check_cmd->add_option("--delta", [&check](const CLI::results_t& r) {
        check.delta = std::stod(r.at(0));
        return true;
    }, "delta > 1 (default: derived)");
    check_cmd->add_option("--kappa", check.kappa, "kappa > 1 (base ibpg variant)");
    check_cmd->add_option("--gamma-tilde", check.gamma_tilde, "gradient-point coefficient cap");
    check_cmd->add_option("--alpha-breve", check.alpha_breve, "anchor coefficient multiple");
    check_cmd->add_option("--alpha", [&check](const CLI::results_t& r) {
        check.alpha = std::stod(r.at(0));
        return true;
    }, "constant inertia to check (ibp)");
    check_cmd->add_option("--inv-beta", check.inv_beta, "1/beta of the proximal updates (ibp)");
    check_cmd->add_option("--lipschitz", check.lipschitz, "constant Lipschitz value (ibpg)");
    check_cmd->add_option("--out", check.out, "write the report as CSV");

    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        args = expand_config_file(args);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::reverse(args.begin(), args.end());
    try {
        app.parse(std::move(args));
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (gen_cmd->parsed()) return do_gen(gen);
        if (run_cmd->parsed()) {
            finish_problem_kind(run.config, run_kind);
            run.config.order = kOrderNames.at(run_order);
            return do_run(run);
        }
        if (bench_cmd->parsed()) {
            finish_problem_kind(bench, bench_kind);
            bench.order = kOrderNames.at(bench_order);
            if (bench_emin == "zero") bench.emin = EminPolicy::kZero;
            if (bench_emin == "best-observed") bench.emin = EminPolicy::kBestObserved;
            return do_bench(bench);
        }
        if (check_cmd->parsed()) return do_check_params(check);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        // config-level problems are usage errors
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

}  // namespace ibprox
