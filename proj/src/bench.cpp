#include "ibprox/bench.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>

#include "ibprox/errors.hpp"

namespace ibprox {

namespace {

constexpr double kTieRelTol = 1e-12;

bool near_equal(double a, double b) {
    return std::abs(a - b) <= kTieRelTol * std::max(std::abs(a), std::abs(b));
}

std::uint64_t seed_of_run_id(const std::string& run_id) {
    const auto pos = run_id.rfind("#s");
    if (pos == std::string::npos) throw Error("run id lacks a seed suffix: " + run_id);
    return std::stoull(run_id.substr(pos + 2));
}

struct RunSummary {
    std::string run_id;
    std::string algo;
    std::uint64_t seed = 0;
    double final_relerror = 0.0;
};

/// Final record per run, in first-appearance order.
std::vector<RunSummary> summarize_runs(const std::vector<RunTraceRecord>& traces) {
    std::vector<RunSummary> runs;
    std::map<std::string, std::size_t> index;
    for (const auto& rec : traces) {
        auto it = index.find(rec.run_id);
        if (it == index.end()) {
            index.emplace(rec.run_id, runs.size());
            runs.push_back({rec.run_id, rec.algo, seed_of_run_id(rec.run_id), rec.point.relerror});
        } else {
            runs[it->second].final_relerror = rec.point.relerror;
        }
    }
    return runs;
}

double emin_of(const std::vector<RunSummary>& runs, EminPolicy policy) {
    if (policy == EminPolicy::kZero) return 0.0;
    double best = runs.front().final_relerror;
    for (const auto& r : runs) best = std::min(best, r.final_relerror);
    return best;
}

}  // namespace

NmfInstance gen_synthetic_nmf(SyntheticKind kind, Index m, Index n, int rank, std::uint64_t seed) {
    if (m < 1 || n < 1 || rank < 1) throw Error("gen_synthetic_nmf: dims and rank must be positive");
    if (kind == SyntheticKind::kLowRank && rank >= std::min(m, n)) {
        throw Error("gen_synthetic_nmf: low-rank data needs rank < min(m, n)");
    }
    Rng rng(seed);
    NmfInstance inst;
    inst.rank = rank;
    if (kind == SyntheticKind::kLowRank) {
        const Matrix u = random_uniform_matrix(m, rank, rng);
        const Matrix v = random_uniform_matrix(rank, n, rng);
        inst.x = u * v;
    } else {
        inst.x = random_uniform_matrix(m, n, rng);
    }
    return inst;
}

NcpdInstance gen_synthetic_ncpd(Index i, Index j, Index k, int rank, std::uint64_t seed) {
    if (i < 1 || j < 1 || k < 1 || rank < 1) {
        throw Error("gen_synthetic_ncpd: dims and rank must be positive");
    }
    Rng rng(seed);
    NcpdFactors f = {random_uniform_matrix(i, rank, rng), random_uniform_matrix(j, rank, rng),
                     random_uniform_matrix(k, rank, rng)};
    NcpdInstance inst;
    inst.t = cp_reconstruct(f);
    inst.rank = rank;
    return inst;
}

std::vector<ECurve> compute_e_curves(const std::vector<RunTraceRecord>& traces, EminPolicy policy) {
    if (traces.empty()) throw Error("compute_e_curves: no traces supplied");
    const auto runs = summarize_runs(traces);
    const double emin = emin_of(runs, policy);

    std::map<std::string, std::size_t> index;
    std::vector<ECurve> curves;
    for (const auto& run : runs) {
        index.emplace(run.run_id, curves.size());
        curves.push_back({run.run_id, run.algo, {}, {}});
    }
    for (const auto& rec : traces) {
        ECurve& c = curves[index.at(rec.run_id)];
        c.time.push_back(rec.point.elapsed_s);
        c.value.push_back(rec.point.relerror - emin);
    }
    return curves;
}

void RankingTable::write_csv(std::ostream& out) const {
    out << "algo,mean_final_E,std_final_E";
    const std::size_t width = rows.empty() ? 0 : rows.front().rank_counts.size();
    for (std::size_t i = 1; i <= width; ++i) out << ",rank" << i;
    out << '\n';
    for (const auto& row : rows) {
        out << row.algo << ',' << format_g17(row.mean_final_e) << ','
            << format_g17(row.std_final_e);
        for (int c : row.rank_counts) out << ',' << c;
        out << '\n';
    }
}

RankingTable build_ranking(const std::vector<RunTraceRecord>& traces, EminPolicy policy) {
    if (traces.empty()) throw Error("build_ranking: no traces supplied");
    const auto runs = summarize_runs(traces);
    const double emin = emin_of(runs, policy);

    // algo order = first appearance
    std::vector<std::string> algos;
    for (const auto& r : runs) {
        if (std::find(algos.begin(), algos.end(), r.algo) == algos.end()) algos.push_back(r.algo);
    }
    std::map<std::string, std::vector<double>> finals;  // per algo, per seed order
    std::map<std::uint64_t, std::vector<const RunSummary*>> by_seed;
    for (const auto& r : runs) {
        finals[r.algo].push_back(r.final_relerror - emin);
        by_seed[r.seed].push_back(&r);
    }

    RankingTable table;
    for (const auto& algo : algos) {
        RankingRow row;
        row.algo = algo;
        row.rank_counts.assign(algos.size(), 0);
        const auto& v = finals[algo];
        double mean = 0.0;
        for (double e : v) mean += e;
        mean /= static_cast<double>(v.size());
        double var = 0.0;
        for (double e : v) var += (e - mean) * (e - mean);
        row.mean_final_e = mean;
        row.std_final_e = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
        table.rows.push_back(std::move(row));
    }

    auto row_of = [&](const std::string& algo) -> RankingRow& {
        for (auto& row : table.rows) {
            if (row.algo == algo) return row;
        }
        throw Error("build_ranking: unknown algo " + algo);
    };

    for (auto& [seed, group] : by_seed) {
        (void)seed;
        std::vector<const RunSummary*> sorted = group;
        std::stable_sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
            return a->final_relerror < b->final_relerror;
        });
        std::size_t rank = 0;
        for (std::size_t i = 0; i < sorted.size(); ++i) {
            if (i > 0 && !near_equal(sorted[i]->final_relerror, sorted[i - 1]->final_relerror)) {
                rank = i;
            }
            auto& counts = row_of(sorted[i]->algo).rank_counts;
            if (rank >= counts.size()) counts.resize(rank + 1, 0);
            ++counts[rank];
        }
    }
    return table;
}

std::vector<CurvePoint> average_e_on_grid(const std::vector<ECurve>& curves, int grid_points) {
    std::vector<CurvePoint> out;
    double t_lo = 0.0, t_hi = 0.0;
    bool any = false;
    for (const auto& c : curves) {
        for (double t : c.time) {
            if (t <= 0.0) continue;
            if (!any || t < t_lo) t_lo = any ? std::min(t_lo, t) : t;
            t_hi = std::max(t_hi, t);
            any = true;
        }
    }
    if (!any || grid_points < 1) return out;

    std::vector<std::string> algos;
    for (const auto& c : curves) {
        if (std::find(algos.begin(), algos.end(), c.algo) == algos.end()) algos.push_back(c.algo);
    }

    const int points = t_hi > t_lo ? grid_points : 1;
    for (int j = 0; j < points; ++j) {
        const double frac = points == 1 ? 0.0 : static_cast<double>(j) / (points - 1);
        const double t = t_lo * std::pow(t_hi / t_lo, frac);
        for (const auto& algo : algos) {
            CurvePoint p;
            p.algo = algo;
            p.time = t;
            for (const auto& c : curves) {
                if (c.algo != algo || c.time.empty()) continue;
                if (t > c.time.back() * (1.0 + 1e-15)) continue;  // no extrapolation
                double value;
                if (t <= c.time.front()) {
                    value = c.value.front();
                } else {
                    std::size_t hi = 1;
                    while (hi < c.time.size() && c.time[hi] < t) ++hi;
                    if (hi >= c.time.size()) hi = c.time.size() - 1;
                    const double t0 = c.time[hi - 1], t1 = c.time[hi];
                    const double v0 = c.value[hi - 1], v1 = c.value[hi];
                    value = t1 > t0 ? v0 + (v1 - v0) * (t - t0) / (t1 - t0) : v1;
                }
                p.mean_e += value;
                ++p.runs;
            }
            if (p.runs > 0) {
                p.mean_e /= p.runs;
                out.push_back(std::move(p));
            }
        }
    }
    return out;
}

void write_curves_csv(std::ostream& out, const std::vector<CurvePoint>& points) {
    out << "algo,time,mean_E,runs\n";
    for (const auto& p : points) {
        out << p.algo << ',' << format_g17(p.time) << ',' << format_g17(p.mean_e) << ',' << p.runs
            << '\n';
    }
}

void RunConfig::validate() const {
    if (algos.empty()) throw Error("bench config: at least one algorithm is required");
    if (seeds.empty()) throw Error("bench config: at least one seed is required");
    if (max_outer < 0 && time_budget <= 0.0) {
        throw Error("bench config: set an iteration or time budget");
    }
    if (rank < 1) throw Error("bench config: rank must be at least 1");
    if (data_file.empty()) {
        if (problem == Problem::kNmf && (m < 1 || n < 1)) {
            throw Error("bench config: nmf needs --m and --n");
        }
        if (problem == Problem::kNcpd && (dim_i < 1 || dim_j < 1 || dim_k < 1)) {
            throw Error("bench config: ncpd needs --I, --J and --K");
        }
    }
    for (const auto& a : algos) {
        if (problem == Problem::kNmf) {
            parse_nmf_algo(a);
        } else {
            parse_ncpd_algo(a);
        }
    }
}

EminPolicy RunConfig::emin_policy() const {
    if (emin.has_value()) return *emin;
    if (!data_file.empty()) return EminPolicy::kBestObserved;
    if (problem == Problem::kNmf && kind == SyntheticKind::kFullRank) {
        return EminPolicy::kBestObserved;
    }
    return EminPolicy::kZero;  // exactly factorizable by construction
}

NmfFactors nmf_init_for_seed(const NmfInstance& inst, std::uint64_t seed) {
    Rng rng(seed);
    NmfFactors f;
    f.u = random_uniform_matrix(inst.rows(), inst.rank, rng);
    f.v = random_uniform_matrix(inst.rank, inst.cols(), rng);
    return f;
}

NcpdFactors ncpd_init_for_seed(const NcpdInstance& inst, std::uint64_t seed) {
    Rng rng(seed);
    return {random_uniform_matrix(inst.t.dim(0), inst.rank, rng),
            random_uniform_matrix(inst.t.dim(1), inst.rank, rng),
            random_uniform_matrix(inst.t.dim(2), inst.rank, rng)};
}

std::string run_id_for(const std::string& algo, std::uint64_t seed) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%06llu", static_cast<unsigned long long>(seed));
    return algo + "#s" + buf;
}

BenchResult run_benchmark(const RunConfig& config) {
    config.validate();
    BenchResult result;

    const Budget budget{config.max_outer, config.time_budget};
    if (config.problem == RunConfig::Problem::kNmf) {
        NmfInstance inst;
        if (!config.data_file.empty()) {
            inst.x = load_matrix(config.data_file);
            inst.rank = config.rank;
        } else {
            inst = gen_synthetic_nmf(config.kind, config.m, config.n, config.rank,
                                     config.data_seed);
        }
        inst.validate();

        NmfOptions opt;
        opt.budget = budget;
        opt.order = config.order;
        if (config.overrides.gamma_tilde) opt.gamma_tilde = *config.overrides.gamma_tilde;
        if (config.overrides.alpha_breve) opt.alpha_breve = *config.overrides.alpha_breve;
        if (config.overrides.repeat_cap) opt.repeat_cap = *config.overrides.repeat_cap;
        if (config.overrides.ibp_inv_step) opt.ibp_inv_step = *config.overrides.ibp_inv_step;

        for (std::uint64_t seed : config.seeds) {
            const NmfFactors init = nmf_init_for_seed(inst, seed);
            for (const auto& name : config.algos) {
                const NmfRunResult run = run_nmf(inst, parse_nmf_algo(name), init, opt, seed);
                const std::string id = run_id_for(name, seed);
                for (const auto& p : run.trace) result.traces.push_back({id, name, p});
            }
        }
    } else {
        NcpdInstance inst;
        if (!config.data_file.empty()) {
            inst.t = load_tensor(config.data_file);
            inst.rank = config.rank;
        } else {
            inst = gen_synthetic_ncpd(config.dim_i, config.dim_j, config.dim_k, config.rank,
                                      config.data_seed);
        }
        inst.validate();

        NcpdOptions opt;
        opt.budget = budget;
        opt.order = config.order;
        if (config.overrides.gamma_tilde) opt.gamma_tilde = *config.overrides.gamma_tilde;
        if (config.overrides.alpha_breve) opt.alpha_breve = *config.overrides.alpha_breve;
        if (config.overrides.repeat_cap) opt.repeat_cap = *config.overrides.repeat_cap;

        for (std::uint64_t seed : config.seeds) {
            const NcpdFactors init = ncpd_init_for_seed(inst, seed);
            for (const auto& name : config.algos) {
                const NcpdRunResult run = run_ncpd(inst, parse_ncpd_algo(name), init, opt, seed);
                const std::string label = "ncpd:" + name;
                const std::string id = run_id_for(label, seed);
                for (const auto& p : run.trace) result.traces.push_back({id, label, p});
            }
        }
    }

    std::stable_sort(result.traces.begin(), result.traces.end(),
                     [](const RunTraceRecord& a, const RunTraceRecord& b) {
                         if (a.run_id != b.run_id) return a.run_id < b.run_id;
                         return a.point.k < b.point.k;
                     });

    const EminPolicy policy = config.emin_policy();
    result.ranking = build_ranking(result.traces, policy);
    result.curves = average_e_on_grid(compute_e_curves(result.traces, policy));

    if (!config.out_dir.empty()) {
        namespace fs = std::filesystem;
        std::error_code ec;
        fs::create_directories(config.out_dir, ec);
        if (ec) throw IoError("cannot create output directory " + config.out_dir);
        auto open = [&](const std::string& name) {
            std::ofstream out(fs::path(config.out_dir) / name);
            if (!out) throw IoError("cannot write " + name + " under " + config.out_dir);
            return out;
        };
        auto traces_out = open("traces.csv");
        write_trace_csv(traces_out, result.traces);
        auto ranking_out = open("ranking.csv");
        result.ranking.write_csv(ranking_out);
        auto curves_out = open("curves.csv");
        write_curves_csv(curves_out, result.curves);
    }
    return result;
}

RankingTable ranking_from_trace_csv(const std::string& path, EminPolicy policy) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return build_ranking(read_trace_csv(in), policy);
}

}  // namespace ibprox
