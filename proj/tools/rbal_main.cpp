// rbal: balanced / relatively balanced embedding runs from the command line.
// Every command is a pure function of (config, input files); artifacts land
// in --out as JSON/CSV, written atomically. Exit codes: 0 success, 1 usage or
// config/validation error, 2 non-convergence.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rbal/balance.hpp"
#include "rbal/bergman.hpp"
#include "rbal/errors.hpp"
#include "rbal/expansion.hpp"
#include "rbal/geometry.hpp"
#include "rbal/io.hpp"
#include "rbal/stability.hpp"
#include "rbal/symmetry.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rbal;

namespace {

struct Options {
    std::string geometry = "p1";
    int k = -1;
    std::string k_range;
    std::string grid;
    double tol = 1e-10;
    int max_iter = 2000;
    unsigned seed = 1;
    std::string torus = "on";
    int samples = 50;
    std::string out = ".";
    std::string observable;  // expansion subcommand
    std::string report;      // stability subcommand
};

// config file uses the long-flag spellings as keys; flags given on the
// command line win over file values
void apply_config(const std::string& path, CLI::App* cmd, Options& o) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("malformed config " + path + ": " + e.what());
    }
    auto given = [&](const std::string& flag) {
        const CLI::Option* opt = cmd->get_option_no_throw("--" + flag);
        return opt != nullptr && opt->count() > 0;
    };
    for (const auto& [key, val] : j.items()) {
        if (given(key)) continue;
        if (key == "geometry") o.geometry = val.get<std::string>();
        else if (key == "k") o.k = val.get<int>();
        else if (key == "k-range") o.k_range = val.get<std::string>();
        else if (key == "grid") o.grid = val.get<std::string>();
        else if (key == "tol") o.tol = val.get<double>();
        else if (key == "max-iter") o.max_iter = val.get<int>();
        else if (key == "seed") o.seed = val.get<unsigned>();
        else if (key == "torus") o.torus = val.get<std::string>();
        else if (key == "samples") o.samples = val.get<int>();
        else if (key == "out") o.out = val.get<std::string>();
        else throw ConfigError("unknown config key '" + key + "' in " + path);
    }
}

std::pair<int, int> parse_grid(const std::string& s) {
    const auto x = s.find('x');
    if (x == std::string::npos)
        throw ConfigError("--grid expects NxM, got '" + s + "'");
    try {
        return {std::stoi(s.substr(0, x)), std::stoi(s.substr(x + 1))};
    } catch (const std::exception&) {
        throw ConfigError("--grid expects NxM, got '" + s + "'");
    }
}

std::pair<int, int> parse_range(const std::string& s) {
    const auto c = s.find(':');
    if (c == std::string::npos)
        throw ConfigError("--k-range expects A:B, got '" + s + "'");
    int a = 0, b = 0;
    try {
        a = std::stoi(s.substr(0, c));
        b = std::stoi(s.substr(c + 1));
    } catch (const std::exception&) {
        throw ConfigError("--k-range expects A:B, got '" + s + "'");
    }
    if (a < 1 || b <= a)
        throw ConfigError("--k-range needs at least two levels (A < B)");
    return {a, b};
}

bool torus_on(const Options& o) {
    if (o.torus == "on") return true;
    if (o.torus == "off") return false;
    throw ConfigError("--torus expects on|off, got '" + o.torus + "'");
}

// grid sizes respect the quadrature floor: n_phi must resolve degree-k
// torus harmonics
std::pair<int, int> grid_for(const Options& o, int kmax) {
    if (!o.grid.empty()) return parse_grid(o.grid);
    // 32 theta nodes keep the quadrature floor of the balanced residual
    // comfortably below the default 1e-10 tolerance at small k
    return {std::max(32, kmax + 2), std::max(24, 2 * kmax + 4)};
}

SectionFrame make_frame(const Options& o, int k) {
    if (o.geometry == "p1") {
        const auto [nt, np] = grid_for(o, k);
        return build_p1_backend(k, nt, np);
    }
    if (o.geometry == "product") {
        const auto [nt, np] = grid_for(o, k);
        const SectionFrame f = build_p1_backend(k, nt, np);
        return build_product_backend(f, f);
    }
    // anything else is a sampled-variety file
    return load_sampled_variety(o.geometry);
}

InnerProduct random_start(const SectionFrame& frame, unsigned seed) {
    // deterministic multiplicative perturbation of the reference Hilb metric;
    // ingested frames have no reference potential, so perturb the identity
    InnerProduct H;
    if (frame.grid.structured()) {
        H = hilb(frame, FiberMetric{frame.phi_ref});
    } else {
        H.H = Eigen::MatrixXcd::Identity(frame.dim, frame.dim);
        H.level_k = frame.level_k;
    }
    std::mt19937 rng(seed);
    std::normal_distribution<double> nd(0.0, 0.5);
    Eigen::VectorXd d(frame.dim);
    for (int i = 0; i < frame.dim; ++i) d[i] = std::exp(nd(rng));
    H.H = d.asDiagonal() * H.H * d.asDiagonal();
    Eigen::MatrixXcd E(frame.dim, frame.dim);
    for (int i = 0; i < frame.dim; ++i)
        for (int j = 0; j < frame.dim; ++j) E(i, j) = cd(nd(rng), nd(rng)) * 0.05;
    H.H += E * E.adjoint();
    H.provenance = "random:" + std::to_string(seed);
    H.validate();
    return H;
}

json config_echo(const Options& o) {
    json j;
    j["geometry"] = o.geometry;
    if (o.k >= 1) j["k"] = o.k;
    if (!o.k_range.empty()) j["k-range"] = o.k_range;
    if (!o.grid.empty()) j["grid"] = o.grid;
    j["tol"] = o.tol;
    j["max-iter"] = o.max_iter;
    j["seed"] = o.seed;
    j["torus"] = o.torus;
    j["out"] = o.out;
    return j;
}

json dump_matrix(const Eigen::MatrixXcd& M) {
    json rows = json::array();
    for (int i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (int j = 0; j < M.cols(); ++j)
            row.push_back(json::array({M(i, j).real(), M(i, j).imag()}));
        rows.push_back(std::move(row));
    }
    return rows;
}

json finite_or_string(double v) {
    if (std::isfinite(v)) return v;
    return v > 0 ? "inf" : "-inf";
}

void write_report(const fs::path& dir, json body) {
    atomic_write_text((dir / "report.json").string(), body.dump(1));
}

void write_solve_artifacts(const fs::path& dir, const SolveReport& rep,
                           const Options& o) {
    save_inner_product((dir / "H.json").string(), rep.final_H);
    std::vector<std::vector<double>> rows;
    for (const auto& s : rep.residual_history)
        rows.push_back({double(s.iteration), s.balanced, s.relative});
    write_csv((dir / "residuals.csv").string(),
              {"iteration", "balanced", "relative"}, rows);
    json j;
    j["status"] = rep.status;
    j["iterations"] = rep.iterates;
    if (!rep.residual_history.empty()) {
        j["residual_balanced"] = rep.residual_history.back().balanced;
        j["residual_relative"] = rep.residual_history.back().relative;
    }
    j["seed"] = o.seed;
    j["config"] = config_echo(o);
    write_report(dir, j);
}

int exit_for(const SolveReport& rep) { return rep.status == "converged" ? 0 : 2; }

void require_k(const Options& o) {
    if (o.k < 1) throw ConfigError("missing --k (positive integer level)");
}

fs::path ensure_out(const Options& o) {
    fs::path dir(o.out);
    fs::create_directories(dir);
    return dir;
}

SolveOptions solve_opts(const Options& o, const SectionFrame& frame) {
    SolveOptions sopt;
    sopt.tol = o.tol;
    sopt.max_iter = o.max_iter;
    // the T-iteration needs potentials; ingested frames use moment descent
    if (!frame.grid.structured()) sopt.mode = "descent";
    return sopt;
}

WeightDecomposition trivial_blocks(int dim) {
    // torus disabled: one block spanning everything, so the s_T projection
    // is a no-op and relative balance degenerates to plain balance
    WeightDecomposition wd;
    wd.characters = {{}};
    wd.block_sizes = {dim};
    wd.index_to_block.assign(dim, 0);
    wd.torus_rank = 0;
    return wd;
}

int cmd_balance(const Options& o) {
    require_k(o);
    const fs::path dir = ensure_out(o);
    const SectionFrame frame = make_frame(o, o.k);
    const SolveReport rep =
        solve_balanced(frame, random_start(frame, o.seed), solve_opts(o, frame));
    write_solve_artifacts(dir, rep, o);
    return exit_for(rep);
}

int cmd_relative(const Options& o) {
    require_k(o);
    const fs::path dir = ensure_out(o);
    const SectionFrame frame = make_frame(o, o.k);
    WeightDecomposition wd;
    std::vector<HermitianDirection> basisVT;
    if (torus_on(o)) {
        if (frame.torus_rank() == 0)
            throw ConfigError("geometry has no torus weights but --torus is on");
        wd = weight_blocks(frame);
        for (int g = 0; g < frame.torus_rank(); ++g)
            basisVT.push_back(lie_rep(frame, wd, g));
    } else {
        wd = trivial_blocks(frame.dim);
    }
    const SolveReport rep = solve_relative(frame, random_start(frame, o.seed), wd,
                                           basisVT, solve_opts(o, frame));
    write_solve_artifacts(dir, rep, o);
    json b;
    b["level_k"] = frame.level_k;
    b["dim"] = frame.dim;
    b["entries"] = dump_matrix(rep.B_matrix);
    atomic_write_text((dir / "B_matrix.json").string(), b.dump(1));
    return exit_for(rep);
}

json fit_to_json(const ExpansionFit& fit, const Options& o) {
    json j;
    j["observable"] = fit.observable;
    j["k_values"] = fit.k_values;
    j["values"] = fit.values;
    j["raw"] = fit.raw;
    j["exponent"] = finite_or_string(fit.exponent);
    j["coefficient"] = fit.coefficient;
    j["fit_residual"] = fit.fit_residual;
    j["correlation"] = fit.correlation;
    j["seed"] = o.seed;
    j["config"] = config_echo(o);
    return j;
}

int cmd_expansion(const Options& o) {
    if (o.geometry != "p1")
        throw ConfigError("expansion families need the p1 backend geometry");
    if (o.k_range.empty()) throw ConfigError("missing --k-range A:B");
    const auto [ka, kb] = parse_range(o.k_range);
    const fs::path dir = ensure_out(o);
    const auto [nt, np] = grid_for(o, kb);
    // one shared chart grid across the whole family
    std::vector<SectionFrame> frames;
    for (int k = ka; k <= kb; ++k) frames.push_back(build_p1_backend(k, nt, np));

    const CalibrationRecord cal = default_calibration();
    const SectionFrame& f0 = frames.front();
    const Eigen::VectorXd ct = f0.grid.params.col(0).array().cos();
    const Eigen::VectorXd u = 0.1 * ct;  // mild torus-invariant deformation
    const KahlerData kd0 = metric_from_potential(f0, FiberMetric{f0.phi_ref});
    // exact generator Hamiltonian for omega_ref + i ddbar u
    const Eigen::VectorXd H_X = hamiltonian_shift(f0, kd0, -0.5 * ct, u);

    ExpansionFit fit;
    std::optional<ExpansionFit> second;
    if (o.observable == "hq") {
        fit = verify_hq(frames, u, ct, cal);
    } else if (o.observable == "tyz") {
        fit = verify_tyz(frames, u, cal);
    } else if (o.observable == "ca") {
        fit = c_A_decay(frames, u, H_X, 0);
    } else if (o.observable == "thm2") {
        auto [f0fit, f1fit] = thm2_residual(frames, u, H_X, 0, cal);
        fit = f0fit;
        second = f1fit;
    } else if (o.observable == "eqrr") {
        fit = equivariant_trace_check(frames, u, H_X, 0, cal);
    } else if (o.observable == "cor51") {
        fit = cor51_residual(frames, u);
    } else {
        throw ConfigError("unknown expansion observable '" + o.observable + "'");
    }

    json j = fit_to_json(fit, o);
    std::vector<std::string> header = {"k", "value"};
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < fit.k_values.size(); ++i)
        rows.push_back({double(fit.k_values[i]), fit.values[i]});
    if (second) {
        j["l1"] = fit_to_json(*second, o);
        header.push_back("value_l1");
        for (std::size_t i = 0; i < rows.size(); ++i)
            rows[i].push_back(second->values[i]);
    }
    atomic_write_text((dir / "fit.json").string(), j.dump(1));
    write_csv((dir / "series.csv").string(), header, rows);
    return 0;
}

int cmd_stability(const Options& o) {
    const fs::path dir = ensure_out(o);
    json j;
    j["report"] = o.report;
    j["seed"] = o.seed;
    j["config"] = config_echo(o);

    // balanced reference at one level, shared by the single-k reports
    auto balanced_at = [&](int k) {
        const SectionFrame frame = make_frame(o, k);
        const SolveReport rep =
            solve_balanced(frame, random_start(frame, o.seed), solve_opts(o, frame));
        if (rep.status != "converged")
            throw Error("balanced solve did not converge at k=" + std::to_string(k));
        return std::make_pair(frame, rep.final_H);
    };

    if (o.report == "eig" || o.report == "norm") {
        std::vector<int> ks;
        if (!o.k_range.empty()) {
            const auto [ka, kb] = parse_range(o.k_range);
            for (int k = ka; k <= kb; ++k) ks.push_back(k);
        } else {
            require_k(o);
            ks.push_back(o.k);
        }
        std::vector<std::vector<double>> rows;
        json per_k = json::array();
        for (int k : ks) {
            auto [frame, H] = balanced_at(k);
            RatioReport rr;
            if (o.report == "eig") {
                const WeightDecomposition wd = weight_blocks(frame);
                std::vector<HermitianDirection> basisVT;
                for (int g = 0; g < frame.torus_rank(); ++g)
                    basisVT.push_back(lie_rep(frame, wd, g));
                rr = eigenvalue_bound_report(frame, H, wd, basisVT, o.samples, o.seed);
            } else {
                rr = norm_bound_report(frame, H, o.samples, o.seed);
            }
            for (std::size_t s = 0; s < rr.ratios.size(); ++s)
                rows.push_back({double(k), double(s), rr.ratios[s], rr.min});
            per_k.push_back({{"k", k}, {"min", rr.min}, {"median", rr.median},
                             {"max", rr.max}, {"skipped", rr.skipped}});
        }
        write_csv((dir / "ratios.csv").string(),
                  {"k", "sample_id", "ratio", "min_ratio"}, rows);
        j["levels"] = per_k;
        write_report(dir, j);
        return 0;
    }

    if (o.report == "convexity") {
        require_k(o);
        auto [frame, H] = balanced_at(o.k);
        std::mt19937 rng(o.seed);
        std::normal_distribution<double> nd;
        std::vector<double> t_grid(11);
        for (int i = 0; i < 11; ++i) t_grid[i] = -1.0 + 0.2 * i;
        std::vector<std::vector<double>> rows;
        double min_fddot = std::numeric_limits<double>::infinity();
        for (int s = 0; s < 20; ++s) {
            Eigen::MatrixXcd A(frame.dim, frame.dim);
            for (int i = 0; i < frame.dim; ++i)
                for (int c = 0; c < frame.dim; ++c) A(i, c) = cd(nd(rng), nd(rng));
            A = ((A + A.adjoint()) / 2).eval();
            A -= (A.trace() / double(frame.dim)) * Eigen::MatrixXcd::Identity(frame.dim, frame.dim);
            const EnergyProfile ep = f_derivatives(frame, H, A, t_grid);
            for (std::size_t i = 0; i < t_grid.size(); ++i) {
                rows.push_back({double(s), ep.t[i], ep.f[i], ep.f_dot[i], ep.f_ddot[i]});
                min_fddot = std::min(min_fddot, ep.f_ddot[i]);
            }
        }
        write_csv((dir / "convexity.csv").string(),
                  {"sample_id", "t", "f", "f_dot", "f_ddot"}, rows);
        j["min_f_ddot"] = min_fddot;
        write_report(dir, j);
        return 0;
    }

    if (o.report == "destab") {
        require_k(o);
        auto [frame, H] = balanced_at(o.k);
        const WeightDecomposition wd = weight_blocks(frame);
        std::vector<HermitianDirection> basisVT;
        for (int g = 0; g < frame.torus_rank(); ++g)
            basisVT.push_back(lie_rep(frame, wd, g));
        const auto found = destabilizer_scan(frame, H, wd, basisVT, o.samples);
        if (found) {
            j["destabilizer"] = dump_matrix(found->A);
            j["slope"] = found->slope;
            j["fit_residual"] = found->fit_residual;
        } else {
            j["destabilizer"] = "none";
        }
        write_report(dir, j);
        return 0;
    }

    if (o.report == "distortion") {
        require_k(o);
        auto [frame, H] = balanced_at(o.k);
        const KahlerData ref = metric_from_potential(frame, FiberMetric{frame.phi_ref});
        const DistortionReport dr = distortion_report(frame, H, ref);
        j["R_lower"] = dr.R_lower;
        j["R_upper"] = dr.R_upper;
        j["c0"] = dr.c0;
        j["c2"] = dr.c2;
        j["r_gate"] = dr.r_gate;
        j["gate_passed"] = dr.gate_passed;
        write_report(dir, j);
        return 0;
    }

    throw ConfigError("unknown stability report '" + o.report + "'");
}

int cmd_export_frame(const Options& o) {
    require_k(o);
    const fs::path dir = ensure_out(o);
    const SectionFrame frame = make_frame(o, o.k);
    save_sampled_variety((dir / "frame.json").string(), frame);
    json j;
    j["artifact"] = "frame.json";
    j["dim"] = frame.dim;
    j["npts"] = frame.npts();
    j["seed"] = o.seed;
    j["config"] = config_echo(o);
    write_report(dir, j);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"balanced and relatively balanced projective embeddings"};
    app.require_subcommand(1);
    Options o;
    std::string config_path;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--geometry", o.geometry, "p1 | product | sampled-variety JSON path");
        cmd->add_option("--k", o.k, "level of the embedding line bundle power");
        cmd->add_option("--k-range", o.k_range, "inclusive level range A:B");
        cmd->add_option("--grid", o.grid, "chart grid NxM (theta x phi nodes)");
        cmd->add_option("--tol", o.tol, "residual tolerance");
        cmd->add_option("--max-iter", o.max_iter, "iteration budget");
        cmd->add_option("--seed", o.seed, "RNG seed, recorded in artifacts");
        cmd->add_option("--torus", o.torus, "torus projections on|off");
        cmd->add_option("--samples", o.samples, "random sample budget for reports");
        cmd->add_option("--config", config_path, "JSON config; flags override");
        cmd->add_option("--out", o.out, "artifact directory");
        return cmd;
    };

    CLI::App* balance = add_common(app.add_subcommand("balance", "Donaldson T-iteration to a balanced inner product"));
    CLI::App* relative = add_common(app.add_subcommand("relative", "relatively balanced solve modulo the torus"));
    CLI::App* expansion = add_common(app.add_subcommand("expansion", "asymptotic expansion fits over a level range"));
    expansion->add_option("observable", o.observable, "hq | tyz | ca | thm2 | eqrr | cor51")->required();
    CLI::App* stability = add_common(app.add_subcommand("stability", "eigenvalue, convexity and distortion reports"));
    stability->add_option("report", o.report, "eig | norm | convexity | destab | distortion")->required();
    CLI::App* exportf = add_common(app.add_subcommand("export-frame", "write the sampled variety to JSON"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        CLI::App* active = app.get_subcommands().front();
        if (!config_path.empty()) apply_config(config_path, active, o);
        if (active == balance) return cmd_balance(o);
        if (active == relative) return cmd_relative(o);
        if (active == expansion) return cmd_expansion(o);
        if (active == stability) return cmd_stability(o);
        if (active == exportf) return cmd_export_frame(o);
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "rbal: " << e.what() << "\n";
        return 1;
    }
}
