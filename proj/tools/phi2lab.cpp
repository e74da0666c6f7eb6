// phi2lab: command-line laboratory for the stochastic Phi^{2n}_d model.
//
// Subcommands: simulate, instanton, ldp-curve, noise-scaling, condition2,
// regime.  Every run is a pure function of (config, seed): outputs carry a
// header with the config hash, the seed, and the code version, and reruns are
// byte-identical.  Exit codes: 0 success, 2 configuration error, 3 numerical
// failure (blow-up or non-convergence).

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "phi2/action.hpp"
#include "phi2/config.hpp"
#include "phi2/dynamics.hpp"
#include "phi2/io.hpp"
#include "phi2/ldp.hpp"
#include "phi2/noise.hpp"

using json = nlohmann::json;
using namespace phi2;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct RunContext {
    Config cfg;
    std::uint64_t seed = 0;
    std::string out = "run";

    std::string stamp() const {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "config_hash=%016llx seed=%llu version=%s",
                      static_cast<unsigned long long>(fnv1a(cfg.canonical_text())),
                      static_cast<unsigned long long>(seed), kCodeVersion);
        return buf;
    }
};

RunContext make_context(const std::string& config_path, const std::vector<std::string>& sets,
                        long seed_flag, const std::string& out) {
    RunContext ctx;
    if (!config_path.empty()) ctx.cfg = Config::parse_file(config_path);
    for (const auto& kv : sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("--set expects section.key=value, got: " + kv);
        ctx.cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed_flag >= 0) ctx.cfg.set("experiment.seed", std::to_string(seed_flag));
    ctx.seed = static_cast<std::uint64_t>(ctx.cfg.get_int("experiment.seed", 0));
    ctx.out = out;
    return ctx;
}

std::shared_ptr<SpectralBasis> build_basis(const Config& cfg) {
    return std::make_shared<SpectralBasis>(static_cast<int>(cfg.get_int("domain.d", 1)),
                                           cfg.get_double("domain.L", M_PI),
                                           static_cast<int>(cfg.get_int("domain.M", 32)));
}

PolynomialDrift build_drift(const Config& cfg) {
    const double trunc = cfg.get_double("drift.truncation", 0.0);
    return PolynomialDrift(static_cast<int>(cfg.get_int("drift.n", 1)),
                           cfg.get_double("drift.lambda1", 0.0),
                           cfg.get_double("drift.lambda2", 0.0),
                           trunc > 0.0 ? std::optional<double>(trunc) : std::nullopt);
}

SolverOptions build_solver(const Config& cfg) {
    SolverOptions opt;
    opt.dt = cfg.get_double("solver.dt", 1.0 / 256);
    opt.T = cfg.get_double("solver.T", 1.0);
    opt.output_stride = static_cast<std::size_t>(cfg.get_int("solver.output_stride", 1));
    opt.dealias = cfg.get_bool("solver.dealias", true);
    opt.use_truncation = cfg.get_double("drift.truncation", 0.0) > 0.0;
    return opt;
}

SpectralField initial_state(const Config& cfg, std::shared_ptr<const SpectralBasis> basis,
                            const std::string& x0_file) {
    if (!x0_file.empty()) return read_field(x0_file, basis);
    SpectralField x(std::move(basis));
    const long idx = cfg.get_int("experiment.x0_index", -1);
    if (idx >= 0) {
        if (static_cast<std::size_t>(idx) >= x.size())
            throw std::runtime_error("experiment.x0_index out of range");
        x[static_cast<std::size_t>(idx)] = cfg.get_double("experiment.x0_value", 1.0);
    }
    return x;
}

SpectralField target_state(const Config& cfg, std::shared_ptr<const SpectralBasis> basis,
                           const std::string& target_file) {
    if (!target_file.empty()) return read_field(target_file, basis);
    SpectralField y(std::move(basis));
    const long idx = cfg.get_int("experiment.target_index", 0);
    if (idx < 0 || static_cast<std::size_t>(idx) >= y.size())
        throw std::runtime_error("experiment.target_index out of range");
    y[static_cast<std::size_t>(idx)] = cfg.get_double("experiment.target_value", 1.0);
    return y;
}

std::vector<double> parse_grid(const std::string& text, const char* what) {
    std::vector<double> out;
    std::istringstream is(text);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        try {
            out.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw std::runtime_error(std::string(what) + ": bad number: " + tok);
        }
    }
    if (out.empty()) throw std::runtime_error(std::string(what) + ": empty grid");
    return out;
}

void write_json(const std::string& path, const RunContext& ctx, json j) {
    j["meta"] = {{"stamp", ctx.stamp()}};
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << j.dump(2) << "\n";
}

std::ofstream open_csv(const std::string& path, const RunContext& ctx,
                       const std::string& columns) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << "# " << ctx.stamp() << "\n" << columns << "\n";
    os.precision(17);
    return os;
}

// ---------------------------------------------------------------------------

int run_simulate(const RunContext& ctx, const std::string& x0_file) {
    auto basis = build_basis(ctx.cfg);
    const PolynomialDrift drift = build_drift(ctx.cfg);
    const SolverOptions opt = build_solver(ctx.cfg);
    const double eps = ctx.cfg.get_double("experiment.eps", 1.0);
    const double hneg_s = ctx.cfg.get_double("experiment.hneg_s", 1.0);
    const SpectralField x = initial_state(ctx.cfg, basis, x0_file);

    NoiseModel noise(basis, ctx.cfg.get_double("noise.delta", 0.5),
                     ctx.cfg.get_double("noise.beta", 1.0));
    RngStream rng(ctx.seed, 0, 7);
    SolverDiagnostics diag;
    const Trajectory u = solve_stochastic(x, eps, noise, drift, opt, rng, &diag,
                                          ctx.cfg.get_bool("drift.enabled", true));

    write_trajectory_csv(ctx.out + ".csv", u, hneg_s, ctx.stamp());
    if (ctx.cfg.get_bool("experiment.save_final", false))
        write_field(ctx.out + "_final.phi2", u.back());
    write_json(ctx.out + ".json", ctx,
               {{"eps", eps},
                {"steps", u.steps()},
                {"sup_norm_H", diag.sup_norm_H},
                {"final_norm_H", norm_H(u.back())},
                {"final_norm_Hneg", norm_Hneg(u.back(), hneg_s)},
                {"accuracy_warning", diag.accuracy_warning}});
    return 0;
}

int run_instanton(const RunContext& ctx, const std::string& target_file, double radius,
                  double mu0, double tol, long max_iter) {
    auto basis = build_basis(ctx.cfg);
    ActionProblem prob(initial_state(ctx.cfg, basis, ""), build_solver(ctx.cfg).T,
                       build_drift(ctx.cfg), target_state(ctx.cfg, basis, target_file));
    prob.solver = build_solver(ctx.cfg);
    prob.radius = radius;
    prob.mu0 = mu0;
    prob.drift_enabled = ctx.cfg.get_bool("drift.enabled", true);
    if (ctx.cfg.get_string("experiment.norm", "H") == "Hneg") {
        prob.norm = TargetNorm::Hneg;
        prob.hneg_s = ctx.cfg.get_double("experiment.hneg_s", 1.0);
    }
    if (ctx.cfg.get_bool("experiment.use_noise_control", false))
        prob.noise.emplace(basis, ctx.cfg.get_double("noise.delta", 0.5),
                           ctx.cfg.get_double("noise.beta", 1.0));

    const Control phi0 = Control::zero(basis, prob.T, prob.solver.dt);
    const InstantonResult res =
        minimize_action(prob, phi0, tol, static_cast<std::size_t>(max_iter));

    Trajectory phi_traj{res.control.times, res.control.values};
    write_trajectory(ctx.out + "_control.phi2t", phi_traj);
    write_trajectory(ctx.out + "_path.phi2t", res.path);
    write_json(ctx.out + ".json", ctx,
               {{"action_value", res.action_value},
                {"iterations", res.iterations},
                {"terminal_miss", res.terminal_miss},
                {"gradient_norm", res.gradient_norm},
                {"mu_final", res.mu_final},
                {"converged", res.converged}});
    return res.converged ? 0 : kExitNumerical;
}

int run_ldp_curve(const RunContext& ctx, const std::string& target_file) {
    auto basis = build_basis(ctx.cfg);
    ModelConfig model(basis, build_drift(ctx.cfg), ctx.cfg.get_double("noise.beta", 1.0),
                      initial_state(ctx.cfg, basis, ""));
    model.solver = build_solver(ctx.cfg);
    model.drift_enabled = ctx.cfg.get_bool("drift.enabled", true);
    ScalingFamily fam{ctx.cfg.get_double("experiment.a", 0.5),
                      static_cast<int>(ctx.cfg.get_int("domain.d", 1)),
                      ctx.cfg.get_double("experiment.alpha", 0.0),
                      ctx.cfg.get_double("experiment.delta0", 1.0)};
    const auto eps_grid =
        parse_grid(ctx.cfg.get_string("experiment.eps_grid", "0.2,0.1,0.05"), "eps_grid");
    const std::size_t reps = static_cast<std::size_t>(ctx.cfg.get_int("experiment.reps", 1000));

    const SpectralField y = target_state(ctx.cfg, basis, target_file);
    EventSpec event(y, ctx.cfg.get_double("experiment.event_radius", 0.1),
                    ctx.cfg.get_double("experiment.event_hneg_s", 0.0));

    // instanton for the event target at the reference correlation length
    ActionProblem prob(model.x, model.solver.T, model.drift, y);
    prob.solver = model.solver;
    prob.radius = ctx.cfg.get_double("experiment.instanton_radius", 5e-4);
    prob.mu0 = ctx.cfg.get_double("experiment.mu0", 1.0);
    prob.drift_enabled = model.drift_enabled;
    const double delta_ref = ctx.cfg.get_double("noise.delta", fam.delta(eps_grid.front()));
    prob.noise.emplace(basis, delta_ref, model.beta);
    const InstantonResult inst =
        minimize_action(prob, Control::zero(basis, prob.T, prob.solver.dt));
    if (!inst.converged) return kExitNumerical;

    const LdpCurve curve = ldp_curve(event, eps_grid, fam, model, reps, ctx.seed, inst);
    auto os = open_csv(ctx.out + ".csv", ctx,
                       "eps,delta,p_hat,ci_low,ci_high,minus_eps_log_p,rel_gap,censored");
    for (const auto& r : curve.rows)
        os << r.eps << ',' << r.delta << ',' << r.p_hat << ',' << r.ci_low << ',' << r.ci_high
           << ',' << r.minus_eps_log_p << ',' << r.rel_gap << ',' << (r.censored ? 1 : 0)
           << "\n";
    write_json(ctx.out + ".json", ctx,
               {{"action_value", curve.action_value},
                {"trend_slope", curve.trend_slope},
                {"instanton_iterations", inst.iterations},
                {"instanton_miss", inst.terminal_miss}});
    return 0;
}

int run_noise_scaling(const RunContext& ctx) {
    MomentScalingConfig mcfg;
    const std::string quantity = ctx.cfg.get_string("experiment.quantity", "L2_final");
    if (quantity == "L2_final") mcfg.quantity = MomentQuantity::L2_final;
    else if (quantity == "Hneg_sup") mcfg.quantity = MomentQuantity::Hneg_sup;
    else throw std::runtime_error("experiment.quantity must be L2_final or Hneg_sup");
    mcfg.theta = ctx.cfg.get_double("experiment.theta", 0.0);
    mcfg.s = ctx.cfg.get_double("experiment.hneg_s", 1.0);
    mcfg.T = ctx.cfg.get_double("solver.T", 1.0);
    mcfg.sup_times = static_cast<std::size_t>(ctx.cfg.get_int("experiment.sup_times", 16));
    mcfg.reps = static_cast<std::size_t>(ctx.cfg.get_int("experiment.reps", 1000));
    mcfg.seed = ctx.seed;
    const auto deltas =
        parse_grid(ctx.cfg.get_string("experiment.deltas", "0.125,0.0625,0.03125"), "deltas");
    const double beta = ctx.cfg.get_double("noise.beta", 1.0);

    std::vector<MomentScalingRow> rows;
    if (ctx.cfg.get_bool("experiment.synthetic", false)) {
        SyntheticSpectrum spec;
        spec.d = static_cast<int>(ctx.cfg.get_int("domain.d", 2));
        spec.alpha_exponent = ctx.cfg.get_double("experiment.alpha_exponent", 0.0);
        spec.K = static_cast<std::size_t>(ctx.cfg.get_int("experiment.K", 100000));
        rows = moment_scaling_experiment_synthetic(spec, beta, deltas, mcfg);
    } else {
        rows = moment_scaling_experiment(static_cast<int>(ctx.cfg.get_int("domain.d", 1)),
                                         ctx.cfg.get_double("domain.L", M_PI),
                                         static_cast<int>(ctx.cfg.get_int("domain.M", 32)),
                                         beta, deltas, mcfg);
    }
    auto os = open_csv(ctx.out + ".csv", ctx, "delta,estimate,stderr,oracle,reps");
    for (const auto& r : rows)
        os << r.delta << ',' << r.estimate << ',' << r.stderr_ << ',' << r.oracle << ','
           << r.reps << "\n";
    write_json(ctx.out + ".json", ctx,
               {{"slope", fit_log_slope(rows)}, {"r2_loginv", fit_loginv_r2(rows)}});
    return 0;
}

int run_condition2(const RunContext& ctx) {
    auto basis = build_basis(ctx.cfg);
    ModelConfig model(basis, build_drift(ctx.cfg), ctx.cfg.get_double("noise.beta", 1.0),
                      initial_state(ctx.cfg, basis, ""));
    model.solver = build_solver(ctx.cfg);
    model.drift_enabled = ctx.cfg.get_bool("drift.enabled", true);
    ScalingFamily fam{ctx.cfg.get_double("experiment.a", 0.5),
                      static_cast<int>(ctx.cfg.get_int("domain.d", 1)),
                      ctx.cfg.get_double("experiment.alpha", 0.0),
                      ctx.cfg.get_double("experiment.delta0", 1.0)};
    const auto eps_grid = parse_grid(
        ctx.cfg.get_string("experiment.eps_grid", "0.2,0.1,0.05,0.025"), "eps_grid");

    Control phi = Control::zero(basis, model.solver.T, model.solver.dt);
    const double amp = ctx.cfg.get_double("experiment.control_amp", 0.0);
    for (std::size_t j = 0; j < phi.values.size(); ++j)
        phi.values[j][0] = amp * std::cos(phi.times[j]);

    PerturbationSchedule sched;
    sched.amplitude = ctx.cfg.get_double("experiment.perturb_amp", 0.0);

    const Condition2Result res = condition2_experiment(
        model, phi, sched, eps_grid, fam,
        static_cast<std::size_t>(ctx.cfg.get_int("experiment.reps", 100)), ctx.seed,
        ctx.cfg.get_double("experiment.cost_clamp", 1e6),
        ctx.cfg.get_double("experiment.hneg_s", 1.0));

    auto os = open_csv(ctx.out + ".csv", ctx, "eps,delta,mean_gap,stderr");
    for (const auto& r : res.rows)
        os << r.eps << ',' << r.delta << ',' << r.mean_gap << ',' << r.stderr_ << "\n";
    write_json(ctx.out + ".json", ctx, {{"tau", res.tau}});
    return 0;
}

int run_regime(int d, double alpha, double a, double gamma) {
    ScalingFamily fam{a, d, alpha, 1.0};
    const auto cls = classify_regime(
        fam, gamma > 0.0 ? std::optional<double>(gamma) : std::nullopt);
    std::cout << "rd46: " << (cls.holds_rd46 ? "holds" : "fails") << "\n";
    std::cout << "rd5050: " << (cls.holds_rd5050 ? "holds" : "fails") << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"phi2lab: spectral laboratory for the stochastic Phi^{2n}_d model"};
    app.require_subcommand(1);

    std::string config_path, out = "run", x0_file, target_file;
    std::vector<std::string> sets;
    long seed_flag = -1;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "config file (TOML-style sections)");
        sub->add_option("--set", sets, "override: section.key=value")->take_all();
        sub->add_option("--seed", seed_flag, "override experiment.seed");
        sub->add_option("--out", out, "output path prefix");
    };

    auto* sim = app.add_subcommand("simulate", "integrate one stochastic trajectory");
    add_common(sim);
    sim->add_option("--x0-file", x0_file, "binary field with the initial state");

    double radius = 0.0, mu0 = 1.0, tol = 1e-6, gamma = 0.0;
    long max_iter = 500;
    auto* inst = app.add_subcommand("instanton", "minimize the rate functional");
    add_common(inst);
    inst->add_option("--target-file", target_file, "binary field with the terminal target");
    inst->add_option("--radius", radius, "admissible terminal miss");
    inst->add_option("--mu0", mu0, "initial penalty weight");
    inst->add_option("--tol", tol, "gradient tolerance");
    inst->add_option("--max-iter", max_iter, "iteration cap per penalty round");

    auto* curve = app.add_subcommand("ldp-curve", "rare-event curve against the instanton");
    add_common(curve);
    curve->add_option("--target-file", target_file, "binary field with the event center");

    auto* nscale = app.add_subcommand("noise-scaling", "moment scaling of the convolution");
    add_common(nscale);

    auto* cond2 = app.add_subcommand("condition2", "controlled convergence to the skeleton");
    add_common(cond2);

    int rd = 1;
    double ralpha = 0.0, ra = 0.5;
    auto* regime = app.add_subcommand("regime", "classify a scaling family");
    regime->add_option("--d", rd, "dimension")->required();
    regime->add_option("--alpha", ralpha, "eigenfunction growth exponent");
    regime->add_option("--a", ra, "scaling exponent in delta = eps^a")->required();
    regime->add_option("--gamma", gamma, "explicit exponent for the H-topology test");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (regime->parsed()) return run_regime(rd, ralpha, ra, gamma);
        const RunContext ctx = make_context(config_path, sets, seed_flag, out);
        if (sim->parsed()) return run_simulate(ctx, x0_file);
        if (inst->parsed()) return run_instanton(ctx, target_file, radius, mu0, tol, max_iter);
        if (curve->parsed()) return run_ldp_curve(ctx, target_file);
        if (nscale->parsed()) return run_noise_scaling(ctx);
        if (cond2->parsed()) return run_condition2(ctx);
    } catch (const BlowUpError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
