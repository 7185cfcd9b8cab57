#include "mems/verify_bench.hpp"

#include "mems/grid_norms.hpp"
#include "mems/sampling.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>

namespace mems {

namespace {

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

CriterionResult timed(int id, const char* name, const std::function<void(CriterionResult&)>& body)
{
    CriterionResult r;
    r.id = id;
    r.name = name;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(r);
    } catch (const std::exception& e) {
        r.pass = false;
        r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

// sup over samples of the discrete H^1 norm of u1 - u2 (both interior, same times)
double sup_h1_gap(const Mat& a, const Mat& b) { return sup_h1(a - b); }

}  // namespace

CriterionResult criterion_closed_form()
{
    return timed(1, "closed-form plate benchmark", [](CriterionResult& r) {
        const BenchmarkGap g = benchmark_against_duhamel(128, 1.0, 2000);
        r.measured = g.max_gap;
        r.threshold = 1e-10;
        r.pass = g.max_gap <= r.threshold;
        r.detail = fmt("k_max=128 T=1 N_t=2000 max amplitude %.3e", g.max_amplitude);
    });
}

CriterionResult criterion_regularity()
{
    return timed(2, "regularity ceiling fit", [](CriterionResult& r) {
        const ClosedFormModes m = linear_plate_closed_form(0.37, 128);
        const RegularityFit fit = regularity_exponent_fit(m.amplitude, 9, 101);
        r.measured = fit.p;
        r.threshold = 5.3;
        r.pass = fit.conclusive && fit.p >= 4.7 && fit.p <= 5.3;
        r.detail = fmt("p in [4.7,5.3]; s*=%.3f residual %.3f points %.0f", fit.s_star, fit.residual, fit.points);
    });
}

CriterionResult criterion_unitarity()
{
    return timed(3, "semigroup unitarity", [](CriterionResult& r) {
        const int k = 256;
        const PlateSpectrum spectrum = plate_eigenvalues(k);
        Rng rng(101);
        double worst = 0.0;
        for (int s = 0; s < 100; ++s) {
            const StateVW st(ModeVector(random_pinned_modes(rng, k, k, uniform(rng, 0.1, 10.0), 1.0)),
                             ModeVector(random_pinned_modes(rng, k, k, uniform(rng, 0.1, 10.0), 3.0)));
            const double n0 = norm_X(st);
            for (int j = 0; j <= 100; ++j) {
                const double t = j == 0 ? 0.0 : uniform(rng, 0.0, 100.0);
                worst = std::max(worst, std::abs(norm_X(semigroup_apply(st, spectrum, t)) - n0) / n0);
            }
            worst = std::max(worst, std::abs(norm_X(semigroup_apply(st, spectrum, 100.0)) - n0) / n0);
        }
        r.measured = worst;
        r.threshold = 1e-10;
        r.pass = worst <= r.threshold;
        r.detail = "100 states, k_max=256, t in [0,100]";
    });
}

CriterionResult criterion_picard_contraction()
{
    return timed(4, "Picard contraction at 0.9 T0", [](CriterionResult& r) {
        const int k = 32;
        const SpectralGrid grid(k);
        Rng rng(202);
        double worst_ratio = 0.0;
        int worst_iter = 0, failures = 0;
        double min_T = 1e300, max_T = 0.0;
        for (int c = 0; c < 20; ++c) {
            ModelParams p;
            p.beta_F = uniform(rng, 0.2, 2.0);
            p.beta_p = uniform(rng, 0.2, 2.0);
            p.lift = BoundaryLift(uniform(rng, 0.9, 1.1), uniform(rng, 0.9, 1.1));
            p.eps1 = 0.5;
            const StateVW init(ModeVector(random_pinned_modes(rng, k, 16, uniform(rng, 0.0, 1.0), 3.0)),
                               ModeVector(random_pinned_modes(rng, k, 16, uniform(rng, 0.0, 0.5))));
            const Vec bump = grid.to_grid(random_pinned_modes(rng, k, 8, uniform(rng, 0.0, 1.0)));
            const Vec u0 = bump.array() + p.lift.theta1;
            const HorizonEstimate he = estimate_horizon(grid, p, init, GridField(u0));
            const double T = 0.9 * he.T0_calibrated;
            min_T = std::min(min_T, T);
            max_T = std::max(max_T, T);
            const int steps = 64;
            PressurePath u;
            u.times = uniform_times(T, steps);
            u.samples.resize(grid.n(), steps + 1);
            for (int m = 0; m <= steps; ++m) u.samples.col(m) = u0 + (u.times(m) / T) * 0.1 * bump;
            PicardOptions opt;
            opt.tol = 1e-10;
            opt.max_iter = 40;
            try {
                const auto [path, rep] = picard_dispersive(grid, p, u, init, opt);
                worst_ratio = std::max(worst_ratio, rep.max_ratio());
                worst_iter = std::max(worst_iter, rep.iterations);
                if (!rep.converged) ++failures;
            } catch (const NonContractionError& e) {
                ++failures;
                worst_ratio = std::max(worst_ratio, e.report.max_ratio());
                worst_iter = std::max(worst_iter, e.report.iterations);
            }
        }
        r.measured = worst_ratio;
        r.threshold = 0.55;
        r.pass = failures == 0 && worst_ratio <= 0.55 && worst_iter <= 40;
        r.detail = fmt("20 configs, max iterations %.0f, failures %.0f, T in [%.3g, %.3g]", worst_iter, failures, min_T,
                       max_T);
    });
}

namespace {

struct OracleComparison {
    double gap = 0.0;
    double scale = 0.0;
    double bound = 0.0;
    double T = 0.0;
    Termination termination = Termination::budget;
};

OracleComparison compare_with_oracle(const SpectralGrid& grid, const ModelParams& p, const CoupledState& init, int N_t)
{
    OracleComparison c;
    const HorizonEstimate he = estimate_horizon(grid, p, init.vw, GridField(init.u));
    c.T = std::min(he.T0_calibrated, 0.05);
    RunOptions opt;
    opt.T = c.T;
    opt.N_t = N_t;
    const RunReport run = run_coupled(grid, p, init, opt);
    c.termination = run.termination;
    if (run.termination != Termination::converged) return c;
    const int sub = static_cast<int>(std::ceil(run.dt / max_reference_step(grid)));
    ReferenceOptions ro;
    ro.record_every = sub;
    const ReferenceRun ref = integrate_reference(grid, p, init, c.T, run.dt / sub, ro);
    c.gap = sup_h1_gap(run.trajectory.u.array() - p.lift.theta1, ref.trajectory.u.array() - p.lift.theta1);
    for (Eigen::Index m = 0; m < run.trajectory.u.cols(); ++m)
        c.scale = std::max(c.scale, grid_norm(run.trajectory.u.col(m), p.lift.theta1, p.lift.theta1, 1));
    const double h = grid.h();
    c.bound = std::max(1e-8, 5.0 * (h * h + run.dt * run.dt)) * c.scale;
    return c;
}

ModelParams smooth_params()
{
    ModelParams p;
    p.beta_F = 0.5;
    p.beta_p = 1.0;
    p.eps1 = 0.5;
    return p;
}

}  // namespace

CriterionResult criterion_oracle_equivalence()
{
    return timed(5, "Gamma fixed point vs RK4 oracle", [](CriterionResult& r) {
        const SpectralGrid grid(128);
        const OracleComparison c = compare_with_oracle(grid, smooth_params(), smooth_initial_state(grid), 200);
        r.measured = c.gap;
        r.threshold = c.bound;
        r.pass = c.termination == Termination::converged && c.gap <= c.bound;
        r.detail = fmt("n=k_max=128 T=%.4g N_t=200 solution scale %.4f", c.T, c.scale);
    });
}

CriterionResult criterion_lower_bound()
{
    return timed(6, "gap lower bound kappa/2", [](CriterionResult& r) {
        const SpectralGrid grid(128);
        const double C = sobolev_embedding_constant(grid.k_max());
        Rng rng(303);
        int violations = 0, converged = 0;
        double worst = 1e300;
        for (int d = 0; d < 10; ++d) {
            ModelParams p = smooth_params();
            p.beta_F = uniform(rng, 0.2, 1.0);
            p.beta_p = uniform(rng, 0.5, 1.5);
            CoupledState init = smooth_initial_state(grid, uniform(rng, 0.0, 0.2), 0.0);
            const double kappa0 = 1.0;
            const double r = 0.9 * kappa0 / (2.0 * C);
            init.vw = StateVW(ModeVector::zero(grid.k_max()),
                              ModeVector(random_pinned_modes(rng, grid.k_max(), 16, uniform(rng, 0.0, 0.5) * r)));
            const double kappa = min_gap_fine(grid, init.vw.w.coeffs, p.lift.theta2);
            const HorizonEstimate he = estimate_horizon(grid, p, init.vw, GridField(init.u));
            RunOptions opt;
            opt.T = std::min(he.T0_calibrated, 0.05);
            opt.N_t = 200;
            const RunReport run = run_coupled(grid, p, init, opt);
            if (run.termination != Termination::converged) continue;
            ++converged;
            for (const auto& s : run.series) {
                worst = std::min(worst, s.min_w / kappa);
                if (s.min_w < 0.5 * kappa) ++violations;
            }
        }
        r.measured = worst;
        r.threshold = 0.5;
        r.pass = violations == 0 && converged == 10;
        r.detail = fmt("min over runs of min_w/kappa; converged runs %.0f/10, violations %.0f", converged, violations);
    });
}

CriterionResult criterion_elliptic()
{
    return timed(7, "elliptic estimate", [](CriterionResult& r) {
        const SpectralGrid grid(128);
        Rng rng(404);
        int violations = 0;
        double worst = 1e300;
        std::string detail;
        for (int c = 0; c < 5; ++c) {
            ModelParams p = smooth_params();
            const Vec u0 = grid.to_grid(random_pinned_modes(rng, 128, 12, uniform(rng, 0.1, 1.5))).array() + 1.0;
            const Vec w0 = grid.to_grid(random_pinned_modes(rng, 128, 12, uniform(rng, 0.1, 1.5))).array() + 1.0;
            const Vec v0 = grid.to_grid(random_pinned_modes(rng, 128, 12, uniform(rng, 0.1, 3.0)));
            const PstarOperator op = assemble_Pstar(GridField(u0), GridField(v0), GridField(w0), p);
            const EllipticReport e = elliptic_form_check(op, p, 10000, 500 + c);
            violations += e.violations;
            worst = std::min(worst, e.min_margin);
            if (c == 0) detail = fmt("first triple K=%.4g K_o=%.4g K2=%.4g", e.K, e.K_o, e.K2);
        }
        r.measured = violations;
        r.threshold = 0.0;
        r.pass = violations == 0;
        r.detail = detail + fmt("; 5 triples x 10^4 tests, min normalised margin %.3e", worst);
    });
}

namespace {

struct FrechetOrders {
    double e_W[3];
    double e_F[3];
    double order_min = 0.0;
};

FrechetOrders frechet_orders()
{
    const int k = 32;
    const SpectralGrid grid(k);
    const ModelParams p = smooth_params();
    const CoupledState init = smooth_initial_state(grid);
    const int steps = 16;
    const double T = 0.02;
    PressurePath u;
    u.times = uniform_times(T, steps);
    u.samples.resize(k, steps + 1);
    Mat q(k, steps + 1);
    for (int m = 0; m <= steps; ++m) {
        const double tau = u.times(m) / T;
        for (int j = 1; j <= k; ++j) {
            const double x = GridField::node(j, k);
            u.samples(j - 1, m) = init.u(j - 1) + 0.05 * tau * std::sin(2 * M_PI * x);
            q(j - 1, m) = 10.0 * (std::sin(M_PI * x) + (0.5 + tau) * std::sin(3 * M_PI * x));
        }
    }
    PicardOptions opt;
    opt.tol = 1e-15;
    opt.max_iter = 400;
    const VWPath base = picard_dispersive(grid, p, u, init.vw, opt).first;
    const Mat F0 = F_path(grid, p, u, base);
    const ModePath dW = frechet_W(grid, p, u, q, base, opt);
    const Mat dF = frechet_F(grid, p, u, q, base, dW);
    FrechetOrders out;
    const double hs[3] = {1e-2, 1e-3, 1e-4};
    for (int i = 0; i < 3; ++i) {
        PressurePath uh = u;
        uh.samples += hs[i] * q;
        const VWPath wh = picard_dispersive(grid, p, uh, init.vw, opt, &base).first;
        const Mat Fh = F_path(grid, p, uh, wh);
        out.e_W[i] = sup_norm_X((wh.v - base.v) / hs[i] - dW.v, (wh.w - base.w) / hs[i] - dW.w);
        double e = 0.0;
        for (int m = 0; m <= steps; ++m) e = std::max(e, interior_l2((Fh.col(m) - F0.col(m)) / hs[i] - dF.col(m)));
        out.e_F[i] = e;
    }
    out.order_min = 1e300;
    for (int i = 0; i < 2; ++i) {
        out.order_min = std::min(out.order_min, std::log10(out.e_W[i] / out.e_W[i + 1]));
        out.order_min = std::min(out.order_min, std::log10(out.e_F[i] / out.e_F[i + 1]));
    }
    return out;
}

}  // namespace

CriterionResult criterion_frechet()
{
    return timed(8, "Frechet consistency (W and F)", [](CriterionResult& r) {
        const FrechetOrders o = frechet_orders();
        r.measured = o.order_min;
        r.threshold = 0.9;
        r.pass = o.order_min >= 0.9;
        r.detail = fmt("W errors %.2e %.2e %.2e", o.e_W[0], o.e_W[1], o.e_W[2]) +
                   fmt("; F errors %.2e %.2e %.2e", o.e_F[0], o.e_F[1], o.e_F[2]);
    });
}

CriterionResult criterion_cocycle()
{
    return timed(9, "continuation cocycle", [](CriterionResult& r) {
        const SpectralGrid grid(64);
        const ModelParams p = smooth_params();
        const CoupledState init = smooth_initial_state(grid);
        RunOptions opt;
        opt.T = 0.04;
        opt.N_t = 80;
        opt.relinearize = false;
        const RunReport full = run_coupled(grid, p, init, opt);
        RunOptions half = opt;
        half.T = 0.02;
        half.N_t = 40;
        const RunReport joined = continue_run(grid, run_coupled(grid, p, init, half), 0.02);
        if (full.termination != Termination::converged || joined.termination != Termination::converged ||
            full.trajectory.times.size() != joined.trajectory.times.size())
            throw std::runtime_error("runs did not converge on matching time grids");
        const Trajectory& a = full.trajectory;
        const Trajectory& b = joined.trajectory;
        double gap = (a.u - b.u).lpNorm<Eigen::Infinity>();
        gap = std::max(gap, (grid.to_grid(a.v) - grid.to_grid(b.v)).lpNorm<Eigen::Infinity>());
        gap = std::max(gap, (grid.to_grid(a.w) - grid.to_grid(b.w)).lpNorm<Eigen::Infinity>());
        gap = std::max(gap, (a.times - b.times).lpNorm<Eigen::Infinity>());
        r.measured = gap;
        r.threshold = 10.0 * opt.tol;
        r.pass = gap <= r.threshold;
        r.detail = fmt("k_max=64 T=0.04 N_t=80; segments full %.0f, joined %.0f", full.segments, joined.segments);
    });
}

CriterionResult criterion_quench()
{
    return timed(10, "quench dichotomy vs oracle", [](CriterionResult& r) {
        const QuenchSetup q = quench_setup();
        const SpectralGrid grid(q.k_max);
        const CoupledState init{Vec::Constant(q.k_max, q.params.lift.theta1), StateVW::zero(q.k_max), 0.0};
        RunOptions opt;
        opt.T = q.T;
        opt.N_t = q.N_t;
        const RunReport run = run_coupled(grid, q.params, init, opt);
        ReferenceOptions ro;
        ro.record_every = 1000;
        ro.quench_eps = opt.quench_threshold(q.params);
        ro.u_cap = opt.pressure_cap(q.params);
        const ReferenceRun ref = integrate_reference(grid, q.params, init, q.T, q.oracle_dt, ro);
        const bool quenched = run.termination == Termination::quench &&
                              run.series.back().min_w <= opt.quench_threshold(q.params);
        const double rel = std::abs(run.quench_time - ref.event_time) / ref.event_time;
        r.measured = rel;
        r.threshold = 0.05;
        r.pass = quenched && ref.status == Status::quench && rel <= 0.05;
        r.detail = fmt("beta_F=100 beta_p=0.1 k_max=32: driver t_q=%.6f oracle t_q=%.6f", run.quench_time,
                       ref.event_time) +
                   " driver termination " + to_string(run.termination);
    });
}

CriterionResult criterion_audits()
{
    return timed(11, "calibrated-constant audits", [](CriterionResult& r) {
        const SpectralGrid grid(32);
        const ModelParams p = smooth_params();
        const CoupledState init = smooth_initial_state(grid);
        const double C = sobolev_embedding_constant(grid.k_max());
        const double kappa = min_gap_fine(grid, init.vw.w.coeffs, p.lift.theta2);
        const double rr = default_radius(kappa, C);

        const CalibratedCheck alg = algebra_property_check(10000, 64);
        const InversePowerCheck inv = inverse_power_bounds_check(grid, p, init.vw.w.coeffs, rr, 1000);
        const CalibratedCheck lg = lipschitz_G_audit(grid, p, init.vw.w.coeffs, rr, 1000, 1000);
        const CalibratedCheck lf = lipschitz_F_audit(grid, p, init, 0.5, 0.01, 8, 200, 1000);
        const HolderAudit ho = holder_F_audit(grid, p, init, 0.5, 0.01, 8, 200, 1000);
        const int viol = alg.violations + inv.violations + lg.violations + lf.violations + ho.A.violations +
                         ho.B.violations;
        r.measured = viol;
        r.threshold = 0.0;
        r.pass = alg.pass && inv.pass && lg.pass && lf.pass && ho.pass;
        r.detail = fmt("C_alg=%.3g L_G=%.3g L_e=%.3g", alg.calibrated, lg.calibrated, lf.calibrated) +
                   fmt(" L_A=%.3g L_B=%.3g", ho.A.calibrated, ho.B.calibrated) +
                   fmt(" inverse-power worst %.2e/%.2e", inv.worst_power_ratio, inv.worst_diff_ratio);
    });
}

std::vector<CriterionResult> run_all_criteria()
{
    return {criterion_closed_form(),        criterion_regularity(),  criterion_unitarity(),
            criterion_picard_contraction(), criterion_oracle_equivalence(), criterion_lower_bound(),
            criterion_elliptic(),           criterion_frechet(),     criterion_cocycle(),
            criterion_quench(),             criterion_audits()};
}

}  // namespace mems
