#include <doctest.h>

#include "mems/driver.hpp"
#include "mems/grid_norms.hpp"
#include "mems/sampling.hpp"
#include "mems/verify_bench.hpp"

#include <cmath>

using namespace mems;

namespace {

ModelParams params(double bF, double bp, double eps1 = 0.5)
{
    ModelParams p;
    p.beta_F = bF;
    p.beta_p = bp;
    p.eps1 = eps1;
    return p;
}

PstarOperator unit_operator(int n)
{
    return assemble_Pstar(GridField::constant(n, 1.0), GridField::constant(n, 0.0), GridField::constant(n, 1.0),
                          params(1.0, 1.0, 1.0));
}

Vec discrete_sine(int n, int k)
{
    Vec g(n);
    for (int j = 1; j <= n; ++j) g(j - 1) = std::sin(k * M_PI * GridField::node(j, n));
    return g;
}

double discrete_laplacian_eig(int n, int k)
{
    const double h = 1.0 / (n + 1);
    return -4.0 / (h * h) * std::pow(std::sin(k * M_PI * h / 2), 2);
}

// Plate at rest in its stationary profile under u = theta1.
CoupledState equilibrium(const SpectralGrid& grid, const ModelParams& p)
{
    return {Vec::Constant(grid.n(), p.lift.theta1), steady_plate(grid, p), 0.0};
}

PstarOperator operator_at(const SpectralGrid& grid, const ModelParams& p, const CoupledState& s)
{
    return assemble_Pstar(GridField(s.u), GridField(Vec(grid.to_grid(s.vw.v.coeffs))),
                          GridField(Vec(grid.to_grid(s.vw.w.coeffs).array() + p.lift.theta2)), p);
}

}  // namespace

TEST_CASE("eval_F special cases")
{
    const int n = 10;
    const ModelParams p = params(1, 1);
    const auto z = eval_F(GridField::constant(n, 1.0), GridField::constant(n, 0.0), GridField::constant(n, 1.3), p);
    CHECK(z.values.cwiseAbs().maxCoeff() == 0.0);
    const auto f = eval_F(GridField::constant(n, 1.0), GridField::constant(n, 1.0), GridField::constant(n, 2.0), p);
    CHECK((f.values.array() + 0.5).abs().maxCoeff() < 1e-15);
    CHECK_THROWS_AS(eval_F(GridField::constant(n, 1.0), GridField::constant(n, 0.0), GridField::constant(n, 0.0), p),
                    QuenchError);
}

TEST_CASE("P* with unit coefficients is the Laplacian, second order in h")
{
    double prev_err = 0.0;
    for (int n : {15, 31, 63, 127}) {
        const PstarOperator op = unit_operator(n);
        Eigen::SelfAdjointEigenSolver<Mat> es(op.matrix);
        const Vec ev = es.eigenvalues().reverse();  // descending: -pi^2 first
        for (int k = 1; k <= 4; ++k) CHECK(std::abs(ev(k - 1) - discrete_laplacian_eig(n, k)) < 1e-9 * std::abs(ev(k - 1)));
        const double err = std::abs(ev(0) + M_PI * M_PI);
        if (prev_err > 0.0) CHECK(prev_err / err == doctest::Approx(4.0).epsilon(0.02));
        prev_err = err;
    }
}

TEST_CASE("P* rejects inadmissible coefficients")
{
    const int n = 8;
    const ModelParams p = params(1, 1, 0.5);
    CHECK_THROWS(assemble_Pstar(GridField::constant(n, 0.4), GridField::constant(n, 0.0), GridField::constant(n, 1.0), p));
    CHECK_THROWS(assemble_Pstar(GridField::constant(n, 1.0), GridField::constant(n, 0.0), GridField::constant(n, 0.0), p));
    CHECK_THROWS(assemble_Pstar(GridField::constant(n, 1.0), GridField::constant(n + 1, 0.0), GridField::constant(n, 1.0), p));
}

TEST_CASE("elliptic form: unit coefficients and random coefficient triples")
{
    const int n = 31;
    const PstarOperator op = unit_operator(n);
    const auto rep = elliptic_form_check(op, params(1, 1, 1.0), 300);
    CHECK(rep.K == 1.0);
    CHECK(rep.K_o == 0.0);
    CHECK(rep.pass);
    Rng rng(2);
    const Mat B = principal_part(op);
    for (int t = 0; t < 20; ++t) {
        Vec q(n);
        for (auto& x : q) x = uniform(rng, -1, 1);
        const double h = op.h;
        CHECK(-h * q.dot(B * q) == doctest::Approx(std::pow(interior_dnorm(q), 2)).epsilon(1e-12));
    }
    CHECK(-op.h * Vec::Zero(n).dot(B * Vec::Zero(n)) == 0.0);

    const SpectralGrid grid(n);
    for (int c = 0; c < 3; ++c) {
        ModelParams p = params(1, 1, 0.5);
        const Vec u = grid.to_grid(random_pinned_modes(rng, n, 6, 0.5)).array() + 1.0;
        const Vec w = grid.to_grid(random_pinned_modes(rng, n, 6, 0.3)).array() + 1.0;
        const Vec v = grid.to_grid(random_pinned_modes(rng, n, 6, 1.0));
        const PstarOperator o = assemble_Pstar(GridField(u), GridField(v), GridField(w), p);
        const auto r = elliptic_form_check(o, p, 2000, 40 + c);
        CHECK(r.violations == 0);
        CHECK(r.K == doctest::Approx(0.5 * p.eps1 * std::pow(std::min(1.0, w.minCoeff()), 2)));
    }
}

TEST_CASE("sector: resolvent bounds on the Laplacian and singular lambda")
{
    const int n = 31;
    const PstarOperator op = unit_operator(n);
    const double theta = 0.8 * M_PI;
    const auto rep = sector_check(op, {0.0, 0.5 * M_PI, theta, -theta}, {1.0, 10.0, 1e3, 1e5});
    CHECK(rep.M_bound <= 1.0 / std::sin(M_PI - theta) + 1e-9);
    for (const auto& s : rep.samples)
        if (s.lambda.imag() == 0.0) CHECK(s.product <= 1.0 + 1e-12);
    CHECK_THROWS_AS(resolvent_norm(op.matrix, discrete_laplacian_eig(n, 3)), SectorViolation);
    CHECK_THROWS_AS(sector_check(op, {M_PI}, {1.0}), SectorViolation);
}

TEST_CASE("graph norm: discrete eigenvector closed form, gamma0 >= 1, h-stable")
{
    for (int n : {31, 63}) {
        const PstarOperator op = unit_operator(n);
        const double lam = std::abs(discrete_laplacian_eig(n, 1));
        CHECK(graph_norm_ratio(op, discrete_sine(n, 1)) ==
              doctest::Approx(std::sqrt(1 + lam + lam * lam) / (1 + lam)).epsilon(1e-10));
    }
    const auto a = graph_norm_equivalence(unit_operator(63), 200);
    const auto b = graph_norm_equivalence(unit_operator(127), 200);
    CHECK(a.gamma0 >= 1.0);
    CHECK(std::abs(b.gamma0 / a.gamma0 - 1.0) <= 0.1);

    const SpectralGrid g1(63), g2(127);
    const ModelParams p = params(1, 1);
    const CoupledState s1 = smooth_initial_state(g1), s2 = smooth_initial_state(g2);
    const double r1 = graph_norm_equivalence(operator_at(g1, p, s1), 200).gamma0;
    const double r2 = graph_norm_equivalence(operator_at(g2, p, s2), 200).gamma0;
    CHECK(r1 >= 1.0);
    CHECK(std::abs(r2 / r1 - 1.0) <= 0.1);
}

TEST_CASE("linear parabolic solve: initial value, heat kernel, steady limit")
{
    const double T = 0.02;
    const int N = 20;
    double prev = 0.0;
    for (int n : {15, 31, 63}) {
        const PstarOperator op = unit_operator(n);
        const Vec g = discrete_sine(n, 2);
        const Mat phi = linear_parabolic_solve(op, Mat::Zero(n, N + 1), g, T, N);
        CHECK(phi.col(0) == g);
        const double err = (phi.col(N) - std::exp(-4 * M_PI * M_PI * T) * g).cwiseAbs().maxCoeff();
        if (prev > 0.0) CHECK(prev / err == doctest::Approx(4.0).epsilon(0.05));
        prev = err;
    }
    const int n = 31;
    const SpectralGrid grid(n);
    const ModelParams p = params(1, 1);
    const PstarOperator op = operator_at(grid, p, smooth_initial_state(grid));
    const Vec f = grid.to_grid(Vec::Unit(n, 0));
    const Mat phi = linear_parabolic_solve(op, f.replicate(1, 41), Vec::Zero(n), 4.0, 40);
    const Vec steady = -op.matrix.partialPivLu().solve(f);
    CHECK((phi.col(40) - steady).norm() <= 1e-10 * steady.norm());
}

TEST_CASE("Gamma iteration: equilibrium in one iteration, initial value kept, contraction")
{
    const int k = 24;
    const SpectralGrid grid(k);
    const ModelParams p = params(0.8, 1.0);
    const CoupledState eq = equilibrium(grid, p);
    const PstarOperator op = operator_at(grid, p, eq);
    const ParabolicPropagator prop = make_propagator(op, 0.01 / 10);
    const GammaResult r = gamma_iterate(grid, p, eq, op, prop, 10);
    CHECK(r.report.iterations == 1);
    CHECK(r.report.converged);
    for (int m = 0; m <= 10; ++m) CHECK((r.u.samples.col(m) - eq.u).cwiseAbs().maxCoeff() < 1e-10);

    const CoupledState s = smooth_initial_state(grid);
    const PstarOperator op2 = operator_at(grid, p, s);
    const auto gn = graph_norm_equivalence(op2, 200);
    GammaHorizonInputs gi;
    gi.gamma0 = gn.gamma0;
    gi.pstar_norm = gn.pstar_norm;
    gi.kappa = min_gap(grid, s, p);
    gi.C = sobolev_embedding_constant(k);
    gi.u0_H2 = grid_norm(GridField(s.u), 1.0, 2);
    const HorizonEstimate he = estimate_horizon(grid, p, s.vw, GridField(s.u));
    const double T = std::min(he.T0_calibrated, gamma_horizon_formula(gi));
    const GammaResult g = gamma_iterate(grid, p, s, op2, make_propagator(op2, T / 20), 20);
    CHECK(g.report.converged);
    CHECK(g.report.max_ratio() <= 0.5);
    CHECK(g.u.samples.col(0) == s.u);
}

TEST_CASE("frechet_F: zero direction, reduces to P* at t = 0, first-order differences")
{
    const int k = 24;
    const SpectralGrid grid(k);
    const ModelParams p = params(0.8, 1.0);
    const CoupledState s = smooth_initial_state(grid);
    const PstarOperator op = operator_at(grid, p, s);
    const int N = 16;
    const double T = 0.01;
    PressurePath u;
    u.times = uniform_times(T, N);
    u.samples = s.u.replicate(1, N + 1);
    for (int m = 0; m <= N; ++m) u.samples.col(m) += 0.02 * u.times(m) / T * discrete_sine(k, 2);
    PicardOptions opt;
    opt.tol = 1e-13;
    const VWPath vw = picard_dispersive(grid, p, u, s.vw, opt).first;

    const Mat qz = Mat::Zero(k, N + 1);
    CHECK(frechet_F(grid, p, u, qz, vw, frechet_W(grid, p, u, qz, vw, opt)).norm() == 0.0);

    Mat q(k, N + 1);
    for (int m = 0; m <= N; ++m) q.col(m) = 20.0 * (discrete_sine(k, 1) + u.times(m) / T * discrete_sine(k, 3));
    const ModePath dW = frechet_W(grid, p, u, q, vw, opt);
    const Mat D = frechet_F(grid, p, u, q, vw, dW);
    const Vec at0 = op.matrix * q.col(0);
    CHECK((D.col(0) - at0).norm() <= 1e-12 * at0.norm());

    const Mat F0 = F_path(grid, p, u, vw);
    std::vector<double> errs;
    for (double h : {1e-2, 1e-3, 1e-4}) {
        PressurePath uh = u;
        uh.samples += h * q;
        const VWPath wh = picard_dispersive(grid, p, uh, s.vw, opt).first;
        errs.push_back(((F_path(grid, p, uh, wh) - F0) / h - D).cwiseAbs().maxCoeff());
    }
    CHECK(std::log10(errs[0] / errs[1]) >= 0.9);
    CHECK(std::log10(errs[1] / errs[2]) >= 0.9);
}

TEST_CASE("Holder measure: constant path and zero direction")
{
    const int k = 16;
    const SpectralGrid grid(k);
    const ModelParams p = params(0.8, 1.0);
    const CoupledState s = smooth_initial_state(grid);
    const PstarOperator op = operator_at(grid, p, s);
    const PressurePath u = PressurePath::constant(s.u, 0.01, 8);
    const HolderMeasure m = holder_F_measure(grid, p, u, Mat::Zero(k, 9), s.vw, op, 0.5);
    CHECK(m.B == 0.0);
    CHECK(m.L_U > 0.0);
    // [u]_alpha = 0, so A is the F increment over L_U alone.
    PicardOptions opt;
    opt.tol = 1e-12;
    const Mat F = F_path(grid, p, u, picard_dispersive(grid, p, u, s.vw, opt).first);
    double a = 0.0;
    for (int i = 0; i <= 8; ++i)
        for (int j = i + 1; j <= 8; ++j)
            a = std::max(a, interior_l2(F.col(j) - F.col(i)) / (m.L_U * std::sqrt(u.times(j) - u.times(i))));
    CHECK(m.A == doctest::Approx(a).epsilon(1e-12));
    const auto c = holder_F_check(grid, p, u, Mat::Zero(k, 9), s.vw, op, 0.5, 2 * m.A, 1.0);
    CHECK(c.pass);
}

TEST_CASE("method-of-lines right-hand side")
{
    const int k = 24;
    const SpectralGrid grid(k);
    const ModelParams p = params(0.8, 1.0);
    const CoupledState eq = equilibrium(grid, p);
    const CoupledRate r = mol_rhs(grid, p, eq);
    CHECK(r.du.cwiseAbs().maxCoeff() == 0.0);
    CHECK(r.dv.cwiseAbs().maxCoeff() < 1e-10);
    CHECK(r.dw.cwiseAbs().maxCoeff() == 0.0);

    const CoupledState s = smooth_initial_state(grid);
    const CoupledRate q = mol_rhs(grid, p, s);
    CHECK(q.dw == s.vw.v.coeffs);
    CoupledState flat = s;
    flat.u.setConstant(1.0);
    CHECK(mol_rhs(grid, p, flat).du.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("reference integrator: linear plate, order 4, step limit")
{
    const int k = 8;
    const SpectralGrid grid(k);
    const ModelParams p = params(0.0, 0.0);
    Rng rng(12);
    CoupledState s{Vec::Ones(k), StateVW(ModeVector(random_pinned_modes(rng, k, k, 1.0)),
                                         ModeVector(random_pinned_modes(rng, k, k, 0.1))), 0.0};
    const double T = 0.02, dt0 = max_reference_step(grid);
    CHECK_THROWS_AS(integrate_reference(grid, p, s, T, 2 * dt0), StepSizeError);
    const StateVW exact = semigroup_apply(s.vw, grid.spectrum(), T);
    double prev = 0.0;
    for (int l = 0; l < 3; ++l) {
        const ReferenceRun run = integrate_reference(grid, p, s, T, dt0 / (1 << l));
        const CoupledState e = run.trajectory.state(static_cast<int>(run.trajectory.times.size()) - 1);
        const double err = norm_X(Vec(e.vw.v.coeffs - exact.v.coeffs), Vec(e.vw.w.coeffs - exact.w.coeffs));
        const double drift = std::abs(norm_X(e.vw) - norm_X(s.vw));
        CHECK(drift <= 10 * err + 1e-14);
        if (prev > 0.0) CHECK(std::log2(prev / err) >= 3.8);
        prev = err;
    }
}

TEST_CASE("quench monitor")
{
    const int k = 16;
    const SpectralGrid grid(k);
    const ModelParams p = params(0.5, 1.0);
    const CoupledState s = smooth_initial_state(grid);
    CHECK(quench_monitor(grid, s, p, 1e-3, 1e6) == Status::alive);
    CoupledState low = s;
    low.vw.w.coeffs.setZero();
    low.vw.w.coeffs(0) = -1.0 + 0.5e-3;  // min w = quench_eps / 2 at x = 1/2
    CHECK(quench_monitor(grid, low, p, 1e-3, 1e6) == Status::quench);
    CoupledState hot = s;
    hot.u(3) = 2e6;
    CHECK(quench_monitor(grid, hot, p, 1e-3, 1e6) == Status::pressure_blowup);
}

TEST_CASE("driver: equilibrium, continuation identity and cocycle")
{
    const int k = 24;
    const SpectralGrid grid(k);
    const ModelParams p = params(0.8, 1.0);
    RunOptions opt;
    opt.T = 0.02;
    opt.N_t = 20;
    opt.relinearize = false;
    const RunReport eq = run_coupled(grid, p, equilibrium(grid, p), opt);
    CHECK(eq.termination == Termination::converged);
    for (double r : mass_balance_residual(grid, p, eq.trajectory)) CHECK(r < 1e-9);

    const RunReport half = run_coupled(grid, p, smooth_initial_state(grid), opt);
    REQUIRE(half.termination == Termination::converged);
    const RunReport same = continue_run(grid, half, 0.0);
    CHECK(same.trajectory.u == half.trajectory.u);
    CHECK(same.trajectory.w == half.trajectory.w);
    CHECK_THROWS(continue_run(grid, half, 0.0015));

    RunOptions full_opt = opt;
    full_opt.T = 0.04;
    full_opt.N_t = 40;
    const RunReport full = run_coupled(grid, p, smooth_initial_state(grid), full_opt);
    const RunReport two = continue_run(grid, half, 0.02);
    REQUIRE(two.termination == Termination::converged);
    const CoupledState a = full.final_state(), b = two.final_state();
    CHECK((a.u - b.u).cwiseAbs().maxCoeff() <= 10 * opt.tol);
    CHECK((a.vw.w.coeffs - b.vw.w.coeffs).cwiseAbs().maxCoeff() <= 10 * opt.tol);
}

TEST_CASE("driver: lower bound and positivity on converged runs, mass residual O(h^2)")
{
    const ModelParams p = params(0.5, 1.0);
    std::vector<double> peak;
    for (int k : {32, 64}) {
        const SpectralGrid grid(k);
        RunOptions opt;
        opt.T = 0.02;
        opt.N_t = 40;
        const RunReport r = run_coupled(grid, p, smooth_initial_state(grid), opt);
        REQUIRE(r.termination == Termination::converged);
        for (const auto& d : r.series) CHECK(d.min_w >= 0.5 * r.horizon.kappa);
        CHECK(r.trajectory.u.minCoeff() >= 0.5 * p.eps1);
        const auto res = mass_balance_residual(grid, p, r.trajectory);
        // Skip the first interval (initial layer).
        peak.push_back(*std::max_element(res.begin() + 2, res.end()));
    }
    CHECK(peak[0] / peak[1] >= 3.0);
}

TEST_CASE("driver: quench terminates and cannot be continued")
{
    const QuenchSetup q = quench_setup();
    const SpectralGrid grid(q.k_max);
    Vec u = Vec::Constant(grid.n(), q.params.lift.theta1);
    const CoupledState init{u, StateVW::zero(q.k_max), 0.0};
    RunOptions opt;
    opt.T = q.T;
    opt.N_t = q.N_t;
    const RunReport r = run_coupled(grid, q.params, init, opt);
    REQUIRE(r.termination == Termination::quench);
    CHECK(std::isfinite(r.quench_time));
    CHECK(r.series.back().min_w <= 1e-3 * q.params.lift.theta2 * 1.5);
    CHECK_THROWS_AS(continue_run(grid, r, 0.01), std::logic_error);
}
