#include <doctest.h>

#include "mems/dispersive.hpp"
#include "mems/grid_norms.hpp"
#include "mems/sampling.hpp"

#include <cmath>

using namespace mems;

namespace {

ModelParams params(double bF, double bp, double t1 = 1.0, double t2 = 1.0)
{
    ModelParams p;
    p.beta_F = bF;
    p.beta_p = bp;
    p.lift = BoundaryLift(t1, t2);
    p.eps1 = 0.5;
    return p;
}

// Pressure path u0 + (t/T) a with u0 = theta1 + bump.
PressurePath ramp_path(const SpectralGrid& grid, double theta1, double T, int steps, const Vec& bump, const Vec& a)
{
    PressurePath u;
    u.times = uniform_times(T, steps);
    u.samples.resize(grid.n(), steps + 1);
    for (int m = 0; m <= steps; ++m) u.samples.col(m) = (bump + (u.times(m) / T) * a).array() + theta1;
    return u;
}

StateVW smooth_plate(int k, double w1 = 0.05, double v2 = 0.3)
{
    Vec v = Vec::Zero(k), w = Vec::Zero(k);
    w(0) = w1;
    v(1) = v2;
    return {ModeVector(v), ModeVector(w)};
}

}  // namespace

TEST_CASE("eval_G arithmetic")
{
    auto g = eval_G(GridField(Vec::Zero(8)), params(1, 1));
    CHECK((g.values.array() + 1.0).abs().maxCoeff() == 0.0);
    g = eval_G(GridField(Vec::Ones(8)), params(2, 3, 2, 1));
    CHECK((g.values.array() - 2.5).abs().maxCoeff() < 1e-15);
    g = eval_G(GridField(Vec::Constant(8, -0.5)), params(1, 1));
    CHECK((g.values.array() + 4.0).abs().maxCoeff() < 1e-15);
    CHECK_THROWS_AS(eval_G(GridField(Vec::Constant(8, -1.0)), params(1, 1)), QuenchError);
}

TEST_CASE("estimate_LG: precondition and plugged constants for w0 = 1")
{
    const int n = 32;
    const ModelParams p = params(0.7, 1.0);
    const GridField w0 = GridField::constant(n, 1.0);
    const double C = sobolev_embedding_constant(n);
    CHECK_THROWS(estimate_LG(p, w0, 0.6 / C));
    CHECK_THROWS(estimate_LG(p, w0, 0.0));
    // kappa = 1, ||w0||_{H^2} = 1
    CHECK(grid_norm(w0, 1.0, 2) == doctest::Approx(1.0));
    const double ct = 1.0 / (2 * C) + 1.0;
    const double br = 4.0 + 16.0 * C * ct;
    const double C1 = std::sqrt(4.0 * C + 16.0 * ct * ct + br * br * ct * ct);
    CHECK(estimate_LG(p, w0, 0.4 / C) == doctest::Approx(2.0 * 0.7 * C1 * C1 * C1).epsilon(1e-13));
    const auto c = inverse_power_constants(C, 1.0, 1.0);
    CHECK(c.C1 == doctest::Approx(C1));
    CHECK(c.C2 == doctest::Approx(2 * std::pow(C1, 3)));
}

TEST_CASE("Monte Carlo G-Lipschitz ratios stay below the formula constant")
{
    const SpectralGrid grid(32);
    const ModelParams p = params(1.0, 1.0);
    const Vec w0 = smooth_plate(32).w.coeffs;
    const GridField w0g(Vec(grid.to_grid(w0).array() + 1.0));
    const double C = sobolev_embedding_constant(32);
    const double kappa = gap_lower_bound(w0g, p);
    const double r = default_radius(kappa, C);
    const auto s = sample_LG(grid, p, w0, r, 1000, 5);
    CHECK(s.samples > 900);
    CHECK(s.sup_ratio > 0.0);
    CHECK(s.sup_ratio <= estimate_LG(p, w0g, r));
}

TEST_CASE("T0 formula arithmetic and monotonicity")
{
    HorizonInputs in{0.1, 1.0, 2.0, 1.0, 1.0, 1.0};
    CHECK(t0_formula(in) == doctest::Approx(0.1));
    in.delta_o = 10.0;
    double prev = t0_formula(in);
    for (double L : {4.0, 16.0, 1e3, 1e6, 1e12}) {
        in.L_G = L;
        const double t = t0_formula(in);
        CHECK(t < prev);
        prev = t;
    }
    CHECK(prev < 1e-12);
}

TEST_CASE("Picard at T below the formula T0 contracts with ratio <= T M0 L_G")
{
    const SpectralGrid grid(24);
    const ModelParams p = params(0.5, 1.0);
    const StateVW init = smooth_plate(24);
    const Vec w0 = grid.to_grid(init.w.coeffs).array() + 1.0;
    const Vec bump = 0.05 * grid.to_grid(Vec::Unit(24, 0));
    const double C = sobolev_embedding_constant(24);
    const double r = default_radius(gap_lower_bound(GridField(w0), p), C);
    const double LG = estimate_LG(p, GridField(w0), r);
    const double T0 = estimate_T0(p, GridField(w0), GridField(Vec(bump.array() + 1.0)), r, 1.0, 1.0);
    CHECK(T0 > 0.0);
    const double T = 0.9 * T0;
    const auto [path, rep] = picard_dispersive(grid, p, ramp_path(grid, 1.0, T, 32, bump, 0.1 * bump), init);
    CHECK(rep.converged);
    CHECK(rep.max_ratio() <= 0.5);
    CHECK(rep.max_ratio() <= 1.05 * T * LG);
}

TEST_CASE("Picard with zero couplings is the free semigroup after one iteration")
{
    const SpectralGrid grid(16);
    const ModelParams p = params(0.0, 0.0);
    Rng rng(4);
    const StateVW init(ModeVector(random_pinned_modes(rng, 16, 16, 1.0)), ModeVector(random_pinned_modes(rng, 16, 16, 0.1)));
    const PressurePath u = PressurePath::constant(Vec::Ones(16), 0.2, 40);
    const auto [path, rep] = picard_dispersive(grid, p, u, init);
    CHECK(rep.iterations == 1);
    const double n0 = norm_X(init);
    for (int m = 0; m <= 40; ++m) {
        const StateVW s = semigroup_apply(init, grid.spectrum(), u.times(m));
        CHECK(norm_X(Vec(path.v.col(m) - s.v.coeffs), Vec(path.w.col(m) - s.w.coeffs)) <= 1e-12 * n0);
        CHECK(std::abs(norm_X(path.v.col(m), path.w.col(m)) - n0) <= 1e-10 * n0);
    }
}

TEST_CASE("constant G with zero data matches the forced oscillator")
{
    // beta_F = 0, theta1 = 2, u = theta1: G = beta_p (theta1 - 1) = 1 everywhere.
    const int k = 16;
    const SpectralGrid grid(k);
    const ModelParams p = params(0.0, 1.0, 2.0, 1.0);
    const double T = 0.05;
    const PressurePath u = PressurePath::constant(Vec::Constant(k, 2.0), T, 20);
    const auto [path, rep] = picard_dispersive(grid, p, u, StateVW::zero(k));
    const int nf = grid.n_fine();
    const auto& spectrum = grid.spectrum();
    for (int m = 0; m < k; ++m) {
        // Fine-grid DST of the constant 1, truncated to k modes.
        const int kk = m + 1;
        const double c = (kk % 2) ? 2.0 / (nf + 1) / std::tan(kk * M_PI / (2.0 * (nf + 1))) : 0.0;
        for (int j = 0; j <= 20; ++j) {
            const double t = u.times(j);
            const double w = c * 2.0 * std::pow(std::sin(0.5 * spectrum.omega(m) * t), 2) / spectrum.mu(m);
            CHECK(std::abs(path.w(m, j) - w) <= 1e-14 + 1e-12 * std::abs(c) / spectrum.mu(m));
        }
    }
}

TEST_CASE("solution operator: initial value, determinism, steady profile, uniqueness")
{
    const int k = 24;
    const SpectralGrid grid(k);
    const ModelParams p = params(0.8, 1.0);
    const StateVW init = smooth_plate(k);
    const Vec bump = 0.05 * grid.to_grid(Vec::Unit(k, 0));
    const PressurePath u = ramp_path(grid, 1.0, 0.01, 20, bump, 0.1 * bump);
    const PlatePath a = solution_operator_W(grid, p, u, init);
    const PlatePath b = solution_operator_W(grid, p, u, init);
    CHECK(a.modes.v.col(0) == init.v.coeffs);
    CHECK(a.modes.w.col(0) == init.w.coeffs);
    CHECK(a.modes.v == b.modes.v);
    CHECK(a.modes.w == b.modes.w);
    CHECK((a.w.col(0) - (grid.to_grid(init.w.coeffs).array() + 1.0).matrix()).norm() < 1e-15);

    // Two different initial guesses converge to the same fixed point.
    PicardOptions opt;
    opt.tol = 1e-11;
    VWPath guess = a.modes;
    guess.v.setZero();
    guess.w.setConstant(0.01);
    const auto c = picard_dispersive(grid, p, u, init, opt, &guess).first;
    const auto d = picard_dispersive(grid, p, u, init, opt).first;
    CHECK(sup_norm_X(c.v - d.v, c.w - d.w) <= 10 * opt.tol);

    // Steady plate under u = theta1 stays put.
    const StateVW steady = steady_plate(grid, p);
    const PressurePath flat = PressurePath::constant(Vec::Ones(k), 0.05, 25);
    const PlatePath s = solution_operator_W(grid, p, flat, steady, 1e-12);
    for (int m = 0; m <= 25; ++m) {
        CHECK(norm_X(s.modes.v.col(m), Vec(s.modes.w.col(m) - steady.w.coeffs)) < 1e-9);
    }
}

TEST_CASE("eval_W2 on constant fields")
{
    const int k = 12;
    const SpectralGrid grid(k);
    const ModelParams p = params(1.0, 1.0);
    VWPath vw;
    vw.times = uniform_times(1.0, 2);
    vw.v = Mat::Zero(k, 3);
    vw.w = Mat::Zero(k, 3);
    CHECK(eval_W2(grid, vw, p).norm() == 0.0);
    vw.v = grid.to_modes(Mat::Ones(k, 3));
    vw.w = grid.to_modes(Mat::Ones(k, 3));  // w = 2
    CHECK((eval_W2(grid, vw, p).array() - 0.5).abs().maxCoeff() < 1e-14);
}

TEST_CASE("frechet_W: linearity, zero at t = 0, first-order finite differences")
{
    const int k = 24;
    const SpectralGrid grid(k);
    const ModelParams p = params(0.8, 1.0);
    const StateVW init = smooth_plate(k);
    const Vec bump = 0.05 * grid.to_grid(Vec::Unit(k, 0));
    const int steps = 16;
    const double T = 0.02;
    const PressurePath u = ramp_path(grid, 1.0, T, steps, bump, 0.1 * bump);
    PicardOptions opt;
    opt.tol = 1e-13;
    const VWPath vw = picard_dispersive(grid, p, u, init, opt).first;

    const ModePath zero = frechet_W(grid, p, u, Mat::Zero(k, steps + 1), vw, opt);
    CHECK(zero.v.norm() == 0.0);
    CHECK(zero.w.norm() == 0.0);

    Mat q(k, steps + 1);
    for (int m = 0; m <= steps; ++m)
        q.col(m) = 50.0 * ((1.0 + u.times(m) / T) * grid.to_grid(Vec::Unit(k, 1)) + grid.to_grid(Vec::Unit(k, 0)));
    const ModePath d = frechet_W(grid, p, u, q, vw, opt);
    CHECK(d.v.col(0).norm() == 0.0);
    CHECK(d.w.col(0).norm() == 0.0);

    // Large q so the curvature of W sits well above the rounding floor at h = 1e-4.
    std::vector<double> errs;
    for (double h : {1e-2, 1e-3, 1e-4}) {
        PressurePath uh = u;
        uh.samples += h * q;
        const VWPath wh = picard_dispersive(grid, p, uh, init, opt).first;
        errs.push_back(sup_norm_X((wh.v - vw.v) / h - d.v, (wh.w - vw.w) / h - d.w));
    }
    CHECK(std::log10(errs[0] / errs[1]) >= 0.9);
    CHECK(std::log10(errs[1] / errs[2]) >= 0.9);
}

TEST_CASE("empirical W-Lipschitz: zero for equal paths, below L_W, stable in the linear regime")
{
    const int k = 24;
    const SpectralGrid grid(k);
    const ModelParams p = params(0.8, 1.0);
    const StateVW init = smooth_plate(k);
    const Vec bump = 0.05 * grid.to_grid(Vec::Unit(k, 0));
    const Vec u0 = bump.array() + 1.0;
    const HorizonEstimate he = estimate_horizon(grid, p, init, GridField(u0));
    const double T = he.T0_calibrated;
    const PressurePath u = ramp_path(grid, 1.0, T, 20, bump, 0.1 * bump);
    CHECK(empirical_lipschitz_W(grid, p, u, u, init) == 0.0);

    const double LW = T * p.beta_p * std::exp(he.L_G_calibrated * T);
    Rng rng(8);
    std::vector<double> ratios;
    const Vec dir = grid.to_grid(random_pinned_modes(rng, k, 6, 1.0));
    for (double eps : {1e-2, 1e-3, 1e-4}) {
        PressurePath u2 = u;
        for (int m = 0; m <= 20; ++m) u2.samples.col(m) += eps * (u.times(m) / T) * dir;
        const double q = empirical_lipschitz_W(grid, p, u, u2, init);
        CHECK(q <= LW);
        ratios.push_back(q);
    }
    CHECK(std::abs(ratios[0] / ratios[2] - 1.0) <= 0.2);
    CHECK(std::abs(ratios[1] / ratios[2] - 1.0) <= 0.2);
}

TEST_CASE("empirical Holder seminorms")
{
    const int k = 16;
    const SpectralGrid grid(k);
    const PressurePath flat = PressurePath::constant(Vec::Ones(k), 1.0, 10);
    CHECK(empirical_holder(flat, 0.5) == 0.0);
    // Linear-in-time path: alpha = 1 recovers the slope in H^2.
    const Vec a = grid.to_grid(Vec::Unit(k, 2));
    PressurePath lin = flat;
    for (int m = 0; m <= 10; ++m) lin.samples.col(m) += lin.times(m) * a;
    CHECK(empirical_holder(lin, 1.0) == doctest::Approx(grid_norm0(a, 2)).epsilon(1e-12));

    VWPath vw;
    vw.times = flat.times;
    vw.v = Mat::Zero(k, 11);
    vw.w = Mat::Zero(k, 11);
    for (int m = 0; m <= 10; ++m) vw.w(1, m) = 0.3 * vw.times(m);
    CHECK(empirical_holder(vw, 1.0) == doctest::Approx(0.3 * norm_X(Vec::Zero(k), Vec::Unit(k, 1))));
}

TEST_CASE("lower bound preserved inside the admissible ball")
{
    const int k = 24;
    const SpectralGrid grid(k);
    Rng rng(31);
    for (int c = 0; c < 5; ++c) {
        const ModelParams p = params(uniform(rng, 0.2, 1.5), uniform(rng, 0.2, 1.5));
        const StateVW init(ModeVector(random_pinned_modes(rng, k, 8, 0.5, 3.0)),
                           ModeVector(random_pinned_modes(rng, k, 8, uniform(rng, 0.0, 0.4))));
        const Vec bump = grid.to_grid(random_pinned_modes(rng, k, 6, 0.3));
        const HorizonEstimate he = estimate_horizon(grid, p, init, GridField(Vec(bump.array() + 1.0)));
        const PressurePath u = ramp_path(grid, 1.0, he.T0_calibrated, 32, bump, 0.1 * bump);
        const VWPath vw = picard_dispersive(grid, p, u, init).first;
        double dev = 0.0;
        for (int m = 0; m <= 32; ++m) dev = std::max(dev, norm_Hk(Vec(vw.w.col(m) - init.w.coeffs), 2));
        if (dev <= he.r) {
            for (int m = 0; m <= 32; ++m) CHECK(min_gap_fine(grid, vw.w.col(m), 1.0) >= 0.5 * he.kappa);
        }
    }
}

TEST_CASE("strictness residual decays at second order in dt")
{
    const int k = 16;
    const SpectralGrid grid(k);
    const ModelParams p = params(0.8, 1.0);
    const StateVW init = smooth_plate(k, 0.05, 0.0);
    const Vec bump = 0.05 * grid.to_grid(Vec::Unit(k, 0));
    PicardOptions opt;
    opt.tol = 1e-13;
    std::vector<double> res;
    for (int steps : {200, 400, 800}) {
        const PressurePath u = ramp_path(grid, 1.0, 0.01, steps, bump, 0.1 * bump);
        res.push_back(strictness_residual(grid, p, u, picard_dispersive(grid, p, u, init, opt).first));
    }
    CHECK(std::log2(res[0] / res[1]) >= 1.8);
    CHECK(std::log2(res[1] / res[2]) >= 1.8);
}
