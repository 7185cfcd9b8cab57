#include "mems/driver.hpp"

#include "mems/grid_norms.hpp"

#include <algorithm>
#include <cmath>

namespace mems {

const char* to_string(Termination t)
{
    switch (t) {
        case Termination::converged: return "converged";
        case Termination::quench: return "quench";
        case Termination::pressure_blowup: return "pressure_blowup";
        case Termination::budget: return "budget";
        case Termination::positivity: return "positivity";
    }
    return "unknown";
}

const ParabolicPropagator& Linearization::propagator(double dt) const
{
    auto it = cache_.find(dt);
    if (it == cache_.end()) it = cache_.emplace(dt, make_propagator(op_, dt)).first;
    return it->second;
}

double gamma_horizon_formula(const GammaHorizonInputs& in)
{
    if (!(in.alpha > 0.0 && in.alpha < 1.0)) throw std::invalid_argument("gamma_horizon_formula: alpha in (0,1)");
    const double bracket =
        in.L_e + in.pstar_norm + 2.0 * in.L_B * (1.0 + in.u0_H2 + in.kappa / (2.0 * in.C));
    return std::pow(2.0 * in.gamma0 * in.I_T * bracket, -1.0 / in.alpha);
}

namespace {

std::shared_ptr<const Linearization> linearize(const SpectralGrid& grid, const ModelParams& p, const CoupledState& s)
{
    const GridField v0(grid.to_grid(s.vw.v.coeffs));
    const GridField w0(Vec(grid.to_grid(s.vw.w.coeffs).array() + p.lift.theta2));
    return std::make_shared<const Linearization>(assemble_Pstar(GridField(s.u), v0, w0, p));
}

double mass(const Vec& u, const Vec& w, double t1, double t2)
{
    const double h = 1.0 / (u.size() + 1);
    return h * (u.cwiseProduct(w).sum() + t1 * t2);
}

double boundary_flux(const Vec& u, double t1, double t2)
{
    const auto n = u.size();
    const double h = 1.0 / (n + 1);
    const Vec U = with_boundary(u, t1, t1);
    const double ux0 = (-3.0 * U(0) + 4.0 * U(1) - U(2)) / (2.0 * h);
    const double ux1 = (3.0 * U(n + 1) - 4.0 * U(n) + U(n - 1)) / (2.0 * h);
    return t2 * t2 * t2 * t1 * (ux1 - ux0);
}

double balance(const Vec& u0, const Vec& w0, const Vec& u1, const Vec& w1, double dt, const ModelParams& p)
{
    const double t1 = p.lift.theta1, t2 = p.lift.theta2;
    const double dm = (mass(u1, w1, t1, t2) - mass(u0, w0, t1, t2)) / dt;
    return std::abs(dm - 0.5 * (boundary_flux(u1, t1, t2) + boundary_flux(u0, t1, t2)));
}

StepDiagnostics diagnose(const SpectralGrid& grid, const ModelParams& p, const CoupledState& s, double ratio)
{
    StepDiagnostics d;
    d.t = s.t;
    d.min_w = min_gap(grid, s, p);
    d.max_u = s.u.cwiseAbs().maxCoeff();
    d.norm_X = norm_X(s.vw);
    d.contraction_ratio = ratio;
    return d;
}

void push_sample(RunReport& rep, const CoupledState& s)
{
    auto& tr = rep.trajectory;
    const auto m = tr.times.size();
    tr.times.conservativeResize(m + 1);
    tr.times(m) = s.t;
    tr.u.conservativeResize(s.u.size(), m + 1);
    tr.u.col(m) = s.u;
    tr.v.conservativeResize(s.vw.k_max(), m + 1);
    tr.v.col(m) = s.vw.v.coeffs;
    tr.w.conservativeResize(s.vw.k_max(), m + 1);
    tr.w.col(m) = s.vw.w.coeffs;
}

// Accepts one converged segment sample by sample; returns false once a stop condition fires.
bool accept(const SpectralGrid& grid, RunReport& rep, const CoupledState& s, double ratio)
{
    const ModelParams& p = rep.params;
    const CoupledState prev = rep.final_state();
    StepDiagnostics d = diagnose(grid, p, s, ratio);
    const double dt = s.t - prev.t;
    d.mass_residual = balance(prev.u, grid.to_grid(prev.vw.w.coeffs).array() + p.lift.theta2, s.u,
                              grid.to_grid(s.vw.w.coeffs).array() + p.lift.theta2, dt, p);
    const double prev_gap = rep.series.back().min_w;
    push_sample(rep, s);
    rep.series.push_back(d);
    rep.T_used = s.t;

    const double qe = rep.options.quench_threshold(p);
    if (d.min_w <= qe) {
        rep.termination = Termination::quench;
        rep.quench_time = prev.t + dt * (prev_gap - qe) / (prev_gap - d.min_w);
        rep.diagnostic = "min w reached the quench threshold";
        return false;
    }
    if (d.max_u >= rep.options.pressure_cap(p)) {
        rep.termination = Termination::pressure_blowup;
        rep.diagnostic = "max |u| reached the pressure cap";
        return false;
    }
    if (s.u.minCoeff() < 0.5 * p.eps1) {
        rep.termination = Termination::positivity;
        rep.diagnostic = "u fell below eps1/2";
        return false;
    }
    return true;
}

void drive(const SpectralGrid& grid, RunReport& rep, double T_end)
{
    const RunOptions& opt = rep.options;
    const ModelParams& p = rep.params;
    GammaOptions gopt = opt.gamma;
    gopt.tol = opt.tol;
    int attempts = 0;

    while (true) {
        const CoupledState s0 = rep.final_state();
        const double remaining = T_end - s0.t;
        const int left = static_cast<int>(std::llround(remaining / rep.dt_current));
        if (left <= 0) break;
        if (++attempts > opt.max_attempts) {
            rep.termination = Termination::budget;
            rep.diagnostic = "segment attempt budget exhausted";
            return;
        }
        const int L = std::min(rep.segment_steps, left);
        // final segment absorbs rounding in the step count
        const double seg_T = (L == left) ? remaining : L * rep.dt_current;

        std::shared_ptr<const Linearization> lin = rep.anchor;
        if (opt.relinearize && rep.segments > 0) lin = linearize(grid, p, s0);
        try {
            const ParabolicPropagator& prop0 = lin->propagator(rep.dt_current);
            ParabolicPropagator prop = prop0;
            if (L == left && std::abs(seg_T - L * rep.dt_current) > 0.0) prop = make_propagator(lin->op(), seg_T / L);
            const GammaResult g = gamma_iterate(grid, p, s0, lin->op(), prop, L, gopt);
            ++rep.segments;
            rep.gamma_iterations += g.report.iterations;
            const double ratio = g.report.max_ratio();
            for (int m = 1; m <= L; ++m) {
                CoupledState s{g.u.samples.col(m), g.vw.state(m), s0.t + g.u.times(m)};
                if (!accept(grid, rep, s, ratio)) return;
            }
            if (g.report.iterations <= 8 && ratio < 0.25) rep.segment_steps = std::max(rep.segment_steps + 1, (3 * rep.segment_steps) / 2);
        } catch (const NonContractionError& e) {
            if (L > 1) {
                rep.segment_steps = std::max(1, L / 2);
                continue;
            }
            if (rep.refinements >= opt.max_refinements) {
                rep.termination = Termination::budget;
                rep.diagnostic = std::string("one-step segment failed to contract: ") + e.what();
                return;
            }
            ++rep.refinements;
            rep.dt_current *= 0.5;
        } catch (const QuenchError& e) {
            if (L > 1) {
                rep.segment_steps = std::max(1, L / 2);
                continue;
            }
            if (rep.refinements >= opt.max_refinements) {
                rep.termination = Termination::budget;
                rep.diagnostic = std::string("gap closed inside a minimal step: ") + e.what();
                return;
            }
            ++rep.refinements;
            rep.dt_current *= 0.5;
        }
    }
    rep.termination = Termination::converged;
    rep.diagnostic.clear();
}

}  // namespace

RunReport run_coupled(const SpectralGrid& grid, const ModelParams& p, const CoupledState& init, const RunOptions& opt)
{
    p.validate();
    if (!(opt.T > 0.0) || opt.N_t < 1) throw std::invalid_argument("run_coupled: need T > 0 and N_t >= 1");
    if (init.u.size() != grid.n() || init.vw.k_max() != grid.k_max())
        throw SizeError("run_coupled: initial state does not match the grid");

    RunReport rep;
    rep.params = p;
    rep.options = opt;
    rep.k_max = grid.k_max();
    rep.n = grid.n();
    rep.T = opt.T;
    rep.dt = opt.T / opt.N_t;
    rep.dt_current = rep.dt;

    CoupledState s0 = init;
    s0.t = 0.0;
    const double g0 = min_gap(grid, s0, p);
    if (!(g0 > 0.0)) throw QuenchError("run_coupled", g0);

    rep.anchor = linearize(grid, p, s0);
    const GridField u0(s0.u);
    rep.horizon = estimate_horizon(grid, p, s0.vw, u0, opt.horizon);
    const GraphNormReport gn = graph_norm_equivalence(rep.anchor->op(), 64);
    rep.gamma0 = gn.gamma0;
    rep.pstar_norm = gn.pstar_norm;
    GammaHorizonInputs gh;
    gh.gamma0 = gn.gamma0;
    gh.pstar_norm = gn.pstar_norm;
    gh.u0_H2 = grid_norm(u0, p.lift.theta1, 2);
    gh.kappa = rep.horizon.kappa;
    gh.C = rep.horizon.C;
    rep.gamma_horizon = gamma_horizon_formula(gh);
    {
        const Vec V = grid.to_grid(s0.vw.v.coeffs);
        const Vec W = grid.to_grid(s0.vw.w.coeffs).array() + p.lift.theta2;
        rep.regularity_proxy = interior_dnorm(reynolds_rhs(s0.u, V, W, p));
    }

    rep.segment_steps = opt.initial_segment_steps > 0
                            ? opt.initial_segment_steps
                            : std::max(1, static_cast<int>(std::floor(0.9 * rep.horizon.T0_calibrated / rep.dt)));
    push_sample(rep, s0);
    rep.series.push_back(diagnose(grid, p, s0, 0.0));
    if (rep.series.back().min_w <= opt.quench_threshold(p)) {
        rep.termination = Termination::quench;
        rep.quench_time = 0.0;
        return rep;
    }
    drive(grid, rep, opt.T);
    return rep;
}

RunReport continue_run(const SpectralGrid& grid, const RunReport& report, double extra_T)
{
    if (report.termination != Termination::converged)
        throw std::logic_error(std::string("continue_run: cannot continue a run that ended with ") +
                               to_string(report.termination));
    if (!(extra_T >= 0.0)) throw std::invalid_argument("continue_run: extra_T must be >= 0");
    RunReport rep = report;
    if (extra_T == 0.0) return rep;
    const double steps = extra_T / report.dt_current;
    if (std::abs(steps - std::llround(steps)) > 1e-6 || std::llround(steps) < 1)
        throw std::invalid_argument("continue_run: extra_T must be a whole number of steps");
    rep.T = report.T_used + extra_T;
    rep.options.T = rep.T;
    drive(grid, rep, rep.T);
    return rep;
}

std::vector<double> mass_balance_residual(const SpectralGrid& grid, const ModelParams& p, const Trajectory& traj)
{
    const auto m = traj.times.size();
    std::vector<double> out(m, 0.0);
    const Mat W = grid.to_grid(traj.w).array() + p.lift.theta2;
    for (Eigen::Index j = 1; j < m; ++j) {
        out[j] = balance(traj.u.col(j - 1), W.col(j - 1), traj.u.col(j), W.col(j), traj.times(j) - traj.times(j - 1), p);
    }
    return out;
}

}  // namespace mems
