#include "mems/reynolds.hpp"

#include "mems/grid_norms.hpp"
#include "mems/sampling.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace mems {

namespace {

Vec face_avg(const Vec& f) { return 0.5 * (f.head(f.size() - 1) + f.tail(f.size() - 1)); }
Vec face_diff(const Vec& f, double h) { return (f.tail(f.size() - 1) - f.head(f.size() - 1)) / h; }
Vec divergence(const Vec& flux, double h) { return (flux.tail(flux.size() - 1) - flux.head(flux.size() - 1)) / h; }

void require_gap(const Vec& w, const char* where)
{
    const double m = w.minCoeff();
    if (!(m > 0.0)) throw QuenchError(where, m);
}

}  // namespace

Vec reynolds_rhs(const Vec& u, const Vec& v, const Vec& w, const ModelParams& p)
{
    const auto n = u.size();
    if (v.size() != n || w.size() != n) throw SizeError("reynolds_rhs: field sizes differ");
    require_gap(w, "F");
    const double h = 1.0 / (n + 1);
    const Vec U = with_boundary(u, p.lift.theta1, p.lift.theta1);
    const Vec W = with_boundary(w, p.lift.theta2, p.lift.theta2);
    const Vec flux = face_avg(W.array().cube() * U.array()).cwiseProduct(face_diff(U, h));
    return (divergence(flux, h).array() - v.array() * u.array()) / w.array();
}

GridField eval_F(const GridField& u, const GridField& v, const GridField& w, const ModelParams& p)
{
    return GridField(reynolds_rhs(u.values, v.values, w.values, p));
}

Vec frechet_F_at(const Vec& u, const Vec& q, const Vec& v, const Vec& w, const Vec& dv, const Vec& dw,
                 const ModelParams& p)
{
    const auto n = u.size();
    require_gap(w, "F'");
    const double h = 1.0 / (n + 1);
    const Vec U = with_boundary(u, p.lift.theta1, p.lift.theta1);
    const Vec W = with_boundary(w, p.lift.theta2, p.lift.theta2);
    const Vec Q = with_boundary(q, 0.0, 0.0);
    const Vec DW = with_boundary(dw, 0.0, 0.0);
    const Vec W3 = W.array().cube();
    const Vec a = face_avg(W3.cwiseProduct(U));
    const Vec du = face_diff(U, h);
    const Vec flux_q = a.cwiseProduct(face_diff(Q, h)) + face_avg(W3.cwiseProduct(Q)).cwiseProduct(du);
    const Vec flux_w = face_avg(3.0 * W.array().square() * DW.array() * U.array()).cwiseProduct(du);
    const Vec flux_0 = a.cwiseProduct(du);
    const Vec w2 = w.array().square();
    Vec out = divergence(flux_q, h).cwiseQuotient(w);
    out += divergence(flux_w, h).cwiseQuotient(w);
    out -= (dw.array() / w2.array() * divergence(flux_0, h).array()).matrix();
    out -= (v.array() / w.array() * q.array()).matrix();
    out -= ((w.array() * dv.array() - v.array() * dw.array()) / w2.array() * u.array()).matrix();
    return out;
}

PstarOperator assemble_Pstar(const GridField& u0, const GridField& v0, const GridField& w0, const ModelParams& p)
{
    const int n = u0.size();
    if (v0.size() != n || w0.size() != n) throw SizeError("assemble_Pstar: coefficient sizes differ");
    const double floor = p.eps1 * (1.0 - 1e-9);
    if (u0.values.minCoeff() < floor || p.lift.theta1 < floor)
        throw std::invalid_argument("assemble_Pstar: u0 falls below eps1");
    if (!(w0.values.minCoeff() > 0.0)) throw std::invalid_argument("assemble_Pstar: w0 must be positive");

    PstarOperator op;
    op.u0 = u0;
    op.v0 = v0;
    op.w0 = w0;
    op.h = 1.0 / (n + 1);
    op.theta1 = p.lift.theta1;
    op.theta2 = p.lift.theta2;
    const double h = op.h;
    const Vec U = with_boundary(u0.values, p.lift.theta1, p.lift.theta1);
    const Vec W = with_boundary(w0.values, p.lift.theta2, p.lift.theta2);
    const Vec c3 = W.array().cube();
    const Vec a = face_avg(c3.cwiseProduct(U));
    const Vec du = face_diff(U, h);

    op.matrix = Mat::Zero(n, n);
    for (int i = 1; i <= n; ++i) {
        const double s = 1.0 / (h * W(i));
        const int r = i - 1;
        if (i < n) op.matrix(r, r + 1) = s * (a(i) / h + 0.5 * du(i) * c3(i + 1));
        if (i > 1) op.matrix(r, r - 1) = s * (a(i - 1) / h - 0.5 * du(i - 1) * c3(i - 1));
        op.matrix(r, r) = s * (-a(i) / h + 0.5 * du(i) * c3(i) - a(i - 1) / h - 0.5 * du(i - 1) * c3(i)) -
                          v0.values(r) / W(i);
    }

    const bool unit = (u0.values.array() == 1.0).all() && (w0.values.array() == 1.0).all() &&
                      (v0.values.array() == 0.0).all() && p.lift.theta1 == 1.0 && p.lift.theta2 == 1.0;
    if (unit) {
        Mat lap = Mat::Zero(n, n);
        for (int r = 0; r < n; ++r) {
            lap(r, r) = -2.0 / (h * h);
            if (r > 0) lap(r, r - 1) = 1.0 / (h * h);
            if (r + 1 < n) lap(r, r + 1) = 1.0 / (h * h);
        }
        if ((op.matrix - lap).norm() > 1e-12 * lap.norm())
            throw std::logic_error("assemble_Pstar: constant-coefficient stencil is not the Laplacian");
    }
    return op;
}

Mat principal_part(const PstarOperator& op)
{
    const int n = op.n();
    const double h = op.h;
    const Vec U = with_boundary(op.u0.values, op.theta1, op.theta1);
    const Vec W = with_boundary(op.w0.values, op.theta2, op.theta2);
    const Vec a = face_avg(W.array().cube() * U.array());
    Mat B = Mat::Zero(n, n);
    for (int i = 1; i <= n; ++i) {
        const double s = 1.0 / (h * h * W(i));
        const int r = i - 1;
        if (i < n) B(r, r + 1) = s * a(i);
        if (i > 1) B(r, r - 1) = s * a(i - 1);
        B(r, r) = -s * (a(i) + a(i - 1));
    }
    return B;
}

EllipticReport elliptic_form_check(const PstarOperator& op, const ModelParams& p, int trials,
                                   unsigned long long seed)
{
    const int n = op.n();
    const double h = op.h;
    EllipticReport rep;
    const double kappa = std::min(op.w0.values.minCoeff(), op.theta2);
    const double eps1 = p.eps1;
    const bool flat = ((op.w0.values.array() - op.theta2).abs() == 0.0).all();
    // three sup-norm embeddings of u0 w0 Dw0
    rep.C = std::pow(general_embedding_constant(n), 3);
    rep.K2 = flat ? 0.0 : rep.C * grid_norm(op.u0, op.theta1, 2) * std::pow(grid_norm(op.w0, op.theta2, 3), 2);
    if (rep.K2 == 0.0) {
        rep.K = eps1 * kappa * kappa;
        rep.K_o = 0.0;
    } else {
        const double e2 = eps1 * kappa * kappa / (2.0 * rep.K2);
        rep.K = eps1 * kappa * kappa - e2 * rep.K2;
        rep.K_o = rep.K2 / (4.0 * e2);
    }

    const Mat B = principal_part(op);
    Rng rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    rep.min_margin = std::numeric_limits<double>::infinity();
    for (int t = 0; t < trials; ++t) {
        Vec q(n);
        switch (t % 3) {
            case 0:  // smooth
                q = SineBasis(n, std::min(n, 12)).synthesis() * random_pinned_modes(rng, std::min(n, 12), 12, 1.0, 1.0);
                break;
            case 1:  // rough
                for (int j = 0; j < n; ++j) q(j) = gauss(rng);
                break;
            default: {  // single mode
                const int k = 1 + static_cast<int>(uniform(rng, 0.0, n - 1e-9));
                for (int j = 1; j <= n; ++j) q(j - 1) = std::sin(k * M_PI * j * h);
            }
        }
        const double form = std::abs(h * q.dot(B * q));
        const double d2 = std::pow(interior_dnorm(q), 2);
        const double l2 = std::pow(interior_l2(q), 2);
        const double margin = (form - (rep.K * d2 - rep.K_o * l2)) / (d2 + l2);
        rep.min_margin = std::min(rep.min_margin, margin);
        if (margin < -1e-12) ++rep.violations;
        ++rep.trials;
    }
    rep.pass = rep.violations == 0;
    return rep;
}

double resolvent_norm(const Mat& P, std::complex<double> lambda)
{
    const auto n = P.rows();
    Eigen::MatrixXcd A = -P.cast<std::complex<double>>();
    A.diagonal().array() += lambda;
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(A);
    const auto& s = svd.singularValues();
    const double smin = s(n - 1), smax = s(0);
    if (!(smin > 1e-12 * smax)) throw SectorViolation("resolvent is singular at a sampled lambda");
    return 1.0 / smin;
}

SectorReport sector_check(const PstarOperator& op, const std::vector<double>& ray_angles,
                          const std::vector<double>& radii)
{
    if (ray_angles.empty() || radii.empty()) throw std::invalid_argument("sector_check: need angles and radii");
    SectorReport rep;
    const Eigen::VectorXcd ev = op.matrix.eigenvalues();
    const double abscissa = ev.real().maxCoeff();
    rep.omega_shift = abscissa + std::max(1.0, 0.01 * std::abs(abscissa));
    for (double phi : ray_angles) {
        if (!(std::abs(phi) < M_PI)) throw SectorViolation("sector_check: ray angle outside (-pi, pi)");
        rep.angle = std::max(rep.angle, std::abs(phi));
        for (double rho : radii) {
            const std::complex<double> lambda = rep.omega_shift + std::polar(rho, phi);
            const double prod = rho * resolvent_norm(op.matrix, lambda);
            rep.samples.push_back({lambda, prod});
            rep.M_bound = std::max(rep.M_bound, prod);
        }
    }
    return rep;
}

double graph_norm_ratio(const PstarOperator& op, const Vec& g)
{
    return grid_norm0(g, 2) / (interior_l2(g) + interior_l2(op.matrix * g));
}

GraphNormReport graph_norm_equivalence(const PstarOperator& op, int trials, unsigned long long seed)
{
    const int n = op.n();
    const int active = std::min(n, 16);
    const SineBasis basis(n, active);
    Rng rng(seed);
    GraphNormReport rep;
    for (int t = 0; t < trials; ++t) {
        const Vec g = basis.synthesis() * random_pinned_modes(rng, active, active, 1.0, 1.5);
        const double r = graph_norm_ratio(op, g);
        rep.gamma0 = std::max({rep.gamma0, r, 1.0 / r});
        rep.pstar_norm = std::max(rep.pstar_norm, interior_l2(op.matrix * g) / grid_norm0(g, 2));
    }
    return rep;
}

ParabolicPropagator make_propagator(const PstarOperator& op, double dt)
{
    if (!(dt > 0.0)) throw std::invalid_argument("make_propagator: dt must be positive");
    const int n = op.n();
    Mat aug = Mat::Zero(3 * n, 3 * n);
    aug.topLeftCorner(n, n) = dt * op.matrix;
    aug.block(0, n, n, n).setIdentity();
    aug.block(n, 2 * n, n, n).setIdentity();
    const Mat ex = aug.exp();
    if (!ex.allFinite()) throw std::runtime_error("make_propagator: matrix exponential failed (ill-conditioned)");
    ParabolicPropagator prop;
    prop.dt = dt;
    prop.E = ex.topLeftCorner(n, n);
    prop.phi1 = dt * ex.block(0, n, n, n);
    prop.phi2 = dt * ex.block(0, 2 * n, n, n);
    return prop;
}

Mat propagate_parabolic(const ParabolicPropagator& prop, const Vec& phi0, const Mat& F)
{
    const auto n = phi0.size();
    const auto m = F.cols();
    if (F.rows() != n || prop.E.rows() != n) throw SizeError("propagate_parabolic: size mismatch");
    Mat out(n, m);
    out.col(0) = phi0;
    if (m < 2) return out;
    const Mat src = prop.phi1 * F.leftCols(m - 1) + prop.phi2 * (F.rightCols(m - 1) - F.leftCols(m - 1));
    for (Eigen::Index j = 0; j + 1 < m; ++j) out.col(j + 1).noalias() = prop.E * out.col(j) + src.col(j);
    return out;
}

Mat linear_parabolic_solve(const PstarOperator& op, const Mat& F_path, const Vec& u0_tilde, double T, int N_t)
{
    if (N_t < 1 || F_path.cols() != N_t + 1) throw SizeError("linear_parabolic_solve: F must have N_t+1 samples");
    return propagate_parabolic(make_propagator(op, T / N_t), u0_tilde, F_path);
}

double sup_h1(const Mat& paths)
{
    double m = 0.0;
    for (Eigen::Index j = 0; j < paths.cols(); ++j) m = std::max(m, grid_norm0(paths.col(j), 1));
    return m;
}

Mat F_path(const SpectralGrid& grid, const ModelParams& p, const PressurePath& u, const VWPath& vw)
{
    const Mat V = grid.to_grid(vw.v);
    const Mat W = grid.to_grid(vw.w).array() + p.lift.theta2;
    Mat out(grid.n(), u.samples.cols());
    for (Eigen::Index j = 0; j < out.cols(); ++j) out.col(j) = reynolds_rhs(u.samples.col(j), V.col(j), W.col(j), p);
    return out;
}

GammaResult gamma_iterate(const SpectralGrid& grid, const ModelParams& p, const CoupledState& init,
                          const PstarOperator& op, const ParabolicPropagator& prop, int N_t, const GammaOptions& opt)
{
    const int n = grid.n();
    if (op.n() != n || init.u.size() != n) throw SizeError("gamma_iterate: operator/grid mismatch");
    const int m = N_t + 1;
    const double T = N_t * prop.dt;
    const Vec u0t = init.u.array() - p.lift.theta1;

    PicardOptions inner;
    inner.tol = opt.inner_factor * opt.tol;

    GammaResult res;
    res.u.times = uniform_times(T, N_t);
    Mat Ut = u0t.replicate(1, m);
    VWPath vw;
    bool have_vw = false;
    res.report.T_used = T;

    auto solve_plate = [&](const Mat& U) {
        res.u.samples = U.array() + p.lift.theta1;
        auto [path, rep] = picard_dispersive(grid, p, res.u, init.vw, inner, have_vw ? &vw : nullptr);
        vw = std::move(path);
        have_vw = true;
        res.inner_iterations += rep.iterations;
        res.inner_max_ratio = std::max(res.inner_max_ratio, rep.max_ratio());
    };

    for (int it = 1; it <= opt.max_iter; ++it) {
        solve_plate(Ut);
        const Mat F = F_path(grid, p, res.u, vw) - op.matrix * Ut;
        Mat next = propagate_parabolic(prop, u0t, F);
        const double d = sup_h1(next - Ut);
        const double scale = sup_h1(next);
        res.report.iterations = it;
        if (!res.report.differences.empty())
            res.report.contraction_ratios.push_back(
                res.report.differences.back() > 0.0 ? d / res.report.differences.back() : 0.0);
        res.report.differences.push_back(d);
        Ut = std::move(next);
        if (!std::isfinite(d)) break;
        if (d <= opt.tol || d <= 1e3 * std::numeric_limits<double>::epsilon() * std::max(1.0, scale)) {
            res.report.converged = true;
            solve_plate(Ut);
            res.vw = std::move(vw);
            return res;
        }
        if (!res.report.contraction_ratios.empty() && res.report.contraction_ratios.back() >= opt.ratio_stop) {
            const double q = res.report.contraction_ratios.back();
            const double t_adm = T * std::pow(0.5 / q, 2.0);
            res.report.diagnostic = "measured ratio " + std::to_string(q) + " >= " + std::to_string(opt.ratio_stop) +
                                    "; admissible T ~ " + std::to_string(t_adm);
            throw NonContractionError("gamma_iterate: " + res.report.diagnostic, res.report);
        }
    }
    res.report.diagnostic = "no convergence within max_iter";
    throw NonContractionError("gamma_iterate: " + res.report.diagnostic, res.report);
}

Mat frechet_F(const SpectralGrid& grid, const ModelParams& p, const PressurePath& u, const Mat& q, const VWPath& vw,
              const ModePath& dW)
{
    const Mat V = grid.to_grid(vw.v);
    const Mat W = grid.to_grid(vw.w).array() + p.lift.theta2;
    const Mat dV = grid.to_grid(dW.v);
    const Mat dWg = grid.to_grid(dW.w);
    Mat out(grid.n(), u.samples.cols());
    for (Eigen::Index j = 0; j < out.cols(); ++j)
        out.col(j) = frechet_F_at(u.samples.col(j), q.col(j), V.col(j), W.col(j), dV.col(j), dWg.col(j), p);
    return out;
}

namespace {

double holder_seminorm_grid(const Vec& times, const Mat& X, double alpha, bool h2)
{
    double best = 0.0;
    for (Eigen::Index i = 0; i < X.cols(); ++i)
        for (Eigen::Index j = i + 1; j < X.cols(); ++j) {
            const Vec d = X.col(j) - X.col(i);
            const double nrm = h2 ? grid_norm0(d, 2) : interior_l2(d);
            best = std::max(best, nrm / std::pow(times(j) - times(i), alpha));
        }
    return best;
}

}  // namespace

HolderMeasure holder_F_measure(const SpectralGrid& grid, const ModelParams& p, const PressurePath& u, const Mat& q,
                               const StateVW& init, const PstarOperator& op, double alpha, double tol)
{
    PicardOptions opt;
    opt.tol = tol;
    const VWPath vw = picard_dispersive(grid, p, u, init, opt).first;
    const Mat F = F_path(grid, p, u, vw);
    HolderMeasure out;
    out.L_U = empirical_holder(vw, alpha);
    const double u_semi = empirical_holder(u, alpha);

    double u_sup = 0.0, q_sup = 0.0;
    for (Eigen::Index j = 0; j < u.samples.cols(); ++j) {
        u_sup = std::max(u_sup, grid_norm(u.samples.col(j), p.lift.theta1, p.lift.theta1, 2));
        q_sup = std::max(q_sup, grid_norm0(q.col(j), 2));
    }
    const double u_alpha = u_sup + u_semi;
    const double q_alpha = q_sup + holder_seminorm_grid(u.times, q, alpha, true);
    const double T = u.horizon();
    const double Ta = std::pow(T, alpha);

    const ModePath dW = frechet_W(grid, p, u, q, vw, opt);
    const Mat D = frechet_F(grid, p, u, q, vw, dW) - op.matrix * q;

    const double den_a = u_semi + out.L_U;
    for (Eigen::Index i = 0; i < F.cols(); ++i)
        for (Eigen::Index j = i + 1; j < F.cols(); ++j) {
            const double ha = std::pow(u.times(j) - u.times(i), alpha);
            if (den_a > 0.0) out.A = std::max(out.A, interior_l2(F.col(j) - F.col(i)) / (den_a * ha));
            const double bracket = ha * (Ta * q_alpha + Ta * u_alpha * q_alpha + q_sup + u_alpha * q_sup);
            if (bracket > 0.0) out.B = std::max(out.B, interior_l2(D.col(j) - D.col(i)) / bracket);
        }
    return out;
}

HolderCheck holder_F_check(const SpectralGrid& grid, const ModelParams& p, const PressurePath& u, const Mat& q,
                           const StateVW& init, const PstarOperator& op, double alpha, double L_A, double L_B)
{
    HolderCheck c;
    c.measured = holder_F_measure(grid, p, u, q, init, op, alpha);
    c.L_A = L_A;
    c.L_B = L_B;
    c.pass = c.measured.A <= L_A && c.measured.B <= L_B;
    return c;
}

namespace {

CoupledRate rhs_raw(const SpectralGrid& grid, const ModelParams& p, const Vec& u, const Vec& v, const Vec& w)
{
    CoupledRate r;
    const Vec Vg = grid.to_grid(v);
    const Vec Wg = grid.to_grid(w).array() + p.lift.theta2;
    r.du = reynolds_rhs(u, Vg, Wg, p);
    r.dv = -grid.spectrum().mu.cwiseProduct(w) + Vec(forcing_G_modes(grid, w, p)) +
           p.beta_p * Vec(grid.to_modes((u.array() - p.lift.theta1).matrix()));
    r.dw = v;
    return r;
}

}  // namespace

CoupledRate mol_rhs(const SpectralGrid& grid, const ModelParams& p, const CoupledState& s)
{
    return rhs_raw(grid, p, s.u, s.vw.v.coeffs, s.vw.w.coeffs);
}

double min_gap(const SpectralGrid& grid, const CoupledState& s, const ModelParams& p)
{
    return min_gap_fine(grid, s.vw.w.coeffs, p.lift.theta2);
}

Status quench_monitor(const SpectralGrid& grid, const CoupledState& s, const ModelParams& p, double quench_eps,
                      double u_cap)
{
    if (min_gap(grid, s, p) <= quench_eps) return Status::quench;
    if (s.u.cwiseAbs().maxCoeff() >= u_cap) return Status::pressure_blowup;
    return Status::alive;
}

CoupledState Trajectory::state(int m) const
{
    return {u.col(m), StateVW(ModeVector(v.col(m)), ModeVector(w.col(m))), times(m)};
}

double max_reference_step(const SpectralGrid& grid)
{
    return 0.5 / grid.spectrum().omega(grid.k_max() - 1);
}

ReferenceRun integrate_reference(const SpectralGrid& grid, const ModelParams& p, const CoupledState& init, double T,
                                 double dt, const ReferenceOptions& opt)
{
    if (dt > max_reference_step(grid) * (1.0 + 1e-12))
        throw StepSizeError("integrate_reference: dt exceeds 0.5/omega_kmax = " +
                            std::to_string(max_reference_step(grid)));
    if (!(T >= 0.0)) throw std::invalid_argument("integrate_reference: negative horizon");
    const int steps = std::max(1, static_cast<int>(std::ceil(T / dt - 1e-9)));
    const double h = T / steps;
    const int every = std::max(1, opt.record_every);
    ReferenceRun run;
    run.dt = h;
    std::vector<double> times;
    std::vector<Vec> us, vs, ws;
    Vec u = init.u, v = init.vw.v.coeffs, w = init.vw.w.coeffs;
    auto record = [&](double t) {
        times.push_back(t);
        us.push_back(u);
        vs.push_back(v);
        ws.push_back(w);
    };
    auto gap_of = [&](const Vec& wm) { return min_gap_fine(grid, wm, p.lift.theta2); };
    const double t0 = init.t;
    record(t0);
    double gap_prev = gap_of(w);
    for (int s = 1; s <= steps; ++s) {
        const double t_prev = t0 + (s - 1) * h;
        Vec u1, v1, w1;
        try {
            const CoupledRate k1 = rhs_raw(grid, p, u, v, w);
            const CoupledRate k2 = rhs_raw(grid, p, u + 0.5 * h * k1.du, v + 0.5 * h * k1.dv, w + 0.5 * h * k1.dw);
            const CoupledRate k3 = rhs_raw(grid, p, u + 0.5 * h * k2.du, v + 0.5 * h * k2.dv, w + 0.5 * h * k2.dw);
            const CoupledRate k4 = rhs_raw(grid, p, u + h * k3.du, v + h * k3.dv, w + h * k3.dw);
            u1 = u + h / 6.0 * (k1.du + 2.0 * k2.du + 2.0 * k3.du + k4.du);
            v1 = v + h / 6.0 * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv);
            w1 = w + h / 6.0 * (k1.dw + 2.0 * k2.dw + 2.0 * k3.dw + k4.dw);
        } catch (const QuenchError&) {
            if (opt.quench_eps <= 0.0) throw;
            run.status = Status::quench;
            run.event_time = t_prev + h;
            record(t_prev);
            break;
        }
        u.swap(u1);
        v.swap(v1);
        w.swap(w1);
        const double t = t_prev + h;
        const double gap = gap_of(w);
        if (opt.quench_eps > 0.0 && gap <= opt.quench_eps) {
            run.status = Status::quench;
            run.event_time = t_prev + h * (gap_prev - opt.quench_eps) / (gap_prev - gap);
            record(t);
            break;
        }
        if (opt.u_cap > 0.0 && u.cwiseAbs().maxCoeff() >= opt.u_cap) {
            run.status = Status::pressure_blowup;
            run.event_time = t;
            record(t);
            break;
        }
        gap_prev = gap;
        if (s % every == 0 || s == steps) record(t);
    }
    const int m = static_cast<int>(times.size());
    run.trajectory.times = Eigen::Map<const Vec>(times.data(), m);
    run.trajectory.u.resize(init.u.size(), m);
    run.trajectory.v.resize(init.vw.k_max(), m);
    run.trajectory.w.resize(init.vw.k_max(), m);
    for (int j = 0; j < m; ++j) {
        run.trajectory.u.col(j) = us[j];
        run.trajectory.v.col(j) = vs[j];
        run.trajectory.w.col(j) = ws[j];
    }
    return run;
}

}  // namespace mems
