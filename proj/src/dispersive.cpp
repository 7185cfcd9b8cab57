#include "mems/dispersive.hpp"

#include "mems/grid_norms.hpp"
#include "mems/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mems {

Vec random_pinned_modes(Rng& rng, int k_max, int active, double radius, double decay)
{
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec c = Vec::Zero(k_max);
    const int top = std::min(active, k_max);
    for (int k = 1; k <= top; ++k) c(k - 1) = gauss(rng) * std::pow(static_cast<double>(k), -decay);
    const double nrm = norm_Hk(c, 2);
    if (nrm > 0.0) c *= radius / nrm;
    return c;
}

void ModelParams::validate() const
{
    if (!(beta_F >= 0.0) || !(beta_p >= 0.0)) throw std::invalid_argument("ModelParams: beta_F, beta_p must be >= 0");
    if (!(eps1 > 0.0)) throw std::invalid_argument("ModelParams: eps1 must be > 0");
    BoundaryLift check(lift.theta1, lift.theta2);
    (void)check;
}

double PicardReport::max_ratio() const
{
    double m = 0.0;
    for (double r : contraction_ratios) m = std::max(m, r);
    return m;
}

Vec uniform_times(double T, int steps)
{
    if (steps < 1 || !(T >= 0.0)) throw std::invalid_argument("uniform_times: need steps >= 1 and T >= 0");
    Vec t(steps + 1);
    for (int m = 0; m <= steps; ++m) t(m) = T * m / steps;
    return t;
}

PressurePath PressurePath::constant(const Vec& u, double T, int steps)
{
    PressurePath path;
    path.times = uniform_times(T, steps);
    path.samples = u.replicate(1, steps + 1);
    return path;
}

double min_gap_fine(const SpectralGrid& grid, const Mat& w_modes, double theta2)
{
    return std::min(theta2, (grid.to_fine(w_modes).array() + theta2).minCoeff());
}

Mat forcing_G_modes(const SpectralGrid& grid, const Mat& w_modes, const ModelParams& p)
{
    const Mat gap = grid.to_fine(w_modes).array() + p.lift.theta2;
    const double mg = gap.minCoeff();
    if (!(mg > 0.0)) throw QuenchError("G", mg);
    const Mat g = (-p.beta_F / gap.array().square()) + p.beta_p * (p.lift.theta1 - 1.0);
    return grid.from_fine(g);
}

GridField eval_G(const GridField& w_tilde, const ModelParams& p)
{
    const SpectralGrid grid(w_tilde.size());
    const double mg = std::min(min_gap_fine(grid, grid.to_modes(w_tilde.values), p.lift.theta2),
                               (w_tilde.values.array() + p.lift.theta2).minCoeff());
    if (!(mg > 0.0)) throw QuenchError("G", mg);
    const Vec gap = w_tilde.values.array() + p.lift.theta2;
    return GridField((-p.beta_F / gap.array().square() + p.beta_p * (p.lift.theta1 - 1.0)).matrix());
}

InversePowerConstants inverse_power_constants(double C, double kappa, double w0_H2)
{
    InversePowerConstants c;
    c.C = C;
    c.kappa = kappa;
    c.w0_H2 = w0_H2;
    c.C_tilde = kappa / (2.0 * C) + w0_H2;
    const double ct = c.C_tilde;
    const double k2 = kappa * kappa;
    const double bracket = 4.0 / k2 + 16.0 * C * ct / (k2 * kappa);
    c.C1 = std::sqrt(4.0 * C / k2 + 16.0 * ct * ct / (k2 * k2) + bracket * bracket * ct * ct);
    c.C2 = 2.0 * std::pow(c.C1, 3);
    c.C3 = 3.0 * std::pow(c.C1, 4);
    return c;
}

double gap_lower_bound(const GridField& w0, const ModelParams& p)
{
    return std::min(w0.values.minCoeff(), p.lift.theta2);
}

double estimate_LG(const ModelParams& p, const GridField& w0, double r)
{
    return estimate_LG(p, w0, r, sobolev_embedding_constant(w0.size()));
}

double estimate_LG(const ModelParams& p, const GridField& w0, double r, double C)
{
    const double kappa = gap_lower_bound(w0, p);
    if (!(kappa > 0.0)) throw QuenchError("estimate_LG", kappa);
    if (!(r > 0.0) || r >= kappa / (2.0 * C))
        throw std::invalid_argument("estimate_LG: r must lie in (0, kappa/(2C))");
    const auto c = inverse_power_constants(C, kappa, grid_norm(w0, p.lift.theta2, 2));
    return p.beta_F * c.C2;
}

double t0_formula(const HorizonInputs& in)
{
    const double a = 1.0 / (2.0 * in.M0 * in.L_G);
    const double b = in.kappa / (2.0 * in.M0) / ((in.L_G + 1.0) * in.kappa + 2.0 * in.C * in.G0_norm);
    return std::min({in.delta_o, a, b});
}

namespace {

double G0_norm(const GridField& w0, const GridField& u0, const ModelParams& p)
{
    const Vec gap = w0.values;
    const Vec g = (-p.beta_F / gap.array().square() + p.beta_p * (p.lift.theta1 - 1.0)).matrix() +
                  p.beta_p * (u0.values.array() - p.lift.theta1).matrix();
    const double gb = -p.beta_F / (p.lift.theta2 * p.lift.theta2) + p.beta_p * (p.lift.theta1 - 1.0);
    return grid_norm(g, gb, gb, 2);
}

}  // namespace

double estimate_T0(const ModelParams& p, const GridField& w0, const GridField& u0, double r, double M0,
                   double delta_o)
{
    HorizonInputs in;
    in.C = sobolev_embedding_constant(w0.size());
    in.kappa = gap_lower_bound(w0, p);
    in.L_G = estimate_LG(p, w0, r, in.C);
    in.M0 = M0;
    in.delta_o = delta_o;
    in.G0_norm = G0_norm(w0, u0, p);
    return t0_formula(in);
}

double strong_continuity_horizon(const StateVW& init, const PlateSpectrum& spectrum, double r, double t_cap)
{
    const double target = 0.5 * r;
    const double phi = norm_X(init);
    if (2.0 * phi <= target) return t_cap;
    auto gap = [&](double t) {
        const StateVW s = semigroup_apply(init, spectrum, t);
        return norm_X(s.v.coeffs - init.v.coeffs, s.w.coeffs - init.w.coeffs);
    };
    // ||T(t)Phi0 - Phi0|| <= t ||A Phi0||
    const Vec& mu = spectrum.mu;
    const double a_phi = std::sqrt(kSineNormSquared * ((mu.array().square() * init.w.coeffs.array().square()).sum() +
                                                       (mu.array() * init.v.coeffs.array().square()).sum()));
    double step = a_phi > 0.0 ? 0.25 * target / a_phi : t_cap;
    step = std::max(step, t_cap / 1e5);
    double good = 0.0;
    double t = step;
    while (t <= t_cap) {
        if (gap(t) > target) {
            double lo = good, hi = t;
            for (int i = 0; i < 60; ++i) {
                const double mid = 0.5 * (lo + hi);
                (gap(mid) > target ? hi : lo) = mid;
            }
            return lo;
        }
        good = t;
        t += step;
    }
    return t_cap;
}

std::vector<double> sample_LG_ratios(const SpectralGrid& grid, const ModelParams& p, const Vec& w0_modes, double r,
                                     int samples, unsigned long long seed)
{
    Rng rng(seed);
    const int k = grid.k_max();
    const int active = std::min(k, 24);
    std::vector<double> out;
    auto g_on_grid = [&](const Vec& wm) {
        const double mg = min_gap_fine(grid, wm, p.lift.theta2);
        if (!(mg > 0.0)) throw QuenchError("sample_LG", mg);
        const Vec gap = grid.to_grid(wm).array() + p.lift.theta2;
        return Vec(-p.beta_F / gap.array().square());
    };
    for (int s = 0; s < samples; ++s) {
        const Vec w1 = w0_modes + random_pinned_modes(rng, k, active, r * std::sqrt(uniform(rng, 0.0, 1.0)));
        Vec w2;
        if (s % 2 == 0) {
            w2 = w0_modes + random_pinned_modes(rng, k, active, r * std::sqrt(uniform(rng, 0.0, 1.0)));
        } else {
            w2 = w1 + random_pinned_modes(rng, k, active, 1e-3 * r);
            if (norm_Hk(w2 - w0_modes, 2) > r) continue;
        }
        const double den = norm_Hk(w1 - w2, 2);
        if (den == 0.0) continue;
        out.push_back(grid_norm0(g_on_grid(w1) - g_on_grid(w2), 2) / den);
    }
    return out;
}

LipschitzSample sample_LG(const SpectralGrid& grid, const ModelParams& p, const Vec& w0_modes, double r, int samples,
                          unsigned long long seed)
{
    LipschitzSample out;
    for (double q : sample_LG_ratios(grid, p, w0_modes, r, samples, seed)) {
        out.sup_ratio = std::max(out.sup_ratio, q);
        ++out.samples;
    }
    return out;
}

HorizonEstimate estimate_horizon(const SpectralGrid& grid, const ModelParams& p, const StateVW& init,
                                 const GridField& u0, const HorizonOptions& opt)
{
    HorizonEstimate e;
    e.C = sobolev_embedding_constant(grid.k_max());
    e.kappa = min_gap_fine(grid, init.w.coeffs, p.lift.theta2);
    if (!(e.kappa > 0.0)) throw QuenchError("estimate_horizon", e.kappa);
    e.r = default_radius(e.kappa, e.C);
    e.delta_o = strong_continuity_horizon(init, grid.spectrum(), e.r, opt.delta_cap);
    const GridField w0(Vec(grid.to_grid(init.w.coeffs).array() + p.lift.theta2));
    e.G0_norm = G0_norm(w0, u0, p);
    const auto c = inverse_power_constants(e.C, e.kappa, grid_norm(w0, p.lift.theta2, 2));
    e.L_G_formula = p.beta_F * c.C2;
    e.L_G_calibrated = kCalibrationSafety * sample_LG(grid, p, init.w.coeffs, e.r, opt.lg_samples, opt.seed).sup_ratio;
    HorizonInputs in{e.delta_o, 1.0, e.L_G_formula, e.kappa, e.C, e.G0_norm};
    e.T0_formula = t0_formula(in);
    // beta_F = 0 leaves G constant; any positive floor keeps the formula finite
    in.L_G = std::max(e.L_G_calibrated, 1e-12);
    e.T0_calibrated = t0_formula(in);
    return e;
}

double sup_norm_X(const Mat& v, const Mat& w)
{
    double m = 0.0;
    for (Eigen::Index j = 0; j < v.cols(); ++j) m = std::max(m, norm_X(v.col(j), w.col(j)));
    return m;
}

namespace {

double uniform_step(const Vec& times)
{
    const auto m = times.size();
    if (m < 2 || times(0) != 0.0) throw std::invalid_argument("path times must start at 0 with >= 2 samples");
    const double T = times(m - 1);
    const double h = T / (m - 1);
    if (!(h > 0.0)) throw std::invalid_argument("path horizon must be positive");
    for (Eigen::Index i = 0; i < m; ++i)
        if (std::abs(times(i) - i * h) > 1e-12 * std::max(1.0, T))
            throw std::invalid_argument("path times must be uniform");
    return h;
}

bool at_rounding_floor(double d, double scale)
{
    return d <= 1e3 * std::numeric_limits<double>::epsilon() * std::max(1.0, scale);
}

}  // namespace

std::pair<VWPath, PicardReport> picard_dispersive(const SpectralGrid& grid, const ModelParams& p,
                                                  const PressurePath& u_path, const StateVW& init,
                                                  const PicardOptions& opt, const VWPath* initial_guess)
{
    p.validate();
    const int k = grid.k_max();
    const auto m = u_path.times.size();
    if (u_path.samples.rows() != grid.n() || u_path.samples.cols() != m)
        throw SizeError("picard_dispersive: pressure path does not match the grid");
    if (init.k_max() != k) throw SizeError("picard_dispersive: initial state does not match k_max");
    const double h = uniform_step(u_path.times);

    const Mat pressure = p.beta_p * grid.to_modes((u_path.samples.array() - p.lift.theta1).matrix());
    const DuhamelWeights dw = duhamel_weights(grid.spectrum(), h, opt.rule);

    VWPath cur;
    cur.times = u_path.times;
    if (initial_guess) {
        if (initial_guess->v.rows() != k || initial_guess->v.cols() != m)
            throw SizeError("picard_dispersive: initial guess does not match");
        cur.v = initial_guess->v;
        cur.w = initial_guess->w;
    } else {
        const Mat frozen = forcing_G_modes(grid, init.w.coeffs, p).replicate(1, m) + pressure;
        ModePath first = propagate_path(init.v.coeffs, init.w.coeffs, frozen, dw);
        cur.v = std::move(first.v);
        cur.w = std::move(first.w);
    }

    PicardReport rep;
    rep.T_used = u_path.horizon();
    for (int it = 1; it <= opt.max_iter; ++it) {
        const Mat g = forcing_G_modes(grid, cur.w, p) + pressure;
        ModePath next = propagate_path(init.v.coeffs, init.w.coeffs, g, dw);
        const double d = sup_norm_X(next.v - cur.v, next.w - cur.w);
        const double scale = sup_norm_X(next.v, next.w);
        rep.iterations = it;
        if (!rep.differences.empty())
            rep.contraction_ratios.push_back(rep.differences.back() > 0.0 ? d / rep.differences.back() : 0.0);
        rep.differences.push_back(d);
        cur.v = std::move(next.v);
        cur.w = std::move(next.w);
        if (!std::isfinite(d)) break;
        if (d <= opt.tol || at_rounding_floor(d, scale)) {
            rep.converged = true;
            return {std::move(cur), std::move(rep)};
        }
        if (!rep.contraction_ratios.empty() && rep.contraction_ratios.back() >= 1.0) {
            rep.diagnostic = "successive differences stopped contracting";
            throw NonContractionError("picard_dispersive: ratio " + std::to_string(rep.contraction_ratios.back()) +
                                          " at T = " + std::to_string(rep.T_used),
                                      rep);
        }
    }
    rep.diagnostic = "no convergence within max_iter";
    throw NonContractionError("picard_dispersive: no convergence in " + std::to_string(opt.max_iter) + " iterations",
                              rep);
}

PlatePath with_lift(const SpectralGrid& grid, const ModelParams& p, VWPath vw)
{
    PlatePath out;
    out.v = grid.to_grid(vw.v);
    out.w = grid.to_grid(vw.w).array() + p.lift.theta2;
    out.modes = std::move(vw);
    return out;
}

PlatePath solution_operator_W(const SpectralGrid& grid, const ModelParams& p, const PressurePath& u_path,
                              const StateVW& init, double tol)
{
    PicardOptions opt;
    opt.tol = tol;
    return with_lift(grid, p, picard_dispersive(grid, p, u_path, init, opt).first);
}

Mat eval_W2(const SpectralGrid& grid, const VWPath& vw, const ModelParams& p)
{
    const double mg = min_gap_fine(grid, vw.w, p.lift.theta2);
    const Mat w = grid.to_grid(vw.w).array() + p.lift.theta2;
    if (!(mg > 0.0) || !(w.minCoeff() > 0.0)) throw QuenchError("W2", std::min(mg, w.minCoeff()));
    return grid.to_grid(vw.v).cwiseQuotient(w);
}

ModePath frechet_W(const SpectralGrid& grid, const ModelParams& p, const PressurePath& u_path, const Mat& q_path,
                   const VWPath& vw, const PicardOptions& opt)
{
    const auto m = u_path.times.size();
    if (q_path.rows() != grid.n() || q_path.cols() != m || vw.w.cols() != m)
        throw SizeError("frechet_W: path sizes do not match");
    const double h = uniform_step(u_path.times);
    const Mat gap = grid.to_fine(vw.w).array() + p.lift.theta2;
    if (!(gap.minCoeff() > 0.0)) throw QuenchError("frechet_W", gap.minCoeff());
    const Mat factor = 2.0 * p.beta_F / gap.array().cube();
    const Mat source = p.beta_p * grid.to_modes(q_path);
    const DuhamelWeights dw = duhamel_weights(grid.spectrum(), h, opt.rule);
    const int k = grid.k_max();
    const Vec zero = Vec::Zero(k);

    ModePath z{Mat::Zero(k, m), Mat::Zero(k, m)};
    double prev = 0.0;
    for (int it = 1; it <= opt.max_iter; ++it) {
        const Mat g = source + grid.from_fine(factor.cwiseProduct(grid.to_fine(z.w)));
        ModePath next = propagate_path(zero, zero, g, dw);
        const double d = sup_norm_X(next.v - z.v, next.w - z.w);
        const double scale = sup_norm_X(next.v, next.w);
        z = std::move(next);
        if (d <= opt.tol || at_rounding_floor(d, scale)) return z;
        if (it > 1 && prev > 0.0 && d >= prev) {
            PicardReport rep;
            rep.iterations = it;
            rep.T_used = u_path.horizon();
            rep.contraction_ratios.push_back(d / prev);
            throw NonContractionError("frechet_W: linearised iteration does not contract", rep);
        }
        prev = d;
    }
    PicardReport rep;
    rep.iterations = opt.max_iter;
    throw NonContractionError("frechet_W: no convergence within max_iter", rep);
}

double empirical_lipschitz_W(const SpectralGrid& grid, const ModelParams& p, const PressurePath& u1,
                             const PressurePath& u2, const StateVW& init, double tol)
{
    double du = 0.0;
    for (Eigen::Index j = 0; j < u1.samples.cols(); ++j)
        du = std::max(du, grid_norm0(u1.samples.col(j) - u2.samples.col(j), 2));
    if (du == 0.0) return 0.0;
    PicardOptions opt;
    opt.tol = tol;
    const VWPath a = picard_dispersive(grid, p, u1, init, opt).first;
    const VWPath b = picard_dispersive(grid, p, u2, init, opt).first;
    return sup_norm_X(a.v - b.v, a.w - b.w) / du;
}

double empirical_holder(const VWPath& path, double alpha)
{
    if (path.times.size() < 3) throw std::invalid_argument("empirical_holder: need >= 3 samples");
    double best = 0.0;
    for (Eigen::Index i = 0; i < path.times.size(); ++i)
        for (Eigen::Index j = i + 1; j < path.times.size(); ++j) {
            const double d = norm_X(path.v.col(j) - path.v.col(i), path.w.col(j) - path.w.col(i));
            best = std::max(best, d / std::pow(path.times(j) - path.times(i), alpha));
        }
    return best;
}

double empirical_holder(const PressurePath& path, double alpha)
{
    if (path.times.size() < 3) throw std::invalid_argument("empirical_holder: need >= 3 samples");
    double best = 0.0;
    for (Eigen::Index i = 0; i < path.times.size(); ++i)
        for (Eigen::Index j = i + 1; j < path.times.size(); ++j) {
            const double d = grid_norm0(path.samples.col(j) - path.samples.col(i), 2);
            best = std::max(best, d / std::pow(path.times(j) - path.times(i), alpha));
        }
    return best;
}

StateVW steady_plate(const SpectralGrid& grid, const ModelParams& p, double tol, int max_iter)
{
    const Vec& mu = grid.spectrum().mu;
    const int k = grid.k_max();
    auto residual = [&](const Vec& w) -> Vec {
        return -mu.cwiseProduct(w) + Vec(forcing_G_modes(grid, w, p));
    };
    Vec w = Vec::Zero(k);
    Vec r = residual(w);
    for (int it = 0; it < max_iter; ++it) {
        if (r.lpNorm<Eigen::Infinity>() <= tol * std::max(1.0, p.beta_F)) return {ModeVector::zero(k), ModeVector(w)};
        const Vec gap = grid.to_fine(w).array() + p.lift.theta2;
        const Vec dg = 2.0 * p.beta_F / gap.array().cube();
        Mat J = grid.fine().analysis() * dg.asDiagonal() * grid.fine().synthesis();
        J.diagonal() -= mu;
        const Vec step = J.partialPivLu().solve(-r);
        double lambda = 1.0;
        for (int b = 0; b < 40; ++b, lambda *= 0.5) {
            const Vec trial = w + lambda * step;
            if (!(min_gap_fine(grid, trial, p.lift.theta2) > 0.0)) continue;
            const Vec rt = residual(trial);
            if (rt.norm() < r.norm() || b == 39) {
                w = trial;
                r = rt;
                break;
            }
        }
    }
    throw std::runtime_error("steady_plate: Newton did not converge (beyond pull-in?)");
}

double strictness_residual(const SpectralGrid& grid, const ModelParams& p, const PressurePath& u_path,
                           const VWPath& vw)
{
    const double h = uniform_step(vw.times);
    const Mat pressure = p.beta_p * grid.to_modes((u_path.samples.array() - p.lift.theta1).matrix());
    const Mat g = forcing_G_modes(grid, vw.w, p) + pressure;
    const Vec& mu = grid.spectrum().mu;
    double worst = 0.0;
    for (int m = 1; m < vw.steps(); ++m) {
        const Vec dv = (vw.v.col(m + 1) - vw.v.col(m - 1)) / (2.0 * h);
        const Vec dw = (vw.w.col(m + 1) - vw.w.col(m - 1)) / (2.0 * h);
        const Vec rv = dv - (-mu.cwiseProduct(vw.w.col(m)) + g.col(m));
        const Vec rw = dw - vw.v.col(m);
        worst = std::max(worst, norm_X(rv, rw));
    }
    return worst;
}

}  // namespace mems
