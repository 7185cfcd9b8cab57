#include "mems/verify_bench.hpp"

#include "mems/grid_norms.hpp"
#include "mems/sampling.hpp"

#include <algorithm>
#include <cmath>

namespace mems {

namespace {

struct TraceField {
    Vec interior;
    double trace = 0.0;
};

TraceField random_trace_field(Rng& rng, const SineBasis& basis)
{
    TraceField f;
    f.trace = uniform(rng, -2.0, 2.0);
    const Vec m = random_pinned_modes(rng, basis.modes(), basis.modes(), uniform(rng, 0.0, 3.0));
    f.interior = basis.synthesis() * m;
    f.interior.array() += f.trace;
    return f;
}

double algebra_ratio(const TraceField& f, const TraceField& g)
{
    const double den = grid_norm(f.interior, f.trace, f.trace, 2) * grid_norm(g.interior, g.trace, g.trace, 2);
    if (den == 0.0) return 0.0;
    const double tr = f.trace * g.trace;
    return grid_norm(f.interior.cwiseProduct(g.interior), tr, tr, 2) / den;
}

void finish(CalibratedCheck& c, const std::vector<double>& training, const std::vector<double>& fresh)
{
    double sup = 0.0;
    for (double q : training) sup = std::max(sup, q);
    c.calibrated = kCalibrationSafety * sup;
    c.fresh_samples = static_cast<int>(fresh.size());
    for (double q : fresh) {
        c.fresh_max = std::max(c.fresh_max, q);
        if (q > c.calibrated) ++c.violations;
    }
    c.pass = c.violations == 0 && c.fresh_samples > 0;
}

// Zero-trace grid perturbation with spectral H^2 norm `radius`.
Vec grid_perturbation(Rng& rng, const SpectralGrid& grid, int active, double radius)
{
    return grid.to_grid(random_pinned_modes(rng, grid.k_max(), active, radius));
}

}  // namespace

CalibratedCheck algebra_property_check(int trials, int n, unsigned long long seed)
{
    const SineBasis basis(n, std::min(n, 16));
    const auto draw = [&](unsigned long long s, bool with_constant) {
        Rng rng(s);
        std::vector<double> out;
        if (with_constant) {
            TraceField one{Vec::Ones(n), 1.0};
            out.push_back(algebra_ratio(one, one));
        }
        for (int t = 0; t < trials; ++t) {
            const TraceField f = random_trace_field(rng, basis);
            const TraceField g = random_trace_field(rng, basis);
            out.push_back(algebra_ratio(f, g));
        }
        return out;
    };
    CalibratedCheck c;
    finish(c, draw(seed, true), draw(seed + 1, false));
    return c;
}

InversePowerCheck inverse_power_bounds_check(const SpectralGrid& grid, const ModelParams& p, const Vec& w0_modes,
                                             double r, int samples, unsigned long long seed)
{
    InversePowerCheck out;
    const double t2 = p.lift.theta2;
    const double C = sobolev_embedding_constant(grid.k_max());
    const double kappa = min_gap_fine(grid, w0_modes, t2);
    if (!(kappa > 0.0)) throw QuenchError("inverse_power_bounds_check", kappa);
    if (!(r > 0.0) || r >= kappa / (2.0 * C)) throw std::invalid_argument("inverse_power_bounds_check: r outside (0, kappa/(2C))");
    const Vec w0 = grid.to_grid(w0_modes).array() + t2;
    out.constants = inverse_power_constants(C, kappa, grid_norm(w0, t2, t2, 2));
    const auto& c = out.constants;
    const double Ck[4] = {0.0, c.C1, c.C2, c.C3};

    Rng rng(seed);
    const int active = std::min(grid.k_max(), 24);
    for (int s = 0; s < samples; ++s) {
        const Vec d1 = random_pinned_modes(rng, grid.k_max(), active, r * std::sqrt(uniform(rng, 0.0, 1.0)));
        const Vec d2 = (s % 2 == 0)
                           ? Vec(random_pinned_modes(rng, grid.k_max(), active, r * std::sqrt(uniform(rng, 0.0, 1.0))))
                           : Vec(d1 + random_pinned_modes(rng, grid.k_max(), active, 1e-3 * r));
        if (norm_Hk(d2, 2) > r) continue;
        const Vec w1 = w0 + grid.to_grid(d1);
        const Vec w2 = w0 + grid.to_grid(d2);
        const double dw = grid_norm0(w1 - w2, 2);
        for (int k = 1; k <= 3; ++k) {
            const double bt = std::pow(t2, -k);
            const Vec i1 = w1.array().pow(-k);
            const double ratio = grid_norm(i1, bt, bt, 2) / std::pow(c.C1, k);
            out.worst_power_ratio = std::max(out.worst_power_ratio, ratio);
            if (ratio > 1.0) ++out.violations;
            if (k >= 2 && dw > 0.0) {
                const Vec i2 = w2.array().pow(-k);
                const double dr = grid_norm0(i1 - i2, 2) / (Ck[k] * dw);
                out.worst_diff_ratio = std::max(out.worst_diff_ratio, dr);
                if (dr > 1.0) ++out.violations;
            }
        }
        ++out.samples;
    }
    out.pass = out.violations == 0 && out.samples > 0;
    return out;
}

CalibratedCheck lipschitz_G_audit(const SpectralGrid& grid, const ModelParams& p, const Vec& w0_modes, double r,
                                  int calibration, int fresh, unsigned long long seed)
{
    CalibratedCheck c;
    finish(c, sample_LG_ratios(grid, p, w0_modes, r, calibration, seed),
           sample_LG_ratios(grid, p, w0_modes, r, fresh, seed + 1));
    return c;
}

namespace {

PressurePath affine_path(const Vec& base, const Vec& a, const Vec& b, double T, int steps)
{
    PressurePath path;
    path.times = uniform_times(T, steps);
    path.samples.resize(base.size(), steps + 1);
    for (int m = 0; m <= steps; ++m) path.samples.col(m) = base + a + (path.times(m) / T) * b;
    return path;
}

std::vector<double> lipschitz_F_ratios(const SpectralGrid& grid, const ModelParams& p, const CoupledState& init,
                                       double r, double T, int steps, int samples, unsigned long long seed)
{
    Rng rng(seed);
    const int active = std::min(grid.k_max(), 16);
    PicardOptions opt;
    opt.tol = 1e-12;
    std::vector<double> out;
    for (int s = 0; s < samples; ++s) {
        const Vec a1 = grid_perturbation(rng, grid, active, 0.5 * r * uniform(rng, 0.0, 1.0));
        const Vec b1 = grid_perturbation(rng, grid, active, 0.5 * r * uniform(rng, 0.0, 1.0));
        Vec a2, b2;
        if (s % 2 == 0) {
            a2 = grid_perturbation(rng, grid, active, 0.5 * r * uniform(rng, 0.0, 1.0));
            b2 = grid_perturbation(rng, grid, active, 0.5 * r * uniform(rng, 0.0, 1.0));
        } else {
            a2 = a1 + grid_perturbation(rng, grid, active, 1e-3 * r);
            b2 = b1;
        }
        const PressurePath u1 = affine_path(init.u, a1, b1, T, steps);
        const PressurePath u2 = affine_path(init.u, a2, b2, T, steps);
        const Mat F1 = F_path(grid, p, u1, picard_dispersive(grid, p, u1, init.vw, opt).first);
        const Mat F2 = F_path(grid, p, u2, picard_dispersive(grid, p, u2, init.vw, opt).first);
        double num = 0.0, den = 0.0;
        for (int m = 0; m <= steps; ++m) {
            num = std::max(num, interior_l2(F1.col(m) - F2.col(m)));
            den = std::max(den, grid_norm0(u1.samples.col(m) - u2.samples.col(m), 2));
        }
        if (den > 0.0) out.push_back(num / den);
    }
    return out;
}

}  // namespace

CalibratedCheck lipschitz_F_audit(const SpectralGrid& grid, const ModelParams& p, const CoupledState& init, double r,
                                  double T, int steps, int calibration, int fresh, unsigned long long seed)
{
    CalibratedCheck c;
    finish(c, lipschitz_F_ratios(grid, p, init, r, T, steps, calibration, seed),
           lipschitz_F_ratios(grid, p, init, r, T, steps, fresh, seed + 1));
    return c;
}

namespace {

struct HolderSamples {
    std::vector<double> A, B;
};

HolderSamples holder_samples(const SpectralGrid& grid, const ModelParams& p, const CoupledState& init,
                             const PstarOperator& op, double alpha, double T, int steps, int samples,
                             unsigned long long seed)
{
    Rng rng(seed);
    const int active = std::min(grid.k_max(), 12);
    HolderSamples out;
    const Vec times = uniform_times(T, steps);
    for (int s = 0; s < samples; ++s) {
        const Vec a = grid_perturbation(rng, grid, active, uniform(rng, 0.0, 0.3));
        const Vec b = grid_perturbation(rng, grid, active, uniform(rng, 0.0, 0.3));
        const Vec c = grid_perturbation(rng, grid, active, uniform(rng, 0.0, 1.0));
        const Vec d = grid_perturbation(rng, grid, active, uniform(rng, 0.0, 1.0));
        const double ga = uniform(rng, alpha, 1.0);
        const double gq = uniform(rng, alpha, 1.0);
        PressurePath u;
        u.times = times;
        u.samples.resize(grid.n(), steps + 1);
        Mat q(grid.n(), steps + 1);
        for (int m = 0; m <= steps; ++m) {
            const double tau = times(m) / T;
            u.samples.col(m) = init.u + std::pow(tau, ga) * a + std::sin(M_PI * tau) * b;
            q.col(m) = c + std::pow(tau, gq) * d;
        }
        const HolderMeasure h = holder_F_measure(grid, p, u, q, init.vw, op, alpha);
        out.A.push_back(h.A);
        out.B.push_back(h.B);
    }
    return out;
}

}  // namespace

HolderAudit holder_F_audit(const SpectralGrid& grid, const ModelParams& p, const CoupledState& init, double alpha,
                           double T, int steps, int calibration, int fresh, unsigned long long seed)
{
    const GridField v0(grid.to_grid(init.vw.v.coeffs));
    const GridField w0(Vec(grid.to_grid(init.vw.w.coeffs).array() + p.lift.theta2));
    const PstarOperator op = assemble_Pstar(GridField(init.u), v0, w0, p);
    const HolderSamples train = holder_samples(grid, p, init, op, alpha, T, steps, calibration, seed);
    const HolderSamples test = holder_samples(grid, p, init, op, alpha, T, steps, fresh, seed + 1);
    HolderAudit out;
    finish(out.A, train.A, test.A);
    finish(out.B, train.B, test.B);
    out.pass = out.A.pass && out.B.pass;
    return out;
}

}  // namespace mems
