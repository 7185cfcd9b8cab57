#include "mems/spectral_core.hpp"

#include <algorithm>
#include <cmath>

namespace mems {

namespace {

void require_finite(const Vec& v, const char* what)
{
    if (!v.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite entries");
}

// sin x - x cos x without cancellation for small x
double sin_minus_xcos(double x)
{
    if (std::abs(x) < 0.1) {
        const double x2 = x * x;
        return x * x2 * (1.0 / 3.0 - x2 * (1.0 / 30.0 - x2 * (1.0 / 840.0 - x2 * (1.0 / 45360.0 - x2 / 3991680.0))));
    }
    return std::sin(x) - x * std::cos(x);
}

}  // namespace

ModeVector::ModeVector(Vec c) : coeffs(std::move(c))
{
    if (coeffs.size() < 1) throw SizeError("ModeVector: k_max must be >= 1");
    require_finite(coeffs, "ModeVector");
}

GridField::GridField(Vec v) : values(std::move(v))
{
    if (values.size() < 3) throw SizeError("GridField: need at least 3 interior nodes");
    require_finite(values, "GridField");
}

BoundaryLift::BoundaryLift(double t1, double t2) : theta1(t1), theta2(t2)
{
    if (!(t1 > 0.0) || !(t2 > 0.0)) throw std::invalid_argument("BoundaryLift: theta1, theta2 must be > 0");
}

StateVW::StateVW(ModeVector v_, ModeVector w_) : v(std::move(v_)), w(std::move(w_))
{
    if (v.size() != w.size()) throw SizeError("StateVW: v and w differ in k_max");
}

PlateSpectrum plate_eigenvalues(int k_max, PlateOperator op)
{
    if (k_max < 1) throw std::invalid_argument("plate_eigenvalues: k_max must be >= 1");
    PlateSpectrum s;
    s.op = op;
    s.mu.resize(k_max);
    s.omega.resize(k_max);
    for (int k = 1; k <= k_max; ++k) {
        const double kp2 = std::pow(k * M_PI, 2);
        s.mu(k - 1) = op == PlateOperator::full ? kp2 + kp2 * kp2 : kp2 * kp2;
        s.omega(k - 1) = std::sqrt(s.mu(k - 1));
    }
    return s;
}

SineBasis::SineBasis(int n, int k)
{
    if (n < 1 || k < 1 || k > n) throw SizeError("SineBasis: need 1 <= k <= n");
    synthesis_.resize(n, k);
    for (int j = 1; j <= n; ++j)
        for (int m = 1; m <= k; ++m)
            synthesis_(j - 1, m - 1) = std::sin(M_PI * m * j / (n + 1.0));
    analysis_ = (2.0 / (n + 1.0)) * synthesis_.transpose();
}

ModeVector sine_transform(const GridField& f) { return sine_transform(f, f.size()); }

ModeVector sine_transform(const GridField& f, int k_max)
{
    if (k_max != f.size())
        throw SizeError("sine_transform: grid has " + std::to_string(f.size()) + " nodes but k_max = " +
                        std::to_string(k_max));
    SineBasis b(f.size(), k_max);
    return ModeVector(b.analysis() * f.values);
}

GridField inverse_sine_transform(const ModeVector& m)
{
    SineBasis b(m.size(), m.size());
    return GridField(b.synthesis() * m.coeffs);
}

SpectralGrid::SpectralGrid(int k_max, PlateOperator op)
    : k_max_(k_max), spectrum_(plate_eigenvalues(k_max, op)), coarse_(k_max, k_max), fine_(2 * k_max + 1, k_max)
{
    if (k_max < 3) throw SizeError("SpectralGrid: k_max must be >= 3");
}

StateVW semigroup_apply(const StateVW& s, const PlateSpectrum& spectrum, double t)
{
    if (t < 0.0) throw std::invalid_argument("semigroup_apply: negative time");
    if (s.k_max() != spectrum.size()) throw SizeError("semigroup_apply: state/spectrum size mismatch");
    // Phases reach ~1e6 rad at k_max = 256; extended precision keeps the semigroup law at rounding level.
    Vec c(spectrum.size()), sn(spectrum.size());
    for (int k = 0; k < spectrum.size(); ++k) {
        const long double ph = static_cast<long double>(spectrum.omega(k)) * t;
        c(k) = static_cast<double>(std::cos(ph));
        sn(k) = static_cast<double>(std::sin(ph));
    }
    const Vec& v = s.v.coeffs;
    const Vec& w = s.w.coeffs;
    Vec w1 = c.cwiseProduct(w) + sn.cwiseProduct(v).cwiseQuotient(spectrum.omega);
    Vec v1 = c.cwiseProduct(v) - sn.cwiseProduct(w).cwiseProduct(spectrum.omega);
    return {ModeVector(std::move(v1)), ModeVector(std::move(w1))};
}

double norm_X(const StateVW& s) { return norm_X(s.v.coeffs, s.w.coeffs); }

double norm_Hk(const ModeVector& f, int order)
{
    if (order < 0 || order > 2) throw std::invalid_argument("norm_Hk: order must be 0, 1 or 2");
    return norm_Hk(f.coeffs, order);
}

namespace {

double embedding_estimate(int k_max)
{
    const int n = k_max;
    double best = 0.0;
    for (int j = 1; j <= n; ++j) {
        const double x = GridField::node(j, n);
        double acc = 0.0;
        for (int k = 1; k <= k_max; ++k) {
            const double kp2 = std::pow(k * M_PI, 2);
            const double s = std::sin(k * M_PI * x);
            acc += s * s / (kSineNormSquared * (1.0 + kp2 + kp2 * kp2));
        }
        best = std::max(best, acc);
    }
    return std::sqrt(best);
}

}  // namespace

double sobolev_embedding_constant(int k_max)
{
    if (k_max < 8) throw std::invalid_argument("sobolev_embedding_constant: k_max must be >= 8");
    const double c = embedding_estimate(k_max);
    const double c2 = embedding_estimate(2 * k_max);
    if (std::abs(c2 - c) > 0.01 * c)
        throw std::runtime_error("sobolev_embedding_constant: estimate did not stabilise under k_max doubling");
    return c;
}

DuhamelWeights duhamel_weights(const PlateSpectrum& spectrum, double h, Quadrature rule)
{
    if (!(h > 0.0)) throw std::invalid_argument("duhamel_weights: step must be positive");
    const int k = spectrum.size();
    DuhamelWeights d;
    d.h = h;
    d.rule = rule;
    d.omega = spectrum.omega;
    d.cos_wh.resize(k);
    d.sin_wh.resize(k);
    d.a_new.resize(k);
    d.a_old.resize(k);
    d.b_new.resize(k);
    d.b_old.resize(k);
    for (int i = 0; i < k; ++i) {
        const double om = spectrum.omega(i);
        const double x = om * h;
        const double c = std::cos(x), s = std::sin(x);
        const double half = std::sin(0.5 * x);
        d.cos_wh(i) = c;
        d.sin_wh(i) = s;
        if (rule == Quadrature::exponential_trapezoid) {
            const double one_minus_cos = 2.0 * half * half;
            d.a_new(i) = one_minus_cos / (om * om * h);
            d.a_old(i) = s / om - d.a_new(i);
            d.b_old(i) = sin_minus_xcos(x) / (om * om * om * h);
            d.b_new(i) = one_minus_cos / (om * om) - d.b_old(i);
        } else {
            d.a_new(i) = 0.5 * h;
            d.a_old(i) = 0.5 * h * c;
            d.b_new(i) = 0.0;
            d.b_old(i) = 0.5 * h * s / om;
        }
    }
    return d;
}

void duhamel_advance(Vec& v, Vec& w, const Vec& g_old, const Vec& g_new, const DuhamelWeights& d)
{
    const auto c = d.cos_wh.array();
    const auto s = d.sin_wh.array();
    const auto om = d.omega.array();
    Vec v1 = c * v.array() - om * s * w.array() + d.a_new.array() * g_new.array() + d.a_old.array() * g_old.array();
    Vec w1 = c * w.array() + s * v.array() / om + d.b_new.array() * g_new.array() + d.b_old.array() * g_old.array();
    v.swap(v1);
    w.swap(w1);
}

StateVW duhamel_step(const StateVW& s, const PlateSpectrum& spectrum, const ForcingPath& forcing, double t0, double t1,
                     Quadrature rule)
{
    if (t1 < t0) throw std::invalid_argument("duhamel_step: t1 < t0");
    if (s.k_max() != spectrum.size()) throw SizeError("duhamel_step: state/spectrum size mismatch");
    if (t1 == t0) return s;
    const auto m = forcing.times.size();
    const double slack = 1e-12 * std::max(1.0, std::abs(t1));
    if (m < 2 || forcing.samples.cols() != m || forcing.samples.rows() != spectrum.size() ||
        std::abs(forcing.times(0) - t0) > slack || std::abs(forcing.times(m - 1) - t1) > slack)
        throw std::invalid_argument("duhamel_step: quadrature node mismatch (forcing must be sampled from t0 to t1)");
    Vec v = s.v.coeffs, w = s.w.coeffs;
    for (Eigen::Index j = 0; j + 1 < m; ++j) {
        const double h = forcing.times(j + 1) - forcing.times(j);
        if (!(h > 0.0)) throw std::invalid_argument("duhamel_step: forcing times must increase");
        duhamel_advance(v, w, forcing.samples.col(j), forcing.samples.col(j + 1), duhamel_weights(spectrum, h, rule));
    }
    return {ModeVector(std::move(v)), ModeVector(std::move(w))};
}

ModePath propagate_path(const Vec& v0, const Vec& w0, const Mat& g, const DuhamelWeights& dw)
{
    const auto k = v0.size();
    const auto cols = g.cols();
    if (g.rows() != k || w0.size() != k || dw.omega.size() != k) throw SizeError("propagate_path: size mismatch");
    ModePath p{Mat(k, cols), Mat(k, cols)};
    Vec v = v0, w = w0;
    p.v.col(0) = v;
    p.w.col(0) = w;
    for (Eigen::Index m = 0; m + 1 < cols; ++m) {
        duhamel_advance(v, w, g.col(m), g.col(m + 1), dw);
        p.v.col(m + 1) = v;
        p.w.col(m + 1) = w;
    }
    return p;
}

}  // namespace mems
