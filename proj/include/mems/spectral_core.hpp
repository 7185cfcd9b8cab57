#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace mems {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Raised whenever an operation needs 1/w and the gap has closed somewhere.
class QuenchError : public std::runtime_error {
public:
    QuenchError(const std::string& where, double min_gap)
        : std::runtime_error(where + ": gap closed (min w = " + std::to_string(min_gap) + ")"),
          min_gap_(min_gap) {}
    double min_gap() const { return min_gap_; }

private:
    double min_gap_;
};

class SizeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Coefficients of sin(k pi x), k = 1..k_max.
struct ModeVector {
    Vec coeffs;

    ModeVector() = default;
    explicit ModeVector(Vec c);
    static ModeVector zero(int k_max) { return ModeVector(Vec::Zero(k_max)); }
    int size() const { return static_cast<int>(coeffs.size()); }
};

// Values at interior nodes x_j = j/(n+1), j = 1..n. Boundary values come from a lift.
struct GridField {
    Vec values;

    GridField() = default;
    explicit GridField(Vec v);
    static GridField constant(int n, double c) { return GridField(Vec::Constant(n, c)); }
    int size() const { return static_cast<int>(values.size()); }
    static double node(int j, int n) { return static_cast<double>(j) / (n + 1); }
};

struct BoundaryLift {
    double theta1 = 1.0;
    double theta2 = 1.0;

    BoundaryLift() = default;
    BoundaryLift(double t1, double t2);
};

// Plate state: gap velocity v and shifted gap w~ = w - theta2, both in modes.
struct StateVW {
    ModeVector v;
    ModeVector w;

    StateVW() = default;
    StateVW(ModeVector v_, ModeVector w_);
    static StateVW zero(int k_max) { return {ModeVector::zero(k_max), ModeVector::zero(k_max)}; }
    int k_max() const { return v.size(); }
};

enum class PlateOperator { full, biharmonic };

struct PlateSpectrum {
    Vec mu;
    Vec omega;
    PlateOperator op = PlateOperator::full;
    int size() const { return static_cast<int>(mu.size()); }
};

PlateSpectrum plate_eigenvalues(int k_max, PlateOperator op = PlateOperator::full);

// Dense DST-I pair for n nodes and the first k modes.  With n == k the pair is an exact inverse.
class SineBasis {
public:
    SineBasis() = default;
    SineBasis(int n, int k);

    int nodes() const { return static_cast<int>(synthesis_.rows()); }
    int modes() const { return static_cast<int>(synthesis_.cols()); }
    const Mat& synthesis() const { return synthesis_; }  // n x k
    const Mat& analysis() const { return analysis_; }    // k x n

private:
    Mat synthesis_;
    Mat analysis_;
};

ModeVector sine_transform(const GridField& f);
ModeVector sine_transform(const GridField& f, int k_max);
GridField inverse_sine_transform(const ModeVector& m);

// Everything a solver needs about one spatial resolution: n = k_max collocation nodes,
// a 2x refined grid (2n+1 nodes) for nonlinear products, and the plate spectrum.
class SpectralGrid {
public:
    explicit SpectralGrid(int k_max, PlateOperator op = PlateOperator::full);

    int k_max() const { return k_max_; }
    int n() const { return k_max_; }
    int n_fine() const { return 2 * k_max_ + 1; }
    double h() const { return 1.0 / (k_max_ + 1); }
    const PlateSpectrum& spectrum() const { return spectrum_; }
    const SineBasis& coarse() const { return coarse_; }
    const SineBasis& fine() const { return fine_; }

    template <typename Derived>
    Mat to_modes(const Eigen::MatrixBase<Derived>& grid) const { return coarse_.analysis() * grid; }
    template <typename Derived>
    Mat to_grid(const Eigen::MatrixBase<Derived>& modes) const { return coarse_.synthesis() * modes; }
    template <typename Derived>
    Mat to_fine(const Eigen::MatrixBase<Derived>& modes) const { return fine_.synthesis() * modes; }
    // Fine-grid samples back to the first k_max modes (padding rule).
    template <typename Derived>
    Mat from_fine(const Eigen::MatrixBase<Derived>& fine) const { return fine_.analysis() * fine; }

private:
    int k_max_;
    PlateSpectrum spectrum_;
    SineBasis coarse_;
    SineBasis fine_;
};

StateVW semigroup_apply(const StateVW& s, const PlateSpectrum& spectrum, double t);

// Sine normalisation: int_0^1 sin^2(k pi x) dx = 1/2.  Every spectral norm below carries this factor.
inline constexpr double kSineNormSquared = 0.5;

template <typename DV, typename DW>
double norm_X(const Eigen::MatrixBase<DV>& v, const Eigen::MatrixBase<DW>& w)
{
    double acc = 0.0;
    for (Eigen::Index k = 0; k < v.size(); ++k) {
        const double kp2 = std::pow((k + 1) * M_PI, 2);
        acc += v(k) * v(k) + (kp2 + kp2 * kp2) * w(k) * w(k);
    }
    return std::sqrt(kSineNormSquared * acc);
}

double norm_X(const StateVW& s);

template <typename Derived>
double norm_Hk(const Eigen::MatrixBase<Derived>& coeffs, int order)
{
    if (order < 0 || order > 3) throw std::invalid_argument("norm_Hk: order must be 0..3");
    double acc = 0.0;
    for (Eigen::Index m = 0; m < coeffs.size(); ++m) {
        const double kp2 = std::pow((m + 1) * M_PI, 2);
        double weight = 1.0, p = 1.0;
        for (int j = 1; j <= order; ++j) {
            p *= kp2;
            weight += p;
        }
        acc += weight * coeffs(m) * coeffs(m);
    }
    return std::sqrt(kSineNormSquared * acc);
}

double norm_Hk(const ModeVector& f, int order);

// Constant of H^2 -> L^inf over pinned (zero trace) functions in the truncated basis.
double sobolev_embedding_constant(int k_max);

enum class Quadrature { exponential_trapezoid, trapezoid };

// Per-mode weights for one step of length h:
//   v+ = c v - omega s w + a_new g(t+h) + a_old g(t)
//   w+ = c w + s v / omega + b_new g(t+h) + b_old g(t)
struct DuhamelWeights {
    double h = 0.0;
    Quadrature rule = Quadrature::exponential_trapezoid;
    Vec cos_wh, sin_wh, omega;
    Vec a_new, a_old, b_new, b_old;
};

DuhamelWeights duhamel_weights(const PlateSpectrum& spectrum, double h,
                               Quadrature rule = Quadrature::exponential_trapezoid);

void duhamel_advance(Vec& v, Vec& w, const Vec& g_old, const Vec& g_new, const DuhamelWeights& dw);

// Time-sampled forcing for the velocity equation; column m of samples is g(times[m]).
struct ForcingPath {
    Vec times;
    Mat samples;
};

StateVW duhamel_step(const StateVW& s, const PlateSpectrum& spectrum, const ForcingPath& forcing,
                     double t0, double t1, Quadrature rule = Quadrature::exponential_trapezoid);

// Whole-path propagation on a uniform grid: returns k x (N+1) matrices of v and w.
struct ModePath {
    Mat v;
    Mat w;
};

ModePath propagate_path(const Vec& v0, const Vec& w0, const Mat& g, const DuhamelWeights& dw);

}  // namespace mems
