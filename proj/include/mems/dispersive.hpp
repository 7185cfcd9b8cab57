#pragma once

#include "mems/spectral_core.hpp"

#include <utility>
#include <vector>

namespace mems {

struct ModelParams {
    double beta_F = 1.0;
    double beta_p = 1.0;
    BoundaryLift lift;
    double eps1 = 0.5;

    // Zero couplings are accepted here (linear test cases); the config layer demands > 0.
    void validate() const;
};

// Pressure u (physical, interior nodes) sampled at uniform times; column m is u(times[m]).
struct PressurePath {
    Vec times;
    Mat samples;

    int steps() const { return static_cast<int>(times.size()) - 1; }
    double horizon() const { return times(times.size() - 1); }
    static PressurePath constant(const Vec& u, double T, int steps);
};

// Plate path in modes: v and w~ = w - theta2, column m at times[m].
struct VWPath {
    Vec times;
    Mat v;
    Mat w;

    int steps() const { return static_cast<int>(times.size()) - 1; }
    StateVW state(int m) const { return {ModeVector(v.col(m)), ModeVector(w.col(m))}; }
};

struct PicardReport {
    int iterations = 0;
    std::vector<double> differences;
    std::vector<double> contraction_ratios;
    bool converged = false;
    double T_used = 0.0;
    double r_used = 0.0;
    std::string diagnostic;

    double max_ratio() const;
};

class NonContractionError : public std::runtime_error {
public:
    NonContractionError(const std::string& what, PicardReport r) : std::runtime_error(what), report(std::move(r)) {}
    PicardReport report;
};

struct PicardOptions {
    double tol = 1e-10;
    int max_iter = 200;
    Quadrature rule = Quadrature::exponential_trapezoid;
};

Vec uniform_times(double T, int steps);

// Pointwise G(w~) = -beta_F/(w~+theta2)^2 + beta_p(theta1-1) at the given nodes (n = k_max);
// the gap is checked on the refined grid first.
GridField eval_G(const GridField& w_tilde, const ModelParams& p);

// Dealiased sine coefficients of G for each column of w~ modes.
Mat forcing_G_modes(const SpectralGrid& grid, const Mat& w_modes, const ModelParams& p);

// min over the refined grid and the boundary of w~ + theta2, per column.
double min_gap_fine(const SpectralGrid& grid, const Mat& w_modes, double theta2);

// Inverse-power constants built from the gap lower bound kappa and ||w0||_{H^2}.
struct InversePowerConstants {
    double C = 0.0;
    double kappa = 0.0;
    double w0_H2 = 0.0;
    double C_tilde = 0.0;
    double C1 = 0.0;
    double C2 = 0.0;
    double C3 = 0.0;
};

InversePowerConstants inverse_power_constants(double C, double kappa, double w0_H2);

inline double default_radius(double kappa, double C) { return 0.9 * kappa / (2.0 * C); }

// min over nodes and boundary of the physical gap.
double gap_lower_bound(const GridField& w0, const ModelParams& p);

// Formula value beta_F * 2 C1^3.  C defaults to the pinned embedding constant at n.
double estimate_LG(const ModelParams& p, const GridField& w0, double r);
double estimate_LG(const ModelParams& p, const GridField& w0, double r, double C);

struct HorizonInputs {
    double delta_o = 0.0;
    double M0 = 1.0;
    double L_G = 0.0;
    double kappa = 0.0;
    double C = 0.0;
    double G0_norm = 0.0;
};

double t0_formula(const HorizonInputs& in);

// Formula horizon with the formula L_G.
double estimate_T0(const ModelParams& p, const GridField& w0, const GridField& u0, double r, double M0,
                   double delta_o);

// Largest t with ||T(s)Phi0 - Phi0||_X <= r/2 on [0, t], capped.
double strong_continuity_horizon(const StateVW& init, const PlateSpectrum& spectrum, double r, double t_cap = 1.0);

// Monte Carlo sup of ||G(w1)-G(w2)||_{H^2} / ||w1-w2||_{H^2} over pairs in the r-ball around w0~.
struct LipschitzSample {
    double sup_ratio = 0.0;
    int samples = 0;
};
LipschitzSample sample_LG(const SpectralGrid& grid, const ModelParams& p, const Vec& w0_modes, double r,
                          int samples, unsigned long long seed);
// Individual ratios behind sample_LG (pairs that leave the ball are skipped).
std::vector<double> sample_LG_ratios(const SpectralGrid& grid, const ModelParams& p, const Vec& w0_modes, double r,
                                     int samples, unsigned long long seed);

// Safety factor applied to every Monte Carlo calibrated constant.
inline constexpr double kCalibrationSafety = 1.25;

struct HorizonEstimate {
    double C = 0.0;
    double kappa = 0.0;
    double r = 0.0;
    double delta_o = 0.0;
    double G0_norm = 0.0;
    double L_G_formula = 0.0;
    double L_G_calibrated = 0.0;
    double T0_formula = 0.0;
    double T0_calibrated = 0.0;
};

struct HorizonOptions {
    int lg_samples = 200;
    unsigned long long seed = 7;
    double delta_cap = 1.0;
};

HorizonEstimate estimate_horizon(const SpectralGrid& grid, const ModelParams& p, const StateVW& init,
                                 const GridField& u0, const HorizonOptions& opt = {});

std::pair<VWPath, PicardReport> picard_dispersive(const SpectralGrid& grid, const ModelParams& p,
                                                  const PressurePath& u_path, const StateVW& init,
                                                  const PicardOptions& opt = {},
                                                  const VWPath* initial_guess = nullptr);

// Converged plate path plus the physical fields on the collocation grid (w = w~ + theta2).
struct PlatePath {
    VWPath modes;
    Mat v;
    Mat w;
};

PlatePath solution_operator_W(const SpectralGrid& grid, const ModelParams& p, const PressurePath& u_path,
                              const StateVW& init, double tol = 1e-10);
PlatePath with_lift(const SpectralGrid& grid, const ModelParams& p, VWPath vw);

// v/w on the collocation grid, one column per time sample.
Mat eval_W2(const SpectralGrid& grid, const VWPath& vw, const ModelParams& p);

// Directional derivative of W along a zero-trace pressure perturbation q (n x (N+1)).
ModePath frechet_W(const SpectralGrid& grid, const ModelParams& p, const PressurePath& u_path, const Mat& q_path,
                   const VWPath& vw, const PicardOptions& opt = {});

double sup_norm_X(const Mat& v, const Mat& w);

double empirical_lipschitz_W(const SpectralGrid& grid, const ModelParams& p, const PressurePath& u1,
                             const PressurePath& u2, const StateVW& init, double tol = 1e-12);

double empirical_holder(const VWPath& path, double alpha);
double empirical_holder(const PressurePath& path, double alpha);

// Stationary plate under u = theta1 by damped Newton in the sine basis.
StateVW steady_plate(const SpectralGrid& grid, const ModelParams& p, double tol = 1e-13, int max_iter = 50);

// Centred time differences of a converged path against the plate ODE, sup over interior samples in X.
double strictness_residual(const SpectralGrid& grid, const ModelParams& p, const PressurePath& u_path,
                           const VWPath& vw);

}  // namespace mems
