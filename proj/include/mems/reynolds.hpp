#pragma once

#include "mems/dispersive.hpp"

#include <complex>
#include <vector>

namespace mems {

// Right-hand side of the pressure equation on interior nodes,
//   (1/w) D(A(w^3 u) Du) - (v/w) u,
// with A the face average, D the face difference and boundary values u = theta1, w = theta2, v = 0.
Vec reynolds_rhs(const Vec& u, const Vec& v, const Vec& w, const ModelParams& p);
GridField eval_F(const GridField& u, const GridField& v, const GridField& w, const ModelParams& p);

// Linearisation of reynolds_rhs in u along q, with plate perturbations dv = v'q and dw = w'q.
Vec frechet_F_at(const Vec& u, const Vec& q, const Vec& v, const Vec& w, const Vec& dv, const Vec& dw,
                 const ModelParams& p);

struct PstarOperator {
    Mat matrix;
    GridField u0, v0, w0;
    double h = 0.0;
    double theta1 = 1.0, theta2 = 1.0;
    int n() const { return static_cast<int>(matrix.rows()); }
};

PstarOperator assemble_Pstar(const GridField& u0, const GridField& v0, const GridField& w0, const ModelParams& p);

// Principal part q -> (1/w0) D(A(w0^3 u0) Dq) only.
Mat principal_part(const PstarOperator& op);

struct EllipticReport {
    double K = 0.0;
    double K_o = 0.0;
    double K2 = 0.0;
    double C = 0.0;
    double min_margin = 0.0;
    int trials = 0;
    int violations = 0;
    bool pass = false;
};

EllipticReport elliptic_form_check(const PstarOperator& op, const ModelParams& p, int trials,
                                   unsigned long long seed = 1);

class SectorViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SectorSample {
    std::complex<double> lambda;
    double product = 0.0;
};

struct SectorReport {
    double omega_shift = 0.0;
    double angle = 0.0;
    double M_bound = 0.0;
    std::vector<SectorSample> samples;
};

// ||(lambda - P)^{-1}||_2; throws SectorViolation when lambda sits on the spectrum.
double resolvent_norm(const Mat& P, std::complex<double> lambda);

SectorReport sector_check(const PstarOperator& op, const std::vector<double>& ray_angles,
                          const std::vector<double>& radii);

struct GraphNormReport {
    double gamma0 = 1.0;
    double pstar_norm = 0.0;  // sup ||P g|| / ||g||_{H^2} over the samples
};

double graph_norm_ratio(const PstarOperator& op, const Vec& g);
GraphNormReport graph_norm_equivalence(const PstarOperator& op, int trials, unsigned long long seed = 3);

// e^{dt P} together with dt*phi_1(dt P) and dt*phi_2(dt P), from one augmented exponential.
struct ParabolicPropagator {
    double dt = 0.0;
    Mat E, phi1, phi2;
};

ParabolicPropagator make_propagator(const PstarOperator& op, double dt);

// Exponential-trapezoid stepping of phi' = P phi + F with F linear between samples.
Mat propagate_parabolic(const ParabolicPropagator& prop, const Vec& phi0, const Mat& F);

Mat linear_parabolic_solve(const PstarOperator& op, const Mat& F_path, const Vec& u0_tilde, double T, int N_t);

struct CoupledState {
    Vec u;       // physical pressure, interior nodes
    StateVW vw;  // plate state in modes (w~)
    double t = 0.0;
};

struct GammaOptions {
    double tol = 1e-10;
    int max_iter = 100;
    double ratio_stop = 0.9;
    double inner_factor = 0.01;
};

struct GammaResult {
    PressurePath u;
    VWPath vw;
    PicardReport report;
    int inner_iterations = 0;
    double inner_max_ratio = 0.0;
};

// Fixed point of u~ -> e^{tP}u~0 + int e^{(t-s)P}(F(u~) - P u~) ds on N_t steps of prop.dt.
GammaResult gamma_iterate(const SpectralGrid& grid, const ModelParams& p, const CoupledState& init,
                          const PstarOperator& op, const ParabolicPropagator& prop, int N_t,
                          const GammaOptions& opt = {});

// Sup over time of the discrete H^1 norm (zero trace); the outer contraction metric.
double sup_h1(const Mat& paths);

// Derivative of F(u~) along q, using W outputs (plate) and W' outputs (dW).
Mat frechet_F(const SpectralGrid& grid, const ModelParams& p, const PressurePath& u, const Mat& q,
              const VWPath& vw, const ModePath& dW);

// F(u~)(t) = reynolds_rhs(u(t), W(u)(t)) for a whole path.
Mat F_path(const SpectralGrid& grid, const ModelParams& p, const PressurePath& u, const VWPath& vw);

struct HolderMeasure {
    double A = 0.0;  // sup LHS(I) / (([u]_alpha + L_U) h^alpha)
    double B = 0.0;  // sup LHS(II) / bracket(II)
    double L_U = 0.0;
};

HolderMeasure holder_F_measure(const SpectralGrid& grid, const ModelParams& p, const PressurePath& u,
                               const Mat& q, const StateVW& init, const PstarOperator& op, double alpha,
                               double tol = 1e-12);

struct HolderCheck {
    HolderMeasure measured;
    double L_A = 0.0;
    double L_B = 0.0;
    bool pass = false;
};

HolderCheck holder_F_check(const SpectralGrid& grid, const ModelParams& p, const PressurePath& u, const Mat& q,
                           const StateVW& init, const PstarOperator& op, double alpha, double L_A, double L_B);

struct CoupledRate {
    Vec du, dv, dw;
};

CoupledRate mol_rhs(const SpectralGrid& grid, const ModelParams& p, const CoupledState& s);

enum class Status { alive, quench, pressure_blowup };

Status quench_monitor(const SpectralGrid& grid, const CoupledState& s, const ModelParams& p, double quench_eps,
                      double u_cap);
double min_gap(const SpectralGrid& grid, const CoupledState& s, const ModelParams& p);

struct Trajectory {
    Vec times;
    Mat u;  // physical pressure, n x m
    Mat v;  // modes, k x m
    Mat w;  // modes of w~, k x m
    CoupledState state(int m) const;
};

struct ReferenceOptions {
    int record_every = 1;
    double quench_eps = 0.0;  // <= 0 disables quench stopping
    double u_cap = 0.0;       // <= 0 disables blowup stopping
};

struct ReferenceRun {
    Trajectory trajectory;
    Status status = Status::alive;
    double event_time = 0.0;
    double dt = 0.0;
};

class StepSizeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

double max_reference_step(const SpectralGrid& grid);

// Classical RK4 on mol_rhs with uniform dt <= requested dt.
ReferenceRun integrate_reference(const SpectralGrid& grid, const ModelParams& p, const CoupledState& init, double T,
                                 double dt, const ReferenceOptions& opt = {});

}  // namespace mems
