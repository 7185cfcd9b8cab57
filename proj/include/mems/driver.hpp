#pragma once

#include "mems/reynolds.hpp"

#include <limits>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace mems {

enum class Termination { converged, quench, pressure_blowup, budget, positivity };

const char* to_string(Termination t);

struct StepDiagnostics {
    double t = 0.0;
    double min_w = 0.0;
    double max_u = 0.0;
    double mass_residual = 0.0;
    double norm_X = 0.0;
    double contraction_ratio = 0.0;
};

struct RunOptions {
    double T = 0.05;
    int N_t = 100;
    double tol = 1e-10;
    double quench_eps = -1.0;       // < 0 selects 1e-3 * theta2
    double u_cap = -1.0;            // < 0 selects 1e6 * theta1
    int initial_segment_steps = 0;  // 0 selects floor(0.9 T0 / dt) from the calibrated horizon
    bool relinearize = true;        // re-assemble P* at every segment start
    int max_attempts = 20000;
    int max_refinements = 30;       // local dt halvings allowed after a one-step failure
    GammaOptions gamma;
    HorizonOptions horizon;

    double quench_threshold(const ModelParams& p) const { return quench_eps < 0 ? 1e-3 * p.lift.theta2 : quench_eps; }
    double pressure_cap(const ModelParams& p) const { return u_cap < 0 ? 1e6 * p.lift.theta1 : u_cap; }
};

// Linearisation with its propagators, cached per step size.
class Linearization {
public:
    explicit Linearization(PstarOperator op) : op_(std::move(op)) {}
    const PstarOperator& op() const { return op_; }
    const ParabolicPropagator& propagator(double dt) const;

private:
    PstarOperator op_;
    mutable std::map<double, ParabolicPropagator> cache_;
};

struct GammaHorizonInputs {
    double gamma0 = 1.0;
    double I_T = 1.0;
    double L_e = 0.0;
    double pstar_norm = 0.0;
    double L_B = 0.0;
    double u0_H2 = 0.0;
    double kappa = 1.0;
    double C = 1.0;
    double alpha = 0.5;
};

// [2 gamma0 I (L_e + ||P*|| + 2 L_B (1 + ||u0||_{H^2} + kappa/(2C)))]^{-1/alpha}
double gamma_horizon_formula(const GammaHorizonInputs& in);

struct RunReport {
    ModelParams params;
    RunOptions options;
    int k_max = 0;
    int n = 0;
    double T = 0.0;
    double dt = 0.0;
    Termination termination = Termination::budget;
    double T_used = 0.0;
    double quench_time = std::numeric_limits<double>::quiet_NaN();
    std::string diagnostic;

    std::vector<StepDiagnostics> series;
    Trajectory trajectory;

    HorizonEstimate horizon;
    double gamma0 = 1.0;
    double pstar_norm = 0.0;
    double gamma_horizon = 0.0;  // formula value with the measured gamma0 and ||P*||
    double regularity_proxy = 0.0;  // discrete H^1 seminorm of F(u0)
    int segments = 0;
    int gamma_iterations = 0;
    int refinements = 0;
    int segment_steps = 1;
    double dt_current = 0.0;

    std::shared_ptr<const Linearization> anchor;

    CoupledState final_state() const { return trajectory.state(static_cast<int>(trajectory.times.size()) - 1); }
};

RunReport run_coupled(const SpectralGrid& grid, const ModelParams& p, const CoupledState& init,
                      const RunOptions& opt);

// Extends a converged run by extra_T (a whole number of base steps), reusing its options and anchor.
RunReport continue_run(const SpectralGrid& grid, const RunReport& report, double extra_T);

// |d/dt int w u - [w^3 u u_x]_0^1| per step interval; entry 0 is 0.
std::vector<double> mass_balance_residual(const SpectralGrid& grid, const ModelParams& p, const Trajectory& traj);

}  // namespace mems
