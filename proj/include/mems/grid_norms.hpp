#pragma once

#include "mems/spectral_core.hpp"

namespace mems {

// Interior values padded with boundary values: n+2 entries at x_j = j/(n+1), j = 0..n+1.
Vec with_boundary(const Vec& interior, double left, double right);

// Discrete H^order norm (order 0..3) of a field on the full uniform grid:
//   trapezoid L^2 + |first differences|^2 + |second differences|^2 (+ third).
double grid_norm(const Vec& interior, double left, double right, int order);
inline double grid_norm(const GridField& f, double boundary, int order)
{
    return grid_norm(f.values, boundary, boundary, order);
}
// Zero trace shorthand.
inline double grid_norm0(const Vec& interior, int order) { return grid_norm(interior, 0.0, 0.0, order); }

// sqrt(h * sum q_j^2) and sqrt(h * sum over faces ((q_{j+1}-q_j)/h)^2), q = 0 on the boundary.
double interior_l2(const Vec& q);
double interior_dnorm(const Vec& q);

// Gram matrix of the discrete H^2 form on all n+2 nodes.
Mat grid_h2_gram(int n);

// Constant of H^2 -> L^inf for the discrete H^2 form without trace restriction.
double general_embedding_constant(int n);

}  // namespace mems
