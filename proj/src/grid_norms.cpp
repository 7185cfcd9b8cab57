#include "mems/grid_norms.hpp"

namespace mems {

Vec with_boundary(const Vec& interior, double left, double right)
{
    const auto n = interior.size();
    Vec f(n + 2);
    f(0) = left;
    f.segment(1, n) = interior;
    f(n + 1) = right;
    return f;
}

namespace {

Vec second_diff(const Vec& f, double h)
{
    const auto n = f.size() - 2;
    return (f.segment(2, n) - 2.0 * f.segment(1, n) + f.segment(0, n)) / (h * h);
}

}  // namespace

double grid_norm(const Vec& interior, double left, double right, int order)
{
    if (order < 0 || order > 3) throw std::invalid_argument("grid_norm: order must be 0..3");
    const auto n = interior.size();
    const double h = 1.0 / (n + 1);
    const Vec f = with_boundary(interior, left, right);
    double acc = h * (interior.squaredNorm() + 0.5 * (left * left + right * right));
    if (order >= 1) {
        const Vec d1 = (f.tail(n + 1) - f.head(n + 1)) / h;
        acc += h * d1.squaredNorm();
    }
    if (order >= 2) {
        const Vec d2 = second_diff(f, h);
        acc += h * d2.squaredNorm();
        if (order >= 3) {
            const Vec d3 = (d2.tail(n - 1) - d2.head(n - 1)) / h;
            acc += h * d3.squaredNorm();
        }
    }
    return std::sqrt(acc);
}

double interior_l2(const Vec& q)
{
    const double h = 1.0 / (q.size() + 1);
    return std::sqrt(h * q.squaredNorm());
}

double interior_dnorm(const Vec& q)
{
    const auto n = q.size();
    const double h = 1.0 / (n + 1);
    const Vec f = with_boundary(q, 0.0, 0.0);
    return std::sqrt(h * ((f.tail(n + 1) - f.head(n + 1)) / h).squaredNorm());
}

Mat grid_h2_gram(int n)
{
    const int N = n + 2;
    const double h = 1.0 / (n + 1);
    Mat q = Mat::Zero(N, N);
    for (int j = 0; j < N; ++j) q(j, j) += (j == 0 || j == N - 1) ? 0.5 * h : h;
    Mat d1 = Mat::Zero(n + 1, N);
    for (int j = 0; j <= n; ++j) {
        d1(j, j) = -1.0 / h;
        d1(j, j + 1) = 1.0 / h;
    }
    Mat d2 = Mat::Zero(n, N);
    for (int j = 0; j < n; ++j) {
        d2(j, j) = 1.0 / (h * h);
        d2(j, j + 1) = -2.0 / (h * h);
        d2(j, j + 2) = 1.0 / (h * h);
    }
    q += h * d1.transpose() * d1 + h * d2.transpose() * d2;
    return q;
}

double general_embedding_constant(int n)
{
    const Mat inv = grid_h2_gram(n).llt().solve(Mat::Identity(n + 2, n + 2));
    return std::sqrt(inv.diagonal().maxCoeff());
}

}  // namespace mems
