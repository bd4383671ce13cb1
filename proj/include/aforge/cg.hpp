#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "aforge/errors.hpp"

namespace aforge {

struct CgResult {
    std::vector<double> x;
    int iterations = 0;
    double residual_norm = 0.0;
};

namespace detail {
inline double vec_norm2(const std::vector<double>& v) {
    double acc = 0.0;
    for (double e : v) acc += e * e;
    return std::sqrt(acc);
}
}  // namespace detail

/// Conjugate gradients for a symmetric positive definite operator, started
/// from x = 0. Converged when the true residual satisfies
/// ||A x - b||_2 <= tol * max(1, ||b||_2); the recurrence residual only
/// triggers the (recomputed) check.
inline CgResult cg_solve(const std::function<void(const std::vector<double>&, std::vector<double>&)>& apply_a,
                         const std::vector<double>& b, double tol, int max_iter) {
    if (tol <= 0.0) throw ValueError("cg_solve: tol must be positive");
    const std::size_t n = b.size();
    const double target = tol * std::max(1.0, detail::vec_norm2(b));

    CgResult res;
    res.x.assign(n, 0.0);
    std::vector<double> r = b;  // r = b - A*0
    double rr = 0.0;
    for (double e : r) rr += e * e;
    res.residual_norm = std::sqrt(rr);
    if (res.residual_norm <= target) return res;

    std::vector<double> p = r;
    std::vector<double> ap(n);
    std::vector<double> true_r(n);

    for (int it = 0; it < max_iter; ++it) {
        apply_a(p, ap);
        double pap = 0.0;
        for (std::size_t i = 0; i < n; ++i) pap += p[i] * ap[i];
        if (pap <= 0.0) {
            throw ConvergenceError("cg_solve: operator not positive definite (p'Ap = " +
                                       std::to_string(pap) + ")",
                                   std::sqrt(rr));
        }
        const double alpha = rr / pap;
        for (std::size_t i = 0; i < n; ++i) {
            res.x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        double rr_next = 0.0;
        for (double e : r) rr_next += e * e;
        res.iterations = it + 1;

        if (std::sqrt(rr_next) <= target) {
            // Recurrence can drift from the true residual; verify before exit.
            apply_a(res.x, true_r);
            for (std::size_t i = 0; i < n; ++i) true_r[i] = b[i] - true_r[i];
            res.residual_norm = detail::vec_norm2(true_r);
            if (res.residual_norm <= target) return res;
            r = true_r;
            rr_next = res.residual_norm * res.residual_norm;
            for (std::size_t i = 0; i < n; ++i) p[i] = r[i];
            rr = rr_next;
            continue;
        }
        const double beta = rr_next / rr;
        rr = rr_next;
        for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
        res.residual_norm = std::sqrt(rr);
    }
    throw ConvergenceError("cg_solve: no convergence in " + std::to_string(max_iter) +
                               " iterations (residual " + std::to_string(res.residual_norm) +
                               ", target " + std::to_string(target) + ")",
                           res.residual_norm);
}

}  // namespace aforge
