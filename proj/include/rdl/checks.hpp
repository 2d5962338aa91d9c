#pragma once

#include <string>
#include <vector>

namespace rdl::checks {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail; // measured numbers vs. thresholds
    double seconds = 0.0;
};

// Gradients of every primitive op and of the full small MLP against central
// finite differences (h = 1e-6): max relative error <= 1e-5 over 10 seeds.
CheckResult check_gradcheck();

// Manifold contract on random (x, u) pairs: retraction feasibility,
// retr(x, u, 0) bitwise identity, second-order decay, projection
// idempotence, gradient-conversion directional derivative, transport
// tangency.
CheckResult check_retraction();

// Dominant-subspace objective on Stiefel(50, 5) against the eigenvalue
// oracle: conjugate gradient to 1e-6 within 500 iterations; SGD (lr 1e-3,
// 5000 steps) to 1e-4.
CheckResult check_rayleigh();

// Karcher mean of two SPD(5) matrices via Riemannian SGD against the
// closed-form geodesic midpoint, 1e-5 Frobenius.
CheckResult check_karcher();

// Small orthogonal-weight MLP on separable synthetic clusters: epoch-10
// loss <= 0.5 * epoch-1 loss, constraint residual <= 1e-6 at every epoch,
// training accuracy >= 0.9.
CheckResult check_mlp();

// Convolution equals the naive-loop oracle to 1e-12 on 25 random
// geometries; a Stiefel-constrained Conv2d keeps matricized-weight
// orthonormality <= 1e-6 after 100 SGD steps.
CheckResult check_conv();

// Two identically seeded training runs produce bitwise-identical metrics
// files.
CheckResult check_determinism();

std::vector<std::string> suite_names();
CheckResult run_suite(const std::string& name);

} // namespace rdl::checks
