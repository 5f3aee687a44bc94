#pragma once

#include <cmath>

namespace levylab {

// exp(-1/(1-s^2)) on |s| < 1, unnormalized.
inline double canonical_bump(double s) {
    double a = std::abs(s);
    if (a >= 1.0) return 0.0;
    return std::exp(-1.0 / (1.0 - a * a));
}

// Smooth step 0 -> 1 on [0, 1].
inline double smooth_step(double s) {
    if (s <= 0.0) return 0.0;
    if (s >= 1.0) return 1.0;
    double a = std::exp(-1.0 / s);
    double b = std::exp(-1.0 / (1.0 - s));
    return a / (a + b);
}

// Radial cutoff: 1 on |x| <= 1, 0 on |x| >= 2.
inline double canonical_cutoff(double rho) { return 1.0 - smooth_step(rho - 1.0); }

// Integral of exp(-1/(1-|x|^2)) over the unit ball of R^n, n = 1, 2, 3.
double canonical_bump_mass(int n);

}  // namespace levylab
