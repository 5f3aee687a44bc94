#pragma once

#include <map>
#include <string>
#include <vector>

#include "levylab/grid.hpp"
#include "levylab/levy.hpp"
#include "levylab/solver.hpp"

namespace levylab {

struct CertificateSample {
    std::string label;
    double lhs = 0.0;
    double rhs = 0.0;
    double margin = 0.0;  // relative; negative beyond tolerance means failure
};

struct Certificate {
    std::string name;
    std::string digest;
    std::vector<CertificateSample> samples;
    bool pass = true;
    double tolerance = 0.0;
    std::map<std::string, double> reported;
    std::string note;

    void add(const std::string& label, double lhs, double rhs, double scale);
    void add_margin(const std::string& label, double lhs, double rhs, double margin);
    void finalize();
    double worst_margin() const;
};

// FNV-1a over the raw bytes of the values.
std::string digest(const std::vector<double>& values);
std::string digest(const SampledField& f);

struct MaxPrincipleOptions {
    double tolerance = 1e-6;
    bool strict_linf = false;  // assert the L^inf bound instead of only reporting C
    bool spectral = true;      // norms of the trigonometric interpolant
};

Certificate verify_max_principle(const TrajectorySolution& traj, const std::vector<double>& p_list,
                                 const MaxPrincipleOptions& opt = {});
Certificate verify_positivity(const TrajectorySolution& traj, double M, double tolerance = 1e-6);
Certificate verify_stroock_varopoulos(const SampledField& f, const LevySymbol& s, double p, double tolerance = 1e-10);

// 2 (<L theta, theta> + eps ||grad theta||^2), the decay rate of ||theta||_2^2.
double dissipation_rate(const SampledField& f, const LevySymbol& s, double eps);

struct BesovTerms {
    double besov_p = 0.0;   // ||f||^p in B^{alpha/p,p}_p
    double besov_2 = 0.0;   // || |f|^{p/2} ||^2 in B^{alpha/2,2}_2
    double energy = 0.0;    // || |f|^{p/2} ||^2_{L^2} + int |f|^{p-2} f L f
};

struct BesovConstants {
    double c_first = 0.0;
    double c_second = 0.0;
    double headroom = 1.1;
};

BesovTerms besov_terms(const SampledField& f, const LevySymbol& s, double p);
BesovConstants fit_besov_constants(const std::vector<SampledField>& corpus, const LevySymbol& s, double p,
                                   double headroom = 1.1);
Certificate verify_besov_regularity(const std::vector<SampledField>& fields, const LevySymbol& s, double p,
                                    const BesovConstants& frozen, double tolerance = 1e-12);
// <L f_+, f_-> for the sign decomposition; nonpositive in the continuum.
double besov_cross_term(const SampledField& f, const LevySymbol& s);

struct SymbolBoundConstants {
    double c_upper = 0.0;    // a <= c_upper (|xi|^alpha + |xi|^delta)
    double c_scale = 1.0;    // |xi|^alpha <= c_scale a + c_offset
    double c_offset = 0.0;
    double headroom = 1.1;
};

// Fit on a dense radial sweep up to xi_max, not on the lattice.
SymbolBoundConstants fit_symbol_bounds(const LevyKernel& k, double xi_max, double headroom = 1.1, int samples = 400);
Certificate verify_symbol_bounds(const LevySymbol& s, const LevyKernel& k, const SymbolBoundConstants& frozen,
                                 double tolerance = 1e-12);

Certificate verify_transfer(const TrajectorySolution& forward, const TrajectorySolution& backward,
                            const std::vector<double>& s_fractions = {0.25, 0.5, 0.75}, double tolerance = 1e-5);

}  // namespace levylab
