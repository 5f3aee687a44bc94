#include "levylab/holder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "levylab/errors.hpp"
#include "levylab/fourier.hpp"
#include "levylab/function_spaces.hpp"
#include "levylab/parallel.hpp"

namespace levylab {

namespace {

struct Offset {
    std::array<int, 3> d;
    double length;
};

std::vector<Offset> offsets_up_to_half(const Grid& g) {
    const int N = g.points_per_dim, half = N / 2;
    std::vector<Offset> out;
    std::array<int, 3> d{0, 0, 0};
    int lo1 = g.n > 1 ? -half : 0, lo2 = g.n > 2 ? -half : 0;
    int hi1 = g.n > 1 ? half : 0, hi2 = g.n > 2 ? half : 0;
    for (d[0] = -half; d[0] <= half; ++d[0])
        for (d[1] = lo1; d[1] <= hi1; ++d[1])
            for (d[2] = lo2; d[2] <= hi2; ++d[2]) {
                double len2 = double(d[0]) * d[0] + double(d[1]) * d[1] + double(d[2]) * d[2];
                if (len2 == 0.0 || len2 > double(half) * half) continue;
                out.push_back({d, std::sqrt(len2) * g.spacing()});
            }
    return out;
}

std::size_t shifted_index(const Grid& g, std::array<int, 3> ijk, const std::array<int, 3>& d) {
    const int N = g.points_per_dim;
    for (int k = 0; k < g.n; ++k) ijk[k] = ((ijk[k] + d[k]) % N + N) % N;
    return g.flatten(ijk);
}

// max |f(x+d) - f(x)| per offset
std::vector<double> increment_maxima(const SampledField& f, const std::vector<Offset>& offs) {
    const Grid& g = f.grid;
    std::vector<double> out(offs.size(), 0.0);
    const int N = g.points_per_dim;
    const int ny = g.n > 1 ? N : 1, nz = g.n > 2 ? N : 1;
    const double* v = f.values.data();
    parallel_for(offs.size(), [&](std::size_t j) {
        const auto& d = offs[j].d;
        double m = 0.0;
        for (int a = 0; a < N; ++a) {
            int a2 = ((a + d[0]) % N + N) % N;
            for (int b = 0; b < ny; ++b) {
                int b2 = ((b + d[1]) % ny + ny) % ny;
                const double* row = v + (static_cast<std::size_t>(a) * ny + b) * nz;
                const double* row2 = v + (static_cast<std::size_t>(a2) * ny + b2) * nz;
                int shift = ((d[2] % nz) + nz) % nz;
                for (int c = 0; c < nz; ++c) {
                    int c2 = c + shift < nz ? c + shift : c + shift - nz;
                    m = std::max(m, std::abs(row2[c2] - row[c]));
                }
            }
        }
        out[j] = m;
    }, 8);
    return out;
}

double seminorm_from(const std::vector<double>& maxima, const std::vector<Offset>& offs, double gamma) {
    double s = 0.0;
    for (std::size_t j = 0; j < offs.size(); ++j) s = std::max(s, maxima[j] / std::pow(offs[j].length, gamma));
    return s;
}

// the field as a half-resolution grid represents it: band-limit to |mode| < N/4, then keep even nodes
SampledField coarsen(const SampledField& fine) {
    const Grid& g = fine.grid;
    if (g.points_per_dim % 4 != 0) throw PreconditionError("two-resolution probe needs N divisible by 4");
    const HalfLattice& hl = half_lattice(g);
    const double cut = 0.25 * g.points_per_dim * g.wavenumber_unit();
    SampledField f = apply_multiplier(fine, [&](std::size_t i) {
        for (int k = 0; k < g.n; ++k)
            if (std::abs(hl.k[i][k]) >= cut - 1e-9) return 0.0;
        return 1.0;
    });
    Grid c(g.n, g.points_per_dim / 2, g.side_length);
    SampledField out(c, 0.0);
    for (std::size_t i = 0; i < c.size(); ++i) {
        auto ijk = c.unflatten(i);
        for (int k = 0; k < c.n; ++k) ijk[k] *= 2;
        out.values[i] = f.values[g.flatten(ijk)];
    }
    return out;
}

}  // namespace

MoleculeFamily make_family(const Grid& g, double gamma, double omega, double zeta, const std::string& profile,
                           int center_stride) {
    if (center_stride < 1) throw PreconditionError("center stride must be >= 1");
    MoleculeFamily fam;
    fam.gamma = gamma;
    fam.omega_exp = omega;
    fam.zeta = zeta;
    fam.profile = profile;
    fam.center_stride = center_stride;
    const std::array<double, 3> origin = g.coords(0);
    for (int j = 1; j < 60; ++j) {
        double r = std::ldexp(1.0, -j);
        if (zeta * r < 4.0 * g.spacing()) break;
        try {
            Molecule m = make_molecule(r, origin, gamma, omega, zeta, g, profile);
            double reach = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i)
                if (m.field.values[i] != 0.0) reach = std::max(reach, g.torus_distance(g.coords(i), origin));
            if (reach <= 0.25 * g.side_length) fam.scales.push_back(r);
        } catch (const PreconditionError&) {
        }
    }
    if (fam.scales.size() < 2) throw PreconditionError("grid too coarse for a molecule scale ladder");
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto ijk = g.unflatten(i);
        bool keep = true;
        for (int k = 0; k < g.n; ++k) keep = keep && ijk[k] % center_stride == 0;
        if (keep) fam.centers.push_back(g.coords(i));
    }
    return fam;
}

double duality_pairing(const SampledField& theta, const Molecule& m) { return inner(theta, m.field); }

std::vector<double> pairing_profile(const SampledField& theta, const MoleculeFamily& family) {
    const Grid& g = theta.grid;
    const double h = g.spacing();
    std::vector<double> out;
    for (double r : family.scales) {
        Molecule m = make_molecule(r, g.coords(0), family.gamma, family.omega_exp, family.zeta, g, family.profile);
        std::vector<std::pair<std::array<int, 3>, double>> support;
        for (std::size_t i = 0; i < g.size(); ++i)
            if (m.field.values[i] != 0.0) support.push_back({g.unflatten(i), m.field.values[i]});
        std::vector<double> per(family.centers.size(), 0.0);
        parallel_for(family.centers.size(), [&](std::size_t c) {
            std::array<int, 3> d{0, 0, 0};
            for (int k = 0; k < g.n; ++k) d[k] = static_cast<int>(std::lround((family.centers[c][k] - g.coords(0)[k]) / h));
            double acc = 0.0;
            for (const auto& [ijk, w] : support) acc += w * theta.values[shifted_index(g, ijk, d)];
            per[c] = std::abs(acc) * g.cell_volume();
        }, 16);
        out.push_back(per.empty() ? 0.0 : *std::max_element(per.begin(), per.end()));
    }
    return out;
}

double direct_holder_exponent(const SampledField& theta, const HolderOptions& opt, std::vector<double>* fine,
                              std::vector<double>* coarse) {
    std::vector<double> probe = opt.probe;
    if (probe.empty())
        for (int i = 1; i <= 19; ++i) probe.push_back(0.05 * i);
    SampledField c = coarsen(theta);
    auto offs_f = offsets_up_to_half(theta.grid);
    auto offs_c = offsets_up_to_half(c.grid);
    auto mf = increment_maxima(theta, offs_f);
    auto mc = increment_maxima(c, offs_c);
    double sup_f = lp_norm(theta, INFINITY), sup_c = lp_norm(c, INFINITY);
    double best = 0.0;
    bool run = true;
    for (double gm : probe) {
        double nf = sup_f + seminorm_from(mf, offs_f, gm);
        double nc = sup_c + seminorm_from(mc, offs_c, gm);
        if (fine) fine->push_back(nf);
        if (coarse) coarse->push_back(nc);
        bool stable = nc > 0.0 ? std::abs(nf / nc - 1.0) <= opt.stability : nf == 0.0;
        if (run && stable) best = gm;
        run = run && stable;
    }
    return best;
}

HolderReport estimate_holder_exponent(const SampledField& theta, const MoleculeFamily& family, double t,
                                      const HolderOptions& opt) {
    if (!(opt.T0 > 0.0)) throw PreconditionError("Hoelder probe needs T0 > 0");
    if (t < opt.T0) throw PreconditionError("Hoelder probe time must be >= T0");
    HolderReport rep;
    rep.t = t;
    rep.regime_bound = opt.alpha < 1.0 ? opt.delta : 2.0 - opt.alpha;
    rep.scales = family.scales;
    rep.pairings = pairing_profile(theta, family);
    rep.probe = opt.probe;
    if (rep.probe.empty())
        for (int i = 1; i <= 19; ++i) rep.probe.push_back(0.05 * i);
    rep.gamma_direct = direct_holder_exponent(theta, opt, &rep.fine_norm, &rep.coarse_norm);
    rep.direct_in_range = rep.gamma_direct < rep.regime_bound;

    const double nan = std::numeric_limits<double>::quiet_NaN();
    double pmax = *std::max_element(rep.pairings.begin(), rep.pairings.end());
    double scale = lp_norm(theta, INFINITY);
    if (pmax <= 1e-12 * std::max(scale, 1e-300) || scale == 0.0) {
        rep.gamma_dual = nan;
        rep.verdict = "flat";
        return rep;
    }
    std::vector<double> xs, ys;
    for (std::size_t j = 0; j < rep.scales.size(); ++j)
        if (rep.pairings[j] > 0.0) {
            xs.push_back(std::log(rep.scales[j]));
            ys.push_back(std::log(rep.pairings[j]));
        }
    if (xs.size() < 3) {
        rep.gamma_dual = nan;
        rep.verdict = "noisy";
        return rep;
    }
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= xs.size();
    my /= ys.size();
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    double slope = sxy / sxx;
    rep.fit_r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    if (rep.fit_r2 < opt.min_r2) {
        rep.gamma_dual = nan;
        rep.verdict = "noisy";
        return rep;
    }
    rep.gamma_dual = slope + family.gamma;
    rep.dual_in_range = rep.gamma_dual < rep.regime_bound;
    rep.verdict = std::abs(rep.gamma_dual - rep.gamma_direct) <= 0.15 ? "consistent" : "inconsistent";
    return rep;
}

HolderReport estimate_holder_exponent(const TrajectorySolution& traj, const MoleculeFamily& family, double t,
                                      const HolderOptions& opt) {
    return estimate_holder_exponent(traj.at_time(t), family, t, opt);
}

double pairing_bound_ratio(const SampledField& theta0, const SampledField& psi_t) {
    double rhs = lp_norm(theta0, INFINITY) * lp_norm(psi_t, 1.0);
    double lhs = std::abs(inner(theta0, psi_t));
    return rhs > 0.0 ? lhs / rhs : 0.0;
}

}  // namespace levylab
