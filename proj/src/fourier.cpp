#include "levylab/fourier.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>

#include "levylab/errors.hpp"

namespace levylab {

namespace {

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

struct PlanPair {
    fftw_plan r2c = nullptr;
    fftw_plan c2r = nullptr;
};

std::size_t half_count(const Grid& g) {
    std::size_t s = static_cast<std::size_t>(g.points_per_dim / 2 + 1);
    for (int d = 0; d < g.n - 1; ++d) s *= static_cast<std::size_t>(g.points_per_dim);
    return s;
}

const PlanPair& plans_for(const Grid& g) {
    static std::map<std::pair<int, int>, PlanPair> cache;
    std::lock_guard<std::mutex> lock(planner_mutex());
    auto key = std::make_pair(g.n, g.points_per_dim);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    std::vector<int> dims = g.dims();
    std::size_t real_n = g.size();
    std::size_t cplx_n = half_count(g);
    double* in = fftw_alloc_real(real_n);
    fftw_complex* out = fftw_alloc_complex(cplx_n);
    PlanPair p;
    unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    p.r2c = fftw_plan_dft_r2c(g.n, dims.data(), in, out, flags);
    p.c2r = fftw_plan_dft_c2r(g.n, dims.data(), out, in, flags | FFTW_DESTROY_INPUT);
    fftw_free(in);
    fftw_free(out);
    return cache.emplace(key, p).first->second;
}

}  // namespace

const HalfLattice& half_lattice(const Grid& g) {
    static std::map<std::tuple<int, int, double>, std::unique_ptr<HalfLattice>> cache;
    static std::mutex m;
    std::lock_guard<std::mutex> lock(m);
    auto key = std::make_tuple(g.n, g.points_per_dim, g.side_length);
    auto it = cache.find(key);
    if (it != cache.end()) return *it->second;

    auto hl = std::make_unique<HalfLattice>();
    const int N = g.points_per_dim;
    const int H = N / 2 + 1;
    const double unit = g.wavenumber_unit();
    hl->size = half_count(g);
    hl->k.resize(hl->size);
    hl->k2.resize(hl->size);
    hl->full_index.resize(hl->size);
    hl->nyquist.resize(hl->size);
    hl->dealias_keep.resize(hl->size);
    hl->weight.resize(hl->size);
    for (std::size_t h = 0; h < hl->size; ++h) {
        std::array<int, 3> ijk{0, 0, 0};
        std::size_t rest = h;
        ijk[g.n - 1] = static_cast<int>(rest % H);
        rest /= H;
        for (int d = g.n - 2; d >= 0; --d) {
            ijk[d] = static_cast<int>(rest % N);
            rest /= N;
        }
        std::array<double, 3> k{0, 0, 0};
        bool nyq = false;
        bool keep = true;
        double k2 = 0.0;
        for (int d = 0; d < g.n; ++d) {
            int m = (d == g.n - 1) ? ijk[d] : g.signed_mode(ijk[d]);
            if (std::abs(m) == N / 2) nyq = true;
            if (3 * std::abs(m) >= N) keep = false;
            k[d] = unit * m;
            k2 += k[d] * k[d];
        }
        hl->k[h] = k;
        hl->k2[h] = k2;
        hl->full_index[h] = g.flatten(ijk);
        hl->nyquist[h] = nyq;
        hl->dealias_keep[h] = keep;
        int j = ijk[g.n - 1];
        hl->weight[h] = (j == 0 || j == N / 2) ? 1.0 : 2.0;
    }
    return *cache.emplace(key, std::move(hl)).first->second;
}

std::vector<cplx> fft_forward(const Grid& g, const std::vector<double>& values) {
    if (values.size() != g.size()) throw GridMismatch("fft_forward: size mismatch");
    const PlanPair& p = plans_for(g);
    std::vector<cplx> out(half_count(g));
    std::vector<double> in(values);
    fftw_execute_dft_r2c(p.r2c, in.data(), reinterpret_cast<fftw_complex*>(out.data()));
    return out;
}

std::vector<double> fft_inverse(const Grid& g, std::vector<cplx> spectrum) {
    if (spectrum.size() != half_count(g)) throw GridMismatch("fft_inverse: size mismatch");
    const PlanPair& p = plans_for(g);
    std::vector<double> out(g.size());
    fftw_execute_dft_c2r(p.c2r, reinterpret_cast<fftw_complex*>(spectrum.data()), out.data());
    const double s = 1.0 / static_cast<double>(g.size());
    for (double& v : out) v *= s;
    return out;
}

std::vector<double> spectral_derivative(const Grid& g, const std::vector<double>& values, int axis) {
    const HalfLattice& hl = half_lattice(g);
    std::vector<cplx> s = fft_forward(g, values);
    for (std::size_t i = 0; i < hl.size; ++i)
        s[i] = hl.nyquist[i] ? cplx(0.0) : s[i] * cplx(0.0, hl.k[i][axis]);
    return fft_inverse(g, std::move(s));
}

std::vector<double> spectral_divergence(const Grid& g, const std::vector<std::vector<double>>& comps,
                                        bool dealias) {
    const HalfLattice& hl = half_lattice(g);
    std::vector<cplx> acc(hl.size, cplx(0.0));
    for (int d = 0; d < g.n; ++d) {
        std::vector<cplx> s = fft_forward(g, comps[d]);
        for (std::size_t i = 0; i < hl.size; ++i)
            if (!hl.nyquist[i]) acc[i] += s[i] * cplx(0.0, hl.k[i][d]);
    }
    if (dealias)
        for (std::size_t i = 0; i < hl.size; ++i)
            if (!hl.dealias_keep[i]) acc[i] = 0.0;
    return fft_inverse(g, std::move(acc));
}

std::vector<cplx> flux_divergence_spectrum(const Grid& g, const std::vector<double>& scalar,
                                           const std::vector<std::vector<double>>& comps, bool dealias) {
    const HalfLattice& hl = half_lattice(g);
    std::vector<cplx> acc(hl.size, cplx(0.0));
    std::vector<double> prod(g.size());
    for (int d = 0; d < g.n; ++d) {
        const auto& c = comps[d];
        for (std::size_t i = 0; i < prod.size(); ++i) prod[i] = c[i] * scalar[i];
        std::vector<cplx> s = fft_forward(g, prod);
        for (std::size_t i = 0; i < hl.size; ++i)
            if (!hl.nyquist[i]) acc[i] += s[i] * cplx(0.0, hl.k[i][d]);
    }
    if (dealias)
        for (std::size_t i = 0; i < hl.size; ++i)
            if (!hl.dealias_keep[i]) acc[i] = 0.0;
    return acc;
}

SampledField spectral_upsample(const SampledField& f, int factor) {
    if (factor < 1) throw PreconditionError("upsample factor must be >= 1");
    if (factor == 1) return f;
    const Grid& g = f.grid;
    Grid fine(g.n, g.points_per_dim * factor, g.side_length);
    const HalfLattice& hl = half_lattice(g);
    std::vector<cplx> s = fft_forward(g, f.values);
    std::vector<cplx> big(half_lattice(fine).size, cplx(0.0));
    const int N = g.points_per_dim;
    const int Nf = fine.points_per_dim;
    const double scale = std::pow(static_cast<double>(factor), g.n);
    for (std::size_t h = 0; h < hl.size; ++h) {
        if (hl.nyquist[h]) continue;
        // locate the same wavevector in the fine half lattice
        std::size_t idx = 0;
        for (int d = 0; d < g.n; ++d) {
            int m = static_cast<int>(std::lround(hl.k[h][d] / g.wavenumber_unit()));
            int extent = (d == g.n - 1) ? Nf / 2 + 1 : Nf;
            int i = (d == g.n - 1) ? m : ((m % Nf) + Nf) % Nf;
            idx = idx * extent + static_cast<std::size_t>(i);
        }
        (void)N;
        big[idx] = s[h] * scale;
    }
    SampledField out(fine, fft_inverse(fine, std::move(big)));
    out.time = f.time;
    return out;
}

namespace {

// Value, gradient and Hessian of the trigonometric interpolant at x.
struct TrigEval {
    double f = 0.0;
    std::array<double, 3> grad{0, 0, 0};
    std::array<std::array<double, 3>, 3> hess{};
};

TrigEval trig_eval(const Grid& g, const HalfLattice& hl, const std::vector<cplx>& s,
                   const std::array<double, 3>& x) {
    TrigEval r;
    const double inv = 1.0 / static_cast<double>(g.size());
    for (std::size_t h = 0; h < hl.size; ++h) {
        if (hl.nyquist[h] || s[h] == cplx(0.0)) continue;
        double ph = 0.0;
        for (int d = 0; d < g.n; ++d) ph += hl.k[h][d] * x[d];
        cplx e = s[h] * cplx(std::cos(ph), std::sin(ph)) * (hl.weight[h] * inv);
        r.f += e.real();
        for (int a = 0; a < g.n; ++a) {
            r.grad[a] += -e.imag() * hl.k[h][a];
            for (int b = 0; b < g.n; ++b) r.hess[a][b] += -e.real() * hl.k[h][a] * hl.k[h][b];
        }
    }
    return r;
}

bool solve_small(int n, std::array<std::array<double, 3>, 3> A, std::array<double, 3> b,
                 std::array<double, 3>& x) {
    for (int c = 0; c < n; ++c) {
        int piv = c;
        for (int r = c + 1; r < n; ++r)
            if (std::abs(A[r][c]) > std::abs(A[piv][c])) piv = r;
        if (std::abs(A[piv][c]) < 1e-300) return false;
        std::swap(A[c], A[piv]);
        std::swap(b[c], b[piv]);
        for (int r = c + 1; r < n; ++r) {
            double m = A[r][c] / A[c][c];
            for (int k = c; k < n; ++k) A[r][k] -= m * A[c][k];
            b[r] -= m * b[c];
        }
    }
    for (int r = n - 1; r >= 0; --r) {
        double s = b[r];
        for (int k = r + 1; k < n; ++k) s -= A[r][k] * x[k];
        x[r] = s / A[r][r];
    }
    return true;
}

}  // namespace

double spectral_sup(const SampledField& f, int upsample) {
    SampledField fine = spectral_upsample(f, upsample);
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < fine.size(); ++i) {
        double a = std::abs(fine.values[i]);
        if (a > best) {
            best = a;
            arg = i;
        }
    }
    if (best <= 0.0) return 0.0;
    const Grid& g = f.grid;
    const HalfLattice& hl = half_lattice(g);
    std::vector<cplx> s = fft_forward(g, f.values);
    std::array<double, 3> x = fine.grid.coords(arg);
    const double sign = fine.values[arg] >= 0.0 ? 1.0 : -1.0;
    const double step_cap = fine.grid.spacing();
    std::array<double, 3> x0 = x;
    for (int it = 0; it < 12; ++it) {
        TrigEval e = trig_eval(g, hl, s, x);
        best = std::max(best, sign * e.f);
        std::array<double, 3> rhs{0, 0, 0}, dx{0, 0, 0};
        for (int a = 0; a < g.n; ++a) rhs[a] = -e.grad[a];
        if (!solve_small(g.n, e.hess, rhs, dx)) break;
        double norm = 0.0;
        for (int a = 0; a < g.n; ++a) norm += dx[a] * dx[a];
        norm = std::sqrt(norm);
        if (norm > step_cap) break;
        for (int a = 0; a < g.n; ++a) x[a] += dx[a];
        double drift = 0.0;
        for (int a = 0; a < g.n; ++a) drift += (x[a] - x0[a]) * (x[a] - x0[a]);
        if (std::sqrt(drift) > 2.0 * step_cap) break;
        if (norm < 1e-14 * g.side_length) {
            TrigEval last = trig_eval(g, hl, s, x);
            best = std::max(best, sign * last.f);
            break;
        }
    }
    return best;
}

double spectral_lp_norm(const SampledField& f, double p, int upsample) {
    if (std::isinf(p)) return spectral_sup(f, upsample);
    if (p == 2.0) return lp_norm(f, 2.0);
    return lp_norm(spectral_upsample(f, upsample), p);
}

}  // namespace levylab
