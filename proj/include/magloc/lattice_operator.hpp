#ifndef MAGLOC_LATTICE_OPERATOR_HPP
#define MAGLOC_LATTICE_OPERATOR_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <fmt/format.h>

#ifndef lapack_complex_double
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#endif
#include <lapacke.h>

#include "gauge.hpp"

namespace magloc {

using SpMat = Eigen::SparseMatrix<cplx, Eigen::ColMajor, long>;
using VecC = Eigen::VectorXcd;
using Mask = std::vector<unsigned char>;

inline constexpr long default_dense_cap = 8100;

// Interior grid of a square: m x m points at spacing h, index j*m + i.
struct Grid {
    Vec2 lo;
    double h = 0.1;
    long m = 0;
    bool periodic = false;

    long size() const { return m * m; }
    long index(long i, long j) const { return j * m + i; }
    // Dirichlet grids start one spacing inside the box, periodic ones at the corner.
    Vec2 point(long i, long j) const {
        double s = periodic ? 0.0 : 1.0;
        return {lo.x + (i + s) * h, lo.y + (j + s) * h};
    }
    Vec2 point(long idx) const { return point(idx % m, idx / m); }
};

struct DiscreteHamiltonian {
    BoxSpec box;
    Grid grid;
    SpMat H;
    std::vector<double> theta_x;  // link (i,j)->(i+1,j), index j*m + i
    std::vector<double> theta_y;  // link (i,j)->(i,j+1)
    double max_plaquette_flux = 0.0;
    double v_min = 0.0;
    std::optional<std::string> warning;

    long dim() const { return grid.size(); }
    double h() const { return grid.h; }
};

namespace detail {

inline long cells_per_side(double l, double h) {
    double c = l / h;
    long n = std::lround(c);
    if (std::abs(c - n) > 1e-9 * std::max(1.0, c)) throw DomainError(fmt::format("h = {} does not divide l = {}", h, l));
    return n;
}

inline void finish(DiscreteHamiltonian& d, std::vector<Eigen::Triplet<cplx, long>>& trip) {
    long N = d.dim();
    d.H.resize(N, N);
    d.H.setFromTriplets(trip.begin(), trip.end());
    d.H.makeCompressed();
    if (d.max_plaquette_flux > 0.3)
        d.warning = fmt::format("plaquette flux {:.3g} above 0.3; the lowest Landau clusters are under-resolved", d.max_plaquette_flux);
}

}  // namespace detail

// (H psi)_j = h^-2 sum_e (psi_j - e^{-i theta_{j,e}} psi_{j+e}) + V_j psi_j, psi = 0 outside the box.
inline DiscreteHamiltonian assemble(const BoxSpec& box, const VectorPotential& A, const ScalarField& V, double h) {
    if (!(h > 0.0)) throw DomainError("assemble: h must be positive");
    long cells = detail::cells_per_side(box.l, h);
    if (cells < 8) throw DomainError(fmt::format("assemble: l/h = {} cells, need at least 8", cells));
    DiscreteHamiltonian d;
    d.box = box;
    d.grid = {box.rect().lo, h, cells - 1, false};
    long m = d.grid.m, N = d.grid.size();
    double ih2 = 1.0 / (h * h);
    d.theta_x.assign(static_cast<size_t>(N), 0.0);
    d.theta_y.assign(static_cast<size_t>(N), 0.0);
    std::vector<Eigen::Triplet<cplx, long>> trip;
    trip.reserve(static_cast<size_t>(5 * N));
    d.v_min = std::numeric_limits<double>::infinity();
    for (long j = 0; j < m; ++j)
        for (long i = 0; i < m; ++i) {
            long a = d.grid.index(i, j);
            Vec2 p = d.grid.point(i, j);
            double v = V.value(p);
            d.v_min = std::min(d.v_min, v);
            trip.emplace_back(a, a, cplx(4.0 * ih2 + v, 0.0));
            for (int dir = 0; dir < 2; ++dir) {
                long ii = i + (dir == 0), jj = j + (dir == 1);
                if (ii >= m || jj >= m) continue;
                long b = d.grid.index(ii, jj);
                Vec2 q = d.grid.point(ii, jj);
                double t = peierls_link_phase(A, p, q);
                double back = peierls_link_phase(A, q, p);
                if (std::abs(t + back) > 1e-10 * (1.0 + std::abs(t)))
                    throw SolverError(fmt::format("assemble: link phase antisymmetry violated at ({}, {})", p.x, p.y), 0.0);
                (dir == 0 ? d.theta_x : d.theta_y)[static_cast<size_t>(a)] = t;
                cplx hop = -ih2 * std::exp(cplx(0.0, -t));
                trip.emplace_back(a, b, hop);
                trip.emplace_back(b, a, std::conj(hop));
            }
        }
    for (long j = 0; j + 1 < m; ++j)
        for (long i = 0; i + 1 < m; ++i) {
            long a = d.grid.index(i, j);
            double flux = d.theta_x[a] + d.theta_y[d.grid.index(i + 1, j)] - d.theta_x[d.grid.index(i, j + 1)] - d.theta_y[a];
            d.max_plaquette_flux = std::max(d.max_plaquette_flux, std::abs(flux));
        }
    detail::finish(d, trip);
    return d;
}

// Periodic L x L torus with constant field B0 in the Landau gauge A = (0, B0 x); B0 L^2 must be a multiple of 2 pi.
inline DiscreteHamiltonian assemble_torus(double L, double B0, const ScalarField& V, double h) {
    long M = detail::cells_per_side(L, h);
    if (M < 8) throw DomainError("assemble_torus: need at least 8 cells per side");
    double q = B0 * L * L / (2.0 * pi);
    if (std::abs(q - std::round(q)) > 1e-9 * std::max(1.0, q))
        throw DomainError(fmt::format("assemble_torus: flux B0 L^2 / 2pi = {} is not an integer", q));
    DiscreteHamiltonian d;
    d.box = BoxSpec{{0.5 * L, 0.5 * L}, L, 0};
    d.grid = {{0.0, 0.0}, h, M, true};
    long N = d.grid.size();
    double ih2 = 1.0 / (h * h);
    d.theta_x.assign(static_cast<size_t>(N), 0.0);
    d.theta_y.assign(static_cast<size_t>(N), 0.0);
    std::vector<Eigen::Triplet<cplx, long>> trip;
    trip.reserve(static_cast<size_t>(5 * N));
    d.v_min = std::numeric_limits<double>::infinity();
    for (long j = 0; j < M; ++j)
        for (long i = 0; i < M; ++i) {
            long a = d.grid.index(i, j);
            Vec2 p = d.grid.point(i, j);
            double v = V.value(p);
            d.v_min = std::min(d.v_min, v);
            trip.emplace_back(a, a, cplx(4.0 * ih2 + v, 0.0));
            double tx = i + 1 < M ? 0.0 : -B0 * L * p.y;
            double ty = B0 * p.x * h;
            d.theta_x[a] = tx;
            d.theta_y[a] = ty;
            long bx = d.grid.index((i + 1) % M, j), by = d.grid.index(i, (j + 1) % M);
            cplx hx = -ih2 * std::exp(cplx(0.0, -tx)), hy = -ih2 * std::exp(cplx(0.0, -ty));
            trip.emplace_back(a, bx, hx);
            trip.emplace_back(bx, a, std::conj(hx));
            trip.emplace_back(a, by, hy);
            trip.emplace_back(by, a, std::conj(hy));
        }
    d.max_plaquette_flux = B0 * h * h;
    detail::finish(d, trip);
    return d;
}

inline double hermitian_defect(const SpMat& H) {
    SpMat D = SpMat(H.adjoint()) - H;
    double m = 0.0;
    for (long k = 0; k < D.outerSize(); ++k)
        for (SpMat::InnerIterator it(D, k); it; ++it) m = std::max(m, std::abs(it.value()));
    return m;
}

// Points strictly inside the centred box of side l/3.
inline Mask interior_mask(const DiscreteHamiltonian& d) {
    Mask k(static_cast<size_t>(d.dim()), 0);
    for (long a = 0; a < d.dim(); ++a) k[a] = d.box.in_interior(d.grid.point(a));
    return k;
}

// Points in the collar Lambda_l minus Lambda_{l-2}.
inline Mask collar_mask(const DiscreteHamiltonian& d) {
    Mask k(static_cast<size_t>(d.dim()), 0);
    for (long a = 0; a < d.dim(); ++a) k[a] = d.box.in_collar(d.grid.point(a));
    return k;
}

// Open square of half-width `half` about c; distances wrap on periodic grids.
inline Mask square_mask(const DiscreteHamiltonian& d, Vec2 c, double half) {
    Mask k(static_cast<size_t>(d.dim()), 0);
    double L = d.grid.m * d.grid.h;
    auto wrap = [&](double t) {
        if (!d.grid.periodic) return std::abs(t);
        t = std::fmod(std::abs(t), L);
        return std::min(t, L - t);
    };
    for (long a = 0; a < d.dim(); ++a) {
        Vec2 p = d.grid.point(a) - c;
        k[a] = std::max(wrap(p.x), wrap(p.y)) < half;
    }
    return k;
}

inline long mask_count(const Mask& m) { return std::count(m.begin(), m.end(), 1); }

inline double mask_mass(const VecC& v, const Mask& m) {
    double s = 0.0, t = 0.0;
    for (long a = 0; a < v.size(); ++a) {
        double w = std::norm(v[a]);
        t += w;
        if (m[a]) s += w;
    }
    return t > 0.0 ? s / t : 0.0;
}

inline void write_coo(const SpMat& H, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw Error("cannot write " + path);
    f << "# " << H.rows() << " " << H.cols() << " " << H.nonZeros() << "\n";
    for (long k = 0; k < H.outerSize(); ++k)
        for (SpMat::InnerIterator it(H, k); it; ++it)
            f << fmt::format("{} {} {:.17g} {:.17g}\n", it.row(), it.col(), it.value().real(), it.value().imag());
}

inline SpMat read_coo(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot read " + path);
    std::string hash;
    long r = 0, c = 0, nnz = 0;
    f >> hash >> r >> c >> nnz;
    std::vector<Eigen::Triplet<cplx, long>> t;
    t.reserve(static_cast<size_t>(nnz));
    long i, j;
    double re, im;
    while (f >> i >> j >> re >> im) t.emplace_back(i, j, cplx(re, im));
    SpMat H(r, c);
    H.setFromTriplets(t.begin(), t.end());
    return H;
}

struct EigenResult {
    std::vector<double> values;
    Eigen::MatrixXcd vectors;  // columns, empty unless requested
    std::vector<double> residuals;
    std::string method;
    int iterations = 0;
};

inline std::vector<double> residual_norms(const SpMat& H, const std::vector<double>& vals, const Eigen::MatrixXcd& vecs) {
    std::vector<double> r;
    for (long k = 0; k < vecs.cols(); ++k) r.push_back((H * vecs.col(k) - vals[k] * vecs.col(k)).norm() / vecs.col(k).norm());
    return r;
}

// Dense Hermitian eigensolver; with a range only eigenvalues in (lo, hi] are returned.
inline EigenResult dense_eigen(const SpMat& H, bool vectors, std::optional<std::pair<double, double>> range = std::nullopt,
                               long cap = default_dense_cap) {
    long N = H.rows();
    if (N > cap) throw CapacityError(fmt::format("dense solve of dimension {} exceeds cap {}", N, cap));
    EigenResult res;
    res.method = "dense";
    if (N == 0) return res;
    Eigen::MatrixXcd A = Eigen::MatrixXcd(H);
    std::vector<double> w(static_cast<size_t>(N));
    lapack_int m = 0;
    Eigen::MatrixXcd Z;
    if (vectors) Z.resize(N, N);
    std::vector<lapack_int> isuppz(static_cast<size_t>(2 * N));
    double vl = range ? range->first : 0.0, vu = range ? range->second : 0.0;
    int info = LAPACKE_zheevr(LAPACK_COL_MAJOR, vectors ? 'V' : 'N', range ? 'V' : 'A', 'L', static_cast<lapack_int>(N),
                              A.data(), static_cast<lapack_int>(N), vl, vu, 0, 0, 0.0, &m, w.data(),
                              vectors ? Z.data() : nullptr, static_cast<lapack_int>(N), isuppz.data());
    if (info != 0) throw SolverError(fmt::format("zheevr failed with info {}", info), 0.0);
    res.values.assign(w.begin(), w.begin() + m);
    if (vectors) {
        res.vectors = Z.leftCols(m);
        res.residuals = residual_norms(H, res.values, res.vectors);
    }
    return res;
}

inline EigenResult full_spectrum(const DiscreteHamiltonian& d, bool vectors = false, long cap = default_dense_cap) {
    return dense_eigen(d.H, vectors, std::nullopt, cap);
}

}  // namespace magloc

#endif
