#ifndef MAGLOC_EIGENSOLVERS_HPP
#define MAGLOC_EIGENSOLVERS_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <vector>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "lattice_operator.hpp"
#include "rng.hpp"

namespace magloc {

namespace detail {

inline SpMat shifted(const SpMat& H, cplx z) {
    SpMat I(H.rows(), H.cols());
    I.setIdentity();
    return H - z * I;
}

inline VecC seeded_vector(long n, std::uint64_t seed) {
    SplitMix g(seed);
    VecC v(n);
    for (long i = 0; i < n; ++i) v[i] = cplx(g.uniform() - 0.5, g.uniform() - 0.5);
    return v / v.norm();
}

inline void orthogonalize(VecC& w, const Eigen::MatrixXcd& Q, long cols) {
    if (cols == 0) return;
    for (int pass = 0; pass < 2; ++pass) {
        VecC c = Q.leftCols(cols).adjoint() * w;
        w.noalias() -= Q.leftCols(cols) * c;
    }
}

inline double operator_scale_of(const SpMat& H) {
    double m = 0.0;
    for (long k = 0; k < H.outerSize(); ++k) {
        double r = 0.0;
        for (SpMat::InnerIterator it(H, k); it; ++it) r += std::abs(it.value());
        m = std::max(m, r);
    }
    return m;
}

}  // namespace detail

// LDL^T of H - sigma (real sigma); the signs of D give the Sylvester inertia.
// Without pivoting an exactly zero pivot can appear at round shifts (diagonal and hopping
// magnitudes cancel), so the shift is nudged by ~1e-10 of the operator scale and retried. A nudged
// factorization still gives the inertia but is not used for solves (see Resolvent).
class ShiftedLDLT {
public:
    ShiftedLDLT(const SpMat& H, double sigma) : sigma_(sigma), requested_(sigma) {
        double scale = 0.0;
        for (int attempt = 0; attempt < 4; ++attempt) {
            if (attempt == 1) scale = std::max(1.0, std::abs(sigma)) + detail::operator_scale_of(H);
            if (attempt > 0) sigma_ = requested_ + (attempt % 2 ? 1.0 : -1.0) * attempt * 1e-10 * scale;
            if (factor(H)) return;
        }
        singular_ = true;
    }
    long negative() const { return negative_; }
    bool singular() const { return singular_; }
    double sigma() const { return sigma_; }
    double requested_sigma() const { return requested_; }
    bool perturbed() const { return sigma_ != requested_; }
    VecC solve(const VecC& b) const { return solver_.solve(b); }

private:
    bool factor(const SpMat& H) {
        solver_.compute(detail::shifted(H, sigma_));
        if (solver_.info() != Eigen::Success) return false;
        const auto& D = solver_.vectorD();
        negative_ = 0;
        for (long i = 0; i < D.size(); ++i) {
            double d = std::real(D[i]);
            if (d == 0.0 || !std::isfinite(d)) return false;
            if (d < 0.0) ++negative_;
        }
        return true;
    }

    Eigen::SimplicialLDLT<SpMat, Eigen::Lower> solver_;
    double sigma_;
    double requested_;
    long negative_ = 0;
    bool singular_ = false;
};

// Number of eigenvalues below e.
inline long count_below(const SpMat& H, double e) {
    ShiftedLDLT f(H, e);
    if (f.singular()) throw SolverError("count_below: shift is an eigenvalue", 0.0);
    return f.negative();
}

inline long count_in_window(const SpMat& H, double a, double b) {
    if (!(a < b)) throw DomainError("count_in_window: need a < b");
    return count_below(H, b) - count_below(H, a);
}

struct WindowOptions {
    long max_count = 2000;
    int max_rounds = 40;
    double tol = 1e-9;  // residual relative to the largest |H_ij| row sum
    long dense_fallback_below = 600;
    long dense_cap = default_dense_cap;
    bool vectors = true;
};

namespace detail {

inline double operator_scale(const SpMat& H) { return H.rows() ? operator_scale_of(H) : 1.0; }

inline EigenResult sort_result(std::vector<double> vals, const Eigen::MatrixXcd& vecs, const SpMat& H, bool vectors) {
    std::vector<long> order(vals.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](long a, long b) { return vals[a] < vals[b]; });
    EigenResult r;
    for (long k : order) r.values.push_back(vals[k]);
    if (vectors && vecs.cols()) {
        r.vectors.resize(H.rows(), static_cast<long>(order.size()));
        for (size_t c = 0; c < order.size(); ++c) r.vectors.col(static_cast<long>(c)) = vecs.col(order[c]);
        r.residuals = residual_norms(H, r.values, r.vectors);
    }
    return r;
}

}  // namespace detail

// All eigenpairs in [a, b]. The count comes from inertia at a and b; the pairs from shift-invert
// Lanczos about the window centre with full reorthogonalization, locking converged pairs and
// restarting orthogonally to them until the count is reached.
inline EigenResult eigs_window(const SpMat& H, double a, double b, const WindowOptions& opt = {}, int depth = 0) {
    if (!(a < b)) throw DomainError("eigs_window: need a < b");
    long N = H.rows();
    long count = count_in_window(H, a, b);
    if (count > opt.max_count) throw CapacityError(fmt::format("eigs_window: {} eigenvalues in window, above max_count {}", count, opt.max_count));
    if (count == 0) {
        EigenResult r;
        r.method = "inertia";
        return r;
    }
    if (N <= opt.dense_fallback_below) {
        auto r = dense_eigen(H, opt.vectors, std::make_pair(a, b), opt.dense_cap);
        r.method = "dense";
        return r;
    }
    double sigma = 0.5 * (a + b);
    auto F = std::make_unique<ShiftedLDLT>(H, sigma);
    for (int k = 1; k <= 3 && (F->singular() || F->perturbed()); ++k) {
        sigma = 0.5 * (a + b) + 1e-3 * k * (b - a);
        F = std::make_unique<ShiftedLDLT>(H, sigma);
    }
    double tol = opt.tol * detail::operator_scale(H);
    Eigen::MatrixXcd locked(N, count);
    std::vector<double> vals;
    long nl = 0;
    int round = 0, steps = 0;
    int stalled = 0;
    // degenerate clusters lock about one member per round, so rounds that make progress do not count
    int idle = 0;
    for (; idle < opt.max_rounds && round < opt.max_rounds + 4 * count && nl < count && (stalled < 3 || depth >= 6); ++round) {
        long before = nl;
        long want = count - nl;
        long p = std::min(N - nl, std::max<long>(2 * want + 30, 60));
        Eigen::MatrixXcd V(N, p);
        std::vector<double> alpha, beta;
        VecC v = detail::seeded_vector(N, 0x5eed0000ULL + static_cast<std::uint64_t>(round));
        detail::orthogonalize(v, locked, nl);
        v /= v.norm();
        long k = 0;
        for (; k < p; ++k) {
            V.col(k) = v;
            VecC w = F->solve(v);
            ++steps;
            detail::orthogonalize(w, locked, nl);
            VecC c = V.leftCols(k + 1).adjoint() * w;
            w.noalias() -= V.leftCols(k + 1) * c;
            VecC c2 = V.leftCols(k + 1).adjoint() * w;
            w.noalias() -= V.leftCols(k + 1) * c2;
            alpha.push_back(std::real(c[k] + c2[k]));
            double bt = w.norm();
            if (k + 1 == p || bt < 1e-14 * std::abs(alpha.back())) {
                ++k;
                break;
            }
            beta.push_back(bt);
            v = w / bt;
        }
        Eigen::MatrixXd T = Eigen::MatrixXd::Zero(k, k);
        for (long i = 0; i < k; ++i) {
            T(i, i) = alpha[i];
            if (i + 1 < k) T(i, i + 1) = T(i + 1, i) = beta[i];
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
        std::vector<long> order(k);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](long x, long y) { return std::abs(es.eigenvalues()[x]) > std::abs(es.eigenvalues()[y]); });
        for (long idx : order) {
            if (nl == count) break;
            double th = es.eigenvalues()[idx];
            if (th == 0.0) continue;
            double lam = sigma + 1.0 / th;
            if (lam < a || lam > b) continue;
            VecC y = V.leftCols(k) * es.eigenvectors().col(idx).cast<cplx>();
            detail::orthogonalize(y, locked, nl);
            double yn = y.norm();
            if (yn < 0.5) continue;
            y /= yn;
            VecC Hy = H * y;
            double lr = std::real(y.dot(Hy));
            if ((Hy - lr * y).norm() > tol || lr < a || lr > b) continue;
            locked.col(nl++) = y;
            vals.push_back(lr);
        }
        stalled = nl == before ? stalled + 1 : 0;
        idle += nl == before;
    }
    if (nl < count && depth < 6) {
        // pairs near a crowded window edge converge slowly from a distant shift; split the window
        double m = 0.5 * (a + b);
        auto lo = eigs_window(H, a, m, opt, depth + 1);
        auto hi = eigs_window(H, m, b, opt, depth + 1);
        std::vector<double> v = lo.values;
        v.insert(v.end(), hi.values.begin(), hi.values.end());
        EigenResult r;
        r.values = std::move(v);
        if (opt.vectors) {
            r.vectors.resize(N, lo.vectors.cols() + hi.vectors.cols());
            if (lo.vectors.cols()) r.vectors.leftCols(lo.vectors.cols()) = lo.vectors;
            if (hi.vectors.cols()) r.vectors.rightCols(hi.vectors.cols()) = hi.vectors;
            r.residuals = lo.residuals;
            r.residuals.insert(r.residuals.end(), hi.residuals.begin(), hi.residuals.end());
        }
        r.method = "shift-invert-lanczos-split";
        r.iterations = steps + lo.iterations + hi.iterations;
        return r;
    }
    if (nl < count) {
        if (N <= opt.dense_cap) {
            auto r = dense_eigen(H, opt.vectors, std::make_pair(a, b), opt.dense_cap);
            r.method = "dense-fallback";
            return r;
        }
        throw SolverError(fmt::format("eigs_window: {} of {} eigenpairs converged after {} rounds", nl, count, round), 0.0);
    }
    auto r = detail::sort_result(vals, locked, H, opt.vectors);
    r.method = "shift-invert-lanczos";
    r.iterations = steps;
    return r;
}

// Lowest k eigenpairs: bracket the k-th eigenvalue by inertia, then solve the window.
inline EigenResult lowest_eigenvalues(const SpMat& H, long k, double lower_bound, const WindowOptions& opt = {}) {
    if (k <= 0) return {};
    double lo = lower_bound - 1e-6 * (1.0 + std::abs(lower_bound));
    if (count_below(H, lo) != 0) throw DomainError("lowest_eigenvalues: lower bound is not below the spectrum");
    double step = 1.0, hi = lo + step;
    while (count_below(H, hi) < k) {
        step *= 2.0;
        hi = lo + step;
    }
    double left = lo;
    for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (left + hi);
        long c = count_below(H, mid);
        if (c >= k) hi = mid;
        else left = mid;
        if (c >= k && c <= k + 4) break;
    }
    auto r = eigs_window(H, lo, hi, opt);
    if (static_cast<long>(r.values.size()) > k) {
        r.values.resize(static_cast<size_t>(k));
        if (r.vectors.cols()) {
            Eigen::MatrixXcd v = r.vectors.leftCols(k);
            r.vectors = v;
            r.residuals.resize(static_cast<size_t>(k));
        }
    }
    return r;
}

// (H - z)^-1 applied by sparse LDL^T (real z) or LU (complex z); the adjoint uses conj(z).
class Resolvent {
public:
    Resolvent(const SpMat& H, cplx z) : z_(z), real_(z.imag() == 0.0) {
        if (real_) {
            ldlt_ = std::make_unique<ShiftedLDLT>(H, z.real());
            if (ldlt_->singular()) throw SolverError("resolvent: z is an eigenvalue", 0.0);
            if (ldlt_->perturbed()) {
                ldlt_.reset();
                real_ = false;
            }
        }
        if (!real_) {
            lu_ = std::make_unique<Eigen::SparseLU<SpMat>>();
            lu_->compute(detail::shifted(H, z));
            lu_adj_ = std::make_unique<Eigen::SparseLU<SpMat>>();
            lu_adj_->compute(detail::shifted(H, std::conj(z)));
            if (lu_->info() != Eigen::Success || lu_adj_->info() != Eigen::Success)
                throw SolverError("resolvent: LU factorization failed", std::abs(z.imag()));
        }
    }
    VecC apply(const VecC& v) const { return real_ ? ldlt_->solve(v) : VecC(lu_->solve(v)); }
    VecC apply_adjoint(const VecC& v) const { return real_ ? ldlt_->solve(v) : VecC(lu_adj_->solve(v)); }
    cplx z() const { return z_; }

private:
    cplx z_;
    bool real_;
    std::unique_ptr<ShiftedLDLT> ldlt_;
    std::unique_ptr<Eigen::SparseLU<SpMat>> lu_, lu_adj_;
};

inline VecC resolvent_apply(const SpMat& H, cplx z, const VecC& v) { return Resolvent(H, z).apply(v); }

struct BlockNormResult {
    double norm = 0.0;
    int iterations = 0;
    double rel_change = 0.0;
};

namespace detail {
inline void apply_mask(VecC& v, const Mask& m) {
    for (long i = 0; i < v.size(); ++i)
        if (!m[i]) v[i] = 0.0;
}
}  // namespace detail

// Distance from real E to the spectrum is checked by inertia on [E - margin, E + margin].
inline void require_resolvent_margin(const SpMat& H, double E, double margin) {
    if (margin <= 0.0) return;
    long c = count_in_window(H, E - margin, E + margin);
    if (c > 0) {
        WindowOptions o;
        o.vectors = false;
        auto r = eigs_window(H, E - margin, E + margin, o);
        double d = margin;
        for (double v : r.values) d = std::min(d, std::abs(v - E));
        throw SolverError(fmt::format("E = {} lies within {:.3g} of the spectrum", E, d), d);
    }
}

// ||P_out R(z) P_in|| as the square root of the top eigenvalue of P_in R^* P_out R P_in, by Lanczos.
inline BlockNormResult block_resolvent_norm(const Resolvent& R, const Mask& out, const Mask& in, double rel_tol = 1e-6,
                                            int max_iter = 200) {
    long N = static_cast<long>(in.size());
    if (static_cast<long>(out.size()) != N) throw DomainError("block_resolvent_norm: mask sizes differ");
    BlockNormResult res;
    if (mask_count(in) == 0 || mask_count(out) == 0) return res;
    VecC v = VecC::Zero(N);
    SplitMix g(0xb10cULL);
    for (long i = 0; i < N; ++i)
        if (in[i]) v[i] = cplx(1.0 + 0.1 * (g.uniform() - 0.5), 0.1 * (g.uniform() - 0.5));
    v /= v.norm();
    long p = std::min<long>(max_iter, mask_count(in));
    Eigen::MatrixXcd V(N, p);
    std::vector<double> alpha, beta;
    double prev = 0.0;
    for (long k = 0; k < p; ++k) {
        V.col(k) = v;
        VecC w = R.apply(v);
        detail::apply_mask(w, out);
        w = R.apply_adjoint(w);
        detail::apply_mask(w, in);
        for (int pass = 0; pass < 2; ++pass) {
            VecC c = V.leftCols(k + 1).adjoint() * w;
            if (pass == 0) alpha.push_back(std::real(c[k]));
            else alpha.back() += std::real(c[k]);
            w.noalias() -= V.leftCols(k + 1) * c;
        }
        Eigen::MatrixXd T = Eigen::MatrixXd::Zero(k + 1, k + 1);
        for (long i = 0; i <= k; ++i) {
            T(i, i) = alpha[i];
            if (i < k) T(i, i + 1) = T(i + 1, i) = beta[i];
        }
        double top = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(T, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
        res.iterations = static_cast<int>(k + 1);
        res.rel_change = prev > 0.0 ? std::abs(top - prev) / top : 1.0;
        res.norm = std::sqrt(std::max(0.0, top));
        double bt = w.norm();
        if ((k > 0 && res.rel_change < rel_tol) || bt <= 1e-14 * std::max(top, 1e-300)) break;
        prev = top;
        beta.push_back(bt);
        v = w / bt;
    }
    return res;
}

inline BlockNormResult block_resolvent_norm(const SpMat& H, cplx z, const Mask& out, const Mask& in, double margin = 0.0,
                                            double rel_tol = 1e-6) {
    if (z.imag() == 0.0) require_resolvent_margin(H, z.real(), margin);
    return block_resolvent_norm(Resolvent(H, z), out, in, rel_tol);
}

struct ConvergenceReport {
    std::vector<double> h;
    std::vector<std::vector<double>> eigenvalues;  // per h
    std::vector<double> order;                     // per eigenvalue index, from the three finest grids
    std::vector<double> extrapolated;              // Richardson with the observed order
};

// Lowest `count` eigenvalues for each h (halving sequence) and the observed order
// log2((l_h - l_{h/2}) / (l_{h/2} - l_{h/4})).
inline ConvergenceReport convergence_study(const BoxSpec& box, const VectorPotential& A, const ScalarField& V,
                                           const std::vector<double>& hs, long count) {
    if (hs.size() < 3) throw DomainError("convergence_study: need at least three grid spacings");
    for (size_t i = 1; i < hs.size(); ++i)
        if (std::abs(hs[i - 1] / hs[i] - 2.0) > 1e-9) throw DomainError("convergence_study: spacings must halve");
    ConvergenceReport rep;
    rep.h = hs;
    for (double h : hs) {
        auto d = assemble(box, A, V, h);
        WindowOptions o;
        o.vectors = false;
        rep.eigenvalues.push_back(lowest_eigenvalues(d.H, count, d.v_min, o).values);
    }
    size_t n = hs.size();
    for (long k = 0; k < count; ++k) {
        double a = rep.eigenvalues[n - 3][k], b = rep.eigenvalues[n - 2][k], c = rep.eigenvalues[n - 1][k];
        double p = std::log2(std::abs((a - b) / (b - c)));
        rep.order.push_back(p);
        double f = std::pow(2.0, p);
        rep.extrapolated.push_back(c + (c - b) / (f - 1.0));
    }
    return rep;
}

}  // namespace magloc

#endif
