#ifndef MAGLOC_DIAGNOSTICS_HPP
#define MAGLOC_DIAGNOSTICS_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "band_structure.hpp"
#include "eigensolvers.hpp"
#include "hashing.hpp"
#include "special.hpp"

namespace magloc {

// ---------------------------------------------------------------- statistics

inline constexpr double z95 = 1.959963984540054;

struct Estimate {
    double value = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    std::string method;  // "wilson" or "normal"
    long trials = 0;
    long failures = 0;
};

inline Estimate wilson_estimate(long successes, long n, long failures = 0, double z = z95) {
    Estimate e;
    e.method = "wilson";
    e.trials = n;
    e.failures = failures;
    if (n == 0) {
        e.lo = 0.0;
        e.hi = 1.0;
        return e;
    }
    double p = static_cast<double>(successes) / n, z2 = z * z;
    double den = 1.0 + z2 / n;
    double c = (p + z2 / (2.0 * n)) / den;
    double w = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / den;
    e.value = p;
    e.lo = std::max(0.0, c - w);
    e.hi = std::min(1.0, c + w);
    return e;
}

inline Estimate mean_estimate(const std::vector<double>& v, long failures = 0, double z = z95) {
    Estimate e;
    e.method = "normal";
    e.trials = static_cast<long>(v.size());
    e.failures = failures;
    if (v.empty()) return e;
    double m = 0.0;
    for (double x : v) m += x;
    m /= v.size();
    double s2 = 0.0;
    for (double x : v) s2 += (x - m) * (x - m);
    double se = v.size() > 1 ? std::sqrt(s2 / (v.size() - 1) / v.size()) : 0.0;
    e.value = m;
    e.lo = m - z * se;
    e.hi = m + z * se;
    return e;
}

// mean(a) / mean(b) for paired samples, delta-method interval.
inline Estimate ratio_estimate(const std::vector<double>& a, const std::vector<double>& b, double z = z95) {
    if (a.size() != b.size() || a.empty()) throw DomainError("ratio_estimate: need paired non-empty samples");
    size_t n = a.size();
    double ma = 0, mb = 0;
    for (size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    if (mb == 0.0) throw DomainError("ratio_estimate: denominator mean is zero");
    double r = ma / mb, va = 0, vb = 0, cab = 0;
    for (size_t i = 0; i < n; ++i) {
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
        cab += (a[i] - ma) * (b[i] - mb);
    }
    double d = n > 1 ? n - 1.0 : 1.0;
    double var = (va / d - 2.0 * r * cab / d + r * r * vb / d) / (n * mb * mb);
    Estimate e;
    e.method = "normal";
    e.trials = static_cast<long>(n);
    e.value = r;
    e.lo = r - z * std::sqrt(std::max(0.0, var));
    e.hi = r + z * std::sqrt(std::max(0.0, var));
    return e;
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

inline LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw DomainError("least_squares: need two or more points");
    double mx = 0, my = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= x.size();
    my /= y.size();
    double sxx = 0, sxy = 0, syy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw DomainError("least_squares: x values are all equal");
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    return f;
}

// Pearson correlation of two indicator samples with a Fisher-z interval.
inline Estimate correlation_estimate(const std::vector<double>& a, const std::vector<double>& b, double z = z95) {
    Estimate e;
    e.method = "fisher-z";
    e.trials = static_cast<long>(a.size());
    double ma = 0, mb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= a.size();
    mb /= b.size();
    double sab = 0, saa = 0, sbb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0 || a.size() < 4) {
        e.lo = -1.0;
        e.hi = 1.0;
        return e;
    }
    double r = std::clamp(sab / std::sqrt(saa * sbb), -0.999999, 0.999999);
    double fz = std::atanh(r), se = 1.0 / std::sqrt(a.size() - 3.0);
    e.value = r;
    e.lo = std::tanh(fz - z * se);
    e.hi = std::tanh(fz + z * se);
    return e;
}

// ---------------------------------------------------------------- worker pool

inline int worker_count() {
    if (const char* e = std::getenv("MAGLOC_WORKERS")) {
        int n = std::atoi(e);
        if (n > 0) return n;
    }
    unsigned h = std::thread::hardware_concurrency();
    return h ? static_cast<int>(h) : 1;
}

template <class R>
struct TrialSlot {
    std::optional<R> value;
    std::string error;
};

// Runs f(0..n-1) on the pool; results are stored by trial index, library errors are kept per trial.
template <class R, class F>
std::vector<TrialSlot<R>> run_trials(long n, F&& f, int workers = 0) {
    std::vector<TrialSlot<R>> out(static_cast<size_t>(n));
    std::atomic<long> next{0};
    std::exception_ptr fatal;
    std::atomic<bool> stop{false};
    auto work = [&] {
        for (long i; !stop && (i = next++) < n;) {
            try {
                out[static_cast<size_t>(i)].value = f(i);
            } catch (const Error& e) {
                out[static_cast<size_t>(i)].error = e.what();
            } catch (...) {
                if (!stop.exchange(true)) fatal = std::current_exception();
            }
        }
    };
    int w = static_cast<int>(std::min<long>(workers > 0 ? workers : worker_count(), std::max<long>(n, 1)));
    if (w <= 1) {
        work();
    } else {
        std::vector<std::thread> ts;
        for (int t = 0; t < w; ++t) ts.emplace_back(work);
        for (auto& t : ts) t.join();
    }
    if (fatal) std::rethrow_exception(fatal);
    return out;
}

// ---------------------------------------------------------------- records and parameters

struct DiagnosticRecord {
    std::string kind;
    std::string config_hash;
    std::uint64_t seed = 0;
    json params = json::object();
    Estimate estimate;
    std::vector<std::string> columns;            // per-trial table header
    std::vector<std::vector<double>> per_trial;  // one row per trial (NaN for failed trials)
    std::vector<std::string> errors;             // per failed trial
    std::string artifacts;

    json to_json() const {
        json j;
        j["kind"] = kind;
        j["config_hash"] = config_hash;
        j["seed"] = seed;
        j["params"] = params;
        j["estimate"] = estimate.value;
        j["ci"] = {estimate.lo, estimate.hi};
        j["ci_method"] = estimate.method;
        j["trials"] = estimate.trials;
        j["failures"] = estimate.failures;
        if (!artifacts.empty()) j["artifacts"] = artifacts;
        if (!errors.empty()) j["errors"] = errors;
        return j;
    }
};

inline std::uint64_t stream_id(const std::string& name) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : name) h = (h ^ c) * 1099511628211ULL;
    return h;
}

struct MultiscaleParams {
    double xi = 0.5, tau = 3.0, kappa = 1.0, Theta = 0.5, q = 1.0, alpha = 1.0;
    double C_inf = 1.0, C0 = 1.0, C1 = 1.0;
    double l = 9.0;
    double E = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
};

// beta = (1 - (xi + 2)/tau)/2 and gamma = l^(beta - 1); beta must land in (0, 1).
inline MultiscaleParams multiscale_params(double xi, double tau, double l, double E = 0.0) {
    if (!(tau > 2.0) || !(xi > 0.0) || !(xi < tau - 2.0)) throw DomainError("multiscale_params: need tau > 2 and 0 < xi < tau - 2");
    if (!(l > 1.0)) throw DomainError("multiscale_params: need l > 1");
    MultiscaleParams p;
    p.xi = xi;
    p.tau = tau;
    p.l = l;
    p.E = E;
    p.beta = 0.5 * (1.0 - (xi + 2.0) / tau);
    p.gamma = std::pow(l, p.beta - 1.0);
    return p;
}

// ---------------------------------------------------------------- trial states

struct TrialState {
    VecC psi;                   // sum |psi|^2 h^2 = 1
    double discrete_norm = 0.0; // sum |phi_n|^2 h^2 before renormalization
};

// phi_n = (B/2pi)^1/2 L_n(B r^2/2) exp(-B r^2/4) on the grid of d, centred at c.
inline TrialState trial_state(int n, Vec2 c, double B, const DiscreteHamiltonian& d) {
    if (n < 0 || !(B > 0.0)) throw DomainError("trial_state: need n >= 0 and B > 0");
    double len = 1.0 / std::sqrt(B), h = d.h();
    if (h > 0.25 * len) throw DomainError(fmt::format("trial_state: h = {} does not resolve the magnetic length {}", h, len));
    Rect r = d.box.rect();
    double margin = std::min({c.x - r.lo.x, r.hi.x - c.x, c.y - r.lo.y, r.hi.y - c.y});
    if (margin < 6.0 * len) throw DomainError(fmt::format("trial_state: margin {} below 6 magnetic lengths", margin));
    TrialState t;
    t.psi.resize(d.dim());
    double pref = std::sqrt(B / (2.0 * pi)), s = 0.0;
    for (long a = 0; a < d.dim(); ++a) {
        Vec2 x = d.grid.point(a) - c;
        double q = B * x.dot(x);
        double v = pref * laguerre(n, 0.5 * q) * std::exp(-0.25 * q);
        t.psi[a] = v;
        s += v * v;
    }
    t.discrete_norm = s * h * h;
    t.psi /= std::sqrt(t.discrete_norm);
    return t;
}

struct TrialResidualPoint {
    double B0 = 0.0;
    double lambda = 0.0;
    double residual = 0.0;        // Richardson-extrapolated ||(H - lambda) phi||
    double residual_coarse = 0.0; // on the coarser grid
    double discretization = 0.0;  // estimated grid error of the finer grid
    bool usable = true;
};

struct TrialResidualScan {
    int n = 0;
    std::vector<TrialResidualPoint> points;
    std::optional<LinearFit> fit;  // log residual vs log B0 over usable points
};

namespace detail {
inline VecC trial_residual_vector(const DiscreteHamiltonian& d, const TrialState& t, double lambda) {
    return d.H * t.psi - lambda * t.psi;
}
}  // namespace detail

// Residual of the Landau trial state for B = B0 + b_var with the line-integral gauge based at x0.
// Box side 16 magnetic lengths, h sqrt(B) = 0.05 and h/2, combined as (4 r_{h/2} - r_h)/3 on the
// coarse points.
inline TrialResidualScan trial_residual_scan(const PeriodicField& b_var, const ScalarField& V, int n, const std::vector<double>& B0s,
                                             Vec2 x0 = {0, 0}, double lambda_shift = 0.0, int cells = 320) {
    TrialResidualScan scan;
    scan.n = n;
    for (double B0 : B0s) {
        auto B = std::make_shared<const PeriodicField>(b_var.plus_constant(B0));
        double Bloc = B->value(x0);
        if (!(Bloc > 0.0)) throw DomainError("trial_residual_scan: field must be positive at the centre");
        double l = 16.0 / std::sqrt(Bloc);
        BoxSpec box{x0, l, 0};
        LineIntegralGauge A(B, x0);
        TrialResidualPoint p;
        p.B0 = B0;
        p.lambda = (2.0 * n + 1.0) * Bloc + V.value(x0) + lambda_shift;
        auto dc = assemble(box, A, V, l / cells);
        auto df = assemble(box, A, V, l / (2 * cells));
        VecC rc = detail::trial_residual_vector(dc, trial_state(n, x0, Bloc, dc), p.lambda);
        VecC rf = detail::trial_residual_vector(df, trial_state(n, x0, Bloc, df), p.lambda);
        double hc = dc.h();
        double sx = 0.0, sc = 0.0, sd = 0.0;
        for (long j = 0; j < dc.grid.m; ++j)
            for (long i = 0; i < dc.grid.m; ++i) {
                cplx a = rc[dc.grid.index(i, j)], b = rf[df.grid.index(2 * i + 1, 2 * j + 1)];
                cplx ex = (4.0 * b - a) / 3.0;
                sx += std::norm(ex);
                sc += std::norm(a);
                sd += std::norm(ex - b);
            }
        p.residual = std::sqrt(sx * hc * hc);
        p.residual_coarse = std::sqrt(sc * hc * hc);
        p.discretization = std::sqrt(sd * hc * hc);
        p.usable = p.discretization < p.residual;
        scan.points.push_back(p);
    }
    std::vector<double> lx, ly;
    for (const auto& p : scan.points)
        if (p.usable) {
            lx.push_back(std::log(p.B0));
            ly.push_back(std::log(p.residual));
        }
    if (lx.size() >= 2) scan.fit = least_squares(lx, ly);
    return scan;
}

// ---------------------------------------------------------------- per-trial fields

using ConfigPtr = std::shared_ptr<const FieldModelConfig>;

struct TrialField {
    SamplePtr sample;  // subordinate coefficients only
    std::shared_ptr<const RandomField> B;
    PotentialPtr A;
};

// The subordinate field of `box` (coefficients with z in the expanded box) evaluable over `eval`,
// with its line-integral gauge based at the box centre.
inline TrialField subordinate_trial_field(const ConfigPtr& cfg, const BoxSpec& box, const Rect& eval, std::uint64_t seed) {
    Rect e = box.expanded();
    Rect region{{std::min(e.lo.x, eval.lo.x), std::min(e.lo.y, eval.lo.y)}, {std::max(e.hi.x, eval.hi.x), std::max(e.hi.y, eval.hi.y)}};
    auto full = sample_field(*cfg, region, seed);
    TrialField t;
    t.sample = std::make_shared<const FieldSample>(subordinate_field(*cfg, full, box));
    t.B = std::make_shared<const RandomField>(cfg, t.sample);
    t.A = std::make_shared<const LineIntegralGauge>(t.B, box.center);
    return t;
}

inline DiscreteHamiltonian trial_hamiltonian(const ConfigPtr& cfg, const BoxSpec& box, double h, std::uint64_t seed,
                                             std::optional<BoxSpec> proxy = std::nullopt) {
    const BoxSpec& target = proxy ? *proxy : box;
    auto f = subordinate_trial_field(cfg, box, target.rect(), seed);
    return assemble(target, *f.A, cfg->v, h);
}

inline Mask mask_from(const DiscreteHamiltonian& d, const std::function<bool(Vec2)>& pred) {
    Mask m(static_cast<size_t>(d.dim()), 0);
    for (long a = 0; a < d.dim(); ++a) m[a] = pred(d.grid.point(a));
    return m;
}

struct MCOptions {
    double l = 9.0;
    double h = 0.25;
    Vec2 center{0, 0};
    long trials = 100;
    std::uint64_t seed = 1;
    int workers = 0;
};

namespace detail {
inline DiagnosticRecord base_record(const std::string& kind, const FieldModelConfig& cfg, const MCOptions& o) {
    DiagnosticRecord r;
    r.kind = kind;
    r.config_hash = config_hash(cfg);
    r.seed = o.seed;
    r.params["l"] = o.l;
    r.params["h"] = o.h;
    r.params["center"] = {o.center.x, o.center.y};
    r.params["trials"] = o.trials;
    return r;
}

inline double nan() { return std::numeric_limits<double>::quiet_NaN(); }
}  // namespace detail

// ---------------------------------------------------------------- Wegner

struct WegnerResult {
    std::vector<DiagnosticRecord> records;  // one per eta
    std::vector<std::vector<double>> counts;  // [trial][eta], empty rows for failed trials
};

// Eigenvalue counts of H_l in [E - eta/2, E + eta/2], one field per trial shared by all etas.
inline WegnerResult wegner_mc(const FieldModelConfig& config, double E, const std::vector<double>& etas, const MCOptions& o) {
    if (etas.empty()) throw DomainError("wegner_mc: empty eta list");
    for (double eta : etas)
        if (!(eta > 0.0) || eta > 1.0) throw DomainError("wegner_mc: eta must lie in (0, 1]");
    if (E < 0.5 * config.b0) throw DomainError("wegner_mc: E below b0/2");
    auto cfg = std::make_shared<const FieldModelConfig>(config);
    BoxSpec box{o.center, o.l, config.profile.c_delta()};
    auto slots = run_trials<std::vector<double>>(o.trials, [&](long t) {
        auto d = trial_hamiltonian(cfg, box, o.h, derive_seed(o.seed, stream_id("wegner"), t));
        std::vector<double> c;
        for (double eta : etas) c.push_back(static_cast<double>(count_in_window(d.H, E - 0.5 * eta, E + 0.5 * eta)));
        return c;
    }, o.workers);
    WegnerResult res;
    long failures = 0;
    std::vector<std::string> errs;
    for (auto& s : slots) {
        if (s.value) res.counts.push_back(*s.value);
        else {
            res.counts.emplace_back();
            ++failures;
            errs.push_back(s.error);
        }
    }
    for (size_t k = 0; k < etas.size(); ++k) {
        auto r = detail::base_record("wegner", config, o);
        r.params["E"] = E;
        r.params["eta"] = etas[k];
        std::vector<double> v;
        r.columns = {"trial", "count"};
        for (size_t t = 0; t < res.counts.size(); ++t) {
            double c = res.counts[t].empty() ? detail::nan() : res.counts[t][k];
            r.per_trial.push_back({static_cast<double>(t), c});
            if (!res.counts[t].empty()) v.push_back(c);
        }
        r.estimate = mean_estimate(v, failures);
        r.errors = errs;
        res.records.push_back(std::move(r));
    }
    return res;
}

// Ratio of the shared-seed mean counts at etas[i] and etas[j].
inline Estimate wegner_ratio(const WegnerResult& w, size_t i, size_t j) {
    std::vector<double> a, b;
    for (const auto& c : w.counts)
        if (!c.empty()) {
            a.push_back(c[i]);
            b.push_back(c[j]);
        }
    return ratio_estimate(a, b);
}

// ---------------------------------------------------------------- good boxes

struct GoodBoxResult {
    std::vector<DiagnosticRecord> records;  // one per gamma
    std::vector<double> norms;              // per trial; +inf when E hits the spectrum, NaN on failure
};

inline void require_suitable(const BoxSpec& box) {
    if (!box.suitable()) throw DomainError("box must have odd integer side and an integer centre");
}

namespace detail {
// ||chi_out R(E) chi_in|| for one trial, +inf when E is within `margin` of the spectrum.
inline double box_norm(const DiscreteHamiltonian& d, double E, const Mask& out, const Mask& in, double margin) {
    if (count_in_window(d.H, E - margin, E + margin) > 0) return std::numeric_limits<double>::infinity();
    return block_resolvent_norm(Resolvent(d.H, E), out, in).norm;
}
}  // namespace detail

inline GoodBoxResult good_box_mc(const FieldModelConfig& config, double E, const std::vector<double>& gammas, const MCOptions& o,
                                 double margin = 1e-9) {
    auto cfg = std::make_shared<const FieldModelConfig>(config);
    BoxSpec box{o.center, o.l, config.profile.c_delta()};
    require_suitable(box);
    auto slots = run_trials<double>(o.trials, [&](long t) {
        auto d = trial_hamiltonian(cfg, box, o.h, derive_seed(o.seed, stream_id("goodbox"), t));
        return detail::box_norm(d, E, collar_mask(d), interior_mask(d), margin);
    }, o.workers);
    GoodBoxResult res;
    long failures = 0;
    std::vector<std::string> errs;
    for (auto& s : slots) {
        res.norms.push_back(s.value ? *s.value : detail::nan());
        if (!s.value) {
            ++failures;
            errs.push_back(s.error);
        }
    }
    for (double g : gammas) {
        auto r = detail::base_record("goodbox", config, o);
        r.params["E"] = E;
        r.params["gamma"] = g;
        r.columns = {"trial", "norm", "good"};
        double thr = std::exp(-g * o.l);
        long good = 0, n = 0;
        for (size_t t = 0; t < res.norms.size(); ++t) {
            double v = res.norms[t];
            bool ok = !std::isnan(v);
            bool is_good = ok && std::isfinite(v) && v <= thr;
            r.per_trial.push_back({static_cast<double>(t), v, ok ? (is_good ? 1.0 : 0.0) : detail::nan()});
            if (ok) {
                ++n;
                good += is_good;
            }
        }
        r.estimate = wilson_estimate(good, n, failures);
        r.errors = errs;
        res.records.push_back(std::move(r));
    }
    return res;
}

// Good-box indicators for Lambda_l(x) and Lambda_l(y), |x - y|_inf = l + c_delta, with independent streams.
inline Estimate good_box_correlation(const FieldModelConfig& config, double E, double gamma, const MCOptions& o, double margin = 1e-9) {
    auto cfg = std::make_shared<const FieldModelConfig>(config);
    int cd = config.profile.c_delta();
    BoxSpec bx{o.center, o.l, cd}, by{{o.center.x + o.l + cd, o.center.y}, o.l, cd};
    require_suitable(bx);
    double thr = std::exp(-gamma * o.l);
    auto slots = run_trials<std::pair<double, double>>(o.trials, [&](long t) {
        auto dx = trial_hamiltonian(cfg, bx, o.h, derive_seed(o.seed, stream_id("goodbox-x"), t));
        auto dy = trial_hamiltonian(cfg, by, o.h, derive_seed(o.seed, stream_id("goodbox-y"), t));
        double nx = detail::box_norm(dx, E, collar_mask(dx), interior_mask(dx), margin);
        double ny = detail::box_norm(dy, E, collar_mask(dy), interior_mask(dy), margin);
        return std::make_pair(nx <= thr ? 1.0 : 0.0, ny <= thr ? 1.0 : 0.0);
    }, o.workers);
    std::vector<double> a, b;
    for (auto& s : slots)
        if (s.value) {
            a.push_back(s.value->first);
            b.push_back(s.value->second);
        }
    return correlation_estimate(a, b);
}

// ---------------------------------------------------------------- balanced boxes

struct BalancedResult {
    DiagnosticRecord single;
    DiagnosticRecord pair;  // Lambda_l(x) or Lambda_l(y) balanced
};

inline BalancedResult balanced_mc(const FieldModelConfig& config, double E, int proxy_factor, double C_inf, double alpha,
                                  const MCOptions& o, double margin = 1e-9) {
    if (proxy_factor < 3) throw DomainError("balanced_mc: proxy factor must be >= 3");
    auto cfg = std::make_shared<const FieldModelConfig>(config);
    int cd = config.profile.c_delta();
    BoxSpec bx{o.center, o.l, cd}, by{{o.center.x + o.l + cd, o.center.y}, o.l, cd};
    require_suitable(bx);
    double factor = 1.0 + C_inf * std::pow(o.l, alpha);
    auto one = [&](const BoxSpec& b, std::uint64_t seed) {
        BoxSpec proxy{b.center, proxy_factor * b.l, cd};
        auto f = subordinate_trial_field(cfg, b, proxy.rect(), seed);
        auto d = assemble(b, *f.A, cfg->v, o.h);
        auto p = assemble(proxy, *f.A, cfg->v, o.h);
        double nb = detail::box_norm(d, E, collar_mask(d), interior_mask(d), margin);
        double np = detail::box_norm(p, E, mask_from(p, [&](Vec2 x) { return b.in_collar(x); }),
                                     mask_from(p, [&](Vec2 x) { return b.in_interior(x); }), margin);
        return std::array<double, 3>{nb, np, (std::isfinite(nb) && nb <= factor * np) ? 1.0 : 0.0};
    };
    auto slots = run_trials<std::array<double, 6>>(o.trials, [&](long t) {
        auto a = one(bx, derive_seed(o.seed, stream_id("balanced-x"), t));
        auto b = one(by, derive_seed(o.seed, stream_id("balanced-y"), t));
        return std::array<double, 6>{a[0], a[1], a[2], b[0], b[1], b[2]};
    }, o.workers);
    BalancedResult res;
    res.single = detail::base_record("balanced", config, o);
    res.pair = detail::base_record("balanced-pair", config, o);
    for (auto* r : {&res.single, &res.pair}) {
        r->params["E"] = E;
        r->params["proxy_factor"] = proxy_factor;
        r->params["C_inf"] = C_inf;
        r->params["alpha"] = alpha;
    }
    res.single.columns = {"trial", "norm_box", "norm_proxy", "balanced"};
    res.pair.columns = {"trial", "balanced_x", "balanced_y", "either"};
    long ks = 0, kp = 0, n = 0, failures = 0;
    for (size_t t = 0; t < slots.size(); ++t) {
        if (!slots[t].value) {
            ++failures;
            res.single.errors.push_back(slots[t].error);
            res.single.per_trial.push_back({double(t), detail::nan(), detail::nan(), detail::nan()});
            res.pair.per_trial.push_back({double(t), detail::nan(), detail::nan(), detail::nan()});
            continue;
        }
        const auto& v = *slots[t].value;
        ++n;
        ks += v[2] > 0.5;
        bool either = v[2] > 0.5 || v[5] > 0.5;
        kp += either;
        res.single.per_trial.push_back({double(t), v[0], v[1], v[2]});
        res.pair.per_trial.push_back({double(t), v[2], v[5], either ? 1.0 : 0.0});
    }
    res.single.estimate = wilson_estimate(ks, n, failures);
    res.pair.estimate = wilson_estimate(kp, n, failures);
    return res;
}

// ---------------------------------------------------------------- Lifshitz tails

struct LifshitzPoint {
    double h = 0.0;
    double window_lo = 0.0, window_hi = 0.0;
    double bound = 0.0;  // 1 - |Lambda~| (nu+ + nu-)
    bool vacuous = false;
    DiagnosticRecord record;
};

struct LifshitzResult {
    ForbiddenInterval interval;
    double c_u = 1.0;
    double lambda_tilde = 0.0;
    std::vector<LifshitzPoint> points;
};

// Intrusion = an eigenvalue of the proxy box inside the window whose eigenvector keeps at least
// `interior_mass` of its weight off the proxy collar.
inline LifshitzResult lifshitz_tail_mc(const FieldModelConfig& config, int n, const std::vector<double>& hs, double C_ext,
                                       int proxy_factor, const MCOptions& o, double interior_mass = 0.9, int resolution = 64) {
    for (double h : hs)
        if (!(h > 0.0)) throw DomainError("lifshitz_tail_mc: h must be positive");
    if (proxy_factor < 1) throw DomainError("lifshitz_tail_mc: proxy factor must be >= 1");
    auto cfg = std::make_shared<const FieldModelConfig>(config);
    int cd = config.profile.c_delta();
    BoxSpec box{o.center, o.l, cd};
    BoxSpec proxy{o.center, proxy_factor * o.l, cd};
    LifshitzResult res;
    res.interval = forbidden_interval(config, n, C_ext, resolution);
    res.c_u = profile_sum_bounds(config.profile).c_u;
    res.lambda_tilde = (o.l + 2.0 * cd) * (o.l + 2.0 * cd);
    double sigma0 = config.sigma(0), mu = config.mu;
    double wlo = std::numeric_limits<double>::infinity(), whi = -wlo;
    for (double h : hs) {
        LifshitzPoint p;
        p.h = h;
        p.window_lo = res.interval.lower - (2.0 * n + 1.0) * mu * h;
        p.window_hi = res.interval.upper + (2.0 * n + 3.0) * mu * h;
        double arg = h / res.c_u;
        double nu = tail_probability(config.dist, sigma0, +1, arg) + tail_probability(config.dist, sigma0, -1, arg);
        p.bound = 1.0 - res.lambda_tilde * nu;
        p.vacuous = p.bound <= 0.0;
        if (p.window_lo < p.window_hi) {
            wlo = std::min(wlo, p.window_lo);
            whi = std::max(whi, p.window_hi);
        }
        res.points.push_back(std::move(p));
    }
    auto slots = run_trials<std::vector<std::pair<double, double>>>(o.trials, [&](long t) {
        std::vector<std::pair<double, double>> found;  // (eigenvalue, interior mass)
        if (!(wlo < whi)) return found;
        auto d = trial_hamiltonian(cfg, box, o.h, derive_seed(o.seed, stream_id("lifshitz"), t), proxy);
        auto collar = collar_mask(d);
        auto r = eigs_window(d.H, wlo, whi);
        for (size_t k = 0; k < r.values.size(); ++k)
            found.emplace_back(r.values[k], 1.0 - mask_mass(r.vectors.col(static_cast<long>(k)), collar));
        return found;
    }, o.workers);
    long failures = 0;
    std::vector<std::string> errs;
    for (auto& s : slots)
        if (!s.value) {
            ++failures;
            errs.push_back(s.error);
        }
    for (auto& p : res.points) {
        auto r = detail::base_record("lifshitz", config, o);
        r.params["n"] = n;
        r.params["h"] = p.h;
        r.params["grid_h"] = o.h;
        r.params["window"] = {p.window_lo, p.window_hi};
        r.params["bound"] = p.bound;
        r.params["vacuous"] = p.vacuous;
        r.params["C_ext"] = C_ext;
        r.params["proxy_factor"] = proxy_factor;
        r.columns = {"trial", "intrusions", "no_intrusion"};
        long ok = 0, cnt = 0;
        for (size_t t = 0; t < slots.size(); ++t) {
            if (!slots[t].value) {
                r.per_trial.push_back({double(t), detail::nan(), detail::nan()});
                continue;
            }
            long k = 0;
            for (auto [ev, m] : *slots[t].value)
                if (ev > p.window_lo && ev < p.window_hi && m >= interior_mass) ++k;
            ++cnt;
            ok += k == 0;
            r.per_trial.push_back({double(t), double(k), k == 0 ? 1.0 : 0.0});
        }
        r.estimate = wilson_estimate(ok, cnt, failures);
        r.errors = errs;
        p.record = std::move(r);
    }
    return res;
}

// ---------------------------------------------------------------- Combes-Thomas

struct CombesThomasFit {
    double E = 0.0;
    double eta = 0.0;
    std::vector<double> distances;
    std::vector<double> norms;
    double rate = 0.0;  // minus the slope of log norm against distance
    double r2 = 0.0;
};

// ||1_B R(E) 1_D|| for squares of half-width `half` at c and c + (delta, 0).
inline CombesThomasFit combes_thomas_fit(const DiscreteHamiltonian& d, double E, double r, double s, const std::vector<double>& distances,
                                         Vec2 c, double half) {
    if (!(r < E && E < s)) throw DomainError("combes_thomas_fit: E must lie inside (r, s)");
    if (distances.size() < 2) throw DomainError("combes_thomas_fit: need two or more distances");
    long inside = count_in_window(d.H, r, s);
    if (inside > 0) throw DomainError(fmt::format("combes_thomas_fit: ({}, {}) holds {} eigenvalues", r, s, inside));
    CombesThomasFit f;
    f.E = E;
    f.eta = std::min(E - r, s - E);
    f.distances = distances;
    Resolvent R(d.H, E);
    Mask in = square_mask(d, c, half);
    if (mask_count(in) == 0) throw DomainError("combes_thomas_fit: source mask holds no grid points");
    std::vector<double> ln;
    for (double delta : distances) {
        if (d.grid.periodic && delta > 0.5 * d.grid.m * d.grid.h)
            throw DomainError(fmt::format("combes_thomas_fit: distance {} exceeds half the torus side", delta));
        Mask out = square_mask(d, {c.x + delta, c.y}, half);
        if (mask_count(out) == 0) throw DomainError(fmt::format("combes_thomas_fit: mask at distance {} holds no grid points", delta));
        double nv = block_resolvent_norm(R, out, in).norm;
        f.norms.push_back(nv);
        ln.push_back(std::log(nv));
    }
    auto fit = least_squares(distances, ln);
    f.rate = -fit.slope;
    f.r2 = fit.r2;
    return f;
}

// (rate_2 / rate_1) / sqrt(eta_2 / eta_1); 1 when the rate scales like sqrt(eta).
inline double combes_thomas_form_ratio(const CombesThomasFit& a, const CombesThomasFit& b) {
    return (b.rate / a.rate) / std::sqrt(b.eta / a.eta);
}

// ---------------------------------------------------------------- localization length

struct LocalizationLength {
    double rate = 0.0;
    double r2 = 0.0;
    double participation = 0.0;  // (sum |psi|^2)^2 / sum |psi|^4 * h^2
    Vec2 peak;
    int shells = 0;
};

inline LocalizationLength localization_length(const VecC& psi, const Grid& g, double shell_width = 0.0, double floor_rel = 1e-12) {
    if (psi.size() != g.size()) throw DomainError("localization_length: vector and grid sizes differ");
    double w = shell_width > 0.0 ? shell_width : 2.0 * g.h;
    long ip = 0;
    double amax = 0.0, s2 = 0.0, s4 = 0.0;
    for (long a = 0; a < psi.size(); ++a) {
        double v = std::abs(psi[a]);
        if (v > amax) {
            amax = v;
            ip = a;
        }
        s2 += v * v;
        s4 += v * v * v * v;
    }
    LocalizationLength out;
    out.peak = g.point(ip);
    out.participation = s4 > 0.0 ? s2 * s2 / s4 * g.h * g.h : 0.0;
    std::map<long, double> shell;
    for (long a = 0; a < psi.size(); ++a) {
        long k = static_cast<long>((g.point(a) - out.peak).norm() / w);
        double& m = shell[k];
        m = std::max(m, std::abs(psi[a]));
    }
    std::vector<double> x, y;
    for (auto [k, m] : shell)
        if (m > floor_rel * amax) {
            x.push_back((k + 0.5) * w);
            y.push_back(std::log(m));
        }
    out.shells = static_cast<int>(x.size());
    if (x.size() >= 2) {
        auto f = least_squares(x, y);
        out.rate = -f.slope;
        out.r2 = f.r2;
    }
    return out;
}

// ---------------------------------------------------------------- discretization budget

// Largest shift of lattice Landau level n from (2n+1)B for constant fields B in [b_lo, b_hi], measured on
// flux tori whose spacing is the smallest one not below h (the shift grows with the spacing).
inline double landau_discretization_budget(int n, double b_lo, double b_hi, double h, int samples = 5, int flux = 12) {
    if (n < 0 || !(b_lo > 0.0) || !(b_hi >= b_lo) || !(h > 0.0) || samples < 1 || flux < 1)
        throw DomainError("landau_discretization_budget: need n >= 0, 0 < b_lo <= b_hi, h > 0");
    double worst = 0.0;
    for (int k = 0; k < samples; ++k) {
        double B = samples == 1 ? b_hi : b_lo + (b_hi - b_lo) * k / (samples - 1);
        // at least 8 cells per side
        int f = std::max(flux, static_cast<int>(std::ceil(B * 64.0 * h * h / (2.0 * pi))));
        double L = std::sqrt(2.0 * pi * f / B);
        long cells = std::max<long>(8, static_cast<long>(std::floor(L / h)));
        auto d = assemble_torus(L, B, PeriodicField(0.0), L / static_cast<double>(cells));
        double level = (2.0 * n + 1.0) * B;
        auto r = eigs_window(d.H, level - B, level + B, {.vectors = false});
        for (double v : r.values) worst = std::max(worst, std::abs(v - level));
    }
    return worst;
}

// ---------------------------------------------------------------- IDS

struct IdsResult {
    std::vector<double> energies;
    std::vector<Estimate> density;                // N(E) / |Lambda|
    std::vector<std::vector<double>> per_trial;   // [trial][energy]
    DiagnosticRecord record;
};

inline IdsResult ids_histogram(const FieldModelConfig& config, const std::vector<double>& energies, const MCOptions& o) {
    if (energies.empty()) throw DomainError("ids_histogram: empty energy grid");
    auto cfg = std::make_shared<const FieldModelConfig>(config);
    BoxSpec box{o.center, o.l, config.profile.c_delta()};
    double area = o.l * o.l;
    auto slots = run_trials<std::vector<double>>(o.trials, [&](long t) {
        auto d = trial_hamiltonian(cfg, box, o.h, derive_seed(o.seed, stream_id("ids"), t));
        std::vector<double> c;
        for (double e : energies) c.push_back(static_cast<double>(count_below(d.H, e)) / area);
        return c;
    }, o.workers);
    IdsResult res;
    res.energies = energies;
    long failures = 0;
    for (auto& s : slots) {
        if (s.value) res.per_trial.push_back(*s.value);
        else {
            ++failures;
            res.record.errors.push_back(s.error);
        }
    }
    for (size_t k = 0; k < energies.size(); ++k) {
        std::vector<double> v;
        for (const auto& row : res.per_trial) v.push_back(row[k]);
        res.density.push_back(mean_estimate(v, failures));
    }
    auto errs = res.record.errors;
    res.record = detail::base_record("ids", config, o);
    res.record.errors = errs;
    res.record.params["energies"] = energies;
    res.record.estimate = res.density.back();
    res.record.columns = {"energy", "density", "ci_lo", "ci_hi"};
    for (size_t k = 0; k < energies.size(); ++k)
        res.record.per_trial.push_back({energies[k], res.density[k].value, res.density[k].lo, res.density[k].hi});
    return res;
}

}  // namespace magloc

#endif
