#ifndef MAGLOC_CLI_HPP
#define MAGLOC_CLI_HPP

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "harness.hpp"
#include "landau_resolvent.hpp"

namespace magloc {

namespace cli {

struct Options {
    std::string config_path;
    std::uint64_t seed = 1;
    long trials = 0;  // 0 = subcommand default
    std::string out = "runs";

    int n = 0;
    int resolution = 64;
    std::optional<double> c_ext;
    double l = 9.0;
    double h = 0.25;
    std::vector<double> center{0.0, 0.0};
    std::vector<double> window;
    long count = 0;
    std::string gauge = "line-integral";
    bool coo = false;
    int curl_check = 0;
    std::vector<double> region{-2.0, -2.0, 2.0, 2.0};
    int grid = 64;
    double E = 0.0;
    std::vector<double> E_list;
    std::vector<double> eta{0.1, 0.05};
    std::vector<double> gamma{0.1, 0.5, 1.0};
    double margin = 1e-9;
    int m = 3;
    double C_inf = 1.0;
    double alpha = 1.0;
    std::vector<double> h_rel{0.2, 0.4, 0.8};
    double grid_h = 0.2;
    double interior = 0.9;
    int flux = 24;
    int cells = 64;
    std::vector<double> distances;  // empty: six points between 0.35 and 0.85 of half the torus side
    double half = 0.3;
    std::vector<double> B0_list{25.0, 100.0, 400.0};
    double shift = 0.0;
    std::optional<double> kernel_B0;
    double emin = 0.0, emax = 50.0;
    int bins = 50;
    std::vector<std::string> runs;
    int validate_resolution = 32;
    double lifshitz_l = 3.0;
    int trial_cells = 320;
    std::string report_out = "report";
};

struct Context {
    std::ostream& out;
    std::ostream& err;
    Options o;
    std::string command;
};

// Error classes that come from the input rather than from the code.
inline bool user_error(const std::exception& e) {
    return dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DomainError*>(&e) || dynamic_cast<const CapacityError*>(&e) ||
           dynamic_cast<const PoleError*>(&e) || dynamic_cast<const json::exception*>(&e);
}

inline const char* error_kind(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return "config";
    if (dynamic_cast<const DomainError*>(&e)) return "domain";
    if (dynamic_cast<const CapacityError*>(&e)) return "capacity";
    if (dynamic_cast<const PoleError*>(&e)) return "pole";
    if (dynamic_cast<const SolverError*>(&e)) return "solver";
    if (dynamic_cast<const QuadratureError*>(&e)) return "quadrature";
    if (dynamic_cast<const json::exception*>(&e)) return "json";
    return "internal";
}

inline Vec2 vec2(const std::vector<double>& v, const char* what) {
    if (v.size() != 2) throw ConfigError(fmt::format("{} needs two comma-separated numbers", what));
    return {v[0], v[1]};
}

inline MCOptions mc(const Options& o, long default_trials) {
    MCOptions m;
    m.l = o.l;
    m.h = o.h;
    m.center = vec2(o.center, "--center");
    m.trials = o.trials > 0 ? o.trials : default_trials;
    m.seed = o.seed;
    return m;
}

struct Run {
    FieldModelConfig cfg;
    json cfg_json;
    std::unique_ptr<RunDirectory> dir;
    json records = json::array();

    void add(DiagnosticRecord r, const std::string& csv_name) {
        r.artifacts = csv_name;
        dir->write(csv_name, csv_table(dir->tag(), r.columns, r.per_trial));
        records.push_back(r.to_json());
    }
    void csv(const std::string& name, const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows) {
        dir->write(name, csv_table(dir->tag(), header, rows));
    }
    void svg(const std::string& name, const PlotSpec& p) { dir->write(name, svg_plot(p, dir->tag())); }
    std::string finish() {
        if (!records.empty()) dir->write("records.json", records.dump(2) + "\n");
        dir->finish();
        return dir->path().string();
    }
};

inline Run open_run(const Context& c, const json& options, bool need_config = true) {
    Run r;
    if (!c.o.config_path.empty()) {
        r.cfg = load_config(c.o.config_path);
        r.cfg.check();
    } else if (need_config) {
        throw ConfigError("--config is required for " + c.command);
    }
    r.cfg_json = config_to_json(r.cfg);
    RunManifest m;
    m.config = r.cfg_json;
    m.config_hash = config_hash(r.cfg);
    m.seed = c.o.seed;
    m.command = c.command;
    m.options = options;
    m.run_hash = run_hash(m.config, c.command, options, c.o.seed);
    r.dir = std::make_unique<RunDirectory>(c.o.out, std::move(m));
    return r;
}

// ---------------------------------------------------------------- subcommands

inline int cmd_validate(Context& c) {
    auto r = open_run(c, {{"resolution", c.o.validate_resolution}});
    auto rep = validate_model(r.cfg, c.o.validate_resolution);
    json checks = json::array();
    int pass = 0;
    for (const auto& k : rep.checks) {
        json j{{"name", k.name}, {"pass", k.pass}, {"value", k.value}, {"limit", k.limit}, {"detail", k.detail}};
        if (k.witness) j["witness"] = {k.witness->x, k.witness->y};
        checks.push_back(j);
        pass += k.pass;
        if (!k.pass) c.err << fmt::format("check {} failed: value {} limit {} ({})\n", k.name, k.value, k.limit, k.detail);
    }
    r.dir->write("validation.json", json{{"all_pass", rep.all_pass()}, {"checks", checks}}.dump(2) + "\n");
    auto path = r.finish();
    c.out << fmt::format("validate: {}/{} checks pass -> {}\n", pass, rep.checks.size(), path);
    return rep.all_pass() ? 0 : 1;
}

inline int cmd_edges(Context& c) {
    json opt{{"n", c.o.n}, {"resolution", c.o.resolution}, {"h", c.o.h}};
    if (c.o.c_ext) opt["c_ext"] = *c.o.c_ext;
    auto r = open_run(c, opt);
    auto e = band_edges(r.cfg, c.o.n, c.o.resolution);
    PeriodicField det = r.cfg.b_det();
    auto ce = classical_edges(det, r.cfg.v, c.o.n, detail::unit_cell(), c.o.resolution);
    double disc = landau_discretization_budget(c.o.n, e.b_min, e.b_max, c.o.h);
    json j{{"n", e.n}, {"E_minus", e.E_minus}, {"E_plus", e.E_plus}, {"margin", e.margin}, {"truncation", e.truncation},
           {"h", c.o.h}, {"discretization", disc}, {"sandwich_margin", e.margin + e.truncation + disc},
           {"deterministic", {{"e_min", ce.e_min}, {"e_max", ce.e_max}, {"b_min", ce.b_min}, {"b_max", ce.b_max}}}};
    std::string extra;
    if (c.o.c_ext) {
        auto f = forbidden_interval(r.cfg, c.o.n, *c.o.c_ext, c.o.resolution);
        j["forbidden"] = {{"lower", f.lower}, {"upper", f.upper}, {"K2", f.K2}, {"K3", f.K3}, {"correction", f.correction},
                          {"C_ext", f.C_ext}, {"empty", f.empty}};
        extra = f.empty ? " forbidden=empty" : fmt::format(" forbidden=({:.10g}, {:.10g})", f.lower, f.upper);
    }
    r.dir->write("edges.json", j.dump(2) + "\n");
    r.csv("edges.csv", {"n", "E_minus", "E_plus", "margin", "truncation", "discretization"},
          {{double(e.n), e.E_minus, e.E_plus, e.margin, e.truncation, disc}});
    auto path = r.finish();
    c.out << fmt::format("edges n={}: ({:.10g}, {:.10g}){} -> {}\n", e.n, e.E_minus, e.E_plus, extra, path);
    return 0;
}

inline int cmd_sample(Context& c) {
    if (c.o.region.size() != 4) throw ConfigError("--region needs lo_x,lo_y,hi_x,hi_y");
    Rect reg{{c.o.region[0], c.o.region[1]}, {c.o.region[2], c.o.region[3]}};
    if (!(reg.width() > 0 && reg.height() > 0)) throw ConfigError("--region must have positive width and height");
    if (c.o.grid < 2) throw ConfigError("--grid must be >= 2");
    auto r = open_run(c, {{"region", c.o.region}, {"grid", c.o.grid}});
    auto cfg = std::make_shared<const FieldModelConfig>(r.cfg);
    auto s = std::make_shared<const FieldSample>(sample_field(*cfg, reg, c.o.seed));
    RandomField B(cfg, s);
    std::vector<std::vector<double>> rows;
    for (int j = 0; j <= c.o.grid; ++j)
        for (int i = 0; i <= c.o.grid; ++i) {
            Vec2 x{reg.lo.x + i * reg.width() / c.o.grid, reg.lo.y + j * reg.height() / c.o.grid};
            rows.push_back({x.x, x.y, B.value(x), cfg->v.value(x)});
        }
    r.dir->write("sample.json", sample_to_json(*s).dump(1) + "\n");
    r.csv("field.csv", {"x", "y", "B", "V"}, rows);
    auto path = r.finish();
    c.out << fmt::format("sample: {} coefficients -> {}\n", s->coefficient_count(), path);
    return 0;
}

inline int cmd_spectrum(Context& c) {
    json opt{{"l", c.o.l}, {"h", c.o.h}, {"center", c.o.center}, {"window", c.o.window}, {"count", c.o.count},
             {"gauge", c.o.gauge}, {"coo", c.o.coo}, {"curl_check", c.o.curl_check}};
    auto r = open_run(c, opt);
    auto cfg = std::make_shared<const FieldModelConfig>(r.cfg);
    BoxSpec box{vec2(c.o.center, "--center"), c.o.l, cfg->profile.c_delta()};
    auto f = subordinate_trial_field(cfg, box, box.rect(), c.o.seed);
    PotentialPtr A = f.A;
    if (c.o.gauge == "symmetric") {
        bool constant = cfg->b_var.is_constant() && (cfg->c_ran == 0.0 || cfg->mu == 0.0);
        if (!constant) throw ConfigError("--gauge symmetric needs a constant field (b_var constant and c_ran or mu zero)");
        A = std::make_shared<const SymmetricGauge>(cfg->B0 + cfg->b_var.constant(), box.center);
    } else if (c.o.gauge != "line-integral") {
        throw ConfigError("--gauge must be line-integral or symmetric");
    }
    auto d = assemble(box, *A, cfg->v, c.o.h);
    if (d.warning) c.err << "warning: " << *d.warning << "\n";
    EigenResult e;
    if (!c.o.window.empty()) {
        if (c.o.window.size() != 2) throw ConfigError("--window needs lo,hi");
        e = eigs_window(d.H, c.o.window[0], c.o.window[1]);
    } else if (c.o.count > 0) {
        e = lowest_eigenvalues(d.H, c.o.count, d.v_min - 1.0);
    } else {
        e = full_spectrum(d, true);
    }
    auto collar = collar_mask(d);
    std::vector<std::vector<double>> rows;
    for (size_t k = 0; k < e.values.size(); ++k) {
        double res = k < e.residuals.size() ? e.residuals[k] : std::numeric_limits<double>::quiet_NaN();
        double in = e.vectors.cols() > long(k) ? 1.0 - mask_mass(e.vectors.col(long(k)), collar) : std::numeric_limits<double>::quiet_NaN();
        rows.push_back({double(k), e.values[k], res, in});
    }
    r.csv("eigenvalues.csv", {"index", "value", "residual", "mass_off_collar"}, rows);
    if (c.o.coo) {
        auto tmp = r.dir->path() / "matrix.coo";
        write_coo(d.H, tmp.string());
        r.dir->write("matrix.coo", read_file(tmp));
    }
    if (c.o.curl_check > 0) {
        auto cc = curl_check(*A, *f.B, box.rect(), c.o.curl_check);
        std::vector<std::vector<double>> cr;
        for (const auto& s : cc.samples) cr.push_back({s.x, s.y, s.error});
        r.csv("curl_check.csv", {"x", "y", "abs_error"}, cr);
    }
    auto path = r.finish();
    c.out << fmt::format("spectrum: {} eigenvalues ({}, N={}) -> {}\n", e.values.size(), e.method, d.dim(), path);
    return 0;
}

inline int cmd_wegner(Context& c) {
    auto m = mc(c.o, 50);
    auto r = open_run(c, {{"E", c.o.E}, {"eta", c.o.eta}, {"l", m.l}, {"h", m.h}, {"center", c.o.center}, {"trials", m.trials}});
    auto w = wegner_mc(r.cfg, c.o.E, c.o.eta, m);
    std::vector<Estimate> est;
    for (size_t k = 0; k < w.records.size(); ++k) {
        est.push_back(w.records[k].estimate);
        r.add(w.records[k], fmt::format("wegner_{}.csv", k));
    }
    r.svg("wegner.svg", estimate_plot("mean eigenvalue count", "eta", "E Tr chi", c.o.eta, est));
    std::string ratio;
    if (c.o.eta.size() >= 2) {
        try {
            auto q = wegner_ratio(w, 0, 1);
            ratio = fmt::format(" ratio={:.4g} [{:.4g}, {:.4g}]", q.value, q.lo, q.hi);
        } catch (const DomainError&) {
            ratio = " ratio=undefined";
        }
    }
    auto path = r.finish();
    c.out << fmt::format("wegner: {} records{} -> {}\n", w.records.size(), ratio, path);
    return 0;
}

inline int cmd_goodbox(Context& c) {
    auto m = mc(c.o, 50);
    auto r = open_run(c, {{"E", c.o.E}, {"gamma", c.o.gamma}, {"l", m.l}, {"h", m.h}, {"center", c.o.center}, {"trials", m.trials},
                          {"margin", c.o.margin}});
    auto g = good_box_mc(r.cfg, c.o.E, c.o.gamma, m, c.o.margin);
    std::vector<Estimate> est;
    for (size_t k = 0; k < g.records.size(); ++k) {
        est.push_back(g.records[k].estimate);
        r.add(g.records[k], fmt::format("goodbox_{}.csv", k));
    }
    r.svg("goodbox.svg", estimate_plot("good box frequency", "gamma", "P(good)", c.o.gamma, est));
    auto path = r.finish();
    c.out << fmt::format("goodbox: P(good) at gamma={} is {:.4g} -> {}\n", c.o.gamma.front(), est.front().value, path);
    return 0;
}

inline int cmd_balanced(Context& c) {
    auto m = mc(c.o, 50);
    auto r = open_run(c, {{"E", c.o.E}, {"m", c.o.m}, {"C_inf", c.o.C_inf}, {"alpha", c.o.alpha}, {"l", m.l}, {"h", m.h},
                          {"center", c.o.center}, {"trials", m.trials}, {"margin", c.o.margin}});
    auto b = balanced_mc(r.cfg, c.o.E, c.o.m, c.o.C_inf, c.o.alpha, m, c.o.margin);
    r.add(b.single, "balanced.csv");
    r.add(b.pair, "balanced_pair.csv");
    auto path = r.finish();
    c.out << fmt::format("balanced: single {:.4g} pair {:.4g} -> {}\n", b.single.estimate.value, b.pair.estimate.value, path);
    return 0;
}

inline int cmd_lifshitz(Context& c) {
    auto m = mc(c.o, 50);
    m.l = c.o.lifshitz_l;
    m.h = c.o.grid_h;
    double cx = c.o.c_ext.value_or(1.0);
    auto r = open_run(c, {{"n", c.o.n}, {"h_rel", c.o.h_rel}, {"c_ext", cx}, {"l", m.l}, {"grid_h", m.h}, {"m", c.o.m},
                          {"interior", c.o.interior}, {"center", c.o.center}, {"trials", m.trials}, {"resolution", c.o.resolution}});
    std::vector<double> hs;
    for (double v : c.o.h_rel) hs.push_back(v * r.cfg.sigma(0));
    auto res = lifshitz_tail_mc(r.cfg, c.o.n, hs, cx, c.o.m, m, c.o.interior, c.o.resolution);
    PlotSeries emp{"no intrusion", {}, {}, {}, {}, false}, bnd{"bound", {}, {}, {}, {}, false};
    std::vector<std::vector<double>> rows;
    for (size_t k = 0; k < res.points.size(); ++k) {
        const auto& p = res.points[k];
        r.add(p.record, fmt::format("lifshitz_{}.csv", k));
        emp.x.push_back(p.h);
        emp.y.push_back(p.record.estimate.value);
        emp.lo.push_back(p.record.estimate.lo);
        emp.hi.push_back(p.record.estimate.hi);
        bnd.x.push_back(p.h);
        bnd.y.push_back(p.bound);
        rows.push_back({p.h, p.window_lo, p.window_hi, p.record.estimate.value, p.record.estimate.lo, p.record.estimate.hi, p.bound,
                        p.vacuous ? 1.0 : 0.0});
    }
    r.csv("lifshitz_summary.csv", {"h", "window_lo", "window_hi", "no_intrusion", "ci_lo", "ci_hi", "bound", "vacuous"}, rows);
    r.svg("lifshitz.svg", {"no-intrusion probability", "h", "probability", false, false, {emp, bnd}});
    auto path = r.finish();
    c.out << fmt::format("lifshitz: {} h values, interval ({:.6g}, {:.6g}) -> {}\n", res.points.size(), res.interval.lower,
                         res.interval.upper, path);
    return 0;
}

// Nearest eigenvalues below and above E, found with window solves that widen until they hit spectrum.
inline std::pair<double, double> enclosing_gap(const SpMat& H, double E, double step) {
    double lo = E - step, hi = E + step;
    for (int it = 0; it < 40 && count_in_window(H, lo, E) == 0; ++it) lo -= step;
    for (int it = 0; it < 40 && count_in_window(H, E, hi) == 0; ++it) hi += step;
    auto a = eigs_window(H, lo, E, {.vectors = false});
    auto b = eigs_window(H, E, hi, {.vectors = false});
    if (a.values.empty() || b.values.empty()) throw DomainError("decay: no spectrum on one side of E");
    return {a.values.back(), b.values.front()};
}

inline int cmd_decay(Context& c) {
    auto r = open_run(c, {{"flux", c.o.flux}, {"cells", c.o.cells}, {"E", c.o.E_list}, {"window", c.o.window},
                          {"distances", c.o.distances}, {"half", c.o.half}});
    double B = r.cfg.B0;
    if (c.o.flux < 1) throw ConfigError("--flux must be a positive integer");
    double L = std::sqrt(2.0 * pi * c.o.flux / B);
    auto d = assemble_torus(L, B, r.cfg.v, L / c.o.cells);
    std::vector<double> dist = c.o.distances;
    if (dist.empty())
        for (int k = 0; k < 6; ++k) dist.push_back((0.35 + 0.1 * k) * 0.5 * L);
    std::vector<double> Es = c.o.E_list.empty() ? std::vector<double>{2.0 * B} : c.o.E_list;
    std::vector<std::vector<double>> rows, fits;
    PlotSpec plot{"resolvent block norm", "distance", "norm", false, true, {}};
    std::vector<CombesThomasFit> all;
    for (double E : Es) {
        double rr, ss;
        if (!c.o.window.empty()) {
            if (c.o.window.size() != 2) throw ConfigError("--window needs r,s");
            rr = c.o.window[0];
            ss = c.o.window[1];
        } else {
            auto [a, b] = enclosing_gap(d.H, E, 0.25 * B);
            double pad = 1e-9 * std::max(1.0, std::abs(E));
            rr = a + pad;
            ss = b - pad;
        }
        auto f = combes_thomas_fit(d, E, rr, ss, dist, {L / 2, L / 2}, c.o.half);
        PlotSeries s{fmt::format("E={:.4g} eta={:.4g}", E, f.eta), f.distances, f.norms, {}, {}, false};
        plot.series.push_back(s);
        for (size_t k = 0; k < f.distances.size(); ++k) rows.push_back({E, f.eta, f.distances[k], f.norms[k]});
        fits.push_back({E, f.eta, rr, ss, f.rate, f.r2});
        DiagnosticRecord rec;
        rec.kind = "decay";
        rec.config_hash = config_hash(r.cfg);
        rec.seed = c.o.seed;
        rec.params = {{"E", E}, {"eta", f.eta}, {"window", {rr, ss}}, {"L", L}, {"cells", c.o.cells}};
        rec.params["r2"] = f.r2;
        rec.estimate.value = rec.estimate.lo = rec.estimate.hi = f.rate;
        rec.estimate.method = "least-squares";
        rec.columns = {"distance", "norm"};
        for (size_t k = 0; k < f.distances.size(); ++k) rec.per_trial.push_back({f.distances[k], f.norms[k]});
        r.add(rec, fmt::format("decay_{}.csv", all.size()));
        all.push_back(f);
    }
    r.csv("decay_fit.csv", {"E", "eta", "r", "s", "rate", "r2"}, fits);
    r.csv("decay.csv", {"E", "eta", "distance", "norm"}, rows);
    r.svg("decay.svg", plot);
    std::string form;
    if (all.size() >= 2) form = fmt::format(" form_ratio={:.4g}", combes_thomas_form_ratio(all[0], all[1]));
    auto path = r.finish();
    c.out << fmt::format("decay: rate={:.4g} r2={:.4g}{} -> {}\n", all[0].rate, all[0].r2, form, path);
    return 0;
}

inline int cmd_trial(Context& c) {
    auto r = open_run(c, {{"n", c.o.n}, {"B0", c.o.B0_list}, {"cells", c.o.trial_cells}, {"shift", c.o.shift}, {"center", c.o.center}});
    auto s = trial_residual_scan(r.cfg.b_var, r.cfg.v, c.o.n, c.o.B0_list, vec2(c.o.center, "--center"), c.o.shift, c.o.trial_cells);
    std::vector<std::vector<double>> rows;
    PlotSeries ser{"residual", {}, {}, {}, {}, false};
    for (const auto& p : s.points) {
        rows.push_back({p.B0, p.lambda, p.residual, p.residual_coarse, p.discretization, p.usable ? 1.0 : 0.0});
        ser.x.push_back(p.B0);
        ser.y.push_back(p.residual);
    }
    r.csv("trial.csv", {"B0", "lambda", "residual", "residual_coarse", "discretization", "usable"}, rows);
    r.svg("trial.svg", {"trial-state residual", "B0", "residual", true, true, {ser}});
    DiagnosticRecord rec;
    rec.kind = "trial";
    rec.config_hash = config_hash(r.cfg);
    rec.seed = c.o.seed;
    rec.params = {{"n", c.o.n}, {"B0", c.o.B0_list}, {"cells", c.o.trial_cells}};
    rec.estimate.method = "least-squares";
    rec.columns = {"B0", "residual", "usable"};
    for (const auto& p : s.points) rec.per_trial.push_back({p.B0, p.residual, p.usable ? 1.0 : 0.0});
    std::string slope = "slope=unavailable";
    if (s.fit) {
        rec.estimate.value = rec.estimate.lo = rec.estimate.hi = s.fit->slope;
        rec.params["r2"] = s.fit->r2;
        slope = fmt::format("slope={:.4g}", s.fit->slope);
    } else {
        rec.estimate.value = rec.estimate.lo = rec.estimate.hi = std::numeric_limits<double>::quiet_NaN();
    }
    r.add(rec, "trial_record.csv");
    auto path = r.finish();
    c.out << fmt::format("trial: {} -> {}\n", slope, path);
    return 0;
}

inline int cmd_kernel_audit(Context& c) {
    auto r = open_run(c, {{"n", c.o.n}, {"B0", c.o.kernel_B0 ? json(*c.o.kernel_B0) : json(nullptr)}}, false);
    double B0 = c.o.kernel_B0.value_or(c.o.config_path.empty() ? 1.0 : r.cfg.B0);
    int n = c.o.n;
    std::vector<cplx> zs;
    for (int i = 0; i <= 8; ++i)
        for (int j = -2; j <= 2; ++j) zs.emplace_back(B0 * (2.0 * n + 2.0 * i / 8.0), 0.5 * B0 * j);
    std::vector<double> zetas;
    for (int k = 0; k < 20; ++k) zetas.push_back(std::pow(10.0, -3.0 + 4.5 * k / 19.0));
    auto a = kernel_bound_audit(B0, n, zs, zetas);
    std::vector<std::vector<double>> rows;
    for (const auto& x : a.rows) rows.push_back({x.re_z, x.im_z, x.zeta, x.abs_kernel, x.gamma_ratio, x.u_ratio, x.u3_ratio});
    r.csv("kernel_audit.csv", {"re_z", "im_z", "zeta", "abs_kernel", "gamma_ratio", "u_ratio", "du_ratio"}, rows);
    r.dir->write("kernel_audit.json",
                 json{{"B0", B0}, {"n", n}, {"C_gamma", a.C_gamma}, {"C_u", a.C_u}, {"C_du", a.C_u3}, {"skipped", a.skipped}}.dump(2) + "\n");
    auto path = r.finish();
    c.out << fmt::format("kernel-audit: C_gamma={:.4g} C_u={:.4g} C_du={:.4g} skipped={} -> {}\n", a.C_gamma, a.C_u, a.C_u3, a.skipped, path);
    return 0;
}

inline int cmd_ids(Context& c) {
    auto m = mc(c.o, 20);
    if (c.o.bins < 1 || !(c.o.emax > c.o.emin)) throw ConfigError("ids needs --bins >= 1 and --emax > --emin");
    auto r = open_run(c, {{"emin", c.o.emin}, {"emax", c.o.emax}, {"bins", c.o.bins}, {"l", m.l}, {"h", m.h}, {"center", c.o.center},
                          {"trials", m.trials}});
    std::vector<double> es;
    for (int k = 0; k <= c.o.bins; ++k) es.push_back(c.o.emin + (c.o.emax - c.o.emin) * k / c.o.bins);
    auto res = ids_histogram(r.cfg, es, m);
    r.add(res.record, "ids.csv");
    r.svg("ids.svg", estimate_plot("integrated density of states", "E", "N(E) / area", es, res.density));
    auto path = r.finish();
    c.out << fmt::format("ids: N(emax)/area={:.4g} -> {}\n", res.density.back().value, path);
    return 0;
}

inline int cmd_report(Context& c) {
    std::vector<fs::path> dirs(c.o.runs.begin(), c.o.runs.end());
    auto rep = build_report(dirs);
    fs::path out = c.o.report_out;
    fs::create_directories(out);
    write_file(out / "report.csv", rep.csv);
    write_file(out / "report.html", rep.html);
    c.out << fmt::format("report: {} records from {} runs -> {}\n", rep.rows.size(), dirs.size(), out.string());
    return 0;
}

}  // namespace cli

// Exit status 0 ok, 1 user error, 2 internal error.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    using namespace cli;
    CLI::App app{"magloc: random magnetic field Hamiltonians on finite boxes"};
    app.require_subcommand(1);
    app.set_help_flag("--help", "print help");  // -h would clash with the grid spacing option
    Context c{out, err, {}, {}};
    auto& o = c.o;

    auto common = [&](CLI::App* s, bool config_required = true) {
        auto* opt = s->add_option("--config", o.config_path, "JSON model config");
        if (config_required) opt->required();
        s->add_option("--seed", o.seed, "base seed");
        s->add_option("--out", o.out, "output base directory");
    };
    auto trials = [&](CLI::App* s) { s->add_option("--trials", o.trials, "number of trials"); };
    auto box = [&](CLI::App* s) {
        s->add_option("--l", o.l, "box side");
        s->add_option("--h", o.h, "grid spacing");
        s->add_option("--center", o.center, "box centre x,y")->delimiter(',')->expected(2);
    };

    auto* validate = app.add_subcommand("validate", "check model hypotheses");
    common(validate);
    validate->add_option("--resolution", o.validate_resolution, "grid points per unit cell");

    auto* edges = app.add_subcommand("edges", "band edges from extremal configurations");
    common(edges);
    edges->add_option("--n", o.n, "Landau level index");
    edges->add_option("--resolution", o.resolution, "grid points per unit cell");
    edges->add_option("--c-ext", o.c_ext, "constant for the forbidden interval");
    edges->add_option("--h", o.h, "lattice spacing for the discretization budget");

    auto* sample = app.add_subcommand("sample", "draw a field sample");
    common(sample);
    sample->add_option("--region", o.region, "lo_x,lo_y,hi_x,hi_y")->delimiter(',')->expected(4);
    sample->add_option("--grid", o.grid, "evaluation grid cells per side");

    auto* spectrum = app.add_subcommand("spectrum", "eigenvalues of one box");
    common(spectrum);
    box(spectrum);
    spectrum->add_option("--window", o.window, "lo,hi")->delimiter(',')->expected(2);
    spectrum->add_option("--count", o.count, "lowest eigenvalues");
    spectrum->add_option("--gauge", o.gauge, "line-integral or symmetric");
    spectrum->add_flag("--coo", o.coo, "export the matrix");
    spectrum->add_option("--curl-check", o.curl_check, "curl check grid size");

    auto* wegner = app.add_subcommand("wegner", "eigenvalue counts in small windows");
    common(wegner);
    trials(wegner);
    box(wegner);
    wegner->add_option("--E", o.E, "window centre")->required();
    wegner->add_option("--eta", o.eta, "window widths")->delimiter(',');

    auto* goodbox = app.add_subcommand("goodbox", "good box frequency");
    common(goodbox);
    trials(goodbox);
    box(goodbox);
    goodbox->add_option("--E", o.E, "energy")->required();
    goodbox->add_option("--gamma", o.gamma, "decay rates")->delimiter(',');
    goodbox->add_option("--margin", o.margin, "spectral margin counted as not good");

    auto* balanced = app.add_subcommand("balanced", "balanced box frequency");
    common(balanced);
    trials(balanced);
    box(balanced);
    balanced->add_option("--E", o.E, "energy")->required();
    balanced->add_option("--m", o.m, "proxy factor");
    balanced->add_option("--C-inf", o.C_inf, "constant");
    balanced->add_option("--alpha", o.alpha, "exponent");
    balanced->add_option("--margin", o.margin, "spectral margin");

    auto* lifshitz = app.add_subcommand("lifshitz", "no-intrusion probability near a band edge");
    common(lifshitz);
    trials(lifshitz);
    lifshitz->add_option("--n", o.n, "Landau level index");
    lifshitz->add_option("--h-rel", o.h_rel, "h values in units of sigma_0")->delimiter(',');
    lifshitz->add_option("--c-ext", o.c_ext, "constant for the forbidden interval");
    lifshitz->add_option("--l", o.lifshitz_l, "box side");
    lifshitz->add_option("--grid-h", o.grid_h, "grid spacing");
    lifshitz->add_option("--m", o.m, "proxy factor");
    lifshitz->add_option("--interior", o.interior, "mass fraction off the collar");
    lifshitz->add_option("--center", o.center, "box centre x,y")->delimiter(',')->expected(2);
    lifshitz->add_option("--resolution", o.resolution, "grid points per unit cell");

    auto* decay = app.add_subcommand("decay", "resolvent decay on a constant-field torus");
    common(decay);
    decay->add_option("--flux", o.flux, "flux quanta through the torus");
    decay->add_option("--cells", o.cells, "cells per side");
    decay->add_option("--E", o.E_list, "energies")->delimiter(',');
    decay->add_option("--window", o.window, "r,s")->delimiter(',')->expected(2);
    decay->add_option("--distances", o.distances, "mask distances")->delimiter(',');
    decay->add_option("--half", o.half, "mask half-width");

    auto* trial = app.add_subcommand("trial", "trial-state residual scan");
    common(trial);
    trial->add_option("--n", o.n, "Landau level index");
    trial->add_option("--B0", o.B0_list, "background fields")->delimiter(',');
    trial->add_option("--cells", o.trial_cells, "cells per side on the coarse grid");
    trial->add_option("--shift", o.shift, "shift added to lambda");
    trial->add_option("--center", o.center, "centre x,y")->delimiter(',')->expected(2);

    auto* kernel = app.add_subcommand("kernel-audit", "empirical kernel bound constants");
    common(kernel, false);
    kernel->add_option("--n", o.n, "Landau level index");
    kernel->add_option("--B0", o.kernel_B0, "field strength");

    auto* ids = app.add_subcommand("ids", "integrated density of states");
    common(ids);
    trials(ids);
    box(ids);
    ids->add_option("--emin", o.emin, "lowest energy");
    ids->add_option("--emax", o.emax, "highest energy");
    ids->add_option("--bins", o.bins, "energy bins");

    auto* report = app.add_subcommand("report", "merge run directories");
    report->add_option("runs", o.runs, "run directories")->required();
    report->add_option("--out", o.report_out, "output directory");

    if (argc > 1 && argv[1][0] != '-') {
        auto subs = app.get_subcommands([](CLI::App*) { return true; });
        bool known = std::any_of(subs.begin(), subs.end(), [&](CLI::App* s) { return s->get_name() == argv[1]; });
        if (!known) {
            err << json{{"error", "usage"}, {"message", std::string("unknown subcommand ") + argv[1]}}.dump() << "\n";
            return 1;
        }
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << json{{"error", "usage"}, {"message", e.what()}}.dump() << "\n";
        return 1;
    }

    try {
        CLI::App* sub = app.get_subcommands().front();
        c.command = sub->get_name();
        if (c.command == "validate") return cmd_validate(c);
        if (c.command == "edges") return cmd_edges(c);
        if (c.command == "sample") return cmd_sample(c);
        if (c.command == "spectrum") return cmd_spectrum(c);
        if (c.command == "wegner") return cmd_wegner(c);
        if (c.command == "goodbox") return cmd_goodbox(c);
        if (c.command == "balanced") return cmd_balanced(c);
        if (c.command == "lifshitz") return cmd_lifshitz(c);
        if (c.command == "decay") return cmd_decay(c);
        if (c.command == "trial") return cmd_trial(c);
        if (c.command == "kernel-audit") return cmd_kernel_audit(c);
        if (c.command == "ids") return cmd_ids(c);
        if (c.command == "report") return cmd_report(c);
        err << json{{"error", "usage"}, {"message", "unknown subcommand " + c.command}}.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        json j{{"error", error_kind(e)}, {"message", e.what()}};
        if (auto* s = dynamic_cast<const SolverError*>(&e); s && !std::isnan(s->distance)) j["distance"] = s->distance;
        err << j.dump() << "\n";
        return user_error(e) ? 1 : 2;
    }
}

}  // namespace magloc

#endif
