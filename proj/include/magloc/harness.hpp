#ifndef MAGLOC_HARNESS_HPP
#define MAGLOC_HARNESS_HPP

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "diagnostics.hpp"

namespace magloc {

namespace fs = std::filesystem;

inline std::string utc_timestamp() {
    std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
    return buf;
}

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + p.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline void write_file(const fs::path& p, const std::string& data) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + p.string());
    out << data;
}

// Numbers as %.17g so reruns compare byte for byte; NaN and inf spelled out.
inline std::string num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return fmt::format("{:.17g}", v);
}

// ---------------------------------------------------------------- manifest

struct RunManifest {
    json config;
    std::string config_hash;
    std::string run_hash;  // config, subcommand, options and seed
    std::uint64_t seed = 0;
    std::string command;
    json options = json::object();
    std::string code_version = version;
    std::string started;
    std::string finished;
    std::vector<std::pair<std::string, std::string>> files;  // name, sha256

    json to_json() const {
        json f = json::array();
        for (const auto& [n, h] : files) f.push_back({{"name", n}, {"sha256", h}});
        return {{"config", config}, {"config_hash", config_hash}, {"run_hash", run_hash}, {"seed", seed},
                {"command", command}, {"options", options}, {"code_version", code_version},
                {"started", started}, {"finished", finished}, {"files", f}};
    }
};

inline std::string run_hash(const json& config, const std::string& command, const json& options, std::uint64_t seed) {
    json j{{"config", config}, {"command", command}, {"options", options}, {"seed", seed}};
    return sha256_hex(j.dump());
}

// Files are recorded in write order; the manifest itself is written last.
class RunDirectory {
public:
    RunDirectory(const fs::path& base, RunManifest m) : m_(std::move(m)) {
        m_.started = utc_timestamp();
        std::string stem = m_.run_hash.substr(0, 12) + "-" + m_.started;
        dir_ = base / stem;
        for (int k = 1; fs::exists(dir_); ++k) dir_ = base / fmt::format("{}-{}", stem, k);
        fs::create_directories(dir_);
    }

    const fs::path& path() const { return dir_; }
    const RunManifest& manifest() const { return m_; }
    std::string tag() const { return m_.run_hash; }

    void write(const std::string& name, const std::string& data) {
        write_file(dir_ / name, data);
        m_.files.emplace_back(name, sha256_hex(data));
    }

    void finish() {
        m_.finished = utc_timestamp();
        write_file(dir_ / "manifest.json", m_.to_json().dump(2) + "\n");
    }

private:
    RunManifest m_;
    fs::path dir_;
};

// ---------------------------------------------------------------- CSV

inline std::string csv_table(const std::string& tag, const std::vector<std::string>& header,
                             const std::vector<std::vector<double>>& rows) {
    std::string s = "# manifest " + tag + "\n";
    for (size_t i = 0; i < header.size(); ++i) s += (i ? "," : "") + header[i];
    s += "\n";
    for (const auto& r : rows) {
        for (size_t i = 0; i < r.size(); ++i) s += (i ? "," : "") + num(r[i]);
        s += "\n";
    }
    return s;
}

inline std::string csv_escape(const std::string& v) {
    if (v.find_first_of(",\"\n") == std::string::npos) return v;
    std::string o = "\"";
    for (char c : v) o += c == '"' ? std::string("\"\"") : std::string(1, c);
    return o + "\"";
}

// ---------------------------------------------------------------- SVG

struct PlotSeries {
    std::string label;
    std::vector<double> x, y, lo, hi;  // lo/hi empty for no band
    bool points_only = false;
};

struct PlotSpec {
    std::string title;
    std::string xlabel;
    std::string ylabel;
    bool logx = false;
    bool logy = false;
    std::vector<PlotSeries> series;
};

inline std::string xml_escape(const std::string& s) {
    std::string o;
    for (char c : s) {
        switch (c) {
            case '&': o += "&amp;"; break;
            case '<': o += "&lt;"; break;
            case '>': o += "&gt;"; break;
            case '"': o += "&quot;"; break;
            default: o += c;
        }
    }
    return o;
}

inline std::string svg_plot(const PlotSpec& p, const std::string& tag) {
    const double W = 640, H = 420, ml = 70, mr = 20, mt = 40, mb = 55;
    auto tx = [&](double v) { return p.logx ? std::log10(v) : v; };
    auto ty = [&](double v) { return p.logy ? std::log10(v) : v; };
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    auto take = [&](double x, double y) {
        if (!std::isfinite(tx(x)) || !std::isfinite(ty(y))) return;
        x0 = std::min(x0, tx(x));
        x1 = std::max(x1, tx(x));
        y0 = std::min(y0, ty(y));
        y1 = std::max(y1, ty(y));
    };
    for (const auto& s : p.series)
        for (size_t i = 0; i < s.x.size(); ++i) {
            take(s.x[i], s.y[i]);
            if (i < s.lo.size()) take(s.x[i], s.lo[i]);
            if (i < s.hi.size()) take(s.x[i], s.hi[i]);
        }
    if (x0 > x1) x0 = 0, x1 = 1;
    if (y0 > y1) y0 = 0, y1 = 1;
    if (x1 - x0 < 1e-300) x0 -= 0.5, x1 += 0.5;
    if (y1 - y0 < 1e-300) y0 -= 0.5, y1 += 0.5;
    double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    auto px = [&](double x) { return ml + (tx(x) - x0) / (x1 - x0) * (W - ml - mr); };
    auto py = [&](double y) { return H - mb - (ty(y) - y0) / (y1 - y0) * (H - mt - mb); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    std::string s = fmt::format("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n", W, H, W, H);
    s += "<!-- manifest " + tag + " -->\n";
    s += fmt::format("<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"white\"/>\n", W, H);
    s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", ml, mt, W - ml - mr, H - mt - mb);
    for (int k = 0; k <= 4; ++k) {
        double fx = x0 + k * (x1 - x0) / 4, fy = y0 + k * (y1 - y0) / 4;
        double X = ml + k * (W - ml - mr) / 4, Y = H - mb - k * (H - mt - mb) / 4;
        s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"11\" text-anchor=\"middle\">{:.4g}</text>\n", X, H - mb + 16,
                         p.logx ? std::pow(10.0, fx) : fx);
        s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"11\" text-anchor=\"end\">{:.4g}</text>\n", ml - 6, Y + 4,
                         p.logy ? std::pow(10.0, fy) : fy);
    }
    s += fmt::format("<text x=\"{}\" y=\"22\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n", W / 2, xml_escape(p.title));
    s += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n", (W + ml - mr) / 2, H - 12,
                     xml_escape(p.xlabel));
    s += fmt::format("<text x=\"16\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
                     (H - mb + mt) / 2, (H - mb + mt) / 2, xml_escape(p.ylabel));
    for (size_t si = 0; si < p.series.size(); ++si) {
        const auto& ser = p.series[si];
        const char* col = colors[si % 6];
        if (!ser.lo.empty() && ser.lo.size() == ser.x.size()) {
            std::string pts;
            for (size_t i = 0; i < ser.x.size(); ++i)
                if (std::isfinite(ser.hi[i])) pts += fmt::format("{:.2f},{:.2f} ", px(ser.x[i]), py(ser.hi[i]));
            for (size_t i = ser.x.size(); i-- > 0;)
                if (std::isfinite(ser.lo[i])) pts += fmt::format("{:.2f},{:.2f} ", px(ser.x[i]), py(ser.lo[i]));
            s += fmt::format("<polygon points=\"{}\" fill=\"{}\" fill-opacity=\"0.2\" stroke=\"none\"/>\n", pts, col);
        }
        std::string pts;
        for (size_t i = 0; i < ser.x.size(); ++i)
            if (std::isfinite(ty(ser.y[i]))) {
                pts += fmt::format("{:.2f},{:.2f} ", px(ser.x[i]), py(ser.y[i]));
                s += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\" fill=\"{}\"/>\n", px(ser.x[i]), py(ser.y[i]), col);
            }
        if (!ser.points_only) s += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n", pts, col);
        s += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"{}\">{}</text>\n", ml + 8, mt + 14 + 14 * si, col,
                         xml_escape(ser.label));
    }
    s += "</svg>\n";
    return s;
}

// Estimate vs parameter with the CI as a band.
inline PlotSpec estimate_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                              const std::vector<double>& x, const std::vector<Estimate>& e) {
    PlotSeries s;
    s.label = ylabel;
    s.x = x;
    for (const auto& v : e) {
        s.y.push_back(v.value);
        s.lo.push_back(v.lo);
        s.hi.push_back(v.hi);
    }
    return {title, xlabel, ylabel, false, false, {s}};
}

// ---------------------------------------------------------------- report

struct ReportRow {
    std::string run;
    std::string run_hash;
    std::string kind;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string params;
    double estimate = 0, lo = 0, hi = 0;
    long trials = 0, failures = 0;
    std::string ci_method;
};

struct Report {
    std::vector<ReportRow> rows;
    std::string csv;
    std::string html;
};

// Merges records.json from each run directory. Rows with equal kind, config and params across runs
// are compared for CI overlap.
inline Report build_report(const std::vector<fs::path>& dirs) {
    if (dirs.empty()) throw ConfigError("report: no run directories given");
    Report r;
    for (const auto& d : dirs) {
        if (!fs::exists(d / "manifest.json")) throw ConfigError("report: missing manifest in " + d.string());
        json m = json::parse(read_file(d / "manifest.json"));
        json recs = fs::exists(d / "records.json") ? json::parse(read_file(d / "records.json")) : json::array();
        for (const auto& rec : recs) {
            ReportRow row;
            row.run = d.filename().string();
            row.run_hash = m.value("run_hash", "");
            row.kind = rec.value("kind", "");
            row.config_hash = rec.value("config_hash", "");
            row.seed = rec.value("seed", std::uint64_t{0});
            row.params = rec.value("params", json::object()).dump();
            auto number = [](const json& v) { return v.is_number() ? v.get<double>() : std::numeric_limits<double>::quiet_NaN(); };
            row.estimate = rec.contains("estimate") ? number(rec["estimate"]) : std::numeric_limits<double>::quiet_NaN();
            row.lo = row.hi = std::numeric_limits<double>::quiet_NaN();
            if (rec.contains("ci") && rec["ci"].size() == 2) {
                row.lo = number(rec["ci"][0]);
                row.hi = number(rec["ci"][1]);
            }
            row.trials = rec.value("trials", 0L);
            row.failures = rec.value("failures", 0L);
            row.ci_method = rec.value("ci_method", "");
            r.rows.push_back(row);
        }
    }
    std::stable_sort(r.rows.begin(), r.rows.end(), [](const ReportRow& a, const ReportRow& b) { return a.kind < b.kind; });
    r.csv = "run,kind,config_hash,seed,params,estimate,ci_lo,ci_hi,ci_method,trials,failures\n";
    for (const auto& x : r.rows)
        r.csv += fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", csv_escape(x.run), x.kind, x.config_hash, x.seed, csv_escape(x.params),
                             num(x.estimate), num(x.lo), num(x.hi), x.ci_method, x.trials, x.failures);

    std::string h = "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>magloc report</title>\n"
                    "<style>body{font-family:sans-serif}table{border-collapse:collapse;margin-bottom:1.5em}"
                    "td,th{border:1px solid #999;padding:3px 8px;font-size:13px}</style></head><body>\n";
    std::string kind;
    for (size_t i = 0; i < r.rows.size(); ++i) {
        const auto& x = r.rows[i];
        if (x.kind != kind) {
            if (!kind.empty()) h += "</table>\n";
            kind = x.kind;
            h += "<h2>" + xml_escape(kind) + "</h2>\n<table><tr><th>run</th><th>seed</th><th>params</th><th>estimate</th>"
                 "<th>CI</th><th>method</th><th>trials</th><th>failures</th></tr>\n";
        }
        h += fmt::format("<tr><td>{}</td><td>{}</td><td>{}</td><td>{:.6g}</td><td>[{:.6g}, {:.6g}]</td><td>{}</td><td>{}</td><td>{}</td></tr>\n",
                         xml_escape(x.run), x.seed, xml_escape(x.params), x.estimate, x.lo, x.hi, x.ci_method, x.trials, x.failures);
    }
    if (!kind.empty()) h += "</table>\n";

    std::map<std::string, std::vector<size_t>> groups;
    for (size_t i = 0; i < r.rows.size(); ++i) groups[r.rows[i].kind + "|" + r.rows[i].config_hash + "|" + r.rows[i].params].push_back(i);
    std::string ov;
    for (const auto& [key, idx] : groups)
        for (size_t a = 0; a < idx.size(); ++a)
            for (size_t b = a + 1; b < idx.size(); ++b) {
                const auto &p = r.rows[idx[a]], &q = r.rows[idx[b]];
                bool overlap = p.lo <= q.hi && q.lo <= p.hi;
                ov += fmt::format("<tr><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td></tr>\n", xml_escape(p.kind),
                                  xml_escape(p.params), xml_escape(p.run), xml_escape(q.run), overlap ? "yes" : "no");
            }
    if (!ov.empty())
        h += "<h2>CI overlap</h2>\n<table><tr><th>kind</th><th>params</th><th>run A</th><th>run B</th><th>overlap</th></tr>\n" + ov +
             "</table>\n";
    h += "</body></html>\n";
    r.html = h;
    return r;
}

}  // namespace magloc

#endif
