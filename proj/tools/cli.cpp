#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "nemsfit/designkit.hpp"
#include "nemsfit/pipeline.hpp"
#include "nemsfit/reference_devices.hpp"
#include "nemsfit/serialize.hpp"
#include "nemsfit/svg.hpp"
#include "nemsfit/touchstone.hpp"
#include "nemsfit/transduce.hpp"

namespace nemsfit::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Nominal S0 phase velocity used by `modes` when --vp is not given.
constexpr double kDefaultPhaseVelocity = 5400.0;

std::string si(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PreconditionError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class Outputs {
public:
    void write(const fs::path& path, const std::string& content) {
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        std::ofstream o(path, std::ios::binary);
        if (!o) throw PreconditionError("cannot write " + path.string());
        o << content;
        paths_.push_back(path.string());
    }
    const std::vector<std::string>& paths() const { return paths_; }

private:
    std::vector<std::string> paths_;
};

void write_manifest(const fs::path& path, const std::string& command, const std::vector<std::string>& inputs,
                    const json& options, const Outputs& outputs) {
    json m{{"command", command}, {"inputs", inputs}, {"options", options}, {"outputs", outputs.paths()}};
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream o(path, std::ios::binary);
    if (!o) throw PreconditionError("cannot write " + path.string());
    o << m.dump(2) << '\n';
}

touchstone::Format format_from_string(const std::string& s) {
    std::string u;
    for (char c : s) u += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (u == "RI") return touchstone::Format::RI;
    if (u == "MA") return touchstone::Format::MA;
    if (u == "DB") return touchstone::Format::DB;
    throw PreconditionError("unknown Touchstone format '" + s + "' (expected RI, MA or DB)");
}

touchstone::FreqUnit unit_from_string(const std::string& s) {
    std::string u;
    for (char c : s) u += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (u == "HZ") return touchstone::FreqUnit::Hz;
    if (u == "KHZ") return touchstone::FreqUnit::kHz;
    if (u == "MHZ") return touchstone::FreqUnit::MHz;
    if (u == "GHZ") return touchstone::FreqUnit::GHz;
    throw PreconditionError("unknown frequency unit '" + s + "'");
}

// ---------------------------------------------------------------- fit / batch

struct FitFlags {
    bool shunt = false;
    bool mbvd = false;
    bool trace_fit = false;
    bool emit_candidates = false;
    bool raw_q = false;
    int restarts = 0;
    std::string weighting = "complex";
    double threshold_db = kDefaultProminenceDb;
    std::optional<double> lambda;

    AnalysisOptions analysis() const {
        AnalysisOptions a;
        a.threshold_db = threshold_db;
        a.raw_q = raw_q;
        a.fit.free_parasitics = mbvd;
        a.fit.restarts = restarts;
        if (weighting == "complex")
            a.fit.weighting = Weighting::Complex;
        else if (weighting == "log_mag_phase")
            a.fit.weighting = Weighting::LogMagPhase;
        else
            throw PreconditionError("unknown weighting '" + weighting + "' (expected complex or log_mag_phase)");
        return a;
    }

    json to_json() const {
        json j{{"embedding", shunt ? "shunt" : "series"}, {"mbvd", mbvd},          {"restarts", restarts},
               {"weighting", weighting},                  {"threshold_db", threshold_db}, {"raw_q", raw_q},
               {"trace_fit", trace_fit},                  {"emit_candidates", emit_candidates}};
        if (lambda) j["lambda_m"] = *lambda;
        return j;
    }
};

void add_fit_flags(CLI::App* sub, FitFlags& f) {
    sub->add_flag("--shunt", f.shunt, "Device is a shunt element: Y_dev = Y11 + Y21 (default series, Y_dev = -Y21)");
    sub->add_flag("--mbvd", f.mbvd, "Also fit r0 and rs (modified BVD)");
    sub->add_option("--restarts", f.restarts, "Extra deterministic perturbed seeds")->check(CLI::NonNegativeNumber);
    sub->add_flag("--trace-fit", f.trace_fit, "Include the per-iteration cost trace in fit.json");
    sub->add_flag("--emit-candidates", f.emit_candidates, "Write detected resonance candidates");
    sub->add_flag("--raw-q", f.raw_q, "Also report Q_s measured on the raw trace");
    sub->add_option("--weighting", f.weighting, "complex | log_mag_phase");
    sub->add_option("--threshold-db", f.threshold_db, "Peak prominence threshold in dB");
    sub->add_option("--lambda", f.lambda, "Device wavelength in m (overrides file metadata)");
}

// Geometry carried in a `! geometry key=value ...` comment written by `synth`.
DeviceGeometry geometry_from_comments(const std::string& text) {
    DeviceGeometry g;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        auto p = line.find_first_not_of(" \t");
        if (p == std::string::npos || line[p] != '!') continue;
        std::istringstream ls(line.substr(p + 1));
        std::string tag;
        ls >> tag;
        if (tag != "geometry") continue;
        std::string kv;
        while (ls >> kv) {
            auto eq = kv.find('=');
            if (eq == std::string::npos) continue;
            const auto key = kv.substr(0, eq), val = kv.substr(eq + 1);
            try {
                if (key == "lambda_m") g.lambda = std::stod(val);
                else if (key == "topology") g.topology = topology_from_string(val);
                else if (key == "mode") g.mode = mode_from_string(val);
            } catch (const std::exception&) {
            }
        }
    }
    return g;
}

std::string geometry_comment(const DeviceGeometry& g) {
    return "! geometry lambda_m=" + si(g.lambda) + " topology=" + to_string(g.topology) + " mode=" + to_string(g.mode) +
           "\n";
}

struct FileResult {
    std::string path;
    DeviceGeometry geometry;
    Analysis analysis;
    ComplexTrace trace;
};

FileResult analyze_file(const std::string& path, const FitFlags& flags) {
    FileResult r;
    r.path = path;
    try {
        const std::string text = read_file(path);
        const NetworkRecord net =
            touchstone::parse(text, touchstone::ports_from_filename(fs::path(path).filename().string()));
        r.geometry = geometry_from_comments(text);
        if (flags.lambda) r.geometry.lambda = *flags.lambda;
        r.trace = device_admittance(s_to_y(net), flags.shunt ? Embedding::Shunt : Embedding::Series);
        r.analysis = analyze_trace(r.trace, flags.analysis());
    } catch (const FitError&) {
        throw;
    } catch (const Error& e) {
        const std::string what = e.what();
        if (what.rfind(path, 0) == 0) throw;
        throw PreconditionError(path + ": " + what);
    }
    return r;
}

json metrics_document(const FileResult& r, const FitFlags& flags) {
    json j = io::metrics_to_json(r.analysis.metrics);
    j["input"] = r.path;
    j["embedding"] = flags.shunt ? "shunt" : "series";
    j["converged"] = r.analysis.fit.converged;
    j["iterations"] = r.analysis.fit.iterations;
    j["branch_count"] = r.analysis.fit.branch_count;
    if (r.geometry.lambda > 0.0) j["geometry"] = io::geometry_to_json(r.geometry);
    return j;
}

void write_fit_outputs(const FileResult& r, const FitFlags& flags, const fs::path& dir, Outputs& outs) {
    const auto& a = r.analysis;
    outs.write(dir / "metrics.json", metrics_document(r, flags).dump(2) + "\n");
    outs.write(dir / "model.json", io::model_to_json(a.fit.model).dump(2) + "\n");
    outs.write(dir / "fit.json", io::fit_to_json(a.fit, flags.trace_fit).dump(2) + "\n");
    if (flags.emit_candidates) outs.write(dir / "candidates.json", io::candidates_to_json(a.candidates).dump(2) + "\n");

    const auto fitted = synthesize_admittance(a.fit.model, r.trace.freqs);
    std::ostringstream csv;
    csv << "f_hz,meas_re_s,meas_im_s,fit_re_s,fit_im_s\n";
    svg::Series meas{"measured", {}, {}, "#1f77b4"}, model{"fit", {}, {}, "#d62728"};
    for (std::size_t i = 0; i < r.trace.size(); ++i) {
        const auto ym = r.trace.values[i], yf = fitted.values[i];
        csv << si(r.trace.freqs[i]) << ',' << si(ym.real()) << ',' << si(ym.imag()) << ',' << si(yf.real()) << ','
            << si(yf.imag()) << '\n';
        meas.x.push_back(r.trace.freqs[i] * 1e-9);
        meas.y.push_back(20.0 * std::log10(std::abs(ym)));
        model.x.push_back(r.trace.freqs[i] * 1e-9);
        model.y.push_back(20.0 * std::log10(std::abs(yf)));
    }
    outs.write(dir / "fit.csv", csv.str());
    outs.write(dir / "fit.svg", svg::render({"Device admittance", "f [GHz]", "|Y| [dB S]", {meas, model}}));

    const auto table = render_table({{r.geometry, a.metrics}});
    outs.write(dir / "table.md", table.markdown);
    outs.write(dir / "table.csv", table.csv);
}

int cmd_fit(const std::string& input, const FitFlags& flags, const std::string& outdir, std::ostream& out,
            std::ostream& err) {
    const FileResult r = analyze_file(input, flags);
    Outputs outs;
    write_fit_outputs(r, flags, outdir, outs);
    write_manifest(fs::path(outdir) / "manifest.json", "fit", {input}, flags.to_json(), outs);
    out << render_table({{r.geometry, r.analysis.metrics}}).markdown;
    if (!r.analysis.metrics.complete) err << "warning: " << r.analysis.metrics.note << '\n';
    if (!r.analysis.fit.converged) {
        err << "error: fit did not converge after " << r.analysis.fit.iterations << " iterations\n";
        return kNotConverged;
    }
    return kOk;
}

std::vector<std::string> collect_inputs(const std::vector<std::string>& args) {
    std::vector<std::string> files;
    for (const auto& a : args) {
        if (fs::is_directory(a)) {
            std::vector<std::string> found;
            for (const auto& e : fs::directory_iterator(a)) {
                if (!e.is_regular_file()) continue;
                std::string ext = e.path().extension().string();
                std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
                if (ext == ".s2p") found.push_back(e.path().string());
            }
            std::sort(found.begin(), found.end());
            files.insert(files.end(), found.begin(), found.end());
        } else if (fs::exists(a)) {
            files.push_back(a);
        } else {
            throw PreconditionError("no such file or directory: " + a);
        }
    }
    if (files.empty()) throw PreconditionError("batch: no .s2p files found");
    return files;
}

int cmd_batch(const std::vector<std::string>& args, const FitFlags& flags, const std::string& outdir, int jobs,
              std::ostream& out, std::ostream& err) {
    const auto files = collect_inputs(args);
    struct Slot {
        std::optional<FileResult> result;
        std::string error;
    };
    std::vector<Slot> slots(files.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < files.size();) {
            try {
                slots[i].result = analyze_file(files[i], flags);
            } catch (const std::exception& e) {
                slots[i].error = e.what();
            }
        }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(jobs > 0 ? static_cast<unsigned>(jobs) : std::thread::hardware_concurrency(),
                                                        static_cast<unsigned>(files.size())));
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    Outputs outs;
    std::vector<std::pair<DeviceGeometry, ResonatorMetrics>> rows;
    json results = json::array(), failures = json::array();
    for (std::size_t i = 0; i < files.size(); ++i) {
        if (slots[i].result) {
            rows.emplace_back(slots[i].result->geometry, slots[i].result->analysis.metrics);
            results.push_back(metrics_document(*slots[i].result, flags));
        } else {
            failures.push_back({{"input", files[i]}, {"error", slots[i].error}});
        }
    }
    const fs::path dir(outdir);
    if (!rows.empty()) {
        const auto table = render_table(rows);
        outs.write(dir / "report.md", table.markdown);
        outs.write(dir / "report.csv", table.csv);
        out << table.markdown;
    }
    outs.write(dir / "results.json", results.dump(2) + "\n");
    outs.write(dir / "failures.json", failures.dump(2) + "\n");
    json opts = flags.to_json();
    opts["jobs"] = jobs;
    write_manifest(dir / "manifest.json", "batch", files, opts, outs);
    for (const auto& f : failures)
        err << "failed: " << f["input"].get<std::string>() << ": " << f["error"].get<std::string>() << '\n';
    return failures.empty() ? kOk : kPartialFailure;
}

// ---------------------------------------------------------------- synth

struct SynthFlags {
    std::string model_path;
    std::string row;
    bool bvd = false;
    std::optional<double> fstart, fstop;
    int points = 1601;
    std::string format = "RI";
    std::string unit = "GHZ";
    double z0 = 50.0;
    std::optional<double> noise_db;
    std::uint64_t seed = 1;
    std::optional<double> lambda;
    std::string topology, mode;
    std::string output, model_out;
};

int cmd_synth(const SynthFlags& f, std::ostream& out) {
    if (f.model_path.empty() == f.row.empty()) throw PreconditionError("synth: give exactly one of --model or --row");
    MbvdModel model;
    DeviceGeometry g;
    std::vector<std::string> inputs;
    if (!f.row.empty()) {
        if (f.row.size() != 1) throw PreconditionError("synth: --row takes a single letter A..V");
        const auto& r = reference_row(f.row[0]);
        model = f.bvd ? bvd_from_row(r) : mbvd_from_row(r);
        g.lambda = r.lambda();
        g.topology = r.topology;
        g.mode = r.mode;
    } else {
        json j;
        try {
            j = json::parse(read_file(f.model_path));
        } catch (const json::parse_error& e) {
            throw PreconditionError(f.model_path + ": " + e.what());
        }
        model = io::model_from_json(j);
        inputs.push_back(f.model_path);
    }
    if (f.lambda) g.lambda = *f.lambda;
    if (!f.topology.empty()) g.topology = topology_from_string(f.topology);
    if (!f.mode.empty()) g.mode = mode_from_string(f.mode);
    if (f.points < 2) throw PreconditionError("synth: --points must be at least 2");

    std::vector<double> grid;
    if (f.fstart || f.fstop) {
        if (!(f.fstart && f.fstop) || !(*f.fstart > 0.0 && *f.fstop > *f.fstart))
            throw PreconditionError("synth: need 0 < --fstart < --fstop");
        for (int i = 0; i < f.points; ++i) grid.push_back(*f.fstart + (*f.fstop - *f.fstart) * i / (f.points - 1));
    } else {
        model.validate();
        const auto res = resonance_frequencies(model);
        grid = sweep_grid(res.fs[res.dominant], res.fp, f.points);
    }
    ComplexTrace y = synthesize_admittance(model, grid);
    if (f.noise_db) y = add_complex_noise(y, *f.noise_db, f.seed);
    const NetworkRecord s = y_to_s(series_element_network(y, f.z0));

    Outputs outs;
    std::string body = touchstone::write(s, format_from_string(f.format), unit_from_string(f.unit));
    if (g.lambda > 0.0) body = geometry_comment(g) + body;
    outs.write(f.output, body);
    if (!f.model_out.empty()) outs.write(f.model_out, io::model_to_json(model).dump(2) + "\n");

    json opts{{"points", f.points}, {"format", f.format}, {"unit", f.unit}, {"z0_ohm", f.z0}, {"seed", f.seed}};
    if (!f.row.empty()) opts["row"] = f.row, opts["bvd"] = f.bvd;
    if (f.fstart) opts["fstart_hz"] = *f.fstart, opts["fstop_hz"] = *f.fstop;
    if (f.noise_db) opts["noise_db"] = *f.noise_db;
    if (g.lambda > 0.0) opts["geometry"] = io::geometry_to_json(g);
    write_manifest(f.output + ".manifest.json", "synth", inputs, opts, outs);
    out << "wrote " << f.output << " (" << grid.size() << " points)\n";
    return kOk;
}

// ---------------------------------------------------------------- modes

struct ModesFlags {
    std::string topology = "dlvr";
    int n = 0;
    double lambda = 0.0;
    double coverage = 0.5;
    double v_p = kDefaultPhaseVelocity;
    int n_max = 0;
    bool delta = false;
    double c0 = 100e-15;
    double kt2 = 0.2;
    double q = 500.0;
    int points = 2001;
    std::string sweep;
    std::string outdir = "modes_out";
};

std::vector<int> parse_sweep(const std::string& s) {
    int a = 0, b = 0, step = 0;
    char c1 = 0, c2 = 0;
    std::istringstream in(s);
    if (!(in >> a >> c1 >> b >> c2 >> step) || c1 != ':' || c2 != ':' || step <= 0 || a < 2 || b < a)
        throw PreconditionError("--sweep-n expects a:b:step with 2 <= a <= b and step > 0");
    std::vector<int> out;
    for (int n = a; n <= b; n += step) out.push_back(n);
    return out;
}

int cmd_modes(const ModesFlags& f, std::ostream& out) {
    DeviceGeometry g;
    g.topology = topology_from_string(f.topology);
    g.n_elements = f.n;
    g.lambda = f.lambda;
    g.coverage = f.coverage;
    g.aperture = 10.0 * f.lambda;
    g.validate();
    const CouplingOptions copt{f.delta};
    const auto layout = build_layout(g);
    const int n_max = f.n_max > 0 ? f.n_max : 4 * std::max(1, layout.design_index());
    const auto spec = mode_couplings(layout, f.v_p, n_max, copt);

    Outputs outs;
    const fs::path dir(f.outdir);
    std::ostringstream csv;
    csv << "N,n,f_n_Hz,eta_n,nodes\n";
    for (const auto& m : spec.modes)
        csv << f.n << ',' << m.n << ',' << si(m.f) << ',' << si(m.eta) << ',' << m.nodes << '\n';
    outs.write(dir / "spectrum.csv", csv.str());
    outs.write(dir / "spectrum.json", io::spectrum_to_json(spec).dump(2) + "\n");

    const auto model = spectrum_to_mbvd(spec, f.c0, f.kt2, f.q);
    std::vector<double> grid;
    const double f0 = spec.design_frequency;
    for (int i = 0; i < f.points; ++i) grid.push_back(f0 * (0.5 + 1.0 * i / (f.points - 1)));
    const auto y = synthesize_admittance(model, grid);
    std::ostringstream ycsv;
    ycsv << "f_hz,re_s,im_s,mag_db\n";
    svg::Series ys{"|Y|", {}, {}, "#1f77b4"};
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double db = 20.0 * std::log10(std::abs(y.values[i]));
        ycsv << si(grid[i]) << ',' << si(y.values[i].real()) << ',' << si(y.values[i].imag()) << ',' << si(db) << '\n';
        ys.x.push_back(grid[i] * 1e-9);
        ys.y.push_back(db);
    }
    outs.write(dir / "admittance.csv", ycsv.str());
    outs.write(dir / "admittance.svg", svg::render({"Synthesized admittance", "f [GHz]", "|Y| [dB S]", {ys}}));

    const auto ranked = ranked_modes(spec);
    out << "design frequency " << si(f0) << " Hz, plate width " << si(spec.plate_width) << " m\n";
    out << "rank,n,nodes,f_n_Hz,eta_n\n";
    for (std::size_t i = 0; i < std::min<std::size_t>(4, ranked.size()); ++i)
        out << i + 1 << ',' << ranked[i].n << ',' << ranked[i].nodes << ',' << si(ranked[i].f) << ','
            << si(ranked[i].eta) << '\n';

    json opts{{"topology", to_string(g.topology)}, {"n", f.n},     {"lambda_m", f.lambda}, {"coverage", f.coverage},
              {"v_p_m_per_s", f.v_p},              {"n_max", n_max}, {"delta_electrodes", f.delta},
              {"c0_f", f.c0},                      {"kt2", f.kt2}, {"q", f.q},             {"points", f.points}};
    if (!f.sweep.empty()) {
        opts["sweep_n"] = f.sweep;
        const auto rows = split_study(g, parse_sweep(f.sweep), f.v_p, 4, copt);
        std::ostringstream sc;
        sc << "N,n_first,f_first_Hz,eta_first,n_second,f_second_Hz,eta_second,offset\n";
        json sj = json::array();
        svg::Series off{"dominant-mode offset", {}, {}, "#d62728", true};
        for (const auto& r : rows) {
            sc << r.n_elements << ',' << r.first.n << ',' << si(r.first.f) << ',' << si(r.first.eta) << ','
               << r.second.n << ',' << si(r.second.f) << ',' << si(r.second.eta) << ',' << si(r.offset) << '\n';
            sj.push_back({{"N", r.n_elements},
                          {"first", {{"n", r.first.n}, {"f_hz", r.first.f}, {"eta", r.first.eta}}},
                          {"second", {{"n", r.second.n}, {"f_hz", r.second.f}, {"eta", r.second.eta}}},
                          {"offset", r.offset}});
            off.x.push_back(r.n_elements);
            off.y.push_back(r.offset * 100.0);
        }
        outs.write(dir / "split_study.csv", sc.str());
        outs.write(dir / "split_study.json", sj.dump(2) + "\n");
        outs.write(dir / "split_study.svg", svg::render({"Dominant-mode offset vs N", "N", "offset [%]", {off}}));
        out << sc.str();
    }
    write_manifest(dir / "manifest.json", "modes", {}, opts, outs);
    return kOk;
}

// ---------------------------------------------------------------- design

struct DesignFlags {
    std::string targets;
    std::string config;
    std::optional<double> v_p;
    std::string calibration = "S0";
    double threshold_hz = 0.0;
    std::string outdir = "design_out";
};

std::vector<double> read_targets(const std::string& path) {
    std::istringstream in(read_file(path));
    std::vector<double> t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
        std::istringstream ls(line);
        std::string tok;
        while (ls >> tok) {
            try {
                std::size_t used = 0;
                t.push_back(std::stod(tok, &used));
                if (used != tok.size()) throw std::invalid_argument(tok);
            } catch (const std::exception&) {
                throw ParseError(lineno, path + ": not a frequency: '" + tok + "'");
            }
        }
    }
    if (t.empty()) throw PreconditionError(path + ": no targets (expected one frequency in Hz per line)");
    return t;
}

int cmd_design(const DesignFlags& f, std::ostream& out, std::ostream& err) {
    const auto targets = read_targets(f.targets);
    ProcessRules rules;
    std::vector<std::string> inputs{f.targets};
    json config = json::object();
    if (!f.config.empty()) {
        try {
            config = json::parse(read_file(f.config));
        } catch (const json::parse_error& e) {
            throw PreconditionError(f.config + ": " + e.what());
        }
        if (config.contains("process_rules")) rules = io::rules_from_json(config["process_rules"]);
        inputs.push_back(f.config);
    }
    TopologyPolicy policy;
    policy.threshold_hz = config.value("topology_threshold_hz", f.threshold_hz);

    const AcousticMode mode = mode_from_string(f.calibration);
    double v_p = 0.0;
    json cal_info;
    if (f.v_p) {
        v_p = *f.v_p;
        cal_info = {{"source", "flag"}};
    } else {
        std::vector<VelocityObservation> obs;
        std::string source;
        if (config.contains("calibration_sets") && config["calibration_sets"].contains(f.calibration)) {
            for (const auto& o : config["calibration_sets"][f.calibration])
                obs.push_back({o.at("lambda_m").get<double>(), o.at("fs_hz").get<double>()});
            source = "config";
        } else {
            for (const auto& r : kReferenceRows)
                if (r.mode == mode) obs.push_back({r.lambda(), r.fs()});
            source = "built-in";
        }
        const auto cal = calibrate_velocity(obs);
        v_p = cal.v_p;
        cal_info = {{"source", source}, {"set", f.calibration}, {"spread", cal.spread}};
        const auto outl = velocity_outliers(obs, cal.v_p);
        if (!outl.empty()) cal_info["outliers"] = outl;
    }
    GeometryTemplate tmpl;
    tmpl.mode = mode;
    const auto plan = plan_bank(targets, v_p, rules, policy, tmpl);

    Outputs outs;
    const fs::path dir(f.outdir);
    std::ostringstream csv;
    csv << "targets_hz,lambda_nm,topology,predicted_fs_hz,findings,error\n";
    bool any_error = false;
    for (const auto& e : plan) {
        std::string tg;
        for (double t : e.targets) tg += (tg.empty() ? "" : ";") + si(t);
        std::string findings;
        for (const auto& x : e.findings) findings += (findings.empty() ? "" : ";") + x.rule;
        if (e.geometry)
            csv << tg << ',' << std::lround(e.geometry->lambda * 1e9) << ',' << to_string(e.geometry->topology) << ','
                << si(predict_fs(e.geometry->lambda, v_p)) << ",\"" << findings << "\",\n";
        else
            csv << tg << ",-,-,-,,\"" << e.error << "\"\n";
        if (!e.error.empty()) {
            any_error = true;
            err << "target " << tg << " Hz: " << e.error << '\n';
        }
    }
    outs.write(dir / "plan.csv", csv.str());
    json pj{{"v_p_m_per_s", v_p}, {"calibration", cal_info}, {"entries", io::plan_to_json(plan)}};
    outs.write(dir / "plan.json", pj.dump(2) + "\n");
    out << csv.str();
    json opts{{"calibration", f.calibration}, {"topology_threshold_hz", policy.threshold_hz}, {"v_p_m_per_s", v_p}};
    write_manifest(dir / "manifest.json", "design", inputs, opts, outs);
    return any_error ? kPartialFailure : kOk;
}

// ---------------------------------------------------------------- convert

struct ConvertFlags {
    std::string input;
    std::string output;
    std::string format = "RI";
    std::string unit = "GHZ";
    bool to_y = false;
};

int cmd_convert(const ConvertFlags& f, std::ostream& out) {
    const std::string text = read_file(f.input);
    NetworkRecord net;
    try {
        net = touchstone::parse(text, touchstone::ports_from_filename(fs::path(f.input).filename().string()));
    } catch (const ParseError& e) {
        throw PreconditionError(f.input + ": " + e.what());
    }
    Outputs outs;
    if (fs::path(f.output).extension() == ".json") {
        outs.write(f.output, io::network_to_json(f.to_y ? s_to_y(net) : net).dump(2) + "\n");
    } else {
        if (f.to_y) throw PreconditionError("convert: --to-y needs a .json output");
        std::string body = touchstone::write(net, format_from_string(f.format), unit_from_string(f.unit));
        const DeviceGeometry g = geometry_from_comments(text);
        if (g.lambda > 0.0) body = geometry_comment(g) + body;
        outs.write(f.output, body);
    }
    write_manifest(f.output + ".manifest.json", "convert", {f.input},
                   {{"format", f.format}, {"unit", f.unit}, {"to_y", f.to_y}}, outs);
    out << "wrote " << f.output << " (" << net.size() << " points)\n";
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Resonator equivalent-circuit fitting and design toolkit", "nemsfit"};
    app.require_subcommand(1);

    FitFlags fit_flags;
    std::string fit_input, fit_out = "fit_out";
    auto* fit = app.add_subcommand("fit", "Fit one .s2p file and report its metrics");
    fit->add_option("input", fit_input, "Two-port Touchstone file")->required();
    fit->add_option("-o,--out", fit_out, "Output directory");
    add_fit_flags(fit, fit_flags);

    FitFlags batch_flags;
    std::vector<std::string> batch_inputs;
    std::string batch_out = "batch_out";
    int jobs = 0;
    auto* batch = app.add_subcommand("batch", "Fit every .s2p in a directory (or the listed files)");
    batch->add_option("inputs", batch_inputs, "Directory or files")->required();
    batch->add_option("-o,--out", batch_out, "Output directory");
    batch->add_option("-j,--jobs", jobs, "Worker threads (0: hardware concurrency)")->check(CLI::NonNegativeNumber);
    add_fit_flags(batch, batch_flags);

    SynthFlags sf;
    auto* synth = app.add_subcommand("synth", "Synthesize a .s2p from a model JSON or a reference row");
    synth->add_option("--model", sf.model_path, "Model JSON");
    synth->add_option("--row", sf.row, "Reference device row letter (A..V)");
    synth->add_flag("--bvd", sf.bvd, "With --row: plain BVD (rs = r0 = 0)");
    synth->add_option("--fstart", sf.fstart, "Start frequency in Hz");
    synth->add_option("--fstop", sf.fstop, "Stop frequency in Hz");
    synth->add_option("--points", sf.points, "Grid points");
    synth->add_option("--format", sf.format, "RI | MA | DB");
    synth->add_option("--unit", sf.unit, "HZ | KHZ | MHZ | GHZ");
    synth->add_option("--z0", sf.z0, "Reference impedance in ohm")->check(CLI::PositiveNumber);
    synth->add_option("--noise-db", sf.noise_db, "Complex noise level relative to median |Y| in dB");
    synth->add_option("--seed", sf.seed, "Noise seed");
    synth->add_option("--lambda", sf.lambda, "Wavelength metadata in m");
    synth->add_option("--topology", sf.topology, "Topology metadata (lvr | dlvr)");
    synth->add_option("--mode", sf.mode, "Acoustic mode metadata (S0 | SH0)");
    synth->add_option("-o,--out", sf.output, "Output .s2p")->required();
    synth->add_option("--model-out", sf.model_out, "Also write the model JSON");

    ModesFlags mf;
    auto* modes = app.add_subcommand("modes", "Electrode-sampling mode spectrum and split study");
    modes->add_option("--topology", mf.topology, "lvr | dlvr");
    modes->add_option("--n", mf.n, "Electrode count N")->required();
    modes->add_option("--lambda", mf.lambda, "Wavelength in m")->required();
    modes->add_option("--c", mf.coverage, "Metal coverage");
    modes->add_option("--vp", mf.v_p, "Phase velocity in m/s")->check(CLI::PositiveNumber);
    modes->add_option("--n-max", mf.n_max, "Highest mode index (default 4x design index)");
    modes->add_flag("--delta-electrodes", mf.delta, "Point electrodes at the finger centres");
    modes->add_option("--c0", mf.c0, "Static capacitance for the synthesized admittance, F");
    modes->add_option("--kt2", mf.kt2, "Total coupling for the synthesized admittance");
    modes->add_option("--q", mf.q, "Branch Q for the synthesized admittance");
    modes->add_option("--points", mf.points, "Admittance grid points");
    modes->add_option("--sweep-n", mf.sweep, "Split study over N = a:b:step");
    modes->add_option("-o,--out", mf.outdir, "Output directory");

    DesignFlags df;
    auto* design = app.add_subcommand("design", "Plan a bank of devices for target frequencies");
    design->add_option("--targets", df.targets, "File with one target frequency (Hz) per line")->required();
    design->add_option("--config", df.config, "JSON with process_rules / calibration_sets");
    design->add_option("--vp", df.v_p, "Phase velocity in m/s (overrides calibration)");
    design->add_option("--calibration", df.calibration, "Calibration set (S0 | SH0)");
    design->add_option("--threshold-hz", df.threshold_hz, "LVR below, d-LVR at or above this frequency");
    design->add_option("-o,--out", df.outdir, "Output directory");

    ConvertFlags cf;
    auto* convert = app.add_subcommand("convert", "Rewrite a .s2p in another format or dump it as JSON");
    convert->add_option("input", cf.input, "Two-port Touchstone file")->required();
    convert->add_option("-o,--out", cf.output, "Output .s2p or .json")->required();
    convert->add_option("--format", cf.format, "RI | MA | DB");
    convert->add_option("--unit", cf.unit, "HZ | KHZ | MHZ | GHZ");
    convert->add_flag("--to-y", cf.to_y, "Dump Y-parameters instead of S (JSON output only)");

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kInputError;
    }

    try {
        if (*fit) return cmd_fit(fit_input, fit_flags, fit_out, out, err);
        if (*batch) return cmd_batch(batch_inputs, batch_flags, batch_out, jobs, out, err);
        if (*synth) return cmd_synth(sf, out);
        if (*modes) return cmd_modes(mf, out);
        if (*design) return cmd_design(df, out, err);
        if (*convert) return cmd_convert(cf, out);
    } catch (const FitError& e) {
        err << "error: " << e.what() << '\n';
        return kNotConverged;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    }
    return kInputError;
}

}  // namespace nemsfit::cli
