#include "mems/cli_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

namespace mems {

using json = nlohmann::ordered_json;

const char* const kSeriesColumns[6] = {"t", "min_w", "max_u", "mass_residual", "norm_X", "contraction_ratio"};

namespace {

std::string num(double x)
{
    if (std::isnan(x)) return "nan";
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

json real(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }
double real_of(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }
Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

void write_file(const std::filesystem::path& p, const std::string& body)
{
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
    out << body;
    if (!out) throw std::runtime_error("write failed for '" + p.string() + "'");
}

std::string read_file(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read '" + p.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Snapshot snapshot_at(const SpectralGrid& grid, const RunReport& rep, int m)
{
    const auto& tr = rep.trajectory;
    const int n = grid.n();
    const double t1 = rep.params.lift.theta1, t2 = rep.params.lift.theta2;
    Snapshot s;
    s.t = tr.times(m);
    s.x.resize(n + 2);
    for (int j = 0; j <= n + 1; ++j) s.x(j) = static_cast<double>(j) / (n + 1);
    s.u.resize(n + 2);
    s.u << t1, tr.u.col(m), t1;
    s.v.resize(n + 2);
    s.v << 0.0, grid.to_grid(tr.v.col(m)), 0.0;
    s.w.resize(n + 2);
    s.w << t2, (grid.to_grid(tr.w.col(m)).array() + t2).matrix(), t2;
    return s;
}

json series_json(const std::vector<StepDiagnostics>& series)
{
    json cols = json::array();
    for (const char* c : kSeriesColumns) cols.push_back(c);
    json rows = json::array();
    for (const auto& d : series)
        rows.push_back({real(d.t), real(d.min_w), real(d.max_u), real(d.mass_residual), real(d.norm_X),
                        real(d.contraction_ratio)});
    return {{"columns", cols}, {"rows", rows}};
}

json snapshots_json(const std::vector<Snapshot>& snaps)
{
    json arr = json::array();
    for (const auto& s : snaps)
        arr.push_back({{"t", s.t}, {"x", to_std(s.x)}, {"u", to_std(s.u)}, {"v", to_std(s.v)}, {"w", to_std(s.w)}});
    return arr;
}

}  // namespace

RunRecord cmd_simulate(const RunConfig& cfg)
{
    const SpectralGrid grid(cfg.k_max);
    RunRecord rec;
    rec.config_text = canonical_text(cfg);
    rec.config_hash = config_hash(cfg);
    rec.report = run_coupled(grid, cfg.params, initial_state(cfg, grid), run_options(cfg));
    const auto& times = rec.report.trajectory.times;
    const double tol = 0.5 * rec.report.dt;
    for (double t : cfg.snapshot_times) {
        Eigen::Index best = 0;
        (times.array() - t).abs().minCoeff(&best);
        if (std::abs(times(best) - t) <= tol) rec.snapshots.push_back(snapshot_at(grid, rec.report, static_cast<int>(best)));
    }
    return rec;
}

std::string series_csv(const RunRecord& rec)
{
    std::string s;
    for (int i = 0; i < 6; ++i) s += std::string(i ? "," : "") + kSeriesColumns[i];
    s += "\n";
    for (const auto& d : rec.report.series)
        s += num(d.t) + "," + num(d.min_w) + "," + num(d.max_u) + "," + num(d.mass_residual) + "," + num(d.norm_X) +
             "," + num(d.contraction_ratio) + "\n";
    return s;
}

std::string snapshots_csv(const RunRecord& rec)
{
    std::string s = "t,x,u,v,w\n";
    for (const auto& sn : rec.snapshots)
        for (Eigen::Index j = 0; j < sn.x.size(); ++j)
            s += num(sn.t) + "," + num(sn.x(j)) + "," + num(sn.u(j)) + "," + num(sn.v(j)) + "," + num(sn.w(j)) + "\n";
    return s;
}

std::string record_json(const RunRecord& rec)
{
    const RunReport& r = rec.report;
    const HorizonEstimate& h = r.horizon;
    json j;
    j["schema_version"] = kSchemaVersion;
    j["code_version"] = rec.code_version;
    j["config_hash"] = rec.config_hash;
    j["config"] = rec.config_text;
    j["report"] = {
        {"params",
         {{"beta_F", r.params.beta_F},
          {"beta_p", r.params.beta_p},
          {"theta1", r.params.lift.theta1},
          {"theta2", r.params.lift.theta2},
          {"eps1", r.params.eps1}}},
        {"discretization",
         {{"k_max", r.k_max}, {"n", r.n}, {"N_t", r.options.N_t}, {"tol", r.options.tol}, {"dt", real(r.dt)}}},
        {"T", real(r.T)},
        {"T_used", real(r.T_used)},
        {"termination", to_string(r.termination)},
        {"quench_time", real(r.quench_time)},
        {"diagnostic", r.diagnostic},
        {"segments", r.segments},
        {"gamma_iterations", r.gamma_iterations},
        {"refinements", r.refinements},
        {"horizon_estimate",
         {{"C", real(h.C)},
          {"kappa", real(h.kappa)},
          {"r", real(h.r)},
          {"delta_o", real(h.delta_o)},
          {"G0_norm", real(h.G0_norm)},
          {"L_G_formula", real(h.L_G_formula)},
          {"L_G_calibrated", real(h.L_G_calibrated)},
          {"T0_formula", real(h.T0_formula)},
          {"T0_calibrated", real(h.T0_calibrated)}}},
        {"gamma0", real(r.gamma0)},
        {"pstar_norm", real(r.pstar_norm)},
        {"gamma_horizon", real(r.gamma_horizon)},
        {"regularity_proxy", real(r.regularity_proxy)},
    };
    j["series"] = series_json(r.series);
    j["snapshots"] = snapshots_json(rec.snapshots);
    return j.dump(1) + "\n";
}

RunRecord record_from_json(const std::string& text)
{
    const json j = json::parse(text);
    if (j.at("schema_version").get<int>() != kSchemaVersion)
        throw std::runtime_error("record_from_json: unsupported schema_version");
    RunRecord rec;
    rec.code_version = j.at("code_version").get<std::string>();
    rec.config_hash = j.at("config_hash").get<std::string>();
    rec.config_text = j.at("config").get<std::string>();
    const json& r = j.at("report");
    RunReport& rep = rec.report;
    const json& p = r.at("params");
    rep.params.beta_F = p.at("beta_F").get<double>();
    rep.params.beta_p = p.at("beta_p").get<double>();
    rep.params.lift = BoundaryLift(p.at("theta1").get<double>(), p.at("theta2").get<double>());
    rep.params.eps1 = p.at("eps1").get<double>();
    const json& d = r.at("discretization");
    rep.k_max = d.at("k_max").get<int>();
    rep.n = d.at("n").get<int>();
    rep.options.N_t = d.at("N_t").get<int>();
    rep.options.tol = d.at("tol").get<double>();
    rep.dt = real_of(d.at("dt"));
    rep.T = real_of(r.at("T"));
    rep.options.T = rep.T;
    rep.T_used = real_of(r.at("T_used"));
    const std::string term = r.at("termination").get<std::string>();
    bool known = false;
    for (Termination t : {Termination::converged, Termination::quench, Termination::pressure_blowup,
                          Termination::budget, Termination::positivity})
        if (term == to_string(t)) {
            rep.termination = t;
            known = true;
        }
    if (!known) throw std::runtime_error("record_from_json: unknown termination '" + term + "'");
    rep.quench_time = real_of(r.at("quench_time"));
    rep.diagnostic = r.at("diagnostic").get<std::string>();
    rep.segments = r.at("segments").get<int>();
    rep.gamma_iterations = r.at("gamma_iterations").get<int>();
    rep.refinements = r.at("refinements").get<int>();
    const json& h = r.at("horizon_estimate");
    rep.horizon = {real_of(h.at("C")),           real_of(h.at("kappa")),          real_of(h.at("r")),
                   real_of(h.at("delta_o")),     real_of(h.at("G0_norm")),        real_of(h.at("L_G_formula")),
                   real_of(h.at("L_G_calibrated")), real_of(h.at("T0_formula")), real_of(h.at("T0_calibrated"))};
    rep.gamma0 = real_of(r.at("gamma0"));
    rep.pstar_norm = real_of(r.at("pstar_norm"));
    rep.gamma_horizon = real_of(r.at("gamma_horizon"));
    rep.regularity_proxy = real_of(r.at("regularity_proxy"));
    const json& cols = j.at("series").at("columns");
    if (cols.size() != 6) throw std::runtime_error("record_from_json: series must have 6 columns");
    for (int i = 0; i < 6; ++i)
        if (cols[i].get<std::string>() != kSeriesColumns[i])
            throw std::runtime_error("record_from_json: unexpected series column order");
    for (const json& row : j.at("series").at("rows")) {
        StepDiagnostics s;
        s.t = real_of(row.at(0));
        s.min_w = real_of(row.at(1));
        s.max_u = real_of(row.at(2));
        s.mass_residual = real_of(row.at(3));
        s.norm_X = real_of(row.at(4));
        s.contraction_ratio = real_of(row.at(5));
        rep.series.push_back(s);
    }
    for (const json& sn : j.at("snapshots")) {
        Snapshot s;
        s.t = sn.at("t").get<double>();
        s.x = to_vec(sn.at("x").get<std::vector<double>>());
        s.u = to_vec(sn.at("u").get<std::vector<double>>());
        s.v = to_vec(sn.at("v").get<std::vector<double>>());
        s.w = to_vec(sn.at("w").get<std::vector<double>>());
        rec.snapshots.push_back(s);
    }
    return rec;
}

RunRecord load_record(const std::filesystem::path& path)
{
    return record_from_json(read_file(std::filesystem::is_directory(path) ? path / "record.json" : path));
}

std::vector<std::string> export_record(const RunRecord& rec, const std::filesystem::path& dir, ExportFormat fmt)
{
    std::filesystem::create_directories(dir);
    std::vector<std::string> files;
    if (fmt == ExportFormat::csv) {
        write_file(dir / "series.csv", series_csv(rec));
        write_file(dir / "snapshots.csv", snapshots_csv(rec));
        files = {"series.csv", "snapshots.csv"};
    } else {
        json s = series_json(rec.report.series);
        s = {{"schema_version", kSchemaVersion}, {"columns", s["columns"]}, {"rows", s["rows"]}};
        write_file(dir / "series.json", s.dump(1) + "\n");
        const json sn = {{"schema_version", kSchemaVersion}, {"snapshots", snapshots_json(rec.snapshots)}};
        write_file(dir / "snapshots.json", sn.dump(1) + "\n");
        files = {"series.json", "snapshots.json"};
    }
    return files;
}

std::vector<std::string> write_record(RunRecord& rec, const std::filesystem::path& dir, ExportFormat fmt)
{
    std::filesystem::create_directories(dir);
    write_file(dir / "config.ini", rec.config_text);
    write_file(dir / "record.json", record_json(rec));
    rec.files = {"config.ini", "record.json"};
    for (auto& f : export_record(rec, dir, fmt)) rec.files.push_back(f);
    return rec.files;
}

const std::vector<std::string>& suite_names()
{
    static const std::vector<std::string> s{"semigroup", "benchmark", "constants", "lipschitz",
                                            "elliptic",  "convergence", "all"};
    return s;
}

namespace {

CriterionResult convergence_orders()
{
    CriterionResult r;
    r.id = 0;
    r.name = "self-convergence orders";
    const auto t0 = std::chrono::steady_clock::now();
    try {
        ConvergenceStudyConfig cfg;
        cfg.params.beta_F = 0.5;
        cfg.params.beta_p = 1.0;
        const auto rows = convergence_study(cfg);
        const double nominal[3] = {4.0, 2.0, 2.0};
        double worst = 0.0;
        std::string detail;
        for (int i = 0; i < 3; ++i) {
            const double o = rows[i].orders.back();
            worst = std::max(worst, std::abs(o - nominal[i]));
            detail += (i ? "; " : "") + rows[i].quantity + " order " + num(std::round(o * 100) / 100);
        }
        const auto& tol_row = rows[3].orders;
        const double tol_ratio = *std::max_element(tol_row.begin(), tol_row.end());
        r.measured = worst;
        r.threshold = 0.5;
        r.pass = worst <= 0.5 && tol_ratio <= 1.0;
        r.detail = detail + " (|order - nominal| on the finest pair); max error/tol " + num(tol_ratio);
    } catch (const std::exception& e) {
        r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

}  // namespace

VerifySummary cmd_verify(const std::string& suite)
{
    using Fn = CriterionResult (*)();
    static const std::map<std::string, std::vector<Fn>> suites{
        {"semigroup", {criterion_unitarity}},
        {"benchmark", {criterion_closed_form, criterion_regularity}},
        {"constants", {criterion_picard_contraction, criterion_lower_bound}},
        {"lipschitz", {criterion_frechet, criterion_audits}},
        {"elliptic", {criterion_elliptic}},
        {"convergence", {criterion_oracle_equivalence, criterion_cocycle, criterion_quench, convergence_orders}},
    };
    VerifySummary s;
    s.suite = suite;
    if (suite == "all") {
        s.results = run_all_criteria();
        s.results.push_back(convergence_orders());
    } else {
        const auto it = suites.find(suite);
        if (it == suites.end()) throw std::invalid_argument("unknown suite '" + suite + "'");
        for (Fn f : it->second) s.results.push_back(f());
    }
    s.pass = std::all_of(s.results.begin(), s.results.end(), [](const CriterionResult& r) { return r.pass; });
    return s;
}

std::string summary_json(const VerifySummary& s)
{
    json j;
    j["schema_version"] = kSchemaVersion;
    j["suite"] = s.suite;
    j["pass"] = s.pass;
    json arr = json::array();
    for (const auto& r : s.results)
        arr.push_back({{"id", r.id},
                       {"name", r.name},
                       {"pass", r.pass},
                       {"measured", real(r.measured)},
                       {"threshold", real(r.threshold)},
                       {"seconds", r.seconds},
                       {"detail", r.detail}});
    j["results"] = arr;
    return j.dump(1) + "\n";
}

SweepResult cmd_sweep(const RunConfig& cfg, const std::filesystem::path& out, ExportFormat fmt, int jobs)
{
    if (cfg.sweep_beta_F.empty() || cfg.sweep_beta_p.empty())
        throw std::invalid_argument("sweep: empty grid (set [sweep] beta_F and beta_p)");
    SweepResult res;
    for (std::size_t i = 0; i < cfg.sweep_beta_F.size(); ++i)
        for (std::size_t k = 0; k < cfg.sweep_beta_p.size(); ++k) {
            SweepCell c;
            c.beta_F = cfg.sweep_beta_F[i];
            c.beta_p = cfg.sweep_beta_p[k];
            c.directory = "cell_" + std::to_string(i) + "_" + std::to_string(k);
            res.cells.push_back(c);
        }
    std::filesystem::create_directories(out);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t idx = next++; idx < res.cells.size(); idx = next++) {
            SweepCell& c = res.cells[idx];
            try {
                RunConfig one = cfg;
                one.params.beta_F = c.beta_F;
                one.params.beta_p = c.beta_p;
                one.sweep_beta_F.clear();
                one.sweep_beta_p.clear();
                RunRecord rec = cmd_simulate(one);
                write_record(rec, out / c.directory, fmt);
                c.termination = to_string(rec.report.termination);
                c.T_used = rec.report.T_used;
                if (rec.report.termination == Termination::quench) c.quench_time = rec.report.quench_time;
            } catch (const std::exception& e) {
                c.termination = "error";
                c.error = e.what();
            }
        }
    };
    const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(res.cells.size())));
    std::vector<std::thread> pool;
    for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    for (std::size_t k = 0; k < cfg.sweep_beta_p.size(); ++k) {
        std::vector<const SweepCell*> column;
        for (const auto& c : res.cells)
            if (c.beta_p == cfg.sweep_beta_p[k]) column.push_back(&c);
        std::sort(column.begin(), column.end(), [](auto a, auto b) { return a->beta_F < b->beta_F; });
        bool seen = false;
        for (const SweepCell* c : column) {
            if (c->termination == "quench")
                seen = true;
            else if (seen && c->termination != "error")
                res.monotonicity_flags.push_back("beta_p=" + num(c->beta_p) + ": no quench at beta_F=" +
                                                 num(c->beta_F) + " after quench at a smaller beta_F");
        }
    }
    write_file(out / "sweep.csv", sweep_csv(res));
    return res;
}

std::string sweep_csv(const SweepResult& s)
{
    std::string out = "beta_F,beta_p,termination,T_used,quench_time\n";
    for (const auto& c : s.cells)
        out += num(c.beta_F) + "," + num(c.beta_p) + "," + c.termination + "," + num(c.T_used) + "," +
               (c.quench_time ? num(*c.quench_time) : std::string()) + "\n";
    return out;
}

}  // namespace mems
