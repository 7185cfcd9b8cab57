#include <doctest.h>

#include "mems/cli_io.hpp"
#include "mems/grid_norms.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

using namespace mems;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / "memsim_tests" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> errors_of(const std::string& text)
{
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.errors();
    }
    return {};
}

bool mentions(const std::vector<std::string>& errs, const std::string& key)
{
    for (const auto& e : errs)
        if (e.find(key) != std::string::npos) return true;
    return false;
}

const char* kSmall = "[model]\nbeta_F = 0.5\n[discretization]\nk_max = 16\nN_t = 20\n[run]\nhorizon = 0.01\n"
                     "snapshot_times = 0, 0.005\n";

}  // namespace

TEST_CASE("minimal config: defaults filled and echoed canonically")
{
    const RunConfig c = parse_config("");
    CHECK(c.params.beta_F == 1.0);
    CHECK(c.k_max == 64);
    CHECK(c.N_t == 200);
    CHECK(c.tol == 1e-10);
    const std::string echo = canonical_text(c);
    CHECK(echo.find("beta_F = 1\n") != std::string::npos);
    CHECK(echo.find("u_amplitude = 0.1\n") != std::string::npos);
    CHECK(canonical_text(parse_config(echo)) == echo);
    CHECK(config_hash(parse_config(echo)) == config_hash(c));
    CHECK(config_hash(parse_config("[model]\nbeta_F = 0.5\n")) != config_hash(c));
}

TEST_CASE("FNV-1a reference values")
{
    CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
    CHECK(config_hash(parse_config("")).size() == 16);
}

TEST_CASE("validation reports every violation at parse time")
{
    CHECK(mentions(errors_of("[model]\nbeta_F = -1\n"), "model.beta_F"));
    auto e = errors_of("[model]\nbeta_F = -1\nbeta_p = 0\nbogus = 3\n[discretization]\nk_max = 2\nN_t = 0\n"
                       "[run]\ntol = 1\nhorizon = 0.1\nsnapshot_times = 0.2\n[nowhere]\n");
    CHECK(mentions(e, "model.beta_F"));
    CHECK(mentions(e, "model.beta_p"));
    CHECK(mentions(e, "bogus"));
    CHECK(mentions(e, "discretization.k_max"));
    CHECK(mentions(e, "discretization.N_t"));
    CHECK(mentions(e, "run.tol"));
    CHECK(mentions(e, "snapshot_times"));
    CHECK(mentions(e, "nowhere"));
    CHECK(mentions(errors_of("[model]\nbeta_F = 1\nbeta_F = 2\n"), "beta_F"));
    CHECK(mentions(errors_of("[model]\neps1 = 2\n"), "model.eps1"));
    CHECK(mentions(errors_of("[model]\nbeta_F = 1x\n"), "beta_F"));
    CHECK(mentions(errors_of("[discretization]\nk_max = 16\nn = 17\n"), "discretization.n"));
    CHECK(!errors_of("[initial]\nu_amplitude = -0.7\n").empty());  // u0 dips below eps1
    CHECK(!errors_of("[initial]\nw_amplitude = -1.2\n").empty());  // gap closed initially
    CHECK(!errors_of("[initial]\nw_family = file\n").empty());
    CHECK(!errors_of("key = 1\n").empty());
    CHECK_THROWS_AS(load_config("/nonexistent/memsim.ini"), ConfigError);
    CHECK_THROWS(parse_format("xml"));
    CHECK(parse_format("json") == ExportFormat::json);
}

TEST_CASE("auto horizon resolves to a recorded number")
{
    const RunConfig c = parse_config("[discretization]\nk_max = 16\n[run]\nhorizon = auto\n");
    CHECK(!c.horizon_auto);
    CHECK(c.horizon_resolved);
    CHECK(c.horizon > 0.0);
    const SpectralGrid grid(16);
    const CoupledState s = initial_state(c, grid);
    CHECK(c.horizon <= estimate_horizon(grid, c.params, s.vw, GridField(s.u)).T0_calibrated);
    const std::string echo = canonical_text(c);
    CHECK(echo.find("horizon = auto") == std::string::npos);
    CHECK(parse_config(echo).horizon == c.horizon);
}

TEST_CASE("file-loaded initial data")
{
    const fs::path dir = scratch("file_family");
    {
        std::ofstream f(dir / "w.txt");
        for (int j = 1; j <= 8; ++j) f << 1.0 + 0.01 * j * (9 - j) << "\n";
    }
    {
        std::ofstream f(dir / "cfg.ini");
        f << "[initial]\nw_family = file\nw_file = w.txt\n[discretization]\nk_max = 8\nN_t = 10\n[run]\nhorizon = 0.001\n";
    }
    const RunConfig c = load_config(dir / "cfg.ini");
    CHECK(fs::path(c.w0.file).is_absolute());
    const CoupledState s = initial_state(c, SpectralGrid(8));
    const SpectralGrid grid(8);
    const Vec w = grid.to_grid(s.vw.w.coeffs);
    for (int j = 1; j <= 8; ++j) CHECK(w(j - 1) == doctest::Approx(0.01 * j * (9 - j)).epsilon(1e-12));
    CHECK(canonical_text(parse_config(canonical_text(c))) == canonical_text(c));
    {
        std::ofstream f(dir / "short.txt");
        f << "1 1 1\n";
    }
    CHECK_THROWS_AS(parse_config("[initial]\nw_family = file\nw_file = short.txt\n[discretization]\nk_max = 8\n", dir),
                    ConfigError);
}

TEST_CASE("simulate: moderate run converges above kappa/2, large beta_F quenches")
{
    const RunRecord rec = cmd_simulate(parse_config(kSmall));
    CHECK(rec.report.termination == Termination::converged);
    for (const auto& d : rec.report.series) CHECK(d.min_w >= 0.5 * rec.report.horizon.kappa);

    const RunRecord q = cmd_simulate(parse_config("[model]\nbeta_F = 100\nbeta_p = 0.1\n[initial]\nu_family = constant\n"
                                                  "w_family = constant\n[discretization]\nk_max = 32\nN_t = 400\n"
                                                  "[run]\nhorizon = 0.5\n"));
    CHECK(q.report.termination == Termination::quench);
    CHECK(q.report.quench_time == doctest::Approx(0.1057).epsilon(0.01));
    const std::string js = record_json(q);
    CHECK(js.find("\"termination\": \"quench\"") != std::string::npos);
}

TEST_CASE("snapshot at t = 0 equals the configured initial data")
{
    const RunConfig c = parse_config(kSmall);
    const RunRecord rec = cmd_simulate(c);
    REQUIRE(rec.snapshots.size() == 2);
    const Snapshot& s = rec.snapshots[0];
    CHECK(s.t == 0.0);
    CHECK(s.x.size() == 18);
    for (int j = 0; j <= 17; ++j) {
        const double x = j / 17.0;
        CHECK(s.x(j) == doctest::Approx(x));
        CHECK(std::abs(s.u(j) - (1.0 + 0.1 * std::sin(M_PI * x))) < 1e-14);
        CHECK(std::abs(s.w(j) - (1.0 + 0.05 * std::sin(M_PI * x))) < 1e-14);
        CHECK(std::abs(s.v(j)) < 1e-15);
    }
    CHECK(rec.snapshots[1].t == doctest::Approx(0.005));
}

TEST_CASE("export: documented headers, identical bytes on rerun, JSON round trip")
{
    const RunConfig c = parse_config(kSmall);
    RunRecord a = cmd_simulate(c), b = cmd_simulate(c);
    const fs::path da = scratch("det_a"), db = scratch("det_b");
    write_record(a, da, ExportFormat::csv);
    write_record(b, db, ExportFormat::csv);
    CHECK(a.files == std::vector<std::string>{"config.ini", "record.json", "series.csv", "snapshots.csv"});
    for (const auto& f : a.files) CHECK(slurp(da / f) == slurp(db / f));

    const std::string series = slurp(da / "series.csv");
    CHECK(series.substr(0, series.find('\n')) == "t,min_w,max_u,mass_residual,norm_X,contraction_ratio");
    const std::string snaps = slurp(da / "snapshots.csv");
    CHECK(snaps.substr(0, snaps.find('\n')) == "t,x,u,v,w");
    CHECK(slurp(da / "config.ini") == canonical_text(c));

    const RunRecord back = load_record(da);
    CHECK(record_json(back) == record_json(a));
    CHECK(series_csv(back) == series);
    CHECK(back.report.series.size() == a.report.series.size());
    CHECK(std::isnan(back.report.quench_time));

    const fs::path dj = scratch("json_export");
    const auto files = export_record(back, dj, ExportFormat::json);
    CHECK(files == std::vector<std::string>{"series.json", "snapshots.json"});
    CHECK(slurp(dj / "series.json").find("\"schema_version\": 1") != std::string::npos);
    CHECK_THROWS(record_from_json("{\"schema_version\": 99}"));
}

TEST_CASE("sweep: 1x1 equals simulate, empty grid errors, parallel cells")
{
    const std::string base = kSmall;
    const RunConfig one = parse_config(base + "[sweep]\nbeta_F = 0.5\nbeta_p = 1\n");
    const fs::path d = scratch("sweep1");
    const SweepResult r = cmd_sweep(one, d, ExportFormat::csv, 2);
    REQUIRE(r.cells.size() == 1);
    RunRecord sim = cmd_simulate(parse_config(base));
    const fs::path ds = scratch("sweep1_sim");
    write_record(sim, ds, ExportFormat::csv);
    CHECK(slurp(d / "cell_0_0" / "series.csv") == slurp(ds / "series.csv"));
    CHECK(slurp(d / "cell_0_0" / "snapshots.csv") == slurp(ds / "snapshots.csv"));
    CHECK(r.cells[0].termination == "converged");

    CHECK_THROWS(cmd_sweep(parse_config(base), scratch("sweep0"), ExportFormat::csv, 1));

    const RunConfig grid = parse_config(base + "[sweep]\nbeta_F = 0.25, 0.5, 1\nbeta_p = 0.5, 1\n");
    const fs::path dg = scratch("sweep_grid");
    const SweepResult g1 = cmd_sweep(grid, dg, ExportFormat::csv, 4);
    CHECK(g1.cells.size() == 6);
    const std::string csv = slurp(dg / "sweep.csv");
    CHECK(csv.substr(0, csv.find('\n')) == "beta_F,beta_p,termination,T_used,quench_time");
    CHECK(sweep_csv(cmd_sweep(grid, scratch("sweep_grid_serial"), ExportFormat::csv, 1)) == csv);
}

TEST_CASE("verify: unknown suite rejected, semigroup suite passes with a JSON summary")
{
    CHECK_THROWS_AS(cmd_verify("nosuchsuite"), std::invalid_argument);
    CHECK(suite_names().size() == 7);
    const VerifySummary s = cmd_verify("semigroup");
    CHECK(s.pass);
    REQUIRE(s.results.size() == 1);
    CHECK(s.results[0].id == 3);
    const std::string js = summary_json(s);
    CHECK(js.find("\"schema_version\": 1") != std::string::npos);
    CHECK(js.find("\"pass\": true") != std::string::npos);
}
