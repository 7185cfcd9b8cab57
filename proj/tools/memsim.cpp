#include "mems/cli_io.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

namespace {

enum Exit { ok = 0, verify_failed = 1, usage = 2, runtime = 3 };

void print_results(const mems::VerifySummary& s)
{
    for (const auto& r : s.results)
        std::printf("[%s] %2d %-34s measured=%-12.4g threshold=%-12.4g %.2fs  %s\n", r.pass ? "PASS" : "FAIL", r.id,
                    r.name.c_str(), r.measured, r.threshold, r.seconds, r.detail.c_str());
    std::printf("suite %s: %s\n", s.suite.c_str(), s.pass ? "PASS" : "FAIL");
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Coupled MEMS plate / squeeze-film solver"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", suite = "all", format = "csv";
    int jobs = 1;

    auto* sim = app.add_subcommand("simulate", "Run one coupled simulation");
    sim->add_option("--config", config_path, "INI configuration")->required()->check(CLI::ExistingFile);
    sim->add_option("--out", out_dir, "Output directory");
    sim->add_option("--format", format, "Series format")->check(CLI::IsMember({"csv", "json"}));

    auto* ver = app.add_subcommand("verify", "Run verification criteria");
    ver->add_option("--suite", suite, "Suite name")->check(CLI::IsMember(mems::suite_names()));
    ver->add_option("--out", out_dir, "Directory for summary.json");

    auto* swp = app.add_subcommand("sweep", "Parameter sweep over beta_F x beta_p");
    swp->add_option("--config", config_path, "INI configuration with a [sweep] section")
        ->required()
        ->check(CLI::ExistingFile);
    swp->add_option("--out", out_dir, "Output directory");
    swp->add_option("--format", format, "Per-cell format")->check(CLI::IsMember({"csv", "json"}));
    swp->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

    auto* exp = app.add_subcommand("export", "Re-export a stored run record");
    std::string record_dir;
    exp->add_option("--config", record_dir, "Run directory or record.json")->required()->check(CLI::ExistingPath);
    exp->add_option("--out", out_dir, "Output directory");
    exp->add_option("--format", format, "Target format")->check(CLI::IsMember({"csv", "json"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? ok : usage;
    }

    try {
        const mems::ExportFormat fmt = mems::parse_format(format);
        if (*sim) {
            auto rec = mems::cmd_simulate(mems::load_config(config_path));
            mems::write_record(rec, out_dir, fmt);
            const auto& r = rec.report;
            std::printf("termination=%s T_used=%.6g segments=%d config_hash=%s\n", to_string(r.termination),
                        r.T_used, r.segments, rec.config_hash.c_str());
            if (!r.diagnostic.empty()) std::printf("%s\n", r.diagnostic.c_str());
            return ok;
        }
        if (*ver) {
            const auto s = mems::cmd_verify(suite);
            print_results(s);
            std::filesystem::create_directories(out_dir);
            std::ofstream(std::filesystem::path(out_dir) / "summary.json") << mems::summary_json(s);
            return s.pass ? ok : verify_failed;
        }
        if (*swp) {
            const auto res = mems::cmd_sweep(mems::load_config(config_path), out_dir, fmt, jobs);
            std::cout << mems::sweep_csv(res);
            for (const auto& f : res.monotonicity_flags) std::printf("flag: %s\n", f.c_str());
            for (const auto& c : res.cells)
                if (!c.error.empty()) std::fprintf(stderr, "%s: %s\n", c.directory.c_str(), c.error.c_str());
            return ok;
        }
        if (*exp) {
            const auto files = mems::export_record(mems::load_record(record_dir), out_dir, fmt);
            for (const auto& f : files) std::printf("%s\n", f.c_str());
            return ok;
        }
    } catch (const mems::ConfigError& e) {
        for (const auto& m : e.errors()) std::fprintf(stderr, "config: %s\n", m.c_str());
        return usage;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return usage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return runtime;
    }
    return usage;
}
