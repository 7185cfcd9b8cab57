#pragma once

#include "mems/verify_bench.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mems {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kCodeVersion = "memsim 0.1.0";

// All violations found while parsing or validating, one message each.
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(std::vector<std::string> errors);
    const std::vector<std::string>& errors() const { return errors_; }

private:
    std::vector<std::string> errors_;
};

enum class InitialFamily { constant, bump, file };

struct FieldSpec {
    InitialFamily family = InitialFamily::constant;
    double amplitude = 0.0;
    int mode = 1;
    std::string file;  // whitespace-separated interior values when family = file
};

struct RunConfig {
    ModelParams params;
    FieldSpec u0{InitialFamily::bump, 0.1, 1, {}};
    FieldSpec w0{InitialFamily::bump, 0.05, 1, {}};
    FieldSpec v0{InitialFamily::constant, 0.0, 1, {}};
    int k_max = 64;
    int N_t = 200;
    bool horizon_auto = false;
    bool horizon_resolved = false;  // horizon came from "auto"
    double horizon = 0.05;
    double tol = 1e-10;
    double quench_eps = -1.0;
    double u_cap = -1.0;
    bool relinearize = true;
    int max_attempts = 20000;
    std::vector<double> snapshot_times{0.0};
    unsigned long long seed = 1;
    std::vector<double> sweep_beta_F;
    std::vector<double> sweep_beta_p;
    std::filesystem::path base_dir;  // relative file paths resolve against this
};

// Parses, validates and resolves "auto" horizons. Throws ConfigError listing every problem.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

// Canonical echo: every key, fixed order, round-trip number formatting.
std::string canonical_text(const RunConfig& cfg);
std::uint64_t fnv1a64(const std::string& bytes);
std::string config_hash(const RunConfig& cfg);

CoupledState initial_state(const RunConfig& cfg, const SpectralGrid& grid);
RunOptions run_options(const RunConfig& cfg);

struct Snapshot {
    double t = 0.0;
    Vec x, u, v, w;  // full grid including the boundary nodes
};

struct RunRecord {
    std::string config_hash;
    std::string config_text;
    std::string code_version = kCodeVersion;
    RunReport report;
    std::vector<Snapshot> snapshots;
    std::vector<std::string> files;
};

enum class ExportFormat { csv, json };
ExportFormat parse_format(const std::string& s);

RunRecord cmd_simulate(const RunConfig& cfg);
// Writes record.json plus the series and snapshots in the chosen format; returns the files written.
std::vector<std::string> write_record(RunRecord& rec, const std::filesystem::path& dir, ExportFormat fmt);

extern const char* const kSeriesColumns[6];
std::string series_csv(const RunRecord& rec);
std::string snapshots_csv(const RunRecord& rec);
std::string record_json(const RunRecord& rec);
// Inverse of record_json for the fields the schema carries (no trajectory, no anchor).
RunRecord record_from_json(const std::string& text);
// Accepts a run directory (reads record.json inside it) or the record file itself.
RunRecord load_record(const std::filesystem::path& path);
std::vector<std::string> export_record(const RunRecord& rec, const std::filesystem::path& dir, ExportFormat fmt);

struct VerifySummary {
    std::string suite;
    std::vector<CriterionResult> results;
    bool pass = false;
};

const std::vector<std::string>& suite_names();
VerifySummary cmd_verify(const std::string& suite);
std::string summary_json(const VerifySummary& s);

struct SweepCell {
    double beta_F = 0.0;
    double beta_p = 0.0;
    std::string termination;  // run termination, or "error"
    double T_used = 0.0;
    std::optional<double> quench_time;
    std::string error;
    std::string directory;
};

struct SweepResult {
    std::vector<SweepCell> cells;  // beta_F major, beta_p minor
    std::vector<std::string> monotonicity_flags;
};

SweepResult cmd_sweep(const RunConfig& cfg, const std::filesystem::path& out, ExportFormat fmt, int jobs);
std::string sweep_csv(const SweepResult& s);

}  // namespace mems
