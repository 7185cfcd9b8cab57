#include "mems/cli_io.hpp"

#include "mems/grid_norms.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace mems {

namespace {

std::string join(const std::vector<std::string>& v)
{
    std::string s = "invalid configuration:";
    for (const auto& e : v) s += "\n  " + e;
    return s;
}

std::string trim(const std::string& s)
{
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

// Shortest text that parses back to the same double.
std::string num(double x)
{
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

const std::map<std::string, std::set<std::string>>& schema()
{
    static const std::map<std::string, std::set<std::string>> s{
        {"model", {"beta_F", "beta_p", "theta1", "theta2", "eps1"}},
        {"initial",
         {"u_family", "u_amplitude", "u_mode", "u_file", "w_family", "w_amplitude", "w_mode", "w_file", "v_family",
          "v_amplitude", "v_mode", "v_file"}},
        {"discretization", {"k_max", "n", "N_t"}},
        {"run", {"horizon", "tol", "quench_eps", "u_cap", "relinearize", "max_attempts", "snapshot_times", "seed"}},
        {"sweep", {"beta_F", "beta_p"}},
    };
    return s;
}

class Reader {
public:
    std::map<std::string, std::string> values;  // "section.key" -> raw
    std::map<std::string, int> lines;
    std::vector<std::string> errors;

    bool has(const std::string& k) const { return values.count(k) != 0; }

    void real(const std::string& k, double& out)
    {
        if (!has(k)) return;
        const std::string& s = values.at(k);
        double v = 0.0;
        const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
        if (r.ec != std::errc() || r.ptr != s.data() + s.size())
            errors.push_back(where(k) + ": expected a number, got '" + s + "'");
        else
            out = v;
    }
    template <typename I>
    void integer(const std::string& k, I& out)
    {
        if (!has(k)) return;
        const std::string& s = values.at(k);
        I v{};
        const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
        if (r.ec != std::errc() || r.ptr != s.data() + s.size())
            errors.push_back(where(k) + ": expected an integer, got '" + s + "'");
        else
            out = v;
    }
    void boolean(const std::string& k, bool& out)
    {
        if (!has(k)) return;
        const std::string& s = values.at(k);
        if (s == "true")
            out = true;
        else if (s == "false")
            out = false;
        else
            errors.push_back(where(k) + ": expected true or false, got '" + s + "'");
    }
    void list(const std::string& k, std::vector<double>& out)
    {
        if (!has(k)) return;
        out.clear();
        std::stringstream ss(values.at(k));
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            double v = 0.0;
            const auto r = std::from_chars(item.data(), item.data() + item.size(), v);
            if (item.empty() || r.ec != std::errc() || r.ptr != item.data() + item.size()) {
                errors.push_back(where(k) + ": bad list entry '" + item + "'");
                return;
            }
            out.push_back(v);
        }
    }
    void family(const std::string& k, InitialFamily& out)
    {
        if (!has(k)) return;
        const std::string& s = values.at(k);
        if (s == "constant")
            out = InitialFamily::constant;
        else if (s == "bump")
            out = InitialFamily::bump;
        else if (s == "file")
            out = InitialFamily::file;
        else
            errors.push_back(where(k) + ": expected constant, bump or file, got '" + s + "'");
    }
    std::string where(const std::string& k) const { return k + " (line " + std::to_string(lines.at(k)) + ")"; }
};

const char* family_name(InitialFamily f)
{
    switch (f) {
        case InitialFamily::constant: return "constant";
        case InitialFamily::bump: return "bump";
        case InitialFamily::file: return "file";
    }
    return "constant";
}

std::string list_text(const std::vector<double>& v)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + num(v[i]);
    return s;
}

Vec read_values(const std::filesystem::path& path, int n, std::vector<std::string>& errors, const std::string& key)
{
    std::ifstream in(path);
    if (!in) {
        errors.push_back(key + ": cannot read '" + path.string() + "'");
        return {};
    }
    std::vector<double> v;
    std::string tok;
    while (in >> tok) {
        double x = 0.0;
        const auto r = std::from_chars(tok.data(), tok.data() + tok.size(), x);
        if (r.ec != std::errc() || r.ptr != tok.data() + tok.size()) {
            errors.push_back(key + ": non-numeric entry '" + tok + "' in " + path.string());
            return {};
        }
        v.push_back(x);
    }
    if (static_cast<int>(v.size()) != n) {
        errors.push_back(key + ": expected " + std::to_string(n) + " interior values, found " +
                         std::to_string(v.size()));
        return {};
    }
    return Eigen::Map<const Vec>(v.data(), n);
}

void check_field(const FieldSpec& f, const char* name, int k_max, std::vector<std::string>& errors)
{
    const std::string p = std::string("initial.") + name;
    if (f.mode < 1 || f.mode > k_max) errors.push_back(p + "_mode: must lie in [1, k_max]");
    if (!std::isfinite(f.amplitude)) errors.push_back(p + "_amplitude: must be finite");
    if (f.family == InitialFamily::constant && f.amplitude != 0.0)
        errors.push_back(p + "_amplitude: must be 0 for the constant family");
    if (f.family == InitialFamily::file && f.file.empty()) errors.push_back(p + "_file: required for the file family");
    if (f.family != InitialFamily::file && !f.file.empty())
        errors.push_back(p + "_file: only allowed with the file family");
}

// Field values on the interior nodes, or modes for the plate.
Vec field_interior(const FieldSpec& f, int n, const std::filesystem::path& base, std::vector<std::string>& errors,
                   const std::string& key)
{
    Vec out = Vec::Zero(n);
    if (f.family == InitialFamily::bump)
        for (int j = 1; j <= n; ++j) out(j - 1) = f.amplitude * std::sin(f.mode * M_PI * GridField::node(j, n));
    if (f.family == InitialFamily::file) {
        const std::filesystem::path file(f.file);
        const std::filesystem::path p = file.is_absolute() ? file : base / file;
        out = read_values(p, n, errors, key);
    }
    return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors) : std::invalid_argument(join(errors)), errors_(std::move(errors))
{
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir)
{
    Reader rd;
    std::vector<std::string>& errors = rd.errors;
    {
        std::stringstream ss(text);
        std::string line, section;
        int ln = 0;
        while (std::getline(ss, line)) {
            ++ln;
            line = trim(line);
            if (line.empty() || line[0] == '#' || line[0] == ';') continue;
            if (line.front() == '[') {
                if (line.back() != ']') {
                    errors.push_back("line " + std::to_string(ln) + ": malformed section header");
                    continue;
                }
                section = trim(line.substr(1, line.size() - 2));
                if (!schema().count(section)) errors.push_back("line " + std::to_string(ln) + ": unknown section [" + section + "]");
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                errors.push_back("line " + std::to_string(ln) + ": expected key = value");
                continue;
            }
            const std::string key = trim(line.substr(0, eq));
            const std::string val = trim(line.substr(eq + 1));
            if (section.empty()) {
                errors.push_back("line " + std::to_string(ln) + ": key '" + key + "' outside any section");
                continue;
            }
            const auto sec = schema().find(section);
            if (sec == schema().end()) continue;
            if (!sec->second.count(key)) {
                errors.push_back("line " + std::to_string(ln) + ": unknown key '" + key + "' in [" + section + "]");
                continue;
            }
            const std::string full = section + "." + key;
            if (rd.has(full)) {
                errors.push_back("line " + std::to_string(ln) + ": duplicate key " + full);
                continue;
            }
            rd.values[full] = val;
            rd.lines[full] = ln;
        }
    }

    RunConfig c;
    c.base_dir = base_dir;
    rd.real("model.beta_F", c.params.beta_F);
    rd.real("model.beta_p", c.params.beta_p);
    double t1 = c.params.lift.theta1, t2 = c.params.lift.theta2;
    rd.real("model.theta1", t1);
    rd.real("model.theta2", t2);
    rd.real("model.eps1", c.params.eps1);
    FieldSpec* fields[3] = {&c.u0, &c.w0, &c.v0};
    const char* names[3] = {"u", "w", "v"};
    for (int i = 0; i < 3; ++i) {
        const std::string p = std::string("initial.") + names[i];
        rd.family(p + "_family", fields[i]->family);
        rd.real(p + "_amplitude", fields[i]->amplitude);
        rd.integer(p + "_mode", fields[i]->mode);
        if (rd.has(p + "_file")) {
            // stored absolute so the echoed config stays valid wherever it is written
            const std::filesystem::path f(rd.values.at(p + "_file"));
            fields[i]->file = std::filesystem::absolute(f.is_absolute() ? f : base_dir / f).lexically_normal().string();
        }
        // a family switch without an explicit amplitude drops the default bump
        if (fields[i]->family == InitialFamily::constant && !rd.has(p + "_amplitude")) fields[i]->amplitude = 0.0;
    }
    rd.integer("discretization.k_max", c.k_max);
    int n = c.k_max;
    rd.integer("discretization.n", n);
    rd.integer("discretization.N_t", c.N_t);
    if (rd.has("run.horizon") && rd.values.at("run.horizon") == "auto")
        c.horizon_auto = true;
    else
        rd.real("run.horizon", c.horizon);
    rd.real("run.tol", c.tol);
    rd.real("run.quench_eps", c.quench_eps);
    rd.real("run.u_cap", c.u_cap);
    rd.boolean("run.relinearize", c.relinearize);
    rd.integer("run.max_attempts", c.max_attempts);
    rd.list("run.snapshot_times", c.snapshot_times);
    rd.integer("run.seed", c.seed);
    rd.list("sweep.beta_F", c.sweep_beta_F);
    rd.list("sweep.beta_p", c.sweep_beta_p);

    const auto& P = c.params;
    if (!(P.beta_F > 0.0)) errors.push_back("model.beta_F: must be > 0");
    if (!(P.beta_p > 0.0)) errors.push_back("model.beta_p: must be > 0");
    if (!(t1 > 0.0)) errors.push_back("model.theta1: must be > 0");
    if (!(t2 > 0.0)) errors.push_back("model.theta2: must be > 0");
    if (!(P.eps1 > 0.0)) errors.push_back("model.eps1: must be > 0");
    if (t1 > 0.0 && P.eps1 > t1) errors.push_back("model.eps1: must not exceed theta1");
    if (t1 > 0.0 && t2 > 0.0) c.params.lift = BoundaryLift(t1, t2);
    if (c.k_max < 4 || c.k_max > 1024) errors.push_back("discretization.k_max: must lie in [4, 1024]");
    if (n != c.k_max) errors.push_back("discretization.n: collocation uses n = k_max");
    if (c.N_t < 1) errors.push_back("discretization.N_t: must be >= 1");
    if (!c.horizon_auto && !(c.horizon > 0.0)) errors.push_back("run.horizon: must be > 0 or auto");
    if (!(c.tol > 0.0 && c.tol <= 1e-2)) errors.push_back("run.tol: must lie in (0, 1e-2]");
    if (rd.has("run.quench_eps") && !(c.quench_eps >= 0.0)) errors.push_back("run.quench_eps: must be >= 0");
    if (rd.has("run.u_cap") && !(c.u_cap > t1)) errors.push_back("run.u_cap: must exceed theta1");
    if (c.max_attempts < 1) errors.push_back("run.max_attempts: must be >= 1");
    for (double t : c.snapshot_times)
        if (!(t >= 0.0) || (!c.horizon_auto && t > c.horizon)) {
            errors.push_back("run.snapshot_times: entries must lie in [0, horizon]");
            break;
        }
    if (!std::is_sorted(c.snapshot_times.begin(), c.snapshot_times.end()))
        errors.push_back("run.snapshot_times: must be ascending");
    for (double b : c.sweep_beta_F)
        if (!(b > 0.0)) errors.push_back("sweep.beta_F: entries must be > 0");
    for (double b : c.sweep_beta_p)
        if (!(b > 0.0)) errors.push_back("sweep.beta_p: entries must be > 0");
    check_field(c.u0, "u", c.k_max, errors);
    check_field(c.w0, "w", c.k_max, errors);
    check_field(c.v0, "v", c.k_max, errors);
    if (!errors.empty()) throw ConfigError(errors);

    // data-dependent invariants need a grid
    const SpectralGrid grid(c.k_max);
    const CoupledState s = initial_state(c, grid);
    if (s.u.minCoeff() < c.params.eps1) errors.push_back("initial.u: initial pressure falls below eps1");
    const double gap = min_gap(grid, s, c.params);
    const double qe = c.quench_eps >= 0.0 ? c.quench_eps : 1e-3 * c.params.lift.theta2;
    if (!(gap > qe)) errors.push_back("initial.w: initial gap is at or below the quench threshold");
    if (!errors.empty()) throw ConfigError(errors);

    if (c.horizon_auto) {
        HorizonOptions ho;
        ho.seed = c.seed;
        const HorizonEstimate he = estimate_horizon(grid, c.params, s.vw, GridField(s.u), ho);
        const GridField v0(grid.to_grid(s.vw.v.coeffs));
        const GridField w0(Vec(grid.to_grid(s.vw.w.coeffs).array() + c.params.lift.theta2));
        const GraphNormReport gn = graph_norm_equivalence(assemble_Pstar(GridField(s.u), v0, w0, c.params), 64);
        GammaHorizonInputs gh;
        gh.gamma0 = gn.gamma0;
        gh.pstar_norm = gn.pstar_norm;
        gh.u0_H2 = grid_norm(s.u, c.params.lift.theta1, c.params.lift.theta1, 2);
        gh.kappa = he.kappa;
        gh.C = he.C;
        c.horizon = std::min(he.T0_calibrated, gamma_horizon_formula(gh));
        c.horizon_auto = false;
        c.horizon_resolved = true;
        for (double& t : c.snapshot_times) t = std::min(t, c.horizon);
        if (!(c.horizon > 0.0)) throw ConfigError({"run.horizon: auto resolved to a non-positive value"});
    }
    return c;
}

RunConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError({"cannot read config file '" + path.string() + "'"});
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.parent_path());
}

std::string canonical_text(const RunConfig& c)
{
    std::ostringstream o;
    o << "[model]\n";
    o << "beta_F = " << num(c.params.beta_F) << "\n";
    o << "beta_p = " << num(c.params.beta_p) << "\n";
    o << "theta1 = " << num(c.params.lift.theta1) << "\n";
    o << "theta2 = " << num(c.params.lift.theta2) << "\n";
    o << "eps1 = " << num(c.params.eps1) << "\n\n[initial]\n";
    const FieldSpec* fields[3] = {&c.u0, &c.w0, &c.v0};
    const char* names[3] = {"u", "w", "v"};
    for (int i = 0; i < 3; ++i) {
        o << names[i] << "_family = " << family_name(fields[i]->family) << "\n";
        o << names[i] << "_amplitude = " << num(fields[i]->amplitude) << "\n";
        o << names[i] << "_mode = " << fields[i]->mode << "\n";
        if (!fields[i]->file.empty()) o << names[i] << "_file = " << fields[i]->file << "\n";
    }
    o << "\n[discretization]\n";
    o << "k_max = " << c.k_max << "\n";
    o << "n = " << c.k_max << "\n";
    o << "N_t = " << c.N_t << "\n\n[run]\n";
    if (c.horizon_resolved) o << "# horizon resolved from auto\n";
    o << "horizon = " << (c.horizon_auto ? std::string("auto") : num(c.horizon)) << "\n";
    o << "tol = " << num(c.tol) << "\n";
    if (c.quench_eps >= 0.0) o << "quench_eps = " << num(c.quench_eps) << "\n";
    if (c.u_cap >= 0.0) o << "u_cap = " << num(c.u_cap) << "\n";
    o << "relinearize = " << (c.relinearize ? "true" : "false") << "\n";
    o << "max_attempts = " << c.max_attempts << "\n";
    o << "snapshot_times = " << list_text(c.snapshot_times) << "\n";
    o << "seed = " << c.seed << "\n";
    if (!c.sweep_beta_F.empty() || !c.sweep_beta_p.empty()) {
        o << "\n[sweep]\n";
        if (!c.sweep_beta_F.empty()) o << "beta_F = " << list_text(c.sweep_beta_F) << "\n";
        if (!c.sweep_beta_p.empty()) o << "beta_p = " << list_text(c.sweep_beta_p) << "\n";
    }
    return o.str();
}

std::uint64_t fnv1a64(const std::string& bytes)
{
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

std::string config_hash(const RunConfig& cfg)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical_text(cfg))));
    return buf;
}

CoupledState initial_state(const RunConfig& cfg, const SpectralGrid& grid)
{
    std::vector<std::string> errors;
    const int n = grid.n();
    CoupledState s;
    s.u = field_interior(cfg.u0, n, cfg.base_dir, errors, "initial.u_file").array() +
          (cfg.u0.family == InitialFamily::file ? 0.0 : cfg.params.lift.theta1);
    Vec w = field_interior(cfg.w0, n, cfg.base_dir, errors, "initial.w_file");
    if (cfg.w0.family == InitialFamily::file) w.array() -= cfg.params.lift.theta2;
    const Vec v = field_interior(cfg.v0, n, cfg.base_dir, errors, "initial.v_file");
    if (!errors.empty()) throw ConfigError(errors);
    s.vw = StateVW(ModeVector(grid.to_modes(v)), ModeVector(grid.to_modes(w)));
    s.t = 0.0;
    return s;
}

RunOptions run_options(const RunConfig& cfg)
{
    RunOptions o;
    o.T = cfg.horizon;
    o.N_t = cfg.N_t;
    o.tol = cfg.tol;
    o.quench_eps = cfg.quench_eps;
    o.u_cap = cfg.u_cap;
    o.relinearize = cfg.relinearize;
    o.max_attempts = cfg.max_attempts;
    o.horizon.seed = cfg.seed;
    return o;
}

ExportFormat parse_format(const std::string& s)
{
    if (s == "csv") return ExportFormat::csv;
    if (s == "json") return ExportFormat::json;
    throw std::invalid_argument("unknown format '" + s + "' (expected csv or json)");
}

}  // namespace mems
