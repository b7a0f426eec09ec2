#pragma once

#include "paraopt/control_space.hpp"
#include "paraopt/optimal_control.hpp"
#include "paraopt/presets.hpp"
#include "paraopt/sweep.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace paraopt {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

/// Minimal strict TOML reader covering the documented config schema:
/// single-level [section] headers and key = value lines where value is a
/// string, number, boolean or flat array of numbers. Unknown keys are fatal
/// by design; a silent typo in a tolerance name would invalidate a run.
struct TomlValue {
    enum class Type { number, string, boolean, number_array };
    Type type = Type::number;
    double number = 0.0;
    bool is_integer = false;
    std::string text;
    bool boolean = false;
    std::vector<double> array;
    int line = 0;
};

class TomlTable {
public:
    static TomlTable parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("config file not found: " + path);
        std::stringstream buffer;
        buffer << in.rdbuf();
        return parse(buffer.str(), path);
    }

    static TomlTable parse(const std::string& text, const std::string& origin = "<string>") {
        TomlTable table;
        table.origin_ = origin;
        std::istringstream in(text);
        std::string line;
        std::string section;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            std::string body = strip_comment(line, line_no, origin);
            body = trim(body);
            if (body.empty()) continue;
            if (body.front() == '[') {
                if (body.back() != ']')
                    throw ConfigError(origin + ":" + std::to_string(line_no) +
                                      ": malformed section header");
                section = trim(body.substr(1, body.size() - 2));
                if (section.empty())
                    throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty section name");
                table.sections_[section]; // record even if empty
                continue;
            }
            const auto eq = body.find('=');
            if (eq == std::string::npos)
                throw ConfigError(origin + ":" + std::to_string(line_no) +
                                  ": expected 'key = value'");
            const std::string key = trim(body.substr(0, eq));
            const std::string value = trim(body.substr(eq + 1));
            if (key.empty() || value.empty())
                throw ConfigError(origin + ":" + std::to_string(line_no) +
                                  ": expected 'key = value'");
            auto& sec = table.sections_[section];
            if (sec.count(key))
                throw ConfigError(origin + ":" + std::to_string(line_no) + ": duplicate key '" +
                                  key + "'");
            sec.emplace(key, parse_value(value, line_no, origin));
        }
        return table;
    }

    const std::map<std::string, std::map<std::string, TomlValue>>& sections() const {
        return sections_;
    }
    const std::string& origin() const { return origin_; }

private:
    static std::string trim(const std::string& s) {
        std::size_t b = 0, e = s.size();
        while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
        return s.substr(b, e - b);
    }

    static std::string strip_comment(const std::string& line, int line_no,
                                     const std::string& origin) {
        bool in_string = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') in_string = !in_string;
            else if (line[i] == '#' && !in_string) return line.substr(0, i);
        }
        if (in_string)
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": unterminated string");
        return line;
    }

    static TomlValue parse_value(const std::string& raw, int line_no, const std::string& origin) {
        TomlValue v;
        v.line = line_no;
        auto fail = [&](const std::string& what) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + what + " in '" +
                              raw + "'");
        };
        if (raw.front() == '"') {
            if (raw.size() < 2 || raw.back() != '"') fail("unterminated string");
            v.type = TomlValue::Type::string;
            v.text = raw.substr(1, raw.size() - 2);
            if (v.text.find('"') != std::string::npos) fail("embedded quote");
            return v;
        }
        if (raw == "true" || raw == "false") {
            v.type = TomlValue::Type::boolean;
            v.boolean = (raw == "true");
            return v;
        }
        if (raw.front() == '[') {
            if (raw.back() != ']') fail("unterminated array");
            v.type = TomlValue::Type::number_array;
            std::string inner = trim(raw.substr(1, raw.size() - 2));
            if (inner.empty()) return v;
            std::size_t pos = 0;
            while (pos <= inner.size()) {
                std::size_t comma = inner.find(',', pos);
                const std::string item =
                    trim(comma == std::string::npos ? inner.substr(pos)
                                                    : inner.substr(pos, comma - pos));
                if (item.empty()) fail("empty array element");
                v.array.push_back(parse_number(item, fail));
                if (comma == std::string::npos) break;
                pos = comma + 1;
            }
            return v;
        }
        v.type = TomlValue::Type::number;
        v.number = parse_number(raw, fail);
        v.is_integer = raw.find_first_of(".eE") == std::string::npos;
        return v;
    }

    template <typename Fail>
    static double parse_number(const std::string& s, Fail&& fail) {
        char* end = nullptr;
        const double out = std::strtod(s.c_str(), &end);
        if (end != s.c_str() + s.size()) fail("not a number");
        return out;
    }

    std::string origin_;
    std::map<std::string, std::map<std::string, TomlValue>> sections_;
};

/// Schema-checked accessor for one section; tracks which keys were consumed
/// so the loader can reject the unknown ones by name.
class SectionReader {
public:
    SectionReader(const TomlTable& table, const std::string& name) : table_(table), name_(name) {
        auto it = table.sections().find(name);
        if (it != table.sections().end()) entries_ = &it->second;
    }

    bool present() const { return entries_ != nullptr; }

    double number(const std::string& key, double fallback) {
        const TomlValue* v = fetch(key);
        if (!v) return fallback;
        require(v, TomlValue::Type::number, key, "a number");
        return v->number;
    }

    int integer(const std::string& key, int fallback) {
        const TomlValue* v = fetch(key);
        if (!v) return fallback;
        require(v, TomlValue::Type::number, key, "an integer");
        if (!v->is_integer) error(key, "expects an integer", v->line);
        return static_cast<int>(v->number);
    }

    std::string text(const std::string& key, const std::string& fallback) {
        const TomlValue* v = fetch(key);
        if (!v) return fallback;
        require(v, TomlValue::Type::string, key, "a string");
        return v->text;
    }

    std::vector<double> numbers(const std::string& key, std::vector<double> fallback) {
        const TomlValue* v = fetch(key);
        if (!v) return fallback;
        require(v, TomlValue::Type::number_array, key, "an array of numbers");
        return v->array;
    }

    std::optional<double> optional_number(const std::string& key) {
        const TomlValue* v = fetch(key);
        if (!v) return std::nullopt;
        require(v, TomlValue::Type::number, key, "a number");
        return v->number;
    }

    void finish() const {
        if (!entries_) return;
        for (const auto& [key, value] : *entries_)
            if (!consumed_.count(key))
                error(key, "is not a recognized key", value.line);
    }

private:
    const TomlValue* fetch(const std::string& key) {
        consumed_.insert(key);
        if (!entries_) return nullptr;
        auto it = entries_->find(key);
        return it == entries_->end() ? nullptr : &it->second;
    }

    void require(const TomlValue* v, TomlValue::Type type, const std::string& key,
                 const std::string& what) const {
        if (v->type != type) error(key, "expects " + what, v->line);
    }

    void error(const std::string& key, const std::string& what, int line) const {
        throw ConfigError(table_.origin() + ":" + std::to_string(line) + ": key '" + name_ +
                          (name_.empty() ? "" : ".") + key + "' " + what);
    }

    const TomlTable& table_;
    std::string name_;
    const std::map<std::string, TomlValue>* entries_ = nullptr;
    std::set<std::string> consumed_;
};

} // namespace detail

/// Effective run configuration after defaults; built by load_config.
struct RunConfig {
    // problem block
    int mesh_n = 63;
    CoefficientSpec coefficient;
    double epsilon = 0.0; // 0 = homogenized constant for periodic presets
    double omega_left = 0.0, omega_right = 1.0;
    PsiSpec psi;
    double radius = 1.0;
    // solver block
    SolverSettings solver;
    int time_nodes = 129;
    // command blocks
    std::optional<double> norm_tau;
    std::optional<double> time_M;
    std::vector<double> curve_tau_list;
    std::string sweep_family = "diffusion";
    std::vector<double> sweep_epsilons = {0.25, 0.125, 0.0625, 0.03125};
    double sweep_delta = 0.05;
    double sweep_M = 2.0;
    // output block
    std::string out_dir = "out";
};

namespace detail {

inline void range_check(bool ok, const std::string& key, double value, const std::string& what) {
    if (!ok)
        throw ConfigError("key '" + key + "' out of range: value " + std::to_string(value) + " " +
                          what);
}

inline RunConfig run_config_from_table(const TomlTable& table) {
    static const std::set<std::string> known_sections = {"",     "problem", "solver", "norm",
                                                         "time", "curve",   "sweep",  "output"};
    for (const auto& [name, entries] : table.sections()) {
        if (!known_sections.count(name))
            throw ConfigError(table.origin() + ": unknown section [" + name + "]");
        if (name.empty() && !entries.empty())
            throw ConfigError(table.origin() + ": top-level keys are not allowed; use a section");
    }

    RunConfig cfg;

    detail::SectionReader problem(table, "problem");
    cfg.mesh_n = problem.integer("mesh_n", cfg.mesh_n);
    range_check(cfg.mesh_n >= 2, "problem.mesh_n", cfg.mesh_n, "must be >= 2");
    cfg.coefficient.kind = problem.text("coefficient", cfg.coefficient.kind);
    static const std::set<std::string> coeff_kinds = {"constant", "sinusoidal", "two_phase",
                                                      "reaction_sine", "modal"};
    if (!coeff_kinds.count(cfg.coefficient.kind))
        throw ConfigError("key 'problem.coefficient': unknown preset '" + cfg.coefficient.kind +
                          "'");
    cfg.coefficient.base = problem.number("coeff_base", cfg.coefficient.base);
    cfg.coefficient.amplitude = problem.number("coeff_amplitude", cfg.coefficient.amplitude);
    cfg.coefficient.a1 = problem.number("coeff_a1", cfg.coefficient.a1);
    cfg.coefficient.a2 = problem.number("coeff_a2", cfg.coefficient.a2);
    cfg.coefficient.fraction = problem.number("coeff_fraction", cfg.coefficient.fraction);
    cfg.coefficient.eigenvalues = problem.numbers("coeff_eigenvalues", {});
    cfg.epsilon = problem.number("epsilon", cfg.epsilon);
    range_check(cfg.epsilon >= 0.0, "problem.epsilon", cfg.epsilon, "must be >= 0");
    std::vector<double> omega = problem.numbers("omega", {cfg.omega_left, cfg.omega_right});
    if (omega.size() != 2 || !(omega[0] < omega[1]) || omega[0] < 0.0 || omega[1] > 1.0)
        throw ConfigError("key 'problem.omega' expects [left, right] with 0 <= left < right <= 1");
    cfg.omega_left = omega[0];
    cfg.omega_right = omega[1];
    cfg.psi.kind = problem.text("psi", cfg.psi.kind);
    cfg.psi.coeffs = problem.numbers("psi_coeffs", cfg.psi.coeffs);
    cfg.psi.center = problem.number("psi_center", cfg.psi.center);
    cfg.psi.width = problem.number("psi_width", cfg.psi.width);
    cfg.psi.height = problem.number("psi_height", cfg.psi.height);
    cfg.radius = problem.number("radius", cfg.radius);
    range_check(cfg.radius > 0.0, "problem.radius", cfg.radius, "must be > 0");
    problem.finish();

    detail::SectionReader solver(table, "solver");
    cfg.solver.tol_el = solver.number("tol_el", cfg.solver.tol_el);
    range_check(cfg.solver.tol_el > 0.0, "solver.tol_el", cfg.solver.tol_el, "must be > 0");
    cfg.solver.tol_gap_rel = solver.number("tol_gap", cfg.solver.tol_gap_rel);
    range_check(cfg.solver.tol_gap_rel > 0.0, "solver.tol_gap", cfg.solver.tol_gap_rel,
                "must be > 0");
    cfg.solver.tol_tau = solver.number("tol_tau", cfg.solver.tol_tau);
    range_check(cfg.solver.tol_tau > 0.0, "solver.tol_tau", cfg.solver.tol_tau, "must be > 0");
    cfg.solver.tol_target_rel = solver.number("tol_target", cfg.solver.tol_target_rel);
    range_check(cfg.solver.tol_target_rel > 0.0, "solver.tol_target", cfg.solver.tol_target_rel,
                "must be > 0");
    cfg.solver.max_iters = solver.integer("max_iters", cfg.solver.max_iters);
    range_check(cfg.solver.max_iters >= 1, "solver.max_iters", cfg.solver.max_iters,
                "must be >= 1");
    cfg.time_nodes = solver.integer("time_nodes", cfg.time_nodes);
    range_check(cfg.time_nodes >= 3 && cfg.time_nodes % 2 == 1, "solver.time_nodes",
                cfg.time_nodes, "must be odd and >= 3");
    solver.finish();

    detail::SectionReader norm(table, "norm");
    cfg.norm_tau = norm.optional_number("tau");
    if (cfg.norm_tau)
        range_check(*cfg.norm_tau > 0.0, "norm.tau", *cfg.norm_tau, "must be > 0");
    norm.finish();

    detail::SectionReader time(table, "time");
    cfg.time_M = time.optional_number("M");
    if (cfg.time_M) range_check(*cfg.time_M > 0.0, "time.M", *cfg.time_M, "must be > 0");
    time.finish();

    detail::SectionReader curve(table, "curve");
    cfg.curve_tau_list = curve.numbers("tau_list", {});
    curve.finish();

    detail::SectionReader sweep(table, "sweep");
    cfg.sweep_family = sweep.text("family", cfg.sweep_family);
    if (cfg.sweep_family != "diffusion" && cfg.sweep_family != "reaction")
        throw ConfigError("key 'sweep.family': unknown family '" + cfg.sweep_family + "'");
    cfg.sweep_epsilons = sweep.numbers("epsilons", cfg.sweep_epsilons);
    cfg.sweep_delta = sweep.number("delta", cfg.sweep_delta);
    range_check(cfg.sweep_delta > 0.0, "sweep.delta", cfg.sweep_delta, "must be > 0");
    cfg.sweep_M = sweep.number("M", cfg.sweep_M);
    range_check(cfg.sweep_M > 0.0, "sweep.M", cfg.sweep_M, "must be > 0");
    sweep.finish();

    detail::SectionReader output(table, "output");
    cfg.out_dir = output.text("dir", cfg.out_dir);
    output.finish();

    return cfg;
}

} // namespace detail

/// Strict parse of a TOML config document; defaults are filled in and the
/// effective values echoed by the CLI.
inline RunConfig load_config(const std::string& path) {
    return detail::run_config_from_table(detail::TomlTable::parse_file(path));
}

inline RunConfig load_config_from_string(const std::string& text) {
    return detail::run_config_from_table(detail::TomlTable::parse(text));
}

/// Builds the operator/mask/psi bundle a config describes.
inline ControlProblem make_problem(const RunConfig& cfg) {
    const Mesh1D mesh(cfg.mesh_n);
    DiscreteOperator op = cfg.coefficient.make_operator(mesh, cfg.epsilon);
    ControlMask mask = (cfg.omega_left == 0.0 && cfg.omega_right == 1.0)
                           ? ControlMask::full(mesh)
                           : ControlMask::from_interval(mesh, cfg.omega_left, cfg.omega_right);
    StateVec psi = make_psi(cfg.psi, mesh);
    return ControlProblem(std::move(op), std::move(mask), std::move(psi), cfg.radius,
                          cfg.time_nodes);
}

inline SweepConfig make_sweep_config(const RunConfig& cfg) {
    SweepConfig sc;
    sc.family = cfg.sweep_family;
    sc.coefficient = cfg.coefficient;
    sc.epsilons = cfg.sweep_epsilons;
    sc.mesh_n = cfg.mesh_n;
    sc.omega_left = cfg.omega_left;
    sc.omega_right = cfg.omega_right;
    sc.psi = cfg.psi;
    sc.r = cfg.radius;
    sc.M = cfg.sweep_M;
    sc.delta = cfg.sweep_delta;
    sc.time_nodes = cfg.time_nodes;
    sc.solver = cfg.solver;
    sc.out_dir = cfg.out_dir;
    return sc;
}

} // namespace paraopt
