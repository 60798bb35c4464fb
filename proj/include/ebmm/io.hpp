#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "ebmm/budyko.hpp"
#include "ebmm/errors.hpp"
#include "ebmm/grid.hpp"
#include "ebmm/inverse.hpp"
#include "ebmm/memory.hpp"
#include "ebmm/physics.hpp"
#include "ebmm/stepper.hpp"

namespace ebmm {

// ---------------------------------------------------------------------------
// Scenario documents
// ---------------------------------------------------------------------------

/// Declarative run configuration. Field defaults double as the documented
/// schema defaults; parse_scenario fills and echoes them.
struct Scenario {
    std::string name = "scenario";

    int n = 64;
    double rho0 = 1.0;

    std::string q_kind = "legendre_p2";  // constant | legendre_p2 | table
    double q_value = 1.0;
    double q_scale = 1.0;
    std::string q_table_path;

    std::string r_kind = "constant";  // constant | seasonal
    double r_value = 1.0;
    double r_amplitude = 0.0;
    double r_period = 1.0;

    std::string coalbedo_kind = "sellers_smooth";  // sellers_smooth | budyko_graph | budyko_regularized
    double a_i = 0.38;
    double a_f = 0.68;
    double u_bar = -10.0;
    double width = 10.0;
    int j = 0;

    std::string emission_kind = "sellers";  // sellers | budyko
    std::string eps_kind = "constant";      // constant | logistic
    double epsilon1 = 1.0;
    double eps_amplitude = 0.0;
    double eps_scale = 1.0;
    double a = 0.0;
    double b = 0.0;

    double f_bound = 0.0;
    double h_scale = 1.0;

    std::string kernel_kind = "constant";  // constant | hat | cosine | table
    double tau = 1.0;
    double delta = 0.5;
    double amplitude = 1.0;
    bool support_flag = true;
    std::string kernel_table_path;

    std::vector<double> u0_coeffs_x{0.0};  // u0(s,x) = sum coeffs[k] x^k + slope_s * s
    double u0_slope_s = 0.0;

    double horizon = 1.0;
    double target_dt = 1e-3;
    int stride = 1;
    std::uint64_t seed = 0;
    std::string scheme = "backward_euler";  // backward_euler | crank_nicolson

    std::vector<int> j_schedule{4, 8, 16, 32, 64, 128, 256, 512, 1024};
    double budyko_tol = 1e-3;
    double band_tol = 1e-3;
    double value_tol = 0.0;  // <= 0: default 1e-6 + dt + dx^2
    bool stop_early = true;

    double t_eval = 0.1;
    double t0 = 0.05;
    double T_prime = 0.1;
    double window_a = -0.99;
    double window_b = 0.99;
    double reg_weight = 0.0;
    int max_iters = 500;

    double perturb_amplitude = 0.1;
    double perturb_lo = 0.2;
    double perturb_hi = 0.6;
};

namespace detail_io {

using nlohmann::json;

inline std::string path_join(const std::string& parent, const std::string& key) {
    return parent.empty() ? key : parent + "." + key;
}

inline void expect_object(const json& j, const std::string& path) {
    if (!j.is_object())
        throw validation_error("field '" + (path.empty() ? std::string("<root>") : path) +
                               "': expected an object");
}

/// Wraps typed extraction so every failure names the exact field path.
struct Reader {
    const json& obj;
    std::string path;
    mutable std::vector<std::string> seen;

    const json* find(const std::string& key) const {
        seen.push_back(key);
        const auto it = obj.find(key);
        return it == obj.end() ? nullptr : &*it;
    }

    double number(const std::string& key, double fallback) const {
        const json* v = find(key);
        if (!v) return fallback;
        if (!v->is_number())
            throw validation_error("field '" + path_join(path, key) + "': expected a number");
        return v->get<double>();
    }

    int integer(const std::string& key, int fallback) const {
        const json* v = find(key);
        if (!v) return fallback;
        if (!v->is_number_integer())
            throw validation_error("field '" + path_join(path, key) + "': expected an integer");
        return v->get<int>();
    }

    bool boolean(const std::string& key, bool fallback) const {
        const json* v = find(key);
        if (!v) return fallback;
        if (!v->is_boolean())
            throw validation_error("field '" + path_join(path, key) + "': expected a boolean");
        return v->get<bool>();
    }

    std::string text(const std::string& key, const std::string& fallback) const {
        const json* v = find(key);
        if (!v) return fallback;
        if (!v->is_string())
            throw validation_error("field '" + path_join(path, key) + "': expected a string");
        return v->get<std::string>();
    }

    std::vector<double> numbers(const std::string& key, std::vector<double> fallback) const {
        const json* v = find(key);
        if (!v) return fallback;
        if (!v->is_array())
            throw validation_error("field '" + path_join(path, key) + "': expected an array of numbers");
        std::vector<double> out;
        for (const auto& e : *v) {
            if (!e.is_number())
                throw validation_error("field '" + path_join(path, key) + "': expected an array of numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }

    std::vector<int> integers(const std::string& key, std::vector<int> fallback) const {
        const json* v = find(key);
        if (!v) return fallback;
        if (!v->is_array())
            throw validation_error("field '" + path_join(path, key) + "': expected an array of integers");
        std::vector<int> out;
        for (const auto& e : *v) {
            if (!e.is_number_integer())
                throw validation_error("field '" + path_join(path, key) +
                                       "': expected an array of integers");
            out.push_back(e.get<int>());
        }
        return out;
    }

    /// Every key must have been consumed; anything else is a schema violation.
    void reject_unknown() const {
        for (auto it = obj.begin(); it != obj.end(); ++it) {
            bool known = false;
            for (const auto& k : seen)
                if (k == it.key()) {
                    known = true;
                    break;
                }
            if (!known)
                throw validation_error("field '" + path_join(path, it.key()) + "': unknown field");
        }
    }
};

inline Reader section(const json& root, const std::string& key, const Reader& parent) {
    const json* v = parent.find(key);
    static const json empty_object = json::object();
    if (!v) return Reader{empty_object, path_join(parent.path, key), {}};
    expect_object(*v, path_join(parent.path, key));
    (void)root;
    return Reader{*v, path_join(parent.path, key), {}};
}

inline void check_choice(const std::string& value, std::initializer_list<const char*> allowed,
                         const std::string& path) {
    for (const char* a : allowed)
        if (value == a) return;
    std::string what = "field '" + path + "': invalid value '" + value + "' (expected one of";
    for (const char* a : allowed) what += std::string(" ") + a;
    throw validation_error(what + ")");
}

}  // namespace detail_io

inline Scenario parse_scenario(const std::string& text) {
    using detail_io::Reader;
    using detail_io::section;
    using nlohmann::json;
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw validation_error(std::string("scenario parse error: ") + e.what());
    }
    detail_io::expect_object(root, "");
    Reader top{root, "", {}};

    Scenario s;
    s.name = top.text("name", s.name);

    {
        Reader r = section(root, "grid", top);
        s.n = r.integer("n", s.n);
        s.rho0 = r.number("rho0", s.rho0);
        r.reject_unknown();
    }
    {
        Reader ins = section(root, "insolation", top);
        const json* qv = ins.find("q");
        if (qv) {
            detail_io::expect_object(*qv, "insolation.q");
            Reader q{*qv, "insolation.q", {}};
            s.q_kind = q.text("kind", s.q_kind);
            detail_io::check_choice(s.q_kind, {"constant", "legendre_p2", "table"}, "insolation.q.kind");
            s.q_value = q.number("value", s.q_value);
            s.q_scale = q.number("scale", s.q_scale);
            s.q_table_path = q.text("path", s.q_table_path);
            q.reject_unknown();
        }
        const json* rv = ins.find("r");
        if (rv) {
            detail_io::expect_object(*rv, "insolation.r");
            Reader r{*rv, "insolation.r", {}};
            s.r_kind = r.text("kind", s.r_kind);
            detail_io::check_choice(s.r_kind, {"constant", "seasonal"}, "insolation.r.kind");
            s.r_value = r.number("value", s.r_value);
            s.r_amplitude = r.number("amplitude", s.r_amplitude);
            s.r_period = r.number("period", s.r_period);
            r.reject_unknown();
        }
        ins.reject_unknown();
    }
    {
        Reader r = section(root, "coalbedo", top);
        s.coalbedo_kind = r.text("kind", s.coalbedo_kind);
        detail_io::check_choice(s.coalbedo_kind, {"sellers_smooth", "budyko_graph", "budyko_regularized"},
                                "coalbedo.kind");
        s.a_i = r.number("a_i", s.a_i);
        s.a_f = r.number("a_f", s.a_f);
        s.u_bar = r.number("u_bar", s.u_bar);
        s.width = r.number("width", s.width);
        s.j = r.integer("j", s.j);
        r.reject_unknown();
    }
    {
        Reader r = section(root, "emission", top);
        s.emission_kind = r.text("kind", s.emission_kind);
        detail_io::check_choice(s.emission_kind, {"sellers", "budyko"}, "emission.kind");
        s.eps_kind = r.text("eps_kind", s.eps_kind);
        detail_io::check_choice(s.eps_kind, {"constant", "logistic"}, "emission.eps_kind");
        s.epsilon1 = r.number("epsilon1", s.epsilon1);
        s.eps_amplitude = r.number("eps_amplitude", s.eps_amplitude);
        s.eps_scale = r.number("eps_scale", s.eps_scale);
        s.a = r.number("a", s.a);
        s.b = r.number("b", s.b);
        r.reject_unknown();
    }
    {
        Reader r = section(root, "memory_response", top);
        s.f_bound = r.number("f_bound", s.f_bound);
        s.h_scale = r.number("h_scale", s.h_scale);
        r.reject_unknown();
    }
    {
        Reader r = section(root, "kernel", top);
        s.kernel_kind = r.text("kind", s.kernel_kind);
        detail_io::check_choice(s.kernel_kind, {"constant", "hat", "cosine", "table"}, "kernel.kind");
        s.tau = r.number("tau", s.tau);
        s.delta = r.number("delta", s.delta);
        s.amplitude = r.number("amplitude", s.amplitude);
        s.support_flag = r.boolean("support_flag", s.support_flag);
        s.kernel_table_path = r.text("path", s.kernel_table_path);
        r.reject_unknown();
    }
    {
        Reader r = section(root, "u0", top);
        s.u0_coeffs_x = r.numbers("coeffs_x", s.u0_coeffs_x);
        s.u0_slope_s = r.number("slope_s", s.u0_slope_s);
        r.reject_unknown();
    }
    {
        Reader r = section(root, "run", top);
        s.horizon = r.number("horizon", s.horizon);
        s.target_dt = r.number("target_dt", s.target_dt);
        s.stride = r.integer("stride", s.stride);
        s.seed = static_cast<std::uint64_t>(r.integer("seed", static_cast<int>(s.seed)));
        s.scheme = r.text("scheme", s.scheme);
        detail_io::check_choice(s.scheme, {"backward_euler", "crank_nicolson"}, "run.scheme");
        r.reject_unknown();
    }
    {
        Reader r = section(root, "budyko", top);
        s.j_schedule = r.integers("j_schedule", s.j_schedule);
        s.budyko_tol = r.number("tol", s.budyko_tol);
        s.band_tol = r.number("band_tol", s.band_tol);
        s.value_tol = r.number("value_tol", s.value_tol);
        s.stop_early = r.boolean("stop_early", s.stop_early);
        r.reject_unknown();
    }
    {
        Reader r = section(root, "inverse", top);
        s.t_eval = r.number("t_eval", s.t_eval);
        s.t0 = r.number("t0", s.t0);
        s.T_prime = r.number("T_prime", s.T_prime);
        s.window_a = r.number("a", s.window_a);
        s.window_b = r.number("b", s.window_b);
        s.reg_weight = r.number("reg_weight", s.reg_weight);
        s.max_iters = r.integer("max_iters", s.max_iters);
        r.reject_unknown();
    }
    {
        Reader r = section(root, "perturbation", top);
        s.perturb_amplitude = r.number("amplitude", s.perturb_amplitude);
        s.perturb_lo = r.number("lo", s.perturb_lo);
        s.perturb_hi = r.number("hi", s.perturb_hi);
        r.reject_unknown();
    }
    top.seen.insert(top.seen.end(), {"name", "grid", "insolation", "coalbedo", "emission",
                                     "memory_response", "kernel", "u0", "run", "budyko", "inverse",
                                     "perturbation"});
    top.reject_unknown();

    // Semantic constraints, named after the inequality they enforce.
    if (s.n < 3) throw validation_error("constraint violated: n >= 3");
    if (!(s.rho0 > 0.0)) throw validation_error("constraint violated: rho0 > 0");
    if (!(s.a_i < s.a_f)) throw validation_error("constraint violated: a_i < a_f");
    if (!(s.delta < s.tau)) throw validation_error("constraint violated: delta < tau");
    if (s.delta < 0.0) throw validation_error("constraint violated: delta >= 0");
    if (!(s.horizon > 0.0)) throw validation_error("constraint violated: horizon > 0");
    if (!(s.target_dt > 0.0)) throw validation_error("constraint violated: target_dt > 0");
    if (s.stride < 1) throw validation_error("constraint violated: stride >= 1");
    if (!(s.epsilon1 > 0.0)) throw validation_error("constraint violated: epsilon1 > 0");
    if (s.q_kind == "table" && s.q_table_path.empty())
        throw validation_error("field 'insolation.q.path': required for table insolation");
    if (s.kernel_kind == "table" && s.kernel_table_path.empty())
        throw validation_error("field 'kernel.path': required for table kernels");
    return s;
}

/// The scenario as a fully-populated document (all defaults echoed).
inline nlohmann::json effective_config(const Scenario& s) {
    nlohmann::json j;
    j["name"] = s.name;
    j["grid"] = {{"n", s.n}, {"rho0", s.rho0}};
    j["insolation"]["q"] = {{"kind", s.q_kind}, {"value", s.q_value}, {"scale", s.q_scale}};
    if (!s.q_table_path.empty()) j["insolation"]["q"]["path"] = s.q_table_path;
    j["insolation"]["r"] = {{"kind", s.r_kind},
                            {"value", s.r_value},
                            {"amplitude", s.r_amplitude},
                            {"period", s.r_period}};
    j["coalbedo"] = {{"kind", s.coalbedo_kind}, {"a_i", s.a_i},   {"a_f", s.a_f},
                     {"u_bar", s.u_bar},        {"width", s.width}, {"j", s.j}};
    j["emission"] = {{"kind", s.emission_kind},       {"eps_kind", s.eps_kind},
                     {"epsilon1", s.epsilon1},        {"eps_amplitude", s.eps_amplitude},
                     {"eps_scale", s.eps_scale},      {"a", s.a},
                     {"b", s.b}};
    j["memory_response"] = {{"f_bound", s.f_bound}, {"h_scale", s.h_scale}};
    j["kernel"] = {{"kind", s.kernel_kind},   {"tau", s.tau},
                   {"delta", s.delta},        {"amplitude", s.amplitude},
                   {"support_flag", s.support_flag}};
    if (!s.kernel_table_path.empty()) j["kernel"]["path"] = s.kernel_table_path;
    j["u0"] = {{"coeffs_x", s.u0_coeffs_x}, {"slope_s", s.u0_slope_s}};
    j["run"] = {{"horizon", s.horizon}, {"target_dt", s.target_dt},
                {"stride", s.stride},   {"seed", s.seed},
                {"scheme", s.scheme}};
    j["budyko"] = {{"j_schedule", s.j_schedule}, {"tol", s.budyko_tol},
                   {"band_tol", s.band_tol},     {"value_tol", s.value_tol},
                   {"stop_early", s.stop_early}};
    j["inverse"] = {{"t_eval", s.t_eval},   {"t0", s.t0},
                    {"T_prime", s.T_prime}, {"a", s.window_a},
                    {"b", s.window_b},      {"reg_weight", s.reg_weight},
                    {"max_iters", s.max_iters}};
    j["perturbation"] = {{"amplitude", s.perturb_amplitude}, {"lo", s.perturb_lo}, {"hi", s.perturb_hi}};
    return j;
}

// ---------------------------------------------------------------------------
// CSV / file primitives
// ---------------------------------------------------------------------------

namespace detail_io {

inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline std::string format_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void append_row(std::string& out, double first, const std::vector<double>& rest) {
    out += format_value(first);
    for (double v : rest) {
        out += ',';
        out += format_value(v);
    }
    out += '\n';
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Whole-file atomic write: temp file in the same directory, then rename.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        if (!out.flush()) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

inline Csv parse_csv(const std::string& text, const std::string& origin) {
    Csv csv;
    size_t pos = 0;
    int line_no = 0;
    while (pos < text.size()) {
        size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        const std::string line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        size_t start = 0;
        while (true) {
            const size_t comma = line.find(',', start);
            cells.push_back(line.substr(start, comma == std::string::npos ? std::string::npos
                                                                          : comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (line_no == 1) {
            csv.header = std::move(cells);
            continue;
        }
        std::vector<double> row;
        row.reserve(cells.size());
        for (const std::string& c : cells) {
            try {
                size_t used = 0;
                row.push_back(std::stod(c, &used));
                if (used != c.size()) throw std::invalid_argument("trailing characters");
            } catch (const std::exception&) {
                throw std::runtime_error(origin + ":" + std::to_string(line_no) +
                                         ": cannot parse value '" + c + "'");
            }
        }
        if (row.size() != csv.header.size())
            throw std::runtime_error(origin + ":" + std::to_string(line_no) + ": expected " +
                                     std::to_string(csv.header.size()) + " columns, got " +
                                     std::to_string(row.size()));
        csv.rows.push_back(std::move(row));
    }
    if (csv.header.empty()) throw std::runtime_error(origin + ":1: missing header row");
    return csv;
}

inline std::string state_header(const std::string& first, int n) {
    std::string h = first;
    for (int i = 0; i < n; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof buf, ",u_%03d", i);
        h += buf;
    }
    return h + "\n";
}

}  // namespace detail_io

// ---------------------------------------------------------------------------
// Trajectory round-trip
// ---------------------------------------------------------------------------

inline void write_trajectory(const std::filesystem::path& dir, const Trajectory& traj) {
    namespace d = detail_io;
    std::filesystem::create_directories(dir);

    std::string states = d::state_header("time", traj.n);
    for (size_t k = 0; k < traj.times.size(); ++k) d::append_row(states, traj.times[k], traj.states[k]);

    std::string h_values = d::state_header("time", traj.n);
    for (size_t k = 0; k < traj.h_values.size(); ++k)
        d::append_row(h_values, traj.times[k], traj.h_values[k]);

    const int m = static_cast<int>(traj.history_0.size()) - 1;
    std::string hist0 = d::state_header("s", traj.n);
    for (int j = 0; j <= m; ++j) d::append_row(hist0, (j - m) * traj.dt, traj.history_0[j]);

    const double t_final = traj.times.empty() ? 0.0 : traj.times.back();
    std::string histT = d::state_header("t", traj.n);
    for (int j = 0; j <= m; ++j) d::append_row(histT, t_final + (j - m) * traj.dt, traj.final_history[j]);

    nlohmann::json side;
    side["format_version"] = 1;
    side["n"] = traj.n;
    side["dx"] = traj.dx;
    side["rho0"] = traj.rho0;
    side["dt"] = traj.dt;
    side["tau"] = traj.tau;
    side["delta"] = traj.delta;
    side["stride"] = traj.stride;
    side["sup_norm_seen"] = traj.sup_norm_seen;
    side["params_digest"] = d::hex64(traj.params_digest);
    side["files"] = {{"states.csv", d::hex64(d::fnv1a64(states))},
                     {"h_values.csv", d::hex64(d::fnv1a64(h_values))},
                     {"history_initial.csv", d::hex64(d::fnv1a64(hist0))},
                     {"history_final.csv", d::hex64(d::fnv1a64(histT))}};

    d::write_file_atomic(dir / "states.csv", states);
    d::write_file_atomic(dir / "h_values.csv", h_values);
    d::write_file_atomic(dir / "history_initial.csv", hist0);
    d::write_file_atomic(dir / "history_final.csv", histT);
    d::write_file_atomic(dir / "trajectory.json", side.dump(2) + "\n");
}

inline Trajectory read_trajectory(const std::filesystem::path& dir) {
    namespace d = detail_io;
    const std::string side_text = d::read_file(dir / "trajectory.json");
    nlohmann::json side;
    try {
        side = nlohmann::json::parse(side_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error((dir / "trajectory.json").string() + ": " + e.what());
    }

    Trajectory traj;
    traj.n = side.at("n").get<int>();
    traj.dx = side.at("dx").get<double>();
    traj.rho0 = side.at("rho0").get<double>();
    traj.dt = side.at("dt").get<double>();
    traj.tau = side.at("tau").get<double>();
    traj.delta = side.at("delta").get<double>();
    traj.stride = side.at("stride").get<int>();
    traj.sup_norm_seen = side.at("sup_norm_seen").get<double>();
    traj.params_digest = std::stoull(side.at("params_digest").get<std::string>(), nullptr, 16);

    // Parse first so structural damage reports a parse error with a line
    // number; an intact-but-altered file then fails the digest comparison.
    const auto load = [&](const char* name) {
        const std::string text = d::read_file(dir / name);
        d::Csv csv = d::parse_csv(text, (dir / name).string());
        const std::string expected = side.at("files").at(name).get<std::string>();
        if (d::hex64(d::fnv1a64(text)) != expected)
            throw integrity_error(std::string(name) + ": content does not match the sidecar digest");
        return csv;
    };

    const d::Csv states = load("states.csv");
    if (static_cast<int>(states.header.size()) != traj.n + 1)
        throw std::runtime_error((dir / "states.csv").string() + ": header does not match n");
    for (const auto& row : states.rows) {
        traj.times.push_back(row[0]);
        traj.states.emplace_back(row.begin() + 1, row.end());
    }

    const d::Csv h_values = load("h_values.csv");
    for (const auto& row : h_values.rows) traj.h_values.emplace_back(row.begin() + 1, row.end());

    const d::Csv hist0 = load("history_initial.csv");
    for (const auto& row : hist0.rows) traj.history_0.emplace_back(row.begin() + 1, row.end());

    const d::Csv histT = load("history_final.csv");
    for (const auto& row : histT.rows) traj.final_history.emplace_back(row.begin() + 1, row.end());

    return traj;
}

// ---------------------------------------------------------------------------
// Scenario -> model assembly
// ---------------------------------------------------------------------------

inline Scenario load_scenario(const std::filesystem::path& path) {
    return parse_scenario(detail_io::read_file(path));
}

/// Read a two-column CSV "x,q" profile table.
inline InsolationSpec insolation_from_csv(const std::filesystem::path& path, double r_value) {
    const detail_io::Csv csv = detail_io::parse_csv(detail_io::read_file(path), path.string());
    if (csv.header.size() != 2)
        throw std::runtime_error(path.string() + ":1: expected exactly two columns (x,q)");
    std::vector<double> x, y;
    for (const auto& row : csv.rows) {
        x.push_back(row[0]);
        y.push_back(row[1]);
    }
    for (size_t i = 1; i < x.size(); ++i)
        if (!(x[i] > x[i - 1]))
            throw std::runtime_error(path.string() + ": x column must be strictly increasing");
    return insolation_table(std::move(x), std::move(y), r_value);
}

/// Build the solver inputs from a validated scenario. Table paths are
/// resolved relative to base_dir.
inline ModelParams build_params(const Scenario& s, const std::filesystem::path& base_dir = ".") {
    ModelParams p;
    p.grid = build_grid(s.n, s.rho0);

    if (s.q_kind == "constant") {
        p.insolation = insolation_constant(s.q_value, s.r_value);
    } else if (s.q_kind == "legendre_p2") {
        p.insolation = insolation_legendre_p2(s.q_scale, s.r_value);
    } else {
        p.insolation = insolation_from_csv(base_dir / s.q_table_path, s.r_value);
    }
    if (s.r_kind == "seasonal") set_seasonal_r(p.insolation, s.r_value, s.r_amplitude, s.r_period);

    CoalbedoSpec::Kind ck = CoalbedoSpec::Kind::sellers_smooth;
    if (s.coalbedo_kind == "budyko_graph") ck = CoalbedoSpec::Kind::budyko_graph;
    if (s.coalbedo_kind == "budyko_regularized") ck = CoalbedoSpec::Kind::budyko_regularized;
    p.coalbedo = {ck, s.a_i, s.a_f, s.u_bar, s.width, s.j};

    p.emission.kind =
        s.emission_kind == "budyko" ? EmissionSpec::Kind::budyko : EmissionSpec::Kind::sellers;
    p.emission.eps_kind =
        s.eps_kind == "logistic" ? EmissionSpec::EpsKind::logistic : EmissionSpec::EpsKind::constant;
    p.emission.epsilon1 = s.epsilon1;
    p.emission.eps_amplitude = s.eps_amplitude;
    p.emission.eps_scale = s.eps_scale;
    p.emission.a = s.a;
    p.emission.b = s.b;

    p.memory_response = {s.f_bound, s.h_scale};

    if (s.kernel_kind == "constant")
        p.kernel = kernel_constant(s.tau, s.delta, s.amplitude, s.support_flag);
    else if (s.kernel_kind == "hat")
        p.kernel = kernel_hat(s.tau, s.delta, s.amplitude, s.support_flag);
    else if (s.kernel_kind == "cosine")
        p.kernel = kernel_cosine(s.tau, s.delta, s.amplitude, s.support_flag);
    else
        p.kernel = kernel_from_csv((base_dir / s.kernel_table_path).string(), s.tau, s.delta,
                                   s.support_flag);
    return p;
}

inline std::function<double(double, double)> build_u0(const Scenario& s) {
    return [coeffs = s.u0_coeffs_x, slope = s.u0_slope_s](double t, double x) {
        double v = 0.0;
        for (size_t k = coeffs.size(); k-- > 0;) v = v * x + coeffs[k];
        return v + slope * t;
    };
}

// ---------------------------------------------------------------------------
// Result writers
// ---------------------------------------------------------------------------

inline void write_observations(const std::filesystem::path& dir, const ObservationSet& obs) {
    namespace d = detail_io;
    std::filesystem::create_directories(dir);
    nlohmann::json desc;
    desc["noise_level"] = obs.noise_level;
    desc["seed"] = obs.seed;
    desc["n"] = obs.n;
    desc["dt"] = obs.dt;
    desc["stride"] = obs.stride;
    std::string csv;
    if (obs.kind == ObservationKind::pointwise) {
        desc["kind"] = "pointwise";
        desc["x0"] = obs.x0;
        desc["x0_index"] = obs.x0_index;
        csv = "time,u,ux\n";
        for (size_t k = 0; k < obs.times.size(); ++k) {
            csv += d::format_value(obs.times[k]);
            csv += ',';
            csv += d::format_value(obs.u_series[k]);
            csv += ',';
            csv += d::format_value(obs.ux_series[k]);
            csv += '\n';
        }
    } else if (obs.kind == ObservationKind::localized) {
        desc["kind"] = "localized";
        desc["a"] = obs.a;
        desc["b"] = obs.b;
        desc["t0"] = obs.t0;
        desc["T"] = obs.T;
        desc["cells"] = obs.cells;
        csv = "time";
        for (int c : obs.cells) {
            char buf[16];
            std::snprintf(buf, sizeof buf, ",ut_%03d", c);
            csv += buf;
        }
        csv += '\n';
        for (size_t k = 0; k < obs.window_times.size(); ++k)
            d::append_row(csv, obs.window_times[k], obs.ut_samples[k]);
    } else {
        desc["kind"] = "snapshot";
        desc["T_prime"] = obs.T_prime;
        csv = "cell,u,opu\n";
        for (size_t i = 0; i < obs.u_snapshot.size(); ++i) {
            csv += std::to_string(i);
            csv += ',';
            csv += d::format_value(obs.u_snapshot[i]);
            csv += ',';
            csv += d::format_value(obs.opu_snapshot[i]);
            csv += '\n';
        }
    }
    desc["observations_digest"] = d::hex64(d::fnv1a64(csv));
    d::write_file_atomic(dir / "observations.csv", csv);
    d::write_file_atomic(dir / "observations.json", desc.dump(2) + "\n");
}

inline ObservationSet read_observations(const std::filesystem::path& dir) {
    namespace d = detail_io;
    nlohmann::json desc;
    try {
        desc = nlohmann::json::parse(d::read_file(dir / "observations.json"));
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error((dir / "observations.json").string() + ": " + e.what());
    }
    const std::string text = d::read_file(dir / "observations.csv");
    const d::Csv csv = d::parse_csv(text, (dir / "observations.csv").string());
    if (d::hex64(d::fnv1a64(text)) != desc.at("observations_digest").get<std::string>())
        throw integrity_error("observations.csv: content does not match the descriptor digest");

    ObservationSet obs;
    obs.noise_level = desc.at("noise_level").get<double>();
    obs.seed = desc.at("seed").get<std::uint64_t>();
    obs.n = desc.at("n").get<int>();
    obs.dt = desc.at("dt").get<double>();
    obs.stride = desc.at("stride").get<int>();
    const std::string kind = desc.at("kind").get<std::string>();
    if (kind == "pointwise") {
        obs.kind = ObservationKind::pointwise;
        obs.x0 = desc.at("x0").get<double>();
        obs.x0_index = desc.at("x0_index").get<int>();
        for (const auto& row : csv.rows) {
            obs.times.push_back(row[0]);
            obs.u_series.push_back(row[1]);
            obs.ux_series.push_back(row[2]);
        }
    } else if (kind == "localized") {
        obs.kind = ObservationKind::localized;
        obs.a = desc.at("a").get<double>();
        obs.b = desc.at("b").get<double>();
        obs.t0 = desc.at("t0").get<double>();
        obs.T = desc.at("T").get<double>();
        obs.cells = desc.at("cells").get<std::vector<int>>();
        for (const auto& row : csv.rows) {
            obs.window_times.push_back(row[0]);
            obs.ut_samples.emplace_back(row.begin() + 1, row.end());
        }
    } else if (kind == "snapshot") {
        obs.kind = ObservationKind::snapshot;
        obs.T_prime = desc.at("T_prime").get<double>();
        for (const auto& row : csv.rows) {
            obs.u_snapshot.push_back(row[1]);
            obs.opu_snapshot.push_back(row[2]);
        }
    } else {
        throw std::runtime_error((dir / "observations.json").string() + ": unknown kind '" + kind + "'");
    }
    return obs;
}

inline void write_reconstruction(const std::filesystem::path& dir, const ReconstructionResult& result,
                                 const Grid& grid, const std::vector<double>& q_true = {}) {
    namespace d = detail_io;
    std::filesystem::create_directories(dir);
    std::string csv = q_true.empty() ? "x,q_hat\n" : "x,q_hat,q_true\n";
    for (int i = 0; i < grid.n; ++i) {
        csv += d::format_value(grid.centers[i]);
        csv += ',';
        csv += d::format_value(result.q_hat[i]);
        if (!q_true.empty()) {
            csv += ',';
            csv += d::format_value(q_true[i]);
        }
        csv += '\n';
    }
    nlohmann::json metrics;
    metrics["rel_l2_error"] =
        result.rel_l2_error ? nlohmann::json(*result.rel_l2_error) : nlohmann::json(nullptr);
    metrics["residual_norm"] = result.residual_norm;
    metrics["regularization_weight"] = result.regularization_weight;
    metrics["iterations"] = result.iterations;
    metrics["converged"] = result.converged;
    d::write_file_atomic(dir / "reconstruction.csv", csv);
    d::write_file_atomic(dir / "metrics.json", metrics.dump(2) + "\n");
}

inline nlohmann::json inclusion_report_json(const InclusionReport& report) {
    nlohmann::json j;
    j["counts"] = {{"ai_branch", report.ai_branch},
                   {"af_branch", report.af_branch},
                   {"interval", report.interval},
                   {"zero_forcing", report.zero_forcing},
                   {"violations", report.violations.size()}};
    j["band_used"] = report.band_used;
    j["value_tol_used"] = report.value_tol_used;
    j["violations"] = nlohmann::json::array();
    for (const auto& v : report.violations)
        j["violations"].push_back({{"t", v.t}, {"x", v.x}, {"B", v.B}, {"u", v.u},
                                   {"expected", v.expected}});
    return j;
}

}  // namespace ebmm
