/*
   Copyright 2026 The marcus-averaging Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "marcus/cylinder.hpp"
#include "marcus/experiments.hpp"
#include "marcus/marcus_engine.hpp"

namespace marcus {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PresetConfig {
    double r_min = 0.2;
    double r_max = 5.0;
    double z_min = -10.0;
    double z_max = 10.0;
    double theta = 1.0;
    std::optional<double> kappa;  // exponential-moment order; null: theta / 2
    std::string perturbation = "linear";  // linear | constant
    std::array<double, 3> k{0.0, 0.0, 0.0};
    std::array<double, 3> x0{1.0, 0.0, 0.0};
};

struct IntegratorSection {
    std::string scheme = "grid_increment";  // grid_increment | exact_leaf | jump_decomposition
    std::optional<double> step;             // null: default_step(eps)
    int jump_ode_substeps = 4;
    std::string splitting = "strang";  // strang | lie
    bool generic_jump_flow = false;
};

struct DriverSection {
    std::string mode = "exact";  // exact | decomposition
    double cutoff = 1e-3;
};

struct SimulateSection {
    double epsilon = 0.0;
    double T = 10.0;
    std::uint64_t path = 0;
};

struct AverageSection {
    std::vector<double> r_values{0.5, 1.0, 1.5, 2.0, 3.0};
    std::vector<double> z_values{0.0};
    int n_nodes = 64;
};

struct EtaSection {
    std::vector<double> horizons{10.0, 30.0, 100.0, 300.0, 1000.0};
    std::string observable = "radial";  // component of dPi(K): radial | vertical
    double p = 2.0;
    std::size_t paths = 400;
};

struct CompareSection {
    std::optional<std::vector<double>> epsilons;
    double T = 1.0;
    std::vector<double> horizons;  // empty: {T}
    double p = 2.0;
    std::size_t paths = 500;
};

struct ExitSection {
    std::optional<std::vector<double>> epsilons;
    double gamma = 0.1;
    std::size_t paths = 500;
    double w_horizon = 100.0;
};

struct DeviationSection {
    std::optional<std::vector<double>> epsilons;
    double T = 1.0;
    double p = 2.0;
    std::size_t paths = 300;
    std::vector<std::string> observables{"r", "z"};
};

struct CharfnSection {
    std::vector<double> u_values{1.0, 2.0, 4.0};
    double t = 1.0;
    std::size_t samples = 100000;
};

struct CheckSection {
    std::size_t samples = 1000;
    double leaf_T = 10.0;
};

struct ExperimentConfig {
    std::uint64_t seed = 20240611;
    std::optional<std::string> output_dir;
    PresetConfig preset;
    DriverSection driver;
    IntegratorSection integrator;
    SimulateSection simulate;
    AverageSection average;
    EtaSection eta;
    CompareSection compare;
    ExitSection exit_prob;
    DeviationSection deviation;
    CharfnSection charfn;
    CheckSection check;
};

namespace detail {

class ObjectReader {
public:
    ObjectReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object()) {
            throw ConfigError(where() + ": expected an object");
        }
    }

    ~ObjectReader() noexcept(false)
    {
        if (std::uncaught_exceptions() > 0) {
            return;
        }
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.contains(it.key())) {
                throw ConfigError("unknown key '" + key_path(it.key()) + "'");
            }
        }
    }

    template <class T>
    void read(const std::string& key, T& out)
    {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) {
            return;
        }
        try {
            if constexpr (is_optional<T>::value) {
                if (it->is_null()) {
                    out.reset();
                } else {
                    out = it->template get<typename T::value_type>();
                }
            } else {
                if constexpr (std::is_floating_point_v<T>) {
                    if (!it->is_number()) {
                        throw ConfigError("");
                    }
                } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
                    if (!it->is_number_integer()) {
                        throw ConfigError("");
                    }
                    if constexpr (std::is_unsigned_v<T>) {
                        if (it->template get<long long>() < 0 && !it->is_number_unsigned()) {
                            throw ConfigError("");
                        }
                    }
                }
                out = it->template get<T>();
            }
        } catch (const std::exception&) {
            throw ConfigError("key '" + key_path(key) + "' has the wrong type (got " + it->dump() + ")");
        }
    }

    ObjectReader child(const std::string& key)
    {
        seen_.insert(key);
        static const nlohmann::json empty = nlohmann::json::object();
        auto it = j_.find(key);
        return ObjectReader(it == j_.end() ? empty : *it, key_path(key));
    }

    std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    template <class T>
    struct is_optional : std::false_type {};
    template <class T>
    struct is_optional<std::optional<T>> : std::true_type {};

    std::string where() const { return path_.empty() ? "config" : "'" + path_ + "'"; }

    const nlohmann::json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline void require(bool ok, const std::string& key, const std::string& invariant)
{
    if (!ok) {
        throw ConfigError("invalid value for '" + key + "': violates " + invariant);
    }
}

inline void require_positive_list(const std::vector<double>& v, const std::string& key)
{
    require(!v.empty(), key, "non-empty list");
    for (double x : v) {
        require(std::isfinite(x) && x > 0.0, key, "all entries finite and positive");
    }
}

template <class T>
nlohmann::json optional_json(const std::optional<T>& v)
{
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

} // namespace detail

// Re-validates every numeric constraint the underlying modules impose.
inline void validate(const ExperimentConfig& c)
{
    using detail::require;
    const auto& p = c.preset;
    require(p.r_min > 0.0 && p.r_min < 1.0 && p.r_max > 1.0 && std::isfinite(p.r_max), "preset.r_min/preset.r_max",
            "0 < r_min < 1 < r_max");
    require(p.z_min < p.z_max, "preset.z_min/preset.z_max", "z_min < z_max");
    require(p.theta > 0.0 && std::isfinite(p.theta), "preset.theta", "theta > 0");
    require(!p.kappa || (*p.kappa > 0.0 && *p.kappa < p.theta), "preset.kappa", "0 < kappa < theta (exponential moment)");
    require(p.perturbation == "linear" || p.perturbation == "constant", "preset.perturbation",
            "one of {linear, constant}");
    const double r0 = std::hypot(p.x0[0], p.x0[1]);
    require(r0 > p.r_min && r0 < p.r_max && p.x0[2] > p.z_min && p.x0[2] < p.z_max, "preset.x0", "x0 inside U");
    require(c.driver.mode == "exact" || c.driver.mode == "decomposition", "driver.mode",
            "one of {exact, decomposition}");
    require(c.driver.cutoff > 0.0, "driver.cutoff", "cutoff > 0");
    const auto& in = c.integrator;
    require(in.scheme == "grid_increment" || in.scheme == "exact_leaf" || in.scheme == "jump_decomposition",
            "integrator.scheme", "one of {grid_increment, exact_leaf, jump_decomposition}");
    require(!in.step || *in.step > 0.0, "integrator.step", "step_h > 0");
    require(in.jump_ode_substeps >= 1, "integrator.jump_ode_substeps", "substeps >= 1");
    require(in.splitting == "strang" || in.splitting == "lie", "integrator.splitting", "one of {strang, lie}");
    require(!(in.scheme == "exact_leaf" && in.generic_jump_flow), "integrator.generic_jump_flow",
            "exact_leaf needs the closed-form jump flow");
    require(c.simulate.epsilon >= 0.0, "simulate.epsilon", "epsilon >= 0");
    require(c.simulate.T >= 0.0, "simulate.T", "T >= 0");
    require(c.average.n_nodes >= 8, "average.n_nodes", "n_nodes >= 8");
    require(c.eta.horizons.size() >= 3, "eta.horizons", "at least 3 horizons");
    detail::require_positive_list(c.eta.horizons, "eta.horizons");
    require(c.eta.observable == "radial" || c.eta.observable == "vertical", "eta.observable",
            "one of {radial, vertical}");
    require(c.eta.p >= 2.0, "eta.p", "p >= 2");
    require(c.eta.paths >= 100, "eta.paths", "M >= 100");
    if (c.compare.epsilons) {
        detail::require_positive_list(*c.compare.epsilons, "compare.epsilons");
    }
    require(c.compare.T > 0.0, "compare.T", "T > 0");
    require(c.compare.p >= 2.0, "compare.p", "p >= 2");
    require(c.compare.paths >= 100, "compare.paths", "M >= 100");
    for (double h : c.compare.horizons) {
        require(h > 0.0 && h <= c.compare.T, "compare.horizons", "0 < t <= T");
    }
    if (c.exit_prob.epsilons) {
        detail::require_positive_list(*c.exit_prob.epsilons, "exit_prob.epsilons");
    }
    require(c.exit_prob.gamma > 0.0, "exit_prob.gamma", "gamma > 0");
    require(c.exit_prob.paths >= 100, "exit_prob.paths", "M >= 100");
    require(c.exit_prob.w_horizon > 0.0, "exit_prob.w_horizon", "w_horizon > 0");
    if (c.deviation.epsilons) {
        require(!c.deviation.epsilons->empty(), "deviation.epsilons", "non-empty list");
        for (double e : *c.deviation.epsilons) {
            require(e >= 0.0 && std::isfinite(e), "deviation.epsilons", "all entries >= 0");
        }
    }
    require(c.deviation.T > 0.0, "deviation.T", "T > 0");
    require(c.deviation.p >= 2.0, "deviation.p", "p >= 2");
    require(c.deviation.paths >= 100, "deviation.paths", "M >= 100");
    require(!c.deviation.observables.empty(), "deviation.observables", "non-empty list");
    for (const auto& o : c.deviation.observables) {
        require(o == "r" || o == "z" || o == "x" || o == "y", "deviation.observables", "entries in {r, z, x, y}");
    }
    require(c.charfn.t >= 0.0, "charfn.t", "t >= 0");
    require(c.charfn.samples >= 100, "charfn.samples", "samples >= 100");
    require(!c.charfn.u_values.empty(), "charfn.u_values", "non-empty list");
    require(c.check.samples >= 1, "check.samples", "samples >= 1");
    require(c.check.leaf_T > 0.0, "check.leaf_T", "leaf_T > 0");
}

inline ExperimentConfig config_from_json(const nlohmann::json& j)
{
    ExperimentConfig c;
    {
        detail::ObjectReader root(j, "");
        root.read("seed", c.seed);
        root.read("output_dir", c.output_dir);
        {
            auto r = root.child("preset");
            r.read("r_min", c.preset.r_min);
            r.read("r_max", c.preset.r_max);
            r.read("z_min", c.preset.z_min);
            r.read("z_max", c.preset.z_max);
            r.read("theta", c.preset.theta);
            r.read("kappa", c.preset.kappa);
            r.read("perturbation", c.preset.perturbation);
            r.read("k", c.preset.k);
            r.read("x0", c.preset.x0);
        }
        {
            auto r = root.child("driver");
            r.read("mode", c.driver.mode);
            r.read("cutoff", c.driver.cutoff);
        }
        {
            auto r = root.child("integrator");
            r.read("scheme", c.integrator.scheme);
            r.read("step", c.integrator.step);
            r.read("jump_ode_substeps", c.integrator.jump_ode_substeps);
            r.read("splitting", c.integrator.splitting);
            r.read("generic_jump_flow", c.integrator.generic_jump_flow);
        }
        {
            auto r = root.child("simulate");
            r.read("epsilon", c.simulate.epsilon);
            r.read("T", c.simulate.T);
            r.read("path", c.simulate.path);
        }
        {
            auto r = root.child("average");
            r.read("r_values", c.average.r_values);
            r.read("z_values", c.average.z_values);
            r.read("n_nodes", c.average.n_nodes);
        }
        {
            auto r = root.child("eta");
            r.read("horizons", c.eta.horizons);
            r.read("observable", c.eta.observable);
            r.read("p", c.eta.p);
            r.read("paths", c.eta.paths);
        }
        {
            auto r = root.child("compare");
            r.read("epsilons", c.compare.epsilons);
            r.read("T", c.compare.T);
            r.read("horizons", c.compare.horizons);
            r.read("p", c.compare.p);
            r.read("paths", c.compare.paths);
        }
        {
            auto r = root.child("exit_prob");
            r.read("epsilons", c.exit_prob.epsilons);
            r.read("gamma", c.exit_prob.gamma);
            r.read("paths", c.exit_prob.paths);
            r.read("w_horizon", c.exit_prob.w_horizon);
        }
        {
            auto r = root.child("deviation");
            r.read("epsilons", c.deviation.epsilons);
            r.read("T", c.deviation.T);
            r.read("p", c.deviation.p);
            r.read("paths", c.deviation.paths);
            r.read("observables", c.deviation.observables);
        }
        {
            auto r = root.child("charfn");
            r.read("u_values", c.charfn.u_values);
            r.read("t", c.charfn.t);
            r.read("samples", c.charfn.samples);
        }
        {
            auto r = root.child("check");
            r.read("samples", c.check.samples);
            r.read("leaf_T", c.check.leaf_T);
        }
    }
    validate(c);
    return c;
}

// Effective configuration with every default filled in.
inline nlohmann::json config_to_json(const ExperimentConfig& c)
{
    using nlohmann::json;
    json j;
    j["seed"] = c.seed;
    j["output_dir"] = detail::optional_json(c.output_dir);
    j["preset"] = {{"r_min", c.preset.r_min}, {"r_max", c.preset.r_max}, {"z_min", c.preset.z_min},
                   {"z_max", c.preset.z_max}, {"theta", c.preset.theta}, {"kappa", detail::optional_json(c.preset.kappa)},
                   {"perturbation", c.preset.perturbation}, {"k", c.preset.k},
                   {"x0", c.preset.x0}};
    j["driver"] = {{"mode", c.driver.mode}, {"cutoff", c.driver.cutoff}};
    j["integrator"] = {{"scheme", c.integrator.scheme}, {"step", detail::optional_json(c.integrator.step)},
                       {"jump_ode_substeps", c.integrator.jump_ode_substeps},
                       {"splitting", c.integrator.splitting}, {"generic_jump_flow", c.integrator.generic_jump_flow}};
    j["simulate"] = {{"epsilon", c.simulate.epsilon}, {"T", c.simulate.T}, {"path", c.simulate.path}};
    j["average"] = {{"r_values", c.average.r_values}, {"z_values", c.average.z_values},
                    {"n_nodes", c.average.n_nodes}};
    j["eta"] = {{"horizons", c.eta.horizons}, {"observable", c.eta.observable}, {"p", c.eta.p},
                {"paths", c.eta.paths}};
    j["compare"] = {{"epsilons", detail::optional_json(c.compare.epsilons)}, {"T", c.compare.T},
                    {"horizons", c.compare.horizons}, {"p", c.compare.p}, {"paths", c.compare.paths}};
    j["exit_prob"] = {{"epsilons", detail::optional_json(c.exit_prob.epsilons)}, {"gamma", c.exit_prob.gamma},
                      {"paths", c.exit_prob.paths}, {"w_horizon", c.exit_prob.w_horizon}};
    j["deviation"] = {{"epsilons", detail::optional_json(c.deviation.epsilons)}, {"T", c.deviation.T},
                      {"p", c.deviation.p}, {"paths", c.deviation.paths},
                      {"observables", c.deviation.observables}};
    j["charfn"] = {{"u_values", c.charfn.u_values}, {"t", c.charfn.t}, {"samples", c.charfn.samples}};
    j["check"] = {{"samples", c.check.samples}, {"leaf_T", c.check.leaf_T}};
    return j;
}

// Parses JSON text; syntax errors carry the source name and the parser's line and column.
inline nlohmann::json parse_config_text(const std::string& text, const std::string& source)
{
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(source + ": " + e.what());
    }
}

// Keys without a default that a subcommand needs.
inline void require_for_subcommand(const ExperimentConfig& c, const std::string& subcommand)
{
    auto need = [](bool present, const std::string& key) {
        if (!present) {
            throw ConfigError("missing required key '" + key + "'");
        }
    };
    if (subcommand == "compare") {
        need(c.compare.epsilons.has_value(), "compare.epsilons");
    } else if (subcommand == "exit-prob") {
        need(c.exit_prob.epsilons.has_value(), "exit_prob.epsilons");
    } else if (subcommand == "deviation") {
        need(c.deviation.epsilons.has_value(), "deviation.epsilons");
    }
}

// Applies "a.b.c=value"; the value is parsed as JSON, falling back to a plain string.
inline void apply_override(nlohmann::json& j, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override '" + assignment + "' must have the form key.path=value");
    }
    const std::string path = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    nlohmann::json value;
    try {
        value = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error&) {
        value = text;
    }
    nlohmann::json* node = &j;
    std::size_t start = 0;
    for (;;) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) {
            throw ConfigError("override key '" + path + "' has an empty component");
        }
        if (!node->is_object()) {
            *node = nlohmann::json::object();
        }
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

inline CylinderParams cylinder_params(const ExperimentConfig& c)
{
    CylinderParams p;
    p.r_min = c.preset.r_min;
    p.r_max = c.preset.r_max;
    p.z_min = c.preset.z_min;
    p.z_max = c.preset.z_max;
    p.theta = c.preset.theta;
    if (c.preset.perturbation == "constant") {
        p.perturbation = ConstantPerturbation{c.preset.k[0], c.preset.k[1], c.preset.k[2]};
    } else {
        p.perturbation = LinearPerturbation{};
    }
    return p;
}

inline IntegratorConfig integrator_config(const ExperimentConfig& c)
{
    IntegratorConfig cfg;
    const auto& in = c.integrator;
    cfg.scheme = in.scheme == "exact_leaf"           ? Scheme::ExactLeaf
                 : in.scheme == "jump_decomposition" ? Scheme::JumpDecomposition
                                                     : Scheme::GridIncrement;
    cfg.step = in.step.value_or(1e-2);
    cfg.jump_ode_substeps = in.jump_ode_substeps;
    cfg.splitting = in.splitting == "lie" ? Splitting::Lie : Splitting::Strang;
    cfg.cutoff = c.driver.cutoff;
    cfg.use_exact_jump_flow = !in.generic_jump_flow;
    cfg.driver_mode = c.driver.mode == "decomposition" ? DriverMode::Decomposition : DriverMode::Exact;
    return cfg;
}

inline ExperimentSettings experiment_settings(const ExperimentConfig& c, std::size_t paths, double p,
                                              unsigned threads)
{
    ExperimentSettings s;
    s.integrator = integrator_config(c);
    s.auto_step = !c.integrator.step.has_value();
    s.paths = paths;
    s.p = p;
    s.seed = c.seed;
    s.threads = threads;
    return s;
}

} // namespace marcus
