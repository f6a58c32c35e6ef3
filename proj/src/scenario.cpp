#include "dcmg/scenario.hpp"

#include "dcmg/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace dcmg {

using nlohmann::json;

namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        out += (i ? sep : "") + parts[i];
    }
    return out;
}

/// Collects schema errors instead of stopping at the first one.
class Reader {
public:
    std::vector<std::string> errors;

    void error(const std::string& path, const std::string& message) { errors.push_back(path + ": " + message); }

    bool object(const json& j, const std::string& path) {
        if (!j.is_object()) {
            error(path, "expected an object");
            return false;
        }
        return true;
    }

    bool array(const json& j, const std::string& path) {
        if (!j.is_array()) {
            error(path, "expected an array");
            return false;
        }
        return true;
    }

    void strict(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
        if (!j.is_object()) {
            return;
        }
        std::set<std::string> known(allowed.begin(), allowed.end());
        for (const auto& [key, value] : j.items()) {
            if (!known.count(key)) {
                error(path + "." + key, "unknown key");
            }
        }
    }

    double number(const json& j, const std::string& path, const char* key, std::optional<double> fallback = std::nullopt) {
        if (!j.contains(key)) {
            if (!fallback) {
                error(path + "." + key, "missing required number");
                return 0.0;
            }
            return *fallback;
        }
        const auto& v = j.at(key);
        if (!v.is_number()) {
            error(path + "." + key, "expected a number");
            return 0.0;
        }
        const double x = v.get<double>();
        if (!std::isfinite(x)) {
            error(path + "." + key, "must be finite");
        }
        return x;
    }

    std::string string(const json& j, const std::string& path, const char* key, std::optional<std::string> fallback = std::nullopt) {
        if (!j.contains(key)) {
            if (!fallback) {
                error(path + "." + key, "missing required string");
                return {};
            }
            return *fallback;
        }
        const auto& v = j.at(key);
        if (!v.is_string()) {
            error(path + "." + key, "expected a string");
            return {};
        }
        return v.get<std::string>();
    }
};

struct Labels {
    std::map<std::string, std::size_t> nodes;
    std::map<std::string, std::size_t> lines;
    std::vector<std::string> dgu;  // DGU labels in DGU order
};

std::optional<std::size_t> node_ref(Reader& r, const json& j, const std::string& path, const Labels& labels) {
    const auto label = r.string(j, path, "node");
    if (label.empty()) {
        return std::nullopt;
    }
    auto it = labels.nodes.find(label);
    if (it == labels.nodes.end()) {
        r.error(path + ".node", "unknown node '" + label + "'");
        return std::nullopt;
    }
    return it->second;
}

ZipLoad read_zip(Reader& r, const json& j, const std::string& path) {
    ZipLoad z;
    if (!r.object(j, path)) {
        return z;
    }
    r.strict(j, path, {"G_siemens", "I_ampere", "P_watt"});
    z.G = r.number(j, path, "G_siemens", 0.0);
    z.I = r.number(j, path, "I_ampere", 0.0);
    z.P = r.number(j, path, "P_watt", 0.0);
    return z;
}

json zip_json(const ZipLoad& z) { return {{"G_siemens", z.G}, {"I_ampere", z.I}, {"P_watt", z.P}}; }

/// Per-DGU value given either as one number for all DGUs or as an object
/// keyed by DGU label.
Vector per_dgu(Reader& r, const json& j, const std::string& path, const char* key, const Labels& labels,
               std::optional<double> fallback = std::nullopt) {
    Vector out = Vector::Constant(idx(labels.dgu.size()), fallback.value_or(0.0));
    const std::string p = path + "." + key;
    if (!j.contains(key)) {
        if (!fallback) {
            r.error(p, "missing (number or object keyed by DGU label)");
        }
        return out;
    }
    const auto& v = j.at(key);
    if (v.is_number()) {
        out.setConstant(v.get<double>());
        return out;
    }
    if (!v.is_object()) {
        r.error(p, "expected a number or an object keyed by DGU label");
        return out;
    }
    std::vector<bool> seen(labels.dgu.size(), false);
    for (const auto& [label, value] : v.items()) {
        auto it = std::find(labels.dgu.begin(), labels.dgu.end(), label);
        if (it == labels.dgu.end()) {
            r.error(p + "." + label, "not a DGU node");
            continue;
        }
        if (!value.is_number()) {
            r.error(p + "." + label, "expected a number");
            continue;
        }
        const auto j_dgu = static_cast<std::size_t>(it - labels.dgu.begin());
        out[idx(j_dgu)] = value.get<double>();
        seen[j_dgu] = true;
    }
    for (std::size_t j_dgu = 0; j_dgu < seen.size(); ++j_dgu) {
        if (!seen[j_dgu] && !fallback) {
            r.error(p + "." + labels.dgu[j_dgu], "missing value for DGU");
        }
    }
    return out;
}

json per_dgu_json(const Vector& v, const std::vector<std::string>& dgu_labels) {
    json out = json::object();
    for (std::size_t j = 0; j < dgu_labels.size(); ++j) {
        out[dgu_labels[j]] = v[idx(j)];
    }
    return out;
}

Vector keyed_vector(Reader& r, const json& j, const std::string& path, const char* key,
                    const std::vector<std::string>& order) {
    Vector out = Vector::Zero(idx(order.size()));
    const std::string p = path + "." + key;
    if (!j.contains(key) || !j.at(key).is_object()) {
        r.error(p, "expected an object keyed by label");
        return out;
    }
    const auto& obj = j.at(key);
    for (const auto& [label, value] : obj.items()) {
        if (std::find(order.begin(), order.end(), label) == order.end()) {
            r.error(p + "." + label, "unknown label");
        }
    }
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (!obj.contains(order[i]) || !obj.at(order[i]).is_number()) {
            r.error(p + "." + order[i], "missing number");
            continue;
        }
        out[idx(i)] = obj.at(order[i]).get<double>();
    }
    return out;
}

json keyed_json(const Eigen::Ref<const Vector>& v, const std::vector<std::string>& order) {
    json out = json::object();
    for (std::size_t i = 0; i < order.size(); ++i) {
        out[order[i]] = v[idx(i)];
    }
    return out;
}

const char* mode_name(DerivativeMode m) { return m == DerivativeMode::Ideal ? "ideal" : "levant"; }

std::vector<std::string> node_labels(const Network& net) {
    std::vector<std::string> out;
    for (const auto& n : net.nodes()) {
        out.push_back(n.label);
    }
    return out;
}

std::vector<std::string> line_labels(const Network& net) {
    std::vector<std::string> out;
    for (const auto& l : net.lines()) {
        out.push_back(l.label);
    }
    return out;
}

std::vector<std::string> dgu_labels(const Network& net) {
    std::vector<std::string> out;
    for (std::size_t node : net.dgu_nodes()) {
        out.push_back(net.nodes()[node].label);
    }
    return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
    : std::runtime_error("invalid scenario config:\n  " + join(errors, "\n  ")), errors_(std::move(errors)) {}

bool ScenarioConfig::operator==(const ScenarioConfig& o) const {
    const bool same_state =
        initial_state.has_value() == o.initial_state.has_value() &&
        (!initial_state || (initial_state->layout() == o.initial_state->layout() &&
                            initial_state->flat() == o.initial_state->flat()));
    return name == o.name && network == o.network && controller == o.controller &&
           initial_demand == o.initial_demand && initial_mode == o.initial_mode && same_state &&
           events == o.events && dt == o.dt && record_dt == o.record_dt && duration == o.duration &&
           nominal_voltage == o.nominal_voltage && output == o.output && seed == o.seed;
}

ScenarioConfig parse_config(const json& doc) {
    Reader r;
    if (!r.object(doc, "$")) {
        throw ConfigError(r.errors);
    }
    r.strict(doc, "$",
             {"name", "nodes", "lines", "allow_negative_power", "controller", "initial_demand", "initial_state",
              "events", "simulation"});

    const std::string name = r.string(doc, "$", "name", std::string("scenario"));
    NetworkOptions options;
    if (doc.contains("allow_negative_power")) {
        if (doc.at("allow_negative_power").is_boolean()) {
            options.allow_negative_power = doc.at("allow_negative_power").get<bool>();
        } else {
            r.error("$.allow_negative_power", "expected a boolean");
        }
    }

    // Nodes
    Labels labels;
    std::vector<NodeSpec> nodes;
    if (doc.contains("nodes") && r.array(doc.at("nodes"), "$.nodes")) {
        const auto& arr = doc.at("nodes");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string p = "$.nodes[" + std::to_string(i) + "]";
            const auto& jn = arr[i];
            if (!r.object(jn, p)) {
                continue;
            }
            r.strict(jn, p, {"label", "kind", "C_farad", "L_s_henry", "V_s_volt", "zip"});
            NodeSpec n;
            n.label = r.string(jn, p, "label");
            const auto kind = r.string(jn, p, "kind");
            if (kind == "dgu") {
                n.kind = NodeKind::Dgu;
                n.L_s = r.number(jn, p, "L_s_henry");
                n.V_s_star = r.number(jn, p, "V_s_volt");
            } else if (kind == "junction") {
                n.kind = NodeKind::Junction;
                if (jn.contains("L_s_henry") || jn.contains("V_s_volt")) {
                    r.error(p, "junction nodes take no L_s_henry / V_s_volt");
                }
            } else {
                r.error(p + ".kind", "expected 'dgu' or 'junction'");
            }
            n.C = r.number(jn, p, "C_farad", n.kind == NodeKind::Junction ? std::optional<double>(kDefaultJunctionCapacitance)
                                                                        : std::nullopt);
            if (jn.contains("zip")) {
                n.zip = read_zip(r, jn.at("zip"), p + ".zip");
            }
            if (!labels.nodes.emplace(n.label, nodes.size()).second) {
                r.error(p + ".label", "duplicate node label '" + n.label + "'");
            }
            if (n.kind == NodeKind::Dgu) {
                labels.dgu.push_back(n.label);
            }
            nodes.push_back(n);
        }
    } else if (!doc.contains("nodes")) {
        r.error("$.nodes", "missing");
    }

    // Lines
    std::vector<Edge> edges;
    std::vector<LineSpec> lines;
    if (doc.contains("lines") && r.array(doc.at("lines"), "$.lines")) {
        const auto& arr = doc.at("lines");
        for (std::size_t k = 0; k < arr.size(); ++k) {
            const std::string p = "$.lines[" + std::to_string(k) + "]";
            const auto& jl = arr[k];
            if (!r.object(jl, p)) {
                continue;
            }
            r.strict(jl, p, {"label", "positive_end", "negative_end", "R_ohm", "L_henry"});
            LineSpec l;
            l.label = r.string(jl, p, "label");
            l.R = r.number(jl, p, "R_ohm");
            l.L = r.number(jl, p, "L_henry");
            const auto from = r.string(jl, p, "positive_end");
            const auto to = r.string(jl, p, "negative_end");
            auto a = labels.nodes.find(from);
            auto b = labels.nodes.find(to);
            if (a == labels.nodes.end()) {
                r.error(p + ".positive_end", "unknown node '" + from + "'");
            }
            if (b == labels.nodes.end()) {
                r.error(p + ".negative_end", "unknown node '" + to + "'");
            }
            if (a != labels.nodes.end() && b != labels.nodes.end()) {
                edges.push_back({a->second, b->second});
            }
            labels.lines.emplace(l.label, lines.size());
            lines.push_back(l);
        }
    } else if (!doc.contains("lines")) {
        r.error("$.lines", "missing");
    }

    if (!r.errors.empty()) {
        throw ConfigError(r.errors);
    }

    std::optional<Network> net;
    try {
        net.emplace(Topology(nodes.size(), edges), nodes, lines, options);
    } catch (const std::exception& err) {
        r.error("$", err.what());
        throw ConfigError(r.errors);
    }

    // Controller
    ControllerConfig ctrl;
    {
        const std::string p = "$.controller";
        const json empty = json::object();
        const json& jc = doc.contains("controller") ? doc.at("controller") : empty;
        if (!doc.contains("controller")) {
            r.error(p, "missing");
        }
        if (r.object(jc, p)) {
            r.strict(jc, p,
                     {"T_c", "K_c", "V_d_star_volt", "derivative_mode", "u_min", "u_max", "decimation",
                      "levant_bound_current_ampere_per_s2", "levant_bound_voltage_volt_per_s2"});
            ctrl.T_c = per_dgu(r, jc, p, "T_c", labels);
            ctrl.K_c = per_dgu(r, jc, p, "K_c", labels);
            ctrl.V_d_star = per_dgu(r, jc, p, "V_d_star_volt", labels);
            const auto mode = r.string(jc, p, "derivative_mode", std::string("ideal"));
            if (mode == "ideal") {
                ctrl.derivative_mode = DerivativeMode::Ideal;
            } else if (mode == "levant") {
                ctrl.derivative_mode = DerivativeMode::Levant;
            } else {
                r.error(p + ".derivative_mode", "expected 'ideal' or 'levant'");
            }
            ctrl.u_min = r.number(jc, p, "u_min", 0.0);
            ctrl.u_max = r.number(jc, p, "u_max", 1.0 - kDefaultDutyMargin);
            const double dec = r.number(jc, p, "decimation", 1.0);
            if (dec < 1.0 || dec != std::floor(dec)) {
                r.error(p + ".decimation", "expected a positive integer");
            } else {
                ctrl.decimation = static_cast<std::size_t>(dec);
            }
            ctrl.levant_bound_current = r.number(jc, p, "levant_bound_current_ampere_per_s2", ctrl.levant_bound_current);
            ctrl.levant_bound_voltage = r.number(jc, p, "levant_bound_voltage_volt_per_s2", ctrl.levant_bound_voltage);
        }
    }

    // Initial demand
    std::vector<DemandSpec> demand;
    if (doc.contains("initial_demand") && r.array(doc.at("initial_demand"), "$.initial_demand")) {
        const auto& arr = doc.at("initial_demand");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string p = "$.initial_demand[" + std::to_string(i) + "]";
            if (!r.object(arr[i], p)) {
                continue;
            }
            r.strict(arr[i], p, {"node", "I_ampere", "P_watt", "P_step_watt"});
            DemandSpec d;
            if (auto node = node_ref(r, arr[i], p, labels)) {
                d.node = *node;
                if (net->nodes()[*node].kind != NodeKind::Junction) {
                    r.error(p + ".node", "demand is only allowed at junction nodes");
                }
            }
            d.I = r.number(arr[i], p, "I_ampere", 0.0);
            d.P = r.number(arr[i], p, "P_watt", 0.0);
            d.P_step = r.number(arr[i], p, "P_step_watt", 0.0);
            demand.push_back(d);
        }
    }

    // Initial state
    InitialMode mode = InitialMode::Equilibrium;
    std::optional<SystemState> initial;
    if (doc.contains("initial_state")) {
        const std::string p = "$.initial_state";
        const auto& js = doc.at("initial_state");
        if (r.object(js, p)) {
            r.strict(js, p, {"mode", "I_s_ampere", "V_volt", "I_ampere", "u"});
            const auto m = r.string(js, p, "mode");
            if (m == "equilibrium") {
                for (const char* key : {"I_s_ampere", "V_volt", "I_ampere", "u"}) {
                    if (js.contains(key)) {
                        r.error(p + "." + key, "not allowed with mode 'equilibrium'");
                    }
                }
            } else if (m == "explicit") {
                mode = InitialMode::Explicit;
                initial = SystemState::from_parts(keyed_vector(r, js, p, "I_s_ampere", labels.dgu),
                                                  keyed_vector(r, js, p, "V_volt", node_labels(*net)),
                                                  keyed_vector(r, js, p, "I_ampere", line_labels(*net)),
                                                  keyed_vector(r, js, p, "u", labels.dgu));
            } else {
                r.error(p + ".mode", "expected 'equilibrium' or 'explicit'");
            }
        }
    } else {
        r.error("$.initial_state", "missing (initial conditions must be stated)");
    }

    // Events
    std::vector<Event> events;
    if (doc.contains("events") && r.array(doc.at("events"), "$.events")) {
        const auto& arr = doc.at("events");
        for (std::size_t e = 0; e < arr.size(); ++e) {
            const std::string p = "$.events[" + std::to_string(e) + "]";
            const auto& je = arr[e];
            if (!r.object(je, p)) {
                continue;
            }
            Event ev;
            ev.t = r.number(je, p, "t_second");
            const auto action = r.string(je, p, "action");
            const auto node = node_ref(r, je, p, labels).value_or(0);
            if (action == "set_zip") {
                r.strict(je, p, {"t_second", "action", "node", "G_siemens", "I_ampere", "P_watt"});
                ev.action = SetZip{node, ZipLoad{r.number(je, p, "G_siemens", 0.0), r.number(je, p, "I_ampere", 0.0),
                                                 r.number(je, p, "P_watt", 0.0)}};
            } else if (action == "set_junction_demand") {
                r.strict(je, p, {"t_second", "action", "node", "I_ampere", "P_watt"});
                ev.action = SetJunctionDemand{node, {r.number(je, p, "I_ampere", 0.0), r.number(je, p, "P_watt", 0.0)}};
            } else if (action == "set_junction_power_step") {
                r.strict(je, p, {"t_second", "action", "node", "P_watt"});
                ev.action = SetJunctionPowerStep{node, r.number(je, p, "P_watt")};
            } else if (action == "set_reference") {
                r.strict(je, p, {"t_second", "action", "node", "V_d_star_volt"});
                ev.action = SetReference{node, r.number(je, p, "V_d_star_volt")};
            } else if (action == "set_gains") {
                r.strict(je, p, {"t_second", "action", "node", "T_c", "K_c"});
                ev.action = SetGains{node, r.number(je, p, "T_c"), r.number(je, p, "K_c")};
            } else {
                r.error(p + ".action",
                        "expected one of set_zip, set_junction_demand, set_junction_power_step, set_reference, set_gains");
            }
            events.push_back(ev);
        }
    }

    // Simulation
    double dt = 1e-5, record_dt = 1e-3, duration = 1.0, nominal = 0.0;
    std::string output = name + ".csv";
    std::uint64_t seed = 0;
    if (doc.contains("simulation")) {
        const std::string p = "$.simulation";
        const auto& js = doc.at("simulation");
        if (r.object(js, p)) {
            r.strict(js, p,
                     {"dt_second", "record_dt_second", "duration_second", "nominal_voltage_volt", "output", "seed"});
            dt = r.number(js, p, "dt_second", dt);
            record_dt = r.number(js, p, "record_dt_second", record_dt);
            duration = r.number(js, p, "duration_second");
            nominal = r.number(js, p, "nominal_voltage_volt", 0.0);
            output = r.string(js, p, "output", output);
            if (js.contains("seed")) {
                if (js.at("seed").is_number_unsigned()) {
                    seed = js.at("seed").get<std::uint64_t>();
                } else {
                    r.error(p + ".seed", "expected a non-negative integer");
                }
            }
        }
    } else {
        r.error("$.simulation", "missing");
    }
    if (nominal == 0.0 && ctrl.V_d_star.size() > 0) {
        nominal = ctrl.V_d_star.maxCoeff();
    }

    if (!r.errors.empty()) {
        throw ConfigError(r.errors);
    }

    ScenarioConfig cfg{name,     std::move(*net), ctrl,      demand, mode,    initial, events,
                       dt,       record_dt,       duration,  nominal, output, seed};
    // Feasibility: shapes, reference vs source voltage, event targets.
    (void)build_scenario(cfg);
    return cfg;
}

json to_json(const ScenarioConfig& c) {
    const auto& net = c.network;
    const auto dgus = dgu_labels(net);
    json doc;
    doc["name"] = c.name;
    doc["allow_negative_power"] = net.options().allow_negative_power;

    json nodes = json::array();
    for (const auto& n : net.nodes()) {
        json jn = {{"label", n.label}, {"kind", n.kind == NodeKind::Dgu ? "dgu" : "junction"}, {"C_farad", n.C}};
        if (n.kind == NodeKind::Dgu) {
            jn["L_s_henry"] = n.L_s;
            jn["V_s_volt"] = n.V_s_star;
        }
        jn["zip"] = zip_json(n.zip);
        nodes.push_back(jn);
    }
    doc["nodes"] = nodes;

    json lines = json::array();
    for (std::size_t k = 0; k < net.n_lines(); ++k) {
        const auto& e = net.topology().edges()[k];
        const auto& l = net.lines()[k];
        lines.push_back({{"label", l.label},
                         {"positive_end", net.nodes()[e.positive_end].label},
                         {"negative_end", net.nodes()[e.negative_end].label},
                         {"R_ohm", l.R},
                         {"L_henry", l.L}});
    }
    doc["lines"] = lines;

    const auto& k = c.controller;
    doc["controller"] = {{"T_c", per_dgu_json(k.T_c, dgus)},
                         {"K_c", per_dgu_json(k.K_c, dgus)},
                         {"V_d_star_volt", per_dgu_json(k.V_d_star, dgus)},
                         {"derivative_mode", mode_name(k.derivative_mode)},
                         {"u_min", k.u_min},
                         {"u_max", k.u_max},
                         {"decimation", k.decimation},
                         {"levant_bound_current_ampere_per_s2", k.levant_bound_current},
                         {"levant_bound_voltage_volt_per_s2", k.levant_bound_voltage}};

    json demand = json::array();
    for (const auto& d : c.initial_demand) {
        demand.push_back({{"node", net.nodes()[d.node].label}, {"I_ampere", d.I}, {"P_watt", d.P}, {"P_step_watt", d.P_step}});
    }
    doc["initial_demand"] = demand;

    if (c.initial_mode == InitialMode::Equilibrium) {
        doc["initial_state"] = {{"mode", "equilibrium"}};
    } else {
        const auto& s = *c.initial_state;
        doc["initial_state"] = {{"mode", "explicit"},
                                {"I_s_ampere", keyed_json(s.I_s(), dgus)},
                                {"V_volt", keyed_json(s.V(), node_labels(net))},
                                {"I_ampere", keyed_json(s.I(), line_labels(net))},
                                {"u", keyed_json(s.u(), dgus)}};
    }

    json events = json::array();
    for (const auto& ev : c.events) {
        json je = {{"t_second", ev.t}};
        std::visit(
            [&](const auto& a) {
                using T = std::decay_t<decltype(a)>;
                je["node"] = net.nodes()[a.node].label;
                if constexpr (std::is_same_v<T, SetZip>) {
                    je["action"] = "set_zip";
                    je["G_siemens"] = a.load.G;
                    je["I_ampere"] = a.load.I;
                    je["P_watt"] = a.load.P;
                } else if constexpr (std::is_same_v<T, SetJunctionDemand>) {
                    je["action"] = "set_junction_demand";
                    je["I_ampere"] = a.demand.I;
                    je["P_watt"] = a.demand.P;
                } else if constexpr (std::is_same_v<T, SetJunctionPowerStep>) {
                    je["action"] = "set_junction_power_step";
                    je["P_watt"] = a.P;
                } else if constexpr (std::is_same_v<T, SetReference>) {
                    je["action"] = "set_reference";
                    je["V_d_star_volt"] = a.V_d_star;
                } else {
                    je["action"] = "set_gains";
                    je["T_c"] = a.T_c;
                    je["K_c"] = a.K_c;
                }
            },
            ev.action);
        events.push_back(je);
    }
    doc["events"] = events;

    doc["simulation"] = {{"dt_second", c.dt},
                         {"record_dt_second", c.record_dt},
                         {"duration_second", c.duration},
                         {"nominal_voltage_volt", c.nominal_voltage},
                         {"output", c.output},
                         {"seed", c.seed}};
    return doc;
}

ScenarioConfig load_config(const std::string& path_or_preset) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path_or_preset, ec)) {
        if (auto preset = find_preset(path_or_preset)) {
            return *preset;
        }
        throw ConfigError({path_or_preset + ": no such file or preset"});
    }
    std::ifstream in(path_or_preset);
    if (!in) {
        throw ConfigError({path_or_preset + ": cannot open"});
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& err) {
        throw ConfigError({path_or_preset + ": " + err.what()});
    }
    return parse_config(doc);
}

void save_config(const ScenarioConfig& config, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << to_json(config).dump(2) << '\n';
}

Network rse_network(double junction_capacitance) {
    constexpr double L_s = 1.12e-3;
    constexpr double C_out = 6.8e-3;
    constexpr double V_s = 278.0;
    std::vector<NodeSpec> nodes = {
        {"1", NodeKind::Junction, 0.0, junction_capacitance, 0.0, {}},
        {"2", NodeKind::Dgu, L_s, C_out, V_s, {}},
        {"3", NodeKind::Junction, 0.0, junction_capacitance, 0.0, {}},
        {"4", NodeKind::Dgu, L_s, C_out, V_s, {}},
    };
    std::vector<LineSpec> lines = {
        {"12", 250e-3, 140e-6},
        {"13", 39e-3, 86e-6},
        {"34", 250e-3, 140e-6},
    };
    Topology topology(4, {{0, 1}, {0, 2}, {2, 3}});
    return Network(std::move(topology), std::move(nodes), std::move(lines));
}

namespace {

ScenarioConfig rse_preset(const std::string& name, double duration) {
    auto net = rse_network();
    auto ctrl = ControllerConfig::uniform(net, 1e7, 1e9, 380.0);
    return ScenarioConfig{name, std::move(net), ctrl, {}, InitialMode::Equilibrium, std::nullopt, {},
                          1e-5, 1e-3, duration, 380.0, name + ".csv", 0};
}

}  // namespace

std::vector<std::string> preset_names() {
    return {"rse_base", "rse_scenario1a", "rse_scenario1b", "rse_scenario2a", "rse_scenario2b"};
}

std::optional<ScenarioConfig> find_preset(const std::string& name) {
    constexpr std::size_t node1 = 0, node2 = 1, node3 = 2, node4 = 3;
    if (name == "rse_base") {
        return rse_preset(name, 1.0);
    }
    if (name == "rse_scenario1a" || name == "rse_scenario1") {
        auto c = rse_preset("rse_scenario1a", 60.0);
        c.events = {{5.0, SetJunctionPowerStep{node1, 20e3}}, {45.0, SetJunctionPowerStep{node1, 0.0}}};
        return c;
    }
    if (name == "rse_scenario1b") {
        auto c = rse_preset(name, 60.0);
        c.events = {{5.0, SetJunctionPowerStep{node3, -20e3}}, {45.0, SetJunctionPowerStep{node3, 0.0}}};
        return c;
    }
    if (name == "rse_scenario2a" || name == "rse_scenario2" || name == "rse_scenario2b") {
        const bool up = name == "rse_scenario2b";
        auto c = rse_preset(up ? "rse_scenario2b" : "rse_scenario2a", 60.0);
        const double ref = up ? 385.0 : 375.0;
        c.initial_demand = {{node3, 0.0, 0.0, -20e3}};
        c.events = {{5.0, SetReference{node2, ref}}, {45.0, SetReference{node4, ref}}};
        return c;
    }
    return std::nullopt;
}

Scenario build_scenario(const ScenarioConfig& c) {
    const auto& net = c.network;
    std::vector<JunctionDemand> demand(net.n_nodes());
    std::vector<JunctionDemand> as_power(net.n_nodes());
    bool has_step = false;
    for (const auto& d : c.initial_demand) {
        if (d.node >= net.n_nodes() || net.nodes()[d.node].kind != NodeKind::Junction) {
            throw ConfigError({"$.initial_demand: demand is only allowed at junction nodes"});
        }
        demand[d.node].I += d.I;
        demand[d.node].P += d.P;
        as_power[d.node].I += d.I;
        as_power[d.node].P += d.P + d.P_step;
        has_step = has_step || d.P_step != 0.0;
    }

    auto convert_steps = [&](const Eigen::Ref<const Vector>& V) {
        for (const auto& d : c.initial_demand) {
            demand[d.node].I += d.P_step / V[idx(d.node)];
        }
    };

    std::optional<SystemState> initial;
    try {
        if (c.initial_mode == InitialMode::Explicit) {
            if (!c.initial_state) {
                throw ConfigError({"$.initial_state: explicit mode without values"});
            }
            initial = *c.initial_state;
            if (!(initial->layout() == StateLayout::of(net))) {
                throw ConfigError({"$.initial_state: shape does not match the network"});
            }
            if ((initial->V().array() <= 0.0).any()) {
                throw ConfigError({"$.initial_state.V_volt: voltages must be positive"});
            }
            convert_steps(initial->V());
        } else {
            c.controller.validate(net);
            const Vector u_star = duty_reference(source_voltages(net), c.controller.V_d_star);
            if (has_step) {
                const auto eq_power = steady_state_closed_form(u_star, net, as_power);
                convert_steps(eq_power.V_bar);
            }
            const auto eq = steady_state_closed_form(u_star, net, demand);
            if (!eq.feasible) {
                std::ostringstream msg;
                msg << "$.initial_state: equilibrium residual " << eq.residual_norm << " above tolerance";
                throw ConfigError({msg.str()});
            }
            initial = eq.as_state();
        }

        Scenario s{c.name, net, c.controller, *initial, demand, c.events, c.dt, c.record_dt, c.duration, c.nominal_voltage};
        validate_scenario(s);
        return s;
    } catch (const ConfigError&) {
        throw;
    } catch (const ScenarioError& err) {
        const std::string where = err.event_index() < 0 ? "$" : "$.events[" + std::to_string(err.event_index()) + "]";
        throw ConfigError({where + ": " + err.what()});
    } catch (const std::exception& err) {
        throw ConfigError({std::string("$: ") + err.what()});
    }
}

std::vector<std::string> csv_columns(const Trajectory& t) {
    std::vector<std::string> cols{"t"};
    for (const auto& l : t.dgu_labels) cols.push_back("I_s[" + l + "]");
    for (const auto& l : t.node_labels) cols.push_back("V[" + l + "]");
    for (const auto& l : t.line_labels) cols.push_back("I[" + l + "]");
    for (const auto& l : t.dgu_labels) cols.push_back("u[" + l + "]");
    for (const auto& l : t.dgu_labels) cols.push_back("v_c[" + l + "]");
    for (const char* c : {"S", "S_d", "S_d_dot", "supply_rate", "in_zip"}) cols.emplace_back(c);
    for (const auto& l : t.dgu_labels) cols.push_back("sat[" + l + "]");
    return cols;
}

std::string format_csv(const Trajectory& t) {
    if (t.samples.empty()) {
        throw std::invalid_argument("format_csv: empty trajectory");
    }
    std::string out;
    out.reserve(t.samples.size() * 400);
    out += "# dcmg trajectory v1\n";
    out += "# I[k] > 0 flows from the negative end into the positive end of line k\n";
    out += "# I_s > 0 is drawn from the source; load and demand currents > 0 are absorbed\n";
    out += join(csv_columns(t), ",") + "\n";

    char buf[32];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out += buf;
    };
    for (const auto& s : t.samples) {
        put(s.t);
        for (Eigen::Index i = 0; i < s.x.size(); ++i) {
            if (i == t.layout.off_u()) {
                break;
            }
            out += ',';
            put(s.x[i]);
        }
        for (Eigen::Index i = t.layout.off_u(); i < s.x.size(); ++i) {
            out += ',';
            put(s.x[i]);
        }
        for (Eigen::Index j = 0; j < s.v_c.size(); ++j) {
            out += ',';
            put(s.v_c[j]);
        }
        for (double v : {s.monitor.S, s.monitor.S_d, s.monitor.S_d_dot_analytic, s.monitor.supply_rate}) {
            out += ',';
            put(v);
        }
        out += s.monitor.in_zip_region ? ",1" : ",0";
        for (bool b : s.saturated) {
            out += b ? ",1" : ",0";
        }
        out += '\n';
    }
    return out;
}

void emit_csv(const Trajectory& t, const std::filesystem::path& path) {
    const auto text = format_csv(t);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) {
        throw std::runtime_error("write failed for " + path.string());
    }
}

}  // namespace dcmg
