#include "pcsim/config.hpp"

#include "pcsim/integrator.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace pcsim {

namespace {

/// Error context: source name plus the dotted key path of the node being read.
class Ctx {
public:
    Ctx(std::string source, std::string path) : source_(std::move(source)), path_(std::move(path)) {}

    Ctx key(const std::string& k) const { return {source_, path_.empty() ? k : path_ + "." + k}; }
    Ctx item(std::size_t i) const { return {source_, path_ + "[" + std::to_string(i) + "]"}; }

    [[noreturn]] void fail(const YAML::Node& n, const std::string& msg) const {
        std::ostringstream s;
        s << source_;
        const YAML::Mark m = n.Mark();
        if (!m.is_null()) s << ":" << m.line + 1 << ":" << m.column + 1;
        s << ": " << (path_.empty() ? "<root>" : path_) << ": " << msg;
        throw ConfigError(s.str());
    }

    const std::string& source() const { return source_; }

private:
    std::string source_;
    std::string path_;
};

void check_keys(const YAML::Node& n, const Ctx& ctx, std::initializer_list<const char*> allowed) {
    if (!n.IsMap()) ctx.fail(n, "expected a mapping");
    for (const auto& kv : n) {
        const std::string k = kv.first.as<std::string>();
        const bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; });
        if (!ok) {
            std::string list;
            for (const char* a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
            ctx.key(k).fail(kv.first, "unknown key (allowed: " + list + ")");
        }
    }
}

double get_double(const YAML::Node& n, const Ctx& ctx) {
    if (!n.IsScalar()) ctx.fail(n, "expected a number");
    try {
        return n.as<double>();
    } catch (const YAML::Exception&) {
        ctx.fail(n, "expected a number, got '" + n.Scalar() + "'");
    }
}

double get_positive(const YAML::Node& n, const Ctx& ctx) {
    const double v = get_double(n, ctx);
    if (!(v > 0.0) || !std::isfinite(v)) ctx.fail(n, "must be a positive finite number");
    return v;
}

long long get_int(const YAML::Node& n, const Ctx& ctx) {
    if (!n.IsScalar()) ctx.fail(n, "expected an integer");
    try {
        return n.as<long long>();
    } catch (const YAML::Exception&) {
        ctx.fail(n, "expected an integer, got '" + n.Scalar() + "'");
    }
}

bool get_bool(const YAML::Node& n, const Ctx& ctx) {
    if (!n.IsScalar()) ctx.fail(n, "expected true or false");
    try {
        return n.as<bool>();
    } catch (const YAML::Exception&) {
        ctx.fail(n, "expected true or false, got '" + n.Scalar() + "'");
    }
}

std::string get_string(const YAML::Node& n, const Ctx& ctx) {
    if (!n.IsScalar()) ctx.fail(n, "expected a string");
    return n.Scalar();
}

Index get_node_index(const YAML::Node& n, const Ctx& ctx, Index nu) {
    const long long v = get_int(n, ctx);
    if (v < 0 || v >= nu) ctx.fail(n, "node index " + std::to_string(v) + " out of range 0.." + std::to_string(nu - 1));
    return static_cast<Index>(v);
}

/// Scalar (broadcast) or a list of exactly `size` numbers.
Vec get_vector(const YAML::Node& n, const Ctx& ctx, Index size, double scale = 1.0) {
    if (n.IsScalar()) return Vec::Constant(size, get_double(n, ctx) * scale);
    if (!n.IsSequence()) ctx.fail(n, "expected a number or a list of numbers");
    if (static_cast<Index>(n.size()) != size) {
        ctx.fail(n, "expected " + std::to_string(size) + " entries, got " + std::to_string(n.size()));
    }
    Vec v(size);
    for (std::size_t i = 0; i < n.size(); ++i) v(static_cast<Index>(i)) = get_double(n[i], ctx.item(i)) * scale;
    return v;
}

/// Scalar c (c I), list (diagonal) or list of rows (full matrix).
Mat get_matrix(const YAML::Node& n, const Ctx& ctx, Index rows) {
    if (n.IsScalar()) return get_double(n, ctx) * Mat::Identity(rows, rows);
    if (!n.IsSequence()) ctx.fail(n, "expected a number, a diagonal list or a list of rows");
    if (static_cast<Index>(n.size()) != rows) {
        ctx.fail(n, "expected " + std::to_string(rows) + " entries, got " + std::to_string(n.size()));
    }
    if (n.size() > 0 && n[0].IsSequence()) {
        Mat m(rows, rows);
        for (std::size_t i = 0; i < n.size(); ++i) {
            if (!n[i].IsSequence()) ctx.item(i).fail(n[i], "expected a row list");
            const Vec r = get_vector(n[i], ctx.item(i), rows);
            m.row(static_cast<Index>(i)) = r.transpose();
        }
        return m;
    }
    return get_vector(n, ctx, rows).asDiagonal();
}

std::vector<Edge> get_edges(const YAML::Node& n, const Ctx& ctx, Index nu, bool physical) {
    if (!n.IsSequence()) ctx.fail(n, "expected a list of edges");
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n.size(); ++i) {
        const YAML::Node e = n[i];
        const Ctx c = ctx.item(i);
        Edge edge;
        if (e.IsSequence()) {
            if (physical) c.fail(e, "lines need a mapping {from, to, R, L}");
            if (e.size() != 2 && e.size() != 3) c.fail(e, "expected [from, to] or [from, to, weight]");
            edge.tail = get_node_index(e[0], c.item(0), nu);
            edge.head = get_node_index(e[1], c.item(1), nu);
            if (e.size() == 3) edge.weight = get_positive(e[2], c.item(2));
        } else {
            if (physical) {
                check_keys(e, c, {"from", "to", "R", "L"});
            } else {
                check_keys(e, c, {"from", "to", "weight"});
            }
            for (const char* req : {"from", "to"}) {
                if (!e[req]) c.fail(e, std::string("missing '") + req + "'");
            }
            edge.tail = get_node_index(e["from"], c.key("from"), nu);
            edge.head = get_node_index(e["to"], c.key("to"), nu);
            if (!physical && e["weight"]) edge.weight = get_positive(e["weight"], c.key("weight"));
        }
        if (edge.tail == edge.head) c.fail(e, "self-loop");
        edges.push_back(edge);
    }
    return edges;
}

LoadChannel parse_channel(const YAML::Node& n, const Ctx& ctx) {
    const std::string s = get_string(n, ctx);
    if (s == "power") return LoadChannel::Power;
    if (s == "current") return LoadChannel::Current;
    if (s == "conductance") return LoadChannel::Conductance;
    ctx.fail(n, "unknown channel '" + s + "' (known: power, current, conductance)");
}

DisturbanceShape parse_shape(const YAML::Node& n, const Ctx& ctx) {
    const std::string s = get_string(n, ctx);
    if (s == "step") return DisturbanceShape::Step;
    if (s == "converging_sinusoid") return DisturbanceShape::ConvergingSinusoid;
    if (s == "persistent_sinusoid") return DisturbanceShape::PersistentSinusoid;
    ctx.fail(n, "unknown shape '" + s + "' (known: step, converging_sinusoid, persistent_sinusoid)");
}

const char* channel_name(LoadChannel c) {
    switch (c) {
        case LoadChannel::Power: return "power";
        case LoadChannel::Current: return "current";
        case LoadChannel::Conductance: return "conductance";
    }
    return "power";
}

const char* shape_name(DisturbanceShape s) {
    switch (s) {
        case DisturbanceShape::Step: return "step";
        case DisturbanceShape::ConvergingSinusoid: return "converging_sinusoid";
        case DisturbanceShape::PersistentSinusoid: return "persistent_sinusoid";
    }
    return "step";
}

std::vector<LoadDisturbance> get_disturbances(const YAML::Node& n, const Ctx& ctx, Index nu) {
    if (n.IsNull()) return {};
    if (!n.IsSequence()) ctx.fail(n, "expected a list of disturbances");
    std::vector<LoadDisturbance> out;
    for (std::size_t i = 0; i < n.size(); ++i) {
        const YAML::Node e = n[i];
        const Ctx c = ctx.item(i);
        check_keys(e, c, {"node", "channel", "shape", "onset", "amplitude", "amplitude_kW", "decay", "frequency"});
        LoadDisturbance d;
        if (!e["node"]) c.fail(e, "missing 'node'");
        d.node = get_node_index(e["node"], c.key("node"), nu);
        if (e["channel"]) d.channel = parse_channel(e["channel"], c.key("channel"));
        if (e["shape"]) d.shape = parse_shape(e["shape"], c.key("shape"));
        if (e["onset"]) {
            d.onset = get_double(e["onset"], c.key("onset"));
            if (d.onset < 0.0) c.key("onset").fail(e["onset"], "must be >= 0");
        }
        if (e["amplitude"] && e["amplitude_kW"]) c.fail(e, "give either 'amplitude' or 'amplitude_kW'");
        if (e["amplitude_kW"]) {
            if (d.channel != LoadChannel::Power) c.key("amplitude_kW").fail(e["amplitude_kW"], "only valid for the power channel");
            d.amplitude = 1e3 * get_double(e["amplitude_kW"], c.key("amplitude_kW"));
        } else if (e["amplitude"]) {
            d.amplitude = get_double(e["amplitude"], c.key("amplitude"));
        } else {
            c.fail(e, "missing 'amplitude' or 'amplitude_kW'");
        }
        if (e["decay"]) d.decay = get_double(e["decay"], c.key("decay"));
        if (e["frequency"]) d.frequency = get_double(e["frequency"], c.key("frequency"));
        if (d.shape == DisturbanceShape::ConvergingSinusoid && !(d.decay > 0.0)) {
            c.fail(e, "converging_sinusoid needs decay > 0");
        }
        out.push_back(d);
    }
    return out;
}

Index comm_channels(const std::vector<Edge>& comm, Index nu, const std::vector<Index>& subset) {
    if (subset.empty()) return static_cast<Index>(comm.size());
    return embedded_subset_factor(comm, nu, subset).channels();
}

ScenarioSpec base_spec(int id) {
    if (id == 0) {
        ScenarioSpec s = scenario_preset(1);
        s.id = 0;
        s.name = "custom";
        s.disturbance = DisturbanceProfile();
        return s;
    }
    return scenario_preset(id);
}

int parse_scenario_id(const YAML::Node& n, const Ctx& ctx) {
    const std::string s = get_string(n, ctx);
    if (s == "custom") return 0;
    if (s == "1" || s == "2" || s == "3" || s == "4") return std::stoi(s);
    ctx.fail(n, "expected 1, 2, 3, 4 or custom");
}

void apply_overrides(RunConfig& cfg, const ConfigOverrides& ov) {
    if (ov.dt) cfg.spec.dt = *ov.dt;
    if (ov.t_end) cfg.spec.t_end = *ov.t_end;
    if (ov.downsample) cfg.spec.downsample = *ov.downsample;
    if (ov.out_dir) cfg.out_dir = *ov.out_dir;
    if (!(cfg.spec.dt > 0.0) || !std::isfinite(cfg.spec.dt)) {
        throw ConfigError("--dt: step size must be positive");
    }
    if (!(cfg.spec.t_end > 0.0) || !std::isfinite(cfg.spec.t_end)) {
        throw ConfigError("--t-end: horizon must be positive");
    }
    if (cfg.spec.downsample < 0) throw ConfigError("--downsample: must be >= 0");
}

RunConfig build(const YAML::Node& root, const std::string& source, const ConfigOverrides& ov) {
    const Ctx ctx(source, "");
    const bool have_root = root && !root.IsNull();
    if (have_root) {
        check_keys(root, ctx,
                   {"scenario", "name", "grid", "loads", "disturbances", "communication", "controller",
                    "integrator", "output", "certificates"});
    }
    const YAML::Node top = have_root ? root : YAML::Node(YAML::NodeType::Map);
    auto section = [&](const char* k) { return top[k]; };

    int id = 1;
    if (section("scenario")) id = parse_scenario_id(section("scenario"), ctx.key("scenario"));
    if (ov.scenario) id = *ov.scenario;
    if (id < 0 || id > 4) throw ConfigError("--scenario: expected 1..4 (or custom)");

    RunConfig cfg;
    cfg.spec = base_spec(id);
    ScenarioSpec& s = cfg.spec;
    if (const YAML::Node n = section("name")) s.name = get_string(n, ctx.key("name"));

    // Grid. A node count different from the preset's requires lines and loads.
    bool resized = false;
    if (const YAML::Node g = section("grid")) {
        const Ctx c = ctx.key("grid");
        check_keys(g, c, {"nodes", "R", "L", "C", "lines", "cpl_guard_V", "additive"});
        if (g["nodes"]) {
            const long long nu = get_int(g["nodes"], c.key("nodes"));
            if (nu < 2) c.key("nodes").fail(g["nodes"], "need at least 2 nodes");
            if (nu != s.topology.nu) {
                resized = true;
                if (!g["lines"]) c.fail(g, "changing 'nodes' requires 'lines'");
                s.topology.nu = static_cast<Index>(nu);
                s.topology.comm_edges.clear();
                s.params.R = Vec::Constant(nu, s.params.R(0));
                s.params.L = Vec::Constant(nu, s.params.L(0));
                s.params.C = Vec::Constant(nu, s.params.C(0));
                s.params.loads = LoadSet::zeros(nu);
                s.disturbance = DisturbanceProfile();
            }
        }
        const Index nu = s.topology.nu;
        if (g["R"]) s.params.R = get_vector(g["R"], c.key("R"), nu);
        if (g["L"]) s.params.L = get_vector(g["L"], c.key("L"), nu);
        if (g["C"]) s.params.C = get_vector(g["C"], c.key("C"), nu);
        if (const YAML::Node lines = g["lines"]) {
            const Ctx lc = c.key("lines");
            s.topology.phys_edges = get_edges(lines, lc, nu, true);
            const Index mu = s.topology.mu();
            s.params.Rt.resize(mu);
            s.params.Lt.resize(mu);
            for (std::size_t i = 0; i < lines.size(); ++i) {
                const YAML::Node e = lines[i];
                if (!e["R"] || !e["L"]) lc.item(i).fail(e, "line needs 'R' and 'L'");
                s.params.Rt(static_cast<Index>(i)) = get_double(e["R"], lc.item(i).key("R"));
                s.params.Lt(static_cast<Index>(i)) = get_double(e["L"], lc.item(i).key("L"));
            }
        }
        if (g["cpl_guard_V"]) s.cpl_guard = get_double(g["cpl_guard_V"], c.key("cpl_guard_V"));
        if (g["additive"]) {
            s.additive = get_vector(g["additive"], c.key("additive"), 2 * nu + s.topology.mu());
        }
    }
    const Index nu = s.topology.nu;
    if (s.additive.size() > 0 && s.additive.size() != 2 * nu + s.topology.mu()) {
        throw ConfigError(source + ": grid.additive: size no longer matches the state after line changes");
    }

    if (const YAML::Node l = section("loads")) {
        const Ctx c = ctx.key("loads");
        check_keys(l, c, {"G", "I", "P_kW", "P"});
        if (l["P"] && l["P_kW"]) c.fail(l, "give either 'P' (W) or 'P_kW'");
        if (l["G"]) s.params.loads.G = get_vector(l["G"], c.key("G"), nu);
        if (l["I"]) s.params.loads.I = get_vector(l["I"], c.key("I"), nu);
        if (l["P_kW"]) s.params.loads.P = get_vector(l["P_kW"], c.key("P_kW"), nu, 1e3);
        if (l["P"]) s.params.loads.P = get_vector(l["P"], c.key("P"), nu);
    } else if (resized) {
        throw ConfigError(source + ": loads: required when grid.nodes changes");
    }

    if (const YAML::Node d = section("disturbances")) {
        s.disturbance = DisturbanceProfile(get_disturbances(d, ctx.key("disturbances"), nu));
    }

    if (const YAML::Node cm = section("communication")) {
        const Ctx c = ctx.key("communication");
        check_keys(cm, c, {"edges"});
        if (cm["edges"]) s.topology.comm_edges = get_edges(cm["edges"], c.key("edges"), nu, false);
    } else if (resized) {
        throw ConfigError(source + ": communication.edges: required when grid.nodes changes");
    }

    // Controller: gains not given fall back to the defaults at the current dimensions.
    ControllerSpec& ctl = s.controller;
    bool m_given = false, k_given = false, g_given = false;
    const YAML::Node cn = section("controller");
    if (cn) {
        const Ctx c = ctx.key("controller");
        check_keys(cn, c, {"variant", "M", "K", "G", "u_bar", "consensus_subset"});
        if (cn["variant"]) {
            try {
                ctl.variant = parse_variant(get_string(cn["variant"], c.key("variant")));
            } catch (const ParameterError& e) {
                c.key("variant").fail(cn["variant"], e.what());
            }
        }
        if (const YAML::Node sub = cn["consensus_subset"]) {
            const Ctx sc = c.key("consensus_subset");
            if (!sub.IsSequence()) sc.fail(sub, "expected a list of node indices");
            ctl.consensus_subset.clear();
            for (std::size_t i = 0; i < sub.size(); ++i) {
                ctl.consensus_subset.push_back(get_node_index(sub[i], sc.item(i), nu));
            }
        }
        if (cn["M"]) {
            ctl.M = get_matrix(cn["M"], c.key("M"), nu);
            m_given = true;
        }
        if (cn["K"]) {
            ctl.K = get_matrix(cn["K"], c.key("K"), nu);
            k_given = true;
        }
        if (const YAML::Node ub = cn["u_bar"]) {
            const Ctx uc = c.key("u_bar");
            check_keys(ub, uc, {"mode", "value", "v_ref"});
            if (ub["mode"]) {
                try {
                    ctl.u_bar_mode = parse_ubar_mode(get_string(ub["mode"], uc.key("mode")));
                } catch (const ParameterError& e) {
                    uc.key("mode").fail(ub["mode"], e.what());
                }
            }
            if (ub["value"]) ctl.u_bar_value = get_vector(ub["value"], uc.key("value"), nu);
            if (ub["v_ref"]) ctl.v_ref = get_double(ub["v_ref"], uc.key("v_ref"));
            if (ctl.u_bar_mode == UBarMode::Constant && ctl.u_bar_value.size() != nu) {
                uc.fail(ub, "constant mode needs 'value'");
            }
        }
    }
    if (!m_given && ctl.M.rows() != nu) ctl.M = 100.0 * Mat::Identity(nu, nu);
    if (!k_given && ctl.K.rows() != nu) ctl.K = 0.2 * Mat::Identity(nu, nu);

    // Channel count depends on the communication graph and subset, so G comes last.
    Index channels = 0;
    try {
        channels = comm_channels(s.topology.comm_edges, nu, ctl.consensus_subset);
    } catch (const Error& e) {
        throw ConfigError(source + ": communication: " + e.what());
    }
    if (cn && cn["G"]) {
        ctl.G = get_matrix(cn["G"], ctx.key("controller").key("G"), channels);
        g_given = true;
    }
    if (!g_given && ctl.G.rows() != channels) ctl.G = Mat::Identity(channels, channels);

    if (const YAML::Node in = section("integrator")) {
        const Ctx c = ctx.key("integrator");
        check_keys(in, c, {"dt", "t_end", "downsample"});
        if (in["dt"]) s.dt = get_positive(in["dt"], c.key("dt"));
        if (in["t_end"]) s.t_end = get_positive(in["t_end"], c.key("t_end"));
        if (in["downsample"]) {
            s.downsample = get_int(in["downsample"], c.key("downsample"));
            if (s.downsample < 0) c.key("downsample").fail(in["downsample"], "must be >= 0 (0 = automatic)");
        }
    }

    if (const YAML::Node out = section("output")) {
        const Ctx c = ctx.key("output");
        check_keys(out, c, {"dir"});
        if (out["dir"]) cfg.out_dir = get_string(out["dir"], c.key("dir"));
    }

    if (const YAML::Node ce = section("certificates")) {
        const Ctx c = ctx.key("certificates");
        check_keys(ce, c, {"krasovskii", "shifted", "gamma", "stride"});
        if (ce["krasovskii"]) s.certificates.krasovskii = get_bool(ce["krasovskii"], c.key("krasovskii"));
        if (ce["shifted"]) s.certificates.shifted = get_bool(ce["shifted"], c.key("shifted"));
        if (const YAML::Node gm = ce["gamma"]) {
            if (gm.IsScalar() && gm.Scalar() == "auto") {
                s.certificates.gamma.reset();
            } else {
                s.certificates.gamma = get_vector(gm, c.key("gamma"), nu);
            }
        }
        if (ce["stride"]) {
            s.certificates.stride = get_int(ce["stride"], c.key("stride"));
            if (s.certificates.stride < 1) c.key("stride").fail(ce["stride"], "must be >= 1");
        }
    }

    apply_overrides(cfg, ov);
    validate_run_config(cfg, source);
    return cfg;
}

}  // namespace

void validate_run_config(const RunConfig& cfg, const std::string& source) {
    const ScenarioSpec& s = cfg.spec;
    try {
        s.topology.validate();
        GridModel model(s.topology, s.params, s.disturbance, s.additive);
        Controller ctl(s.controller, s.topology.comm_edges, s.topology.nu, s.params.R);
        if (s.certificates.gamma && s.certificates.gamma->size() != s.topology.nu) {
            throw ParameterError("gamma needs one entry per node");
        }
        Rk4Grid grid{0.0, s.t_end, s.dt, {}};
        for (double bp : s.disturbance.breakpoints()) {
            if (bp > 0.0 && bp < s.t_end) grid.breakpoints.push_back(bp);
        }
        rk4_step_count(grid);
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(source + ": " + e.what());
    }
}

RunConfig parse_config_text(const std::string& text, const std::string& source, const ConfigOverrides& overrides) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        std::ostringstream s;
        s << source << ":" << e.mark.line + 1 << ":" << e.mark.column + 1 << ": " << e.msg;
        throw ConfigError(s.str());
    }
    return build(root, source, overrides);
}

RunConfig parse_config_file(const std::string& path, const ConfigOverrides& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open config file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path, overrides);
}

RunConfig default_config(const ConfigOverrides& overrides) {
    return build(YAML::Node(), "<flags>", overrides);
}

namespace {

void emit_vec(YAML::Emitter& e, const Vec& v) {
    e << YAML::Flow << YAML::BeginSeq;
    for (Index i = 0; i < v.size(); ++i) e << v(i);
    e << YAML::EndSeq;
}

void emit_mat(YAML::Emitter& e, const Mat& m) {
    e << YAML::BeginSeq;
    for (Index i = 0; i < m.rows(); ++i) emit_vec(e, m.row(i).transpose());
    e << YAML::EndSeq;
}

}  // namespace

std::string emit_config_yaml(const RunConfig& cfg) {
    const ScenarioSpec& s = cfg.spec;
    YAML::Emitter e;
    e.SetDoublePrecision(17);
    e << YAML::BeginMap;
    e << YAML::Key << "scenario" << YAML::Value << (s.id == 0 ? std::string("custom") : std::to_string(s.id));
    e << YAML::Key << "name" << YAML::Value << s.name;

    e << YAML::Key << "grid" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "nodes" << YAML::Value << s.topology.nu;
    e << YAML::Key << "R" << YAML::Value; emit_vec(e, s.params.R);
    e << YAML::Key << "L" << YAML::Value; emit_vec(e, s.params.L);
    e << YAML::Key << "C" << YAML::Value; emit_vec(e, s.params.C);
    e << YAML::Key << "lines" << YAML::Value << YAML::BeginSeq;
    for (Index k = 0; k < s.topology.mu(); ++k) {
        const Edge& ed = s.topology.phys_edges[static_cast<std::size_t>(k)];
        e << YAML::Flow << YAML::BeginMap << YAML::Key << "from" << YAML::Value << ed.tail << YAML::Key << "to"
          << YAML::Value << ed.head << YAML::Key << "R" << YAML::Value << s.params.Rt(k) << YAML::Key << "L"
          << YAML::Value << s.params.Lt(k) << YAML::EndMap;
    }
    e << YAML::EndSeq;
    e << YAML::Key << "cpl_guard_V" << YAML::Value << s.cpl_guard;
    if (s.additive.size() > 0) {
        e << YAML::Key << "additive" << YAML::Value;
        emit_vec(e, s.additive);
    }
    e << YAML::EndMap;

    e << YAML::Key << "loads" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "G" << YAML::Value; emit_vec(e, s.params.loads.G);
    e << YAML::Key << "I" << YAML::Value; emit_vec(e, s.params.loads.I);
    e << YAML::Key << "P" << YAML::Value; emit_vec(e, s.params.loads.P);
    e << YAML::EndMap;

    e << YAML::Key << "disturbances" << YAML::Value << YAML::BeginSeq;
    for (const LoadDisturbance& d : s.disturbance.terms()) {
        e << YAML::Flow << YAML::BeginMap;
        e << YAML::Key << "node" << YAML::Value << d.node;
        e << YAML::Key << "channel" << YAML::Value << channel_name(d.channel);
        e << YAML::Key << "shape" << YAML::Value << shape_name(d.shape);
        e << YAML::Key << "onset" << YAML::Value << d.onset;
        e << YAML::Key << "amplitude" << YAML::Value << d.amplitude;
        if (d.decay != 0.0) e << YAML::Key << "decay" << YAML::Value << d.decay;
        if (d.frequency != 0.0) e << YAML::Key << "frequency" << YAML::Value << d.frequency;
        e << YAML::EndMap;
    }
    e << YAML::EndSeq;

    e << YAML::Key << "communication" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "edges" << YAML::Value << YAML::BeginSeq;
    for (const Edge& ed : s.topology.comm_edges) {
        e << YAML::Flow << YAML::BeginSeq << ed.tail << ed.head << ed.weight << YAML::EndSeq;
    }
    e << YAML::EndSeq << YAML::EndMap;

    const ControllerSpec& c = s.controller;
    e << YAML::Key << "controller" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "variant" << YAML::Value << std::string(variant_name(c.variant));
    e << YAML::Key << "M" << YAML::Value; emit_mat(e, c.M);
    e << YAML::Key << "K" << YAML::Value; emit_mat(e, c.K);
    e << YAML::Key << "G" << YAML::Value; emit_mat(e, c.G);
    e << YAML::Key << "u_bar" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "mode" << YAML::Value << std::string(ubar_mode_name(c.u_bar_mode));
    if (c.u_bar_value.size() > 0) {
        e << YAML::Key << "value" << YAML::Value;
        emit_vec(e, c.u_bar_value);
    }
    e << YAML::Key << "v_ref" << YAML::Value << c.v_ref;
    e << YAML::EndMap;
    e << YAML::Key << "consensus_subset" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (Index i : c.consensus_subset) e << i;
    e << YAML::EndSeq;
    e << YAML::EndMap;

    e << YAML::Key << "integrator" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "dt" << YAML::Value << s.dt;
    e << YAML::Key << "t_end" << YAML::Value << s.t_end;
    e << YAML::Key << "downsample" << YAML::Value << s.downsample;
    e << YAML::EndMap;

    e << YAML::Key << "output" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "dir" << YAML::Value << cfg.out_dir;
    e << YAML::EndMap;

    e << YAML::Key << "certificates" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "krasovskii" << YAML::Value << s.certificates.krasovskii;
    e << YAML::Key << "shifted" << YAML::Value << s.certificates.shifted;
    e << YAML::Key << "gamma" << YAML::Value;
    if (s.certificates.gamma) {
        emit_vec(e, *s.certificates.gamma);
    } else {
        e << "auto";
    }
    e << YAML::Key << "stride" << YAML::Value << s.certificates.stride;
    e << YAML::EndMap;

    e << YAML::EndMap;
    return std::string(e.c_str()) + "\n";
}

}  // namespace pcsim
