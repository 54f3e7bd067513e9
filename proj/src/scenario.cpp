#include "cosim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "cosim/error.hpp"

namespace cosim {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// Reading helpers. Every accessor takes the dotted path of the value so
// errors name the offending field.

std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

std::string index(const std::string& path, std::size_t i) {
    return path + "[" + std::to_string(i) + "]";
}

void require_object(const json& j, const std::string& path) {
    if (!j.is_object()) {
        throw ValidationError(path.empty() ? "<root>" : path, "expected an object");
    }
}

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
    require_object(j, path);
    for (const auto& [key, value] : j.items()) {
        if (std::find_if(allowed.begin(), allowed.end(),
                         [&](const char* a) { return key == a; }) == allowed.end()) {
            throw ValidationError(join(path, key), "unknown field");
        }
    }
}

const json* find(const json& j, const char* key) {
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

const json& need(const json& j, const char* key, const std::string& path) {
    const json* v = find(j, key);
    if (!v) {
        throw ValidationError(join(path, key), "required field missing");
    }
    return *v;
}

double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) {
        throw ValidationError(path, "expected a number");
    }
    const double d = v.get<double>();
    if (!std::isfinite(d)) {
        throw ValidationError(path, "must be finite");
    }
    return d;
}

std::string as_string(const json& v, const std::string& path) {
    if (!v.is_string()) {
        throw ValidationError(path, "expected a string");
    }
    return v.get<std::string>();
}

bool as_bool(const json& v, const std::string& path) {
    if (!v.is_boolean()) {
        throw ValidationError(path, "expected true or false");
    }
    return v.get<bool>();
}

std::uint64_t as_uint(const json& v, const std::string& path) {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
        throw ValidationError(path, "expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

Duration as_duration(const json& v, const std::string& path) {
    try {
        if (v.is_string()) {
            return parse_duration(v.get<std::string>());
        }
        if (v.is_number()) {
            return from_seconds(v.get<double>());
        }
    } catch (const Error& e) {
        throw ValidationError(path, e.what());
    }
    throw ValidationError(path, "expected a duration such as \"10ms\" or a number of seconds");
}

Pose2D as_pose(const json& v, const std::string& path) {
    if (!v.is_array() || v.size() < 2 || v.size() > 3) {
        throw ValidationError(path, "expected [x, y] or [x, y, theta]");
    }
    Pose2D p{as_number(v[0], index(path, 0)), as_number(v[1], index(path, 1)), 0.0};
    if (v.size() == 3) {
        p.theta = normalize_angle(as_number(v[2], index(path, 2)));
    }
    return p;
}

template <typename T, typename F>
void opt(const json& j, const char* key, const std::string& path, T& out, F convert) {
    if (const json* v = find(j, key)) {
        out = convert(*v, join(path, key));
    }
}

void opt_number(const json& j, const char* key, const std::string& path, double& out) {
    opt(j, key, path, out, as_number);
}

void opt_duration(const json& j, const char* key, const std::string& path, Duration& out) {
    opt(j, key, path, out, as_duration);
}

template <typename F>
void each(const json& j, const char* key, const std::string& path, F&& body) {
    const json* arr = find(j, key);
    if (!arr) return;
    const std::string p = join(path, key);
    if (!arr->is_array()) {
        throw ValidationError(p, "expected an array");
    }
    for (std::size_t i = 0; i < arr->size(); ++i) {
        body((*arr)[i], index(p, i));
    }
}

// ---------------------------------------------------------------------------
// Section parsers

RadioParams parse_radio(const json& j, const std::string& path, RadioParams base) {
    check_keys(j, path, {"tx_power_dbm", "freq_hz", "antenna_gain_dbi", "noise_floor_dbm"});
    opt_number(j, "tx_power_dbm", path, base.tx_power_dbm);
    opt_number(j, "freq_hz", path, base.freq_hz);
    opt_number(j, "antenna_gain_dbi", path, base.antenna_gain_dbi);
    opt_number(j, "noise_floor_dbm", path, base.noise_floor_dbm);
    return base;
}

RadioParams node_radio(const json& j, const std::string& path, const RadioParams& defaults) {
    if (const json* r = find(j, "radio")) {
        return parse_radio(*r, join(path, "radio"), defaults);
    }
    return defaults;
}

SyncConfig parse_sync(const json& j, const std::string& path) {
    check_keys(j, path, {"mode", "physics_step", "real_time_factor", "time_scale", "emulate_stall"});
    SyncConfig s;
    if (const json* m = find(j, "mode")) {
        s.mode = sync_mode_from_string(as_string(*m, join(path, "mode")));
    }
    opt_duration(j, "physics_step", path, s.physics_step);
    opt_number(j, "real_time_factor", path, s.real_time_factor);
    if (const json* n = find(j, "time_scale")) {
        const std::uint64_t v = as_uint(*n, join(path, "time_scale"));
        if (v < 1 || v > 1'000'000) {
            throw ValidationError(join(path, "time_scale"), "must be in [1, 1e6]");
        }
        s.time_scale = static_cast<int>(v);
    }
    opt(j, "emulate_stall", path, s.emulate_stall, as_bool);
    return s;
}

AssociationParams parse_association(const json& j, const std::string& path) {
    check_keys(j, path, {"assoc_threshold_dbm", "hysteresis_db", "handover_gap", "sensitivity_dbm",
                         "scan_interval", "scan_epsilon_m"});
    AssociationParams a;
    opt_number(j, "assoc_threshold_dbm", path, a.assoc_threshold_dbm);
    opt_number(j, "hysteresis_db", path, a.hysteresis_db);
    opt_duration(j, "handover_gap", path, a.handover_gap);
    opt_number(j, "sensitivity_dbm", path, a.sensitivity_dbm);
    opt_duration(j, "scan_interval", path, a.scan_interval);
    opt_number(j, "scan_epsilon_m", path, a.scan_epsilon_m);
    return a;
}

PropagationModel parse_propagation(const json& j, const std::string& path) {
    require_object(j, path);
    const std::string model = as_string(need(j, "model", path), join(path, "model"));
    if (model == "free_space") {
        check_keys(j, path, {"model", "system_loss_db"});
        FreeSpace fs;
        opt_number(j, "system_loss_db", path, fs.system_loss_db);
        return fs;
    }
    if (model == "log_distance") {
        check_keys(j, path, {"model", "exponent", "ref_loss_db", "ref_dist_m"});
        LogDistance ld;
        opt_number(j, "exponent", path, ld.exponent);
        opt_number(j, "ref_loss_db", path, ld.ref_loss_db);
        opt_number(j, "ref_dist_m", path, ld.ref_dist_m);
        return ld;
    }
    throw ValidationError(join(path, "model"), "expected 'free_space' or 'log_distance'");
}

LossProfile parse_profile(const json& j, const std::string& path) {
    check_keys(j, path, {"base_loss", "fixed_latency", "jitter", "bitrate_bps", "congestion_schedule"});
    LossProfile p;
    opt_number(j, "base_loss", path, p.base_loss);
    opt_duration(j, "fixed_latency", path, p.fixed_latency);
    opt_duration(j, "jitter", path, p.jitter);
    opt_number(j, "bitrate_bps", path, p.bitrate_bps);
    each(j, "congestion_schedule", path, [&](const json& w, const std::string& wp) {
        check_keys(w, wp, {"start", "end", "extra_loss"});
        CongestionWindow cw;
        cw.start = SimTime{as_duration(need(w, "start", wp), join(wp, "start"))};
        cw.end = SimTime{as_duration(need(w, "end", wp), join(wp, "end"))};
        cw.extra_loss = as_number(need(w, "extra_loss", wp), join(wp, "extra_loss"));
        p.congestion_schedule.push_back(cw);
    });
    return p;
}

PidGains parse_gains(const json& j, const std::string& path) {
    check_keys(j, path, {"kp", "ki", "kd", "output_limit", "integral_limit"});
    PidGains g;
    opt_number(j, "kp", path, g.kp);
    opt_number(j, "ki", path, g.ki);
    opt_number(j, "kd", path, g.kd);
    opt_number(j, "output_limit", path, g.output_limit);
    opt_number(j, "integral_limit", path, g.integral_limit);
    return g;
}

Case2Spec parse_case2(const json& j, const std::string& path) {
    check_keys(j, path, {"plant", "controller", "profile", "loss_grid", "seeds", "gains",
                         "control_period", "sensor_bytes", "control_bytes", "converge_band_rad",
                         "converge_window", "write_traces"});
    Case2Spec c;
    c.plant = as_string(need(j, "plant", path), join(path, "plant"));
    c.controller = as_string(need(j, "controller", path), join(path, "controller"));
    opt(j, "profile", path, c.profile, as_string);
    each(j, "loss_grid", path,
         [&](const json& v, const std::string& p) { c.loss_grid.push_back(as_number(v, p)); });
    each(j, "seeds", path,
         [&](const json& v, const std::string& p) { c.seeds.push_back(as_uint(v, p)); });
    if (const json* g = find(j, "gains")) {
        c.gains = parse_gains(*g, join(path, "gains"));
    }
    opt_duration(j, "control_period", path, c.control_period);
    opt(j, "sensor_bytes", path, c.sensor_bytes, as_uint);
    opt(j, "control_bytes", path, c.control_bytes, as_uint);
    opt_number(j, "converge_band_rad", path, c.converge_band_rad);
    opt_duration(j, "converge_window", path, c.converge_window);
    opt(j, "write_traces", path, c.write_traces, as_bool);
    return c;
}

// ---------------------------------------------------------------------------
// Writing helpers

ordered_json pose_json(const Pose2D& p, bool with_theta) {
    if (with_theta) return ordered_json::array({p.x, p.y, p.theta});
    return ordered_json::array({p.x, p.y});
}

ordered_json radio_json(const RadioParams& r) {
    return {{"tx_power_dbm", r.tx_power_dbm},
            {"freq_hz", r.freq_hz},
            {"antenna_gain_dbi", r.antenna_gain_dbi},
            {"noise_floor_dbm", r.noise_floor_dbm}};
}

std::string dur(Duration d) { return format_duration(d); }

bool valid_id(const std::string& id) {
    return !id.empty() && std::all_of(id.begin(), id.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
    });
}

}  // namespace

ScenarioConfig parse_scenario(const json& doc) {
    check_keys(doc, "", {"name", "duration", "seed", "outputs", "sync", "association",
                         "propagation", "radio", "trace_interval", "robots", "plants", "stations",
                         "aps", "hosts", "profiles", "traffic", "case1", "case2", "sync_validation",
                         "gateway"});
    ScenarioConfig cfg;
    cfg.name = as_string(need(doc, "name", ""), "name");
    cfg.duration = as_duration(need(doc, "duration", ""), "duration");
    cfg.seed = as_uint(need(doc, "seed", ""), "seed");
    cfg.outputs = "out/" + cfg.name;
    opt(doc, "outputs", "", cfg.outputs, as_string);

    if (const json* s = find(doc, "sync")) cfg.sync = parse_sync(*s, "sync");
    if (const json* a = find(doc, "association")) cfg.association = parse_association(*a, "association");
    if (const json* p = find(doc, "propagation")) cfg.propagation = parse_propagation(*p, "propagation");
    if (const json* r = find(doc, "radio")) cfg.radio_defaults = parse_radio(*r, "radio", {});
    if (const json* t = find(doc, "trace_interval")) cfg.trace_interval = as_duration(*t, "trace_interval");

    each(doc, "robots", "", [&](const json& r, const std::string& path) {
        check_keys(r, path, {"id", "pose", "params", "waypoint", "waypoints", "radio"});
        RobotSpec spec;
        spec.id = as_string(need(r, "id", path), join(path, "id"));
        opt(r, "pose", path, spec.pose, as_pose);
        if (const json* p = find(r, "params")) {
            const std::string pp = join(path, "params");
            check_keys(*p, pp, {"v_max", "w_max", "accel_limit"});
            opt_number(*p, "v_max", pp, spec.params.v_max);
            opt_number(*p, "w_max", pp, spec.params.w_max);
            opt_number(*p, "accel_limit", pp, spec.params.accel_limit);
        }
        if (const json* w = find(r, "waypoint")) {
            const std::string wp = join(path, "waypoint");
            check_keys(*w, wp, {"capture_radius", "heading_gain"});
            opt_number(*w, "capture_radius", wp, spec.waypoint.capture_radius);
            opt_number(*w, "heading_gain", wp, spec.waypoint.heading_gain);
        }
        each(r, "waypoints", path, [&](const json& w, const std::string& wp) {
            spec.waypoints.push_back(as_pose(w, wp));
        });
        spec.radio = node_radio(r, path, cfg.radio_defaults);
        cfg.robots.push_back(std::move(spec));
    });

    each(doc, "plants", "", [&](const json& p, const std::string& path) {
        check_keys(p, path, {"id", "mount", "params", "initial", "radio"});
        PlantSpec spec;
        spec.id = as_string(need(p, "id", path), join(path, "id"));
        opt(p, "mount", path, spec.mount, as_pose);
        if (const json* q = find(p, "params")) {
            const std::string qp = join(path, "params");
            check_keys(*q, qp, {"cart_mass", "pole_mass", "half_length", "gravity"});
            opt_number(*q, "cart_mass", qp, spec.params.cart_mass);
            opt_number(*q, "pole_mass", qp, spec.params.pole_mass);
            opt_number(*q, "half_length", qp, spec.params.half_length);
            opt_number(*q, "gravity", qp, spec.params.gravity);
        }
        if (const json* s = find(p, "initial")) {
            const std::string sp = join(path, "initial");
            check_keys(*s, sp, {"x", "x_dot", "theta", "theta_dot"});
            opt_number(*s, "x", sp, spec.initial.x);
            opt_number(*s, "x_dot", sp, spec.initial.x_dot);
            opt_number(*s, "theta", sp, spec.initial.theta);
            opt_number(*s, "theta_dot", sp, spec.initial.theta_dot);
        }
        spec.radio = node_radio(p, path, cfg.radio_defaults);
        cfg.plants.push_back(std::move(spec));
    });

    each(doc, "stations", "", [&](const json& s, const std::string& path) {
        check_keys(s, path, {"id", "pos", "radio"});
        StationSpec spec;
        spec.id = as_string(need(s, "id", path), join(path, "id"));
        opt(s, "pos", path, spec.pos, as_pose);
        spec.radio = node_radio(s, path, cfg.radio_defaults);
        cfg.stations.push_back(std::move(spec));
    });

    each(doc, "aps", "", [&](const json& a, const std::string& path) {
        check_keys(a, path, {"id", "pos", "radio"});
        ApSpec spec;
        spec.id = as_string(need(a, "id", path), join(path, "id"));
        spec.pos = as_pose(need(a, "pos", path), join(path, "pos"));
        spec.radio = node_radio(a, path, cfg.radio_defaults);
        cfg.aps.push_back(std::move(spec));
    });

    each(doc, "hosts", "", [&](const json& h, const std::string& path) {
        check_keys(h, path, {"id", "ap"});
        cfg.hosts.push_back({as_string(need(h, "id", path), join(path, "id")),
                             as_string(need(h, "ap", path), join(path, "ap"))});
    });

    if (const json* profiles = find(doc, "profiles")) {
        require_object(*profiles, "profiles");
        for (const auto& [name, p] : profiles->items()) {
            cfg.profiles[name] = parse_profile(p, "profiles." + name);
        }
    }
    if (!cfg.profiles.contains("default")) {
        cfg.profiles["default"] = LossProfile{};
    }

    each(doc, "traffic", "", [&](const json& f, const std::string& path) {
        check_keys(f, path, {"src", "dst", "period", "size_bytes", "profile"});
        FlowSpec spec;
        spec.src = as_string(need(f, "src", path), join(path, "src"));
        spec.dst = as_string(need(f, "dst", path), join(path, "dst"));
        spec.period = as_duration(need(f, "period", path), join(path, "period"));
        opt(f, "size_bytes", path, spec.size_bytes, as_uint);
        opt(f, "profile", path, spec.profile, as_string);
        cfg.traffic.push_back(std::move(spec));
    });

    if (const json* c = find(doc, "case1")) {
        check_keys(*c, "case1", {"robot", "system_loss_sweep_db"});
        Case1Spec spec;
        spec.robot = as_string(need(*c, "robot", "case1"), "case1.robot");
        each(*c, "system_loss_sweep_db", "case1", [&](const json& v, const std::string& p) {
            spec.system_loss_sweep_db.push_back(as_number(v, p));
        });
        cfg.case1 = std::move(spec);
    }
    if (const json* c = find(doc, "case2")) {
        cfg.case2 = parse_case2(*c, "case2");
    }
    if (const json* s = find(doc, "sync_validation")) {
        check_keys(*s, "sync_validation", {"src", "dst", "packets", "interval", "net_delay"});
        SyncValidationSpec spec;
        spec.src = as_string(need(*s, "src", "sync_validation"), "sync_validation.src");
        spec.dst = as_string(need(*s, "dst", "sync_validation"), "sync_validation.dst");
        if (const json* n = find(*s, "packets")) {
            spec.packets = static_cast<int>(std::min<std::uint64_t>(
                as_uint(*n, "sync_validation.packets"), 1'000'000));
        }
        opt_duration(*s, "interval", "sync_validation", spec.interval);
        opt_duration(*s, "net_delay", "sync_validation", spec.net_delay);
        cfg.sync_validation = spec;
    }
    if (const json* g = find(doc, "gateway")) {
        check_keys(*g, "gateway", {"teleop_node", "profile", "command_timeout", "snapshot_hz", "ui_dir"});
        opt(*g, "teleop_node", "gateway", cfg.gateway.teleop_node, as_string);
        opt(*g, "profile", "gateway", cfg.gateway.profile, as_string);
        opt_duration(*g, "command_timeout", "gateway", cfg.gateway.command_timeout);
        opt_number(*g, "snapshot_hz", "gateway", cfg.gateway.snapshot_hz);
        opt(*g, "ui_dir", "gateway", cfg.gateway.ui_dir, as_string);
    }

    cfg.validate();
    return cfg;
}

ScenarioConfig parse_scenario_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed scenario JSON: ") + e.what());
    }
    return parse_scenario(doc);
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open scenario " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario_text(buf.str());
}

bool ScenarioConfig::has_node(const std::string& id) const {
    const auto match = [&](const auto& v) { return v.id == id; };
    return std::any_of(robots.begin(), robots.end(), match) ||
           std::any_of(plants.begin(), plants.end(), match) ||
           std::any_of(stations.begin(), stations.end(), match) ||
           std::any_of(aps.begin(), aps.end(), match) ||
           std::any_of(hosts.begin(), hosts.end(), match);
}

void ScenarioConfig::validate() const {
    if (name.empty()) throw ValidationError("name", "must not be empty");
    if (duration <= Duration::zero()) throw ValidationError("duration", "must be > 0");
    sync.validate();
    association.validate("association");
    cosim::validate(propagation, "propagation");
    radio_defaults.validate("radio");
    if (trace_interval && (*trace_interval <= Duration::zero() ||
                           *trace_interval % sync.physics_step != Duration::zero())) {
        throw ValidationError("trace_interval", "must be a positive multiple of sync.physics_step");
    }

    std::set<std::string> ids;
    std::set<std::string> ap_ids;
    const auto claim = [&](const std::string& id, const std::string& path) {
        if (!valid_id(id)) {
            throw ValidationError(path, "ids may only contain letters, digits, '_', '-' and '.'");
        }
        if (!ids.insert(id).second) {
            throw ValidationError(path, "duplicate node id '" + id + "'");
        }
    };
    for (std::size_t i = 0; i < robots.size(); ++i) {
        const std::string path = index("robots", i);
        claim(robots[i].id, path + ".id");
        robots[i].params.validate(path + ".params");
        if (!(robots[i].waypoint.capture_radius > 0.0)) {
            throw ValidationError(path + ".waypoint.capture_radius", "must be > 0");
        }
        robots[i].radio.validate(path + ".radio");
    }
    for (std::size_t i = 0; i < plants.size(); ++i) {
        const std::string path = index("plants", i);
        claim(plants[i].id, path + ".id");
        plants[i].params.validate(path + ".params");
        plants[i].radio.validate(path + ".radio");
    }
    for (std::size_t i = 0; i < stations.size(); ++i) {
        claim(stations[i].id, index("stations", i) + ".id");
        stations[i].radio.validate(index("stations", i) + ".radio");
    }
    for (std::size_t i = 0; i < aps.size(); ++i) {
        claim(aps[i].id, index("aps", i) + ".id");
        aps[i].radio.validate(index("aps", i) + ".radio");
        ap_ids.insert(aps[i].id);
    }
    for (std::size_t i = 0; i < hosts.size(); ++i) {
        claim(hosts[i].id, index("hosts", i) + ".id");
        if (!ap_ids.contains(hosts[i].ap)) {
            throw ValidationError(index("hosts", i) + ".ap", "unknown access point '" + hosts[i].ap + "'");
        }
    }

    for (const auto& [pname, profile] : profiles) {
        profile.validate("profiles." + pname);
    }

    const auto node_ref = [&](const std::string& id, const std::string& path) {
        if (!ids.contains(id)) {
            throw ValidationError(path, "unknown node '" + id + "'");
        }
    };
    const auto profile_ref = [&](const std::string& name, const std::string& path) {
        if (!profiles.contains(name)) {
            throw ValidationError(path, "unknown profile '" + name + "'");
        }
    };
    for (std::size_t i = 0; i < traffic.size(); ++i) {
        const std::string path = index("traffic", i);
        node_ref(traffic[i].src, path + ".src");
        node_ref(traffic[i].dst, path + ".dst");
        if (traffic[i].period <= Duration::zero()) {
            throw ValidationError(path + ".period", "must be > 0");
        }
        profile_ref(traffic[i].profile, path + ".profile");
    }

    if (case1) {
        if (std::none_of(robots.begin(), robots.end(),
                         [&](const RobotSpec& r) { return r.id == case1->robot; })) {
            throw ValidationError("case1.robot", "unknown robot '" + case1->robot + "'");
        }
        for (std::size_t i = 0; i < case1->system_loss_sweep_db.size(); ++i) {
            if (!(case1->system_loss_sweep_db[i] >= 0.0)) {
                throw ValidationError(index("case1.system_loss_sweep_db", i), "must be >= 0");
            }
        }
        if (!case1->system_loss_sweep_db.empty() && !std::holds_alternative<FreeSpace>(propagation)) {
            throw ValidationError("case1.system_loss_sweep_db",
                                  "a system-loss sweep needs the free_space model");
        }
    }
    if (case2) {
        if (std::none_of(plants.begin(), plants.end(),
                         [&](const PlantSpec& p) { return p.id == case2->plant; })) {
            throw ValidationError("case2.plant", "unknown plant '" + case2->plant + "'");
        }
        node_ref(case2->controller, "case2.controller");
        profile_ref(case2->profile, "case2.profile");
        for (std::size_t i = 0; i < case2->loss_grid.size(); ++i) {
            const double p = case2->loss_grid[i];
            if (!(p >= 0.0 && p <= 1.0)) {
                throw ValidationError(index("case2.loss_grid", i), "must be a probability in [0, 1]");
            }
            if (i > 0 && p < case2->loss_grid[i - 1]) {
                throw ValidationError(index("case2.loss_grid", i), "grid must be sorted ascending");
            }
        }
        case2->gains.validate("case2.gains");
        if (case2->control_period <= Duration::zero() ||
            case2->control_period % sync.physics_step != Duration::zero()) {
            throw ValidationError("case2.control_period",
                                  "must be a positive multiple of sync.physics_step");
        }
        if (!(case2->converge_band_rad > 0.0)) {
            throw ValidationError("case2.converge_band_rad", "must be > 0");
        }
        if (case2->converge_window <= Duration::zero()) {
            throw ValidationError("case2.converge_window", "must be > 0");
        }
    }
    if (sync_validation) {
        node_ref(sync_validation->src, "sync_validation.src");
        node_ref(sync_validation->dst, "sync_validation.dst");
        if (sync_validation->packets < 1) {
            throw ValidationError("sync_validation.packets", "must be >= 1");
        }
        if (sync_validation->interval <= Duration::zero()) {
            throw ValidationError("sync_validation.interval", "must be > 0");
        }
        if (sync_validation->net_delay < Duration::zero()) {
            throw ValidationError("sync_validation.net_delay", "must be >= 0");
        }
    }
    profile_ref(gateway.profile, "gateway.profile");
    if (gateway.command_timeout <= Duration::zero()) {
        throw ValidationError("gateway.command_timeout", "must be > 0");
    }
    if (!(gateway.snapshot_hz > 0.0 && gateway.snapshot_hz <= 1000.0)) {
        throw ValidationError("gateway.snapshot_hz", "must be in (0, 1000]");
    }
}

ordered_json to_json(const ScenarioConfig& cfg) {
    ordered_json j;
    j["name"] = cfg.name;
    j["duration"] = dur(cfg.duration);
    j["seed"] = cfg.seed;
    j["outputs"] = cfg.outputs;
    j["sync"] = {{"mode", to_string(cfg.sync.mode)},
                 {"physics_step", dur(cfg.sync.physics_step)},
                 {"real_time_factor", cfg.sync.real_time_factor},
                 {"time_scale", cfg.sync.time_scale},
                 {"emulate_stall", cfg.sync.emulate_stall}};
    const AssociationParams& a = cfg.association;
    j["association"] = {{"assoc_threshold_dbm", a.assoc_threshold_dbm},
                        {"hysteresis_db", a.hysteresis_db},
                        {"handover_gap", dur(a.handover_gap)},
                        {"sensitivity_dbm", a.sensitivity_dbm},
                        {"scan_interval", dur(a.scan_interval)},
                        {"scan_epsilon_m", a.scan_epsilon_m}};
    if (const auto* fs = std::get_if<FreeSpace>(&cfg.propagation)) {
        j["propagation"] = {{"model", "free_space"}, {"system_loss_db", fs->system_loss_db}};
    } else {
        const auto& ld = std::get<LogDistance>(cfg.propagation);
        j["propagation"] = {{"model", "log_distance"},
                            {"exponent", ld.exponent},
                            {"ref_loss_db", ld.ref_loss_db},
                            {"ref_dist_m", ld.ref_dist_m}};
    }
    j["radio"] = radio_json(cfg.radio_defaults);
    if (cfg.trace_interval) {
        j["trace_interval"] = dur(*cfg.trace_interval);
    }

    j["robots"] = ordered_json::array();
    for (const RobotSpec& r : cfg.robots) {
        ordered_json wps = ordered_json::array();
        for (const Pose2D& w : r.waypoints) wps.push_back(pose_json(w, false));
        j["robots"].push_back({{"id", r.id},
                               {"pose", pose_json(r.pose, true)},
                               {"params",
                                {{"v_max", r.params.v_max},
                                 {"w_max", r.params.w_max},
                                 {"accel_limit", r.params.accel_limit}}},
                               {"waypoint",
                                {{"capture_radius", r.waypoint.capture_radius},
                                 {"heading_gain", r.waypoint.heading_gain}}},
                               {"waypoints", wps},
                               {"radio", radio_json(r.radio)}});
    }
    j["plants"] = ordered_json::array();
    for (const PlantSpec& p : cfg.plants) {
        j["plants"].push_back({{"id", p.id},
                               {"mount", pose_json(p.mount, true)},
                               {"params",
                                {{"cart_mass", p.params.cart_mass},
                                 {"pole_mass", p.params.pole_mass},
                                 {"half_length", p.params.half_length},
                                 {"gravity", p.params.gravity}}},
                               {"initial",
                                {{"x", p.initial.x},
                                 {"x_dot", p.initial.x_dot},
                                 {"theta", p.initial.theta},
                                 {"theta_dot", p.initial.theta_dot}}},
                               {"radio", radio_json(p.radio)}});
    }
    j["stations"] = ordered_json::array();
    for (const StationSpec& s : cfg.stations) {
        j["stations"].push_back({{"id", s.id}, {"pos", pose_json(s.pos, true)}, {"radio", radio_json(s.radio)}});
    }
    j["aps"] = ordered_json::array();
    for (const ApSpec& s : cfg.aps) {
        j["aps"].push_back({{"id", s.id}, {"pos", pose_json(s.pos, true)}, {"radio", radio_json(s.radio)}});
    }
    j["hosts"] = ordered_json::array();
    for (const HostSpec& h : cfg.hosts) {
        j["hosts"].push_back({{"id", h.id}, {"ap", h.ap}});
    }
    j["profiles"] = ordered_json::object();
    for (const auto& [name, p] : cfg.profiles) {
        ordered_json windows = ordered_json::array();
        for (const CongestionWindow& w : p.congestion_schedule) {
            windows.push_back({{"start", dur(w.start.time_since_epoch())},
                               {"end", dur(w.end.time_since_epoch())},
                               {"extra_loss", w.extra_loss}});
        }
        j["profiles"][name] = {{"base_loss", p.base_loss},
                               {"fixed_latency", dur(p.fixed_latency)},
                               {"jitter", dur(p.jitter)},
                               {"bitrate_bps", p.bitrate_bps},
                               {"congestion_schedule", windows}};
    }
    j["traffic"] = ordered_json::array();
    for (const FlowSpec& f : cfg.traffic) {
        j["traffic"].push_back({{"src", f.src},
                                {"dst", f.dst},
                                {"period", dur(f.period)},
                                {"size_bytes", f.size_bytes},
                                {"profile", f.profile}});
    }
    if (cfg.case1) {
        j["case1"] = {{"robot", cfg.case1->robot},
                      {"system_loss_sweep_db", cfg.case1->system_loss_sweep_db}};
    }
    if (cfg.case2) {
        const Case2Spec& c = *cfg.case2;
        j["case2"] = {{"plant", c.plant},
                      {"controller", c.controller},
                      {"profile", c.profile},
                      {"loss_grid", c.loss_grid},
                      {"seeds", c.seeds},
                      {"gains",
                       {{"kp", c.gains.kp},
                        {"ki", c.gains.ki},
                        {"kd", c.gains.kd},
                        {"output_limit", c.gains.output_limit},
                        {"integral_limit", c.gains.integral_limit}}},
                      {"control_period", dur(c.control_period)},
                      {"sensor_bytes", c.sensor_bytes},
                      {"control_bytes", c.control_bytes},
                      {"converge_band_rad", c.converge_band_rad},
                      {"converge_window", dur(c.converge_window)},
                      {"write_traces", c.write_traces}};
    }
    if (cfg.sync_validation) {
        const SyncValidationSpec& s = *cfg.sync_validation;
        j["sync_validation"] = {{"src", s.src},
                                {"dst", s.dst},
                                {"packets", s.packets},
                                {"interval", dur(s.interval)},
                                {"net_delay", dur(s.net_delay)}};
    }
    j["gateway"] = {{"teleop_node", cfg.gateway.teleop_node},
                    {"profile", cfg.gateway.profile},
                    {"command_timeout", dur(cfg.gateway.command_timeout)},
                    {"snapshot_hz", cfg.gateway.snapshot_hz},
                    {"ui_dir", cfg.gateway.ui_dir}};
    return j;
}

void write_resolved(const ScenarioConfig& cfg, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create " + dir.string() + ": " + ec.message());
    }
    std::ofstream out(dir / "resolved.json", std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + (dir / "resolved.json").string());
    }
    out << to_json(cfg).dump(2) << '\n';
}

World build_world(const ScenarioConfig& cfg) {
    World world{PhysicsWorld{}, NetWorld(cfg.propagation, cfg.association, cfg.seed)};
    for (const ApSpec& a : cfg.aps) {
        world.net.add_node({a.id, NodeKind::AccessPoint, a.pos, a.radio, {}});
    }
    for (const RobotSpec& r : cfg.robots) {
        Robot robot;
        robot.state.id = r.id;
        robot.state.pose = r.pose;
        robot.params = r.params;
        robot.waypoint = r.waypoint;
        robot.path.assign(r.waypoints.begin(), r.waypoints.end());
        world.physics.add_robot(std::move(robot));
        world.net.add_node({r.id, NodeKind::Station, r.pose, r.radio, {}});
    }
    for (const PlantSpec& p : cfg.plants) {
        world.physics.add_plant(Plant{p.id, p.mount, p.params, p.initial, 0.0});
        const Pose2D pos{p.mount.x + p.initial.x, p.mount.y, 0.0};
        world.net.add_node({p.id, NodeKind::Station, pos, p.radio, {}});
    }
    for (const StationSpec& s : cfg.stations) {
        world.net.add_node({s.id, NodeKind::Station, s.pos, s.radio, {}});
    }
    for (const HostSpec& h : cfg.hosts) {
        const Pose2D at = world.net.node(h.ap).position;
        world.net.add_node({h.id, NodeKind::WiredHost, at, cfg.radio_defaults, h.ap});
    }
    return world;
}

}  // namespace cosim
