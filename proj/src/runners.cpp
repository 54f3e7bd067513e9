#include "cosim/runners.hpp"

#include <sys/resource.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>

#include <json.hpp>

#include "cosim/apps.hpp"
#include "cosim/error.hpp"

namespace cosim {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    return out;
}

void write_report(const RunReport& report, const fs::path& dir) {
    auto out = open_out(dir / "run_report.json");
    out << to_json_string(report) << '\n';
}

CoordinatorOptions options_for(const ScenarioConfig& cfg) {
    return CoordinatorOptions{cfg.trace_interval};
}

const std::string& field_string(const TraceRecord& r, std::size_t i) {
    return std::get<std::string>(r.values.at(i));
}

double field_double(const TraceRecord& r, std::size_t i) { return std::get<double>(r.values.at(i)); }

}  // namespace

// ---------------------------------------------------------------------------

RunReport run_scenario(const ScenarioConfig& cfg, const fs::path& out_dir) {
    write_resolved(cfg, out_dir);
    World world = build_world(cfg);
    TraceWriter traces(out_dir);
    FlowApp flows(cfg.traffic);
    Coordinator coord(world.physics, world.net, cfg.sync, cfg.profiles, &traces, options_for(cfg));
    coord.add_application(flows);
    RunReport report = coord.run_until(SimTime{cfg.duration});
    coord.finish();
    write_report(report, out_dir);
    return report;
}

// ---------------------------------------------------------------------------

double SyncModeResult::mean_observed_s() const {
    if (samples.empty()) return 0.0;
    long double sum = 0;
    for (const SyncSample& s : samples) sum += s.observed.count();
    return static_cast<double>(sum / samples.size()) / 1e9;
}

namespace {

constexpr const char* kProbeProfile = "sync_probe";

SyncModeResult run_sync_mode(const ScenarioConfig& base, SyncMode mode, const fs::path& dir) {
    const SyncValidationSpec& spec = *base.sync_validation;
    ScenarioConfig cfg = base;
    cfg.sync.mode = mode;
    LossProfile probe;
    probe.fixed_latency = spec.net_delay;
    cfg.profiles[kProbeProfile] = probe;

    World world = build_world(cfg);
    TraceWriter traces(dir);
    DelayProbeApp app(spec, kProbeProfile);
    Coordinator coord(world.physics, world.net, cfg.sync, cfg.profiles, &traces, options_for(cfg));
    coord.add_application(app, {spec.dst});

    const auto resolved = [&] {
        const RunReport& r = coord.report();
        return r.delivered + r.discarded + r.dropped;
    };
    const SimTime limit{cfg.duration};
    SyncModeResult result;
    result.mode = mode;
    try {
        while ((!app.done() || resolved() < spec.packets) && coord.now() < limit) {
            coord.step();
        }
    } catch (const std::exception& e) {
        RunReport partial = coord.report();
        partial.error = e.what();
        result.report = partial;
    }
    coord.finish();
    if (!result.report.aborted()) {
        result.report = coord.report();
    }
    write_report(result.report, dir);
    for (const auto& s : app.samples()) {
        result.samples.push_back({s.packet, spec.net_delay, s.observed});
    }
    return result;
}

}  // namespace

SyncValidationResult run_sync_validation(const ScenarioConfig& cfg, const fs::path& out_dir) {
    if (!cfg.sync_validation) {
        throw ValidationError("sync_validation", "section required for sync validation");
    }
    write_resolved(cfg, out_dir);
    SyncValidationResult result;
    result.synchronized = run_sync_mode(cfg, SyncMode::Synchronized, out_dir / "synchronized");
    result.unsynchronized =
        run_sync_mode(cfg, SyncMode::Unsynchronized, out_dir / "unsynchronized");

    auto out = open_out(out_dir / "sync_scatter.csv");
    out << "mode,packet_id,net_delay_ns,observed_sim_delay_ns\n";
    for (const SyncModeResult* r : {&result.synchronized, &result.unsynchronized}) {
        for (const SyncSample& s : r->samples) {
            out << to_string(r->mode) << ',' << s.packet << ',' << s.net_delay.count() << ','
                << s.observed.count() << '\n';
        }
    }
    return result;
}

// ---------------------------------------------------------------------------

std::optional<std::size_t> Case1Run::peak_index() const {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].ap.empty()) continue;
        if (!best || samples[i].rssi_dbm > samples[*best].rssi_dbm) best = i;
    }
    return best;
}

std::optional<double> Case1Run::disassociation_x() const {
    for (const AssocEvent& e : transitions) {
        if (e.from == "associated" && e.to == "unassociated") return e.x;
    }
    return std::nullopt;
}

int Case1Run::handovers() const {
    return static_cast<int>(std::count_if(transitions.begin(), transitions.end(), [](const AssocEvent& e) {
        return e.from == "associated" && e.to == "scanning";
    }));
}

namespace {

Case1Run run_case1_once(const ScenarioConfig& cfg, std::optional<double> sl, const fs::path& dir) {
    ScenarioConfig run_cfg = cfg;
    if (sl) {
        run_cfg.propagation = FreeSpace{*sl};
    }
    write_resolved(run_cfg, dir);
    World world = build_world(run_cfg);
    MemoryTrace memory;
    TraceWriter writer(dir);
    TeeTrace tee({&memory, &writer});
    FlowApp flows(run_cfg.traffic);
    Coordinator coord(world.physics, world.net, run_cfg.sync, run_cfg.profiles, &tee,
                      options_for(run_cfg));
    coord.add_application(flows);
    const RunReport report = coord.run_until(SimTime{run_cfg.duration});
    coord.finish();
    write_report(report, dir);
    if (report.aborted()) {
        throw Error("case1 run aborted: " + report.error);
    }

    const std::string& robot = cfg.case1->robot;
    Case1Run run;
    run.system_loss_db = sl;
    for (const TraceRecord& r : memory.records()) {
        if (r.subject != robot) continue;
        if (r.kind == TraceKind::Rssi) {
            run.samples.push_back({r.t, field_double(r, 0), field_double(r, 1), field_double(r, 2),
                                   field_string(r, 3)});
        } else if (r.kind == TraceKind::Assoc) {
            run.transitions.push_back({r.t, field_string(r, 0), field_string(r, 1), field_string(r, 2),
                                       field_double(r, 3), field_double(r, 4)});
        }
    }
    return run;
}

}  // namespace

std::vector<Case1Run> run_case1(const ScenarioConfig& cfg, const fs::path& out_dir) {
    if (!cfg.case1) {
        throw ValidationError("case1", "section required for case1");
    }
    std::vector<Case1Run> runs;
    if (cfg.case1->system_loss_sweep_db.empty()) {
        runs.push_back(run_case1_once(cfg, std::nullopt, out_dir));
    } else {
        write_resolved(cfg, out_dir);
        for (double sl : cfg.case1->system_loss_sweep_db) {
            runs.push_back(run_case1_once(cfg, sl, out_dir / ("sl_" + format_double(sl))));
        }
    }

    auto out = open_out(out_dir / "case1_summary.csv");
    out << "system_loss_db,peak_x,peak_rssi_dbm,disassociation_x,handovers\n";
    for (const Case1Run& r : runs) {
        const auto peak = r.peak_index();
        const auto dis = r.disassociation_x();
        out << (r.system_loss_db ? format_double(*r.system_loss_db) : "") << ','
            << (peak ? format_double(r.samples[*peak].x) : "") << ','
            << (peak ? format_double(r.samples[*peak].rssi_dbm) : "") << ','
            << (dis ? format_double(*dis) : "") << ',' << r.handovers() << '\n';
    }
    return runs;
}

// ---------------------------------------------------------------------------

std::optional<SimTime> convergence_time(const std::vector<std::pair<SimTime, double>>& theta,
                                        double band, Duration window) {
    std::optional<SimTime> inside_since;
    for (const auto& [t, value] : theta) {
        if (std::abs(value) < band) {
            if (!inside_since) inside_since = t;
            if (t - *inside_since >= window) return inside_since;
        } else {
            inside_since.reset();
        }
    }
    return std::nullopt;
}

std::vector<std::pair<double, double>> mean_convergence_s(const std::vector<ConvergenceMetric>& metrics,
                                                          Duration duration) {
    std::map<double, std::pair<double, int>> acc;
    for (const ConvergenceMetric& m : metrics) {
        const double t = m.t_converge ? to_seconds(*m.t_converge) : to_seconds(duration);
        auto& [sum, n] = acc[m.loss_p];
        sum += t;
        ++n;
    }
    std::vector<std::pair<double, double>> out;
    for (const auto& [p, sn] : acc) {
        out.emplace_back(p, sn.first / sn.second);
    }
    return out;
}

ConvergenceMetric run_case2_once(const ScenarioConfig& base, double loss_p, std::uint64_t seed,
                                 const std::optional<fs::path>& trace_dir) {
    if (!base.case2) {
        throw ValidationError("case2", "section required for case2");
    }
    ScenarioConfig cfg = base;
    cfg.seed = seed;
    cfg.profiles.at(cfg.case2->profile).base_loss = loss_p;

    World world = build_world(cfg);
    std::optional<TraceWriter> writer;
    if (trace_dir) {
        write_resolved(cfg, *trace_dir);
        writer.emplace(*trace_dir);
    }
    PendulumLoopApp loop(*cfg.case2);
    Coordinator coord(world.physics, world.net, cfg.sync, cfg.profiles,
                      writer ? &*writer : nullptr, options_for(cfg));
    coord.add_application(loop, {cfg.case2->plant, cfg.case2->controller});
    ConvergenceMetric m;
    m.loss_p = loss_p;
    m.seed = seed;
    m.report = coord.run_until(SimTime{cfg.duration});
    coord.finish();
    if (trace_dir) {
        write_report(m.report, *trace_dir);
    }
    if (!m.report.aborted()) {
        m.t_converge = convergence_time(loop.theta_trace(), cfg.case2->converge_band_rad,
                                        cfg.case2->converge_window);
    }
    m.converged = m.t_converge.has_value();
    return m;
}

std::vector<ConvergenceMetric> run_case2(const ScenarioConfig& cfg, const fs::path& out_dir,
                                         std::optional<std::vector<double>> loss_grid,
                                         std::optional<std::vector<std::uint64_t>> seeds) {
    if (!cfg.case2) {
        throw ValidationError("case2", "section required for case2");
    }
    const std::vector<double> grid = loss_grid.value_or(cfg.case2->loss_grid);
    const std::vector<std::uint64_t> seed_list = seeds.value_or(cfg.case2->seeds);
    if (!std::is_sorted(grid.begin(), grid.end())) {
        throw ValidationError("case2.loss_grid", "grid must be sorted ascending");
    }
    write_resolved(cfg, out_dir);

    std::vector<ConvergenceMetric> metrics;
    for (double p : grid) {
        for (std::uint64_t seed : seed_list) {
            std::optional<fs::path> dir;
            if (cfg.case2->write_traces) {
                dir = out_dir / ("p_" + format_double(p) + "_seed_" + std::to_string(seed));
            }
            metrics.push_back(run_case2_once(cfg, p, seed, dir));
        }
    }

    auto out = open_out(out_dir / "case2.csv");
    out << "loss_p,seed,converged,t_converge_ns,packets_sent,delivered,dropped\n";
    for (const ConvergenceMetric& m : metrics) {
        out << format_double(m.loss_p) << ',' << m.seed << ',' << (m.converged ? 1 : 0) << ','
            << (m.t_converge ? std::to_string(to_ns(*m.t_converge)) : "") << ','
            << m.report.packets_sent << ',' << m.report.delivered << ',' << m.report.dropped << '\n';
    }
    auto summary = open_out(out_dir / "case2_summary.csv");
    summary << "loss_p,mean_t_converge_s,converged_runs,runs\n";
    for (const auto& [p, mean] : mean_convergence_s(metrics, cfg.duration)) {
        const auto of_p = [p = p](const ConvergenceMetric& m) { return m.loss_p == p; };
        const auto runs = std::count_if(metrics.begin(), metrics.end(), of_p);
        const auto conv = std::count_if(metrics.begin(), metrics.end(),
                                        [&](const ConvergenceMetric& m) { return of_p(m) && m.converged; });
        summary << format_double(p) << ',' << format_double(mean) << ',' << conv << ',' << runs << '\n';
    }
    return metrics;
}

// ---------------------------------------------------------------------------

long peak_rss_kb() {
    rusage usage{};
    getrusage(RUSAGE_SELF, &usage);
    return usage.ru_maxrss;
}

std::string to_json_string(const BenchReport& report) {
    nlohmann::ordered_json j;
    j["n_robots"] = report.n_robots;
    j["wall_time_s"] = report.wall_time_s;
    j["sim_time_s"] = report.sim_time_s;
    j["ratio"] = report.ratio;
    j["peak_rss_kb"] = report.peak_rss_kb;
    j["run"] = nlohmann::ordered_json::parse(to_json_string(report.run));
    return j.dump();
}

ScenarioConfig bench_scenario(int n_robots, Duration duration, std::uint64_t seed) {
    if (n_robots < 1) {
        throw ValidationError("robots", "bench needs at least one robot");
    }
    constexpr double kArea = 100.0;
    constexpr int kWaypoints = 20;

    ScenarioConfig cfg;
    cfg.name = "bench-" + std::to_string(n_robots);
    cfg.duration = duration;
    cfg.seed = seed;
    cfg.sync.physics_step = std::chrono::milliseconds(10);
    cfg.sync.emulate_stall = false;
    cfg.aps.push_back({"ap1", {kArea / 2, kArea / 2, 0.0}, cfg.radio_defaults});
    cfg.hosts.push_back({"base", "ap1"});

    LossProfile telemetry;
    telemetry.fixed_latency = std::chrono::milliseconds(2);
    telemetry.jitter = std::chrono::milliseconds(1);
    cfg.profiles["default"] = telemetry;

    Rng layout(seed ^ 0x9e3779b97f4a7c15ULL);
    const auto coord = [&] { return uniform01(layout) * kArea; };
    for (int i = 0; i < n_robots; ++i) {
        RobotSpec r;
        r.id = "r" + std::to_string(i);
        r.pose = {coord(), coord(), 0.0};
        r.params = {1.0, 1.5, 1.0};
        r.radio = cfg.radio_defaults;
        for (int k = 0; k < kWaypoints; ++k) {
            r.waypoints.push_back({coord(), coord(), 0.0});
        }
        cfg.traffic.push_back({r.id, "base", std::chrono::milliseconds(100), 256, "default"});
        cfg.robots.push_back(std::move(r));
    }
    cfg.validate();
    return cfg;
}

BenchReport run_bench(int n_robots, Duration duration, std::uint64_t seed) {
    const ScenarioConfig cfg = bench_scenario(n_robots, duration, seed);
    World world = build_world(cfg);
    FlowApp flows(cfg.traffic);
    Coordinator coord(world.physics, world.net, cfg.sync, cfg.profiles, nullptr);
    coord.add_application(flows);

    const auto start = std::chrono::steady_clock::now();
    BenchReport report;
    report.run = coord.run_until(SimTime{cfg.duration});
    const auto stop = std::chrono::steady_clock::now();

    report.n_robots = n_robots;
    report.wall_time_s = std::chrono::duration<double>(stop - start).count();
    report.sim_time_s = to_seconds(report.run.final_time);
    report.ratio = report.sim_time_s > 0 ? report.wall_time_s / report.sim_time_s : 0.0;
    report.peak_rss_kb = peak_rss_kb();
    return report;
}

}  // namespace cosim
