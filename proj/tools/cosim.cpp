// Command-line front end. Exit codes: 0 success, 2 invalid input, 1 runtime failure.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cosim/error.hpp"
#include "cosim/gateway.hpp"
#include "cosim/runners.hpp"
#include "cosim/scenario.hpp"
#include "cosim/trace.hpp"

namespace {

using namespace cosim;

constexpr int kOk = 0;
constexpr int kRuntimeError = 1;
constexpr int kInvalidInput = 2;

struct Common {
    std::string scenario;
    std::string out;
    std::optional<std::uint64_t> seed;
};

ScenarioConfig load(const Common& c) {
    ScenarioConfig cfg = load_scenario(c.scenario);
    if (c.seed) cfg.seed = *c.seed;
    return cfg;
}

std::filesystem::path out_dir(const Common& c, const ScenarioConfig& cfg) {
    return c.out.empty() ? std::filesystem::path(cfg.outputs) : std::filesystem::path(c.out);
}

int report_status(const RunReport& r) {
    std::cout << to_json_string(r) << '\n';
    if (r.aborted()) {
        std::cerr << "error: " << r.error << '\n';
        return kRuntimeError;
    }
    return kOk;
}

int cmd_run(const Common& c) {
    const ScenarioConfig cfg = load(c);
    return report_status(run_scenario(cfg, out_dir(c, cfg)));
}

int cmd_sync(const Common& c) {
    const ScenarioConfig cfg = load(c);
    const auto dir = out_dir(c, cfg);
    const SyncValidationResult r = run_sync_validation(cfg, dir);
    for (const SyncModeResult* m : {&r.synchronized, &r.unsynchronized}) {
        std::printf("%-15s packets=%zu mean_observed_s=%.9f\n", to_string(m->mode),
                    m->samples.size(), m->mean_observed_s());
    }
    std::printf("scatter: %s\n", (dir / "sync_scatter.csv").string().c_str());
    const bool aborted = r.synchronized.report.aborted() || r.unsynchronized.report.aborted();
    return aborted ? kRuntimeError : kOk;
}

int cmd_case1(const Common& c) {
    const ScenarioConfig cfg = load(c);
    const auto dir = out_dir(c, cfg);
    for (const Case1Run& run : run_case1(cfg, dir)) {
        const auto peak = run.peak_index();
        const auto dis = run.disassociation_x();
        std::printf("system_loss_db=%s peak_x=%s disassociation_x=%s handovers=%d\n",
                    run.system_loss_db ? format_double(*run.system_loss_db).c_str() : "-",
                    peak ? format_double(run.samples[*peak].x).c_str() : "-",
                    dis ? format_double(*dis).c_str() : "-", run.handovers());
    }
    std::printf("summary: %s\n", (dir / "case1_summary.csv").string().c_str());
    return kOk;
}

int cmd_case2(const Common& c) {
    const ScenarioConfig cfg = load(c);
    const auto dir = out_dir(c, cfg);
    const auto metrics = run_case2(cfg, dir);
    for (const auto& [p, mean] : mean_convergence_s(metrics, cfg.duration)) {
        std::printf("loss_p=%s mean_t_converge_s=%.3f\n", format_double(p).c_str(), mean);
    }
    std::printf("summary: %s\n", (dir / "case2_summary.csv").string().c_str());
    for (const ConvergenceMetric& m : metrics) {
        if (m.report.aborted()) return kRuntimeError;
    }
    return kOk;
}

int cmd_bench(int robots, double duration_s, std::uint64_t seed) {
    const BenchReport r = run_bench(robots, from_seconds(duration_s), seed);
    std::cout << to_json_string(r) << '\n';
    return r.run.aborted() ? kRuntimeError : kOk;
}

int cmd_serve(const Common& c, unsigned short port, const std::string& address) {
    const ScenarioConfig cfg = load(c);
    const auto dir = out_dir(c, cfg);
    Gateway gateway(cfg, GatewayOptions{address, port, dir});
    gateway.start();
    std::printf("serving %s on http://%s:%u (ws on the same port); Ctrl-C stops\n", cfg.name.c_str(),
                address.c_str(), gateway.port());
    std::fflush(stdout);
    return report_status(gateway.wait_for_signal());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Robot/network co-simulator"};
    app.require_subcommand(1);

    Common run_opts;
    auto add_common = [](CLI::App* sub, Common& c) {
        sub->add_option("scenario", c.scenario, "Scenario JSON file")->required();
        sub->add_option("--out", c.out, "Output directory (default: the scenario's outputs)");
        sub->add_option("--seed", c.seed, "Override the scenario seed");
    };

    auto* run = app.add_subcommand("run", "Run a scenario with its traffic flows");
    add_common(run, run_opts);
    Common case1_opts;
    auto* case1 = app.add_subcommand("case1", "RSSI along a path, swept over system loss");
    add_common(case1, case1_opts);
    Common case2_opts;
    auto* case2 = app.add_subcommand("case2", "Networked cart-pole over a loss grid");
    add_common(case2, case2_opts);
    Common sync_opts;
    auto* sync = app.add_subcommand("sync-validate", "Observed delay under both sync modes");
    add_common(sync, sync_opts);

    Common serve_opts;
    unsigned short port = 8080;
    std::string address = "127.0.0.1";
    auto* serve_cmd = app.add_subcommand("serve", "Live run behind the teleoperation gateway");
    add_common(serve_cmd, serve_opts);
    serve_cmd->add_option("--port", port, "TCP port (0 picks a free one)");
    serve_cmd->add_option("--address", address, "Listen address");

    int robots = 20;
    double duration_s = 60.0;
    std::uint64_t bench_seed = 1;
    auto* bench = app.add_subcommand("bench", "Headless scaling benchmark");
    bench->add_option("--robots", robots, "Number of robots")->check(CLI::PositiveNumber);
    bench->add_option("--duration", duration_s, "Simulated seconds")->check(CLI::PositiveNumber);
    bench->add_option("--seed", bench_seed, "Layout seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kInvalidInput;
    }

    try {
        if (*run) return cmd_run(run_opts);
        if (*case1) return cmd_case1(case1_opts);
        if (*case2) return cmd_case2(case2_opts);
        if (*sync) return cmd_sync(sync_opts);
        if (*serve_cmd) return cmd_serve(serve_opts, port, address);
        if (*bench) return cmd_bench(robots, duration_s, bench_seed);
    } catch (const ValidationError& e) {
        std::cerr << "invalid scenario: " << e.what() << '\n';
        return kInvalidInput;
    } catch (const ParseError& e) {
        std::cerr << "invalid scenario: " << e.what() << '\n';
        return kInvalidInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
    return kRuntimeError;
}
