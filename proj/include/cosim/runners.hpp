#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cosim/coordinator.hpp"
#include "cosim/scenario.hpp"

namespace cosim {

// ---------------------------------------------------------------------------
// Generic run: the scenario's flows, full traces, resolved.json and
// run_report.json in out_dir.
RunReport run_scenario(const ScenarioConfig& cfg, const std::filesystem::path& out_dir);

// ---------------------------------------------------------------------------
// Sync validation: the same probe traffic under both sync modes.

struct SyncSample {
    std::uint64_t packet = 0;
    Duration net_delay{};
    Duration observed{};
};

struct SyncModeResult {
    SyncMode mode = SyncMode::Synchronized;
    std::vector<SyncSample> samples;
    RunReport report;
    double mean_observed_s() const;
};

struct SyncValidationResult {
    SyncModeResult synchronized;
    SyncModeResult unsynchronized;
};

// Writes <out>/synchronized/, <out>/unsynchronized/ traces and
// <out>/sync_scatter.csv. Requires cfg.sync_validation.
SyncValidationResult run_sync_validation(const ScenarioConfig& cfg,
                                         const std::filesystem::path& out_dir);

// ---------------------------------------------------------------------------
// Case I: RSSI along a path.

struct RssiSample {
    SimTime t{};
    double x = 0.0;
    double y = 0.0;
    double rssi_dbm = 0.0;  // 0 while not associated
    std::string ap;
};

struct AssocEvent {
    SimTime t{};
    std::string from;
    std::string to;
    std::string ap;
    double x = 0.0;
    double y = 0.0;
};

struct Case1Run {
    std::optional<double> system_loss_db;
    std::vector<RssiSample> samples;
    std::vector<AssocEvent> transitions;

    // Index of the strongest associated sample.
    std::optional<std::size_t> peak_index() const;
    // x where the robot first dropped from associated to unassociated.
    std::optional<double> disassociation_x() const;
    // Number of associated -> scanning transitions.
    int handovers() const;
};

// One run per system-loss value (or one run when the sweep is empty).
// Traces per run go to <out>/sl_<value>/ (or <out>/ directly), the summary
// to <out>/case1_summary.csv.
std::vector<Case1Run> run_case1(const ScenarioConfig& cfg, const std::filesystem::path& out_dir);

// ---------------------------------------------------------------------------
// Case II: networked PID over a lossy channel.

struct ConvergenceMetric {
    double loss_p = 0.0;
    std::uint64_t seed = 0;
    bool converged = false;
    std::optional<SimTime> t_converge;
    RunReport report;
};

// First time after which |theta| stays below band for `window`.
std::optional<SimTime> convergence_time(const std::vector<std::pair<SimTime, double>>& theta,
                                        double band, Duration window);

// Mean convergence time per grid value; runs that never converged count as
// the full scenario duration.
std::vector<std::pair<double, double>> mean_convergence_s(const std::vector<ConvergenceMetric>& metrics,
                                                          Duration duration);

ConvergenceMetric run_case2_once(const ScenarioConfig& cfg, double loss_p, std::uint64_t seed,
                                 const std::optional<std::filesystem::path>& trace_dir = {});

// Grid x seeds from cfg.case2 (or the overrides). Writes <out>/case2.csv and
// <out>/case2_summary.csv.
std::vector<ConvergenceMetric> run_case2(const ScenarioConfig& cfg,
                                         const std::filesystem::path& out_dir,
                                         std::optional<std::vector<double>> loss_grid = {},
                                         std::optional<std::vector<std::uint64_t>> seeds = {});

// ---------------------------------------------------------------------------
// Scaling benchmark.

struct BenchReport {
    int n_robots = 0;
    double wall_time_s = 0.0;
    double sim_time_s = 0.0;
    double ratio = 0.0;  // wall / sim
    long peak_rss_kb = 0;
    RunReport run;
};

std::string to_json_string(const BenchReport& report);

// Headless world: n robots on random waypoints around one AP, each sending
// 10 Hz telemetry to a wired host at the AP.
ScenarioConfig bench_scenario(int n_robots, Duration duration, std::uint64_t seed = 1);
BenchReport run_bench(int n_robots, Duration duration, std::uint64_t seed = 1);

long peak_rss_kb();

}  // namespace cosim
