// Gain sweep for the networked cart-pole loop. For each (kp, kd) pair prints
// mean convergence time per loss value, the slowest lossless seed and
// whether the means are non-decreasing across the grid.

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cosim/runners.hpp"
#include "cosim/scenario.hpp"

int main(int argc, char** argv) {
    using namespace cosim;
    CLI::App app{"PID gain sweep for the cart-pole scenario"};
    std::string scenario;
    std::vector<double> kps{20, 30, 40, 60};
    std::vector<double> kds{2, 4, 6, 8};
    app.add_option("scenario", scenario, "Scenario JSON with a case2 section")->required();
    app.add_option("--kp", kps, "Proportional gains");
    app.add_option("--kd", kds, "Derivative gains");
    CLI11_PARSE(app, argc, argv);

    try {
        const ScenarioConfig base = load_scenario(scenario);
        if (!base.case2) {
            std::fprintf(stderr, "scenario has no case2 section\n");
            return 2;
        }
        std::printf("kp,kd,monotone,max_t0_s");
        for (double p : base.case2->loss_grid) std::printf(",mean_p%g", p);
        std::printf("\n");

        for (double kp : kps) {
            for (double kd : kds) {
                ScenarioConfig cfg = base;
                cfg.case2->gains.kp = kp;
                cfg.case2->gains.kd = kd;
                std::vector<ConvergenceMetric> metrics;
                double max_t0 = 0.0;
                for (double p : cfg.case2->loss_grid) {
                    for (std::uint64_t seed : cfg.case2->seeds) {
                        metrics.push_back(run_case2_once(cfg, p, seed));
                        const auto& m = metrics.back();
                        if (p == 0.0) {
                            max_t0 = std::max(max_t0, m.t_converge ? to_seconds(*m.t_converge)
                                                                   : to_seconds(cfg.duration));
                        }
                    }
                }
                const auto means = mean_convergence_s(metrics, cfg.duration);
                const bool monotone = std::is_sorted(means.begin(), means.end(), [](auto& a, auto& b) {
                    return a.second < b.second;
                });
                std::printf("%g,%g,%d,%.3f", kp, kd, monotone ? 1 : 0, max_t0);
                for (const auto& [p, mean] : means) std::printf(",%.3f", mean);
                std::printf("\n");
                std::fflush(stdout);
            }
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
