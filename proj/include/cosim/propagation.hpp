#pragma once

#include <string>
#include <variant>

#include "cosim/physics.hpp"

namespace cosim {

struct RadioParams {
    double tx_power_dbm = 20.0;
    double freq_hz = 2.4e9;
    double antenna_gain_dbi = 0.0;
    double noise_floor_dbm = -95.0;

    void validate(const std::string& field) const;
    bool operator==(const RadioParams&) const = default;
};

// Friis free-space loss plus an additive system loss.
struct FreeSpace {
    double system_loss_db = 0.0;
    bool operator==(const FreeSpace&) const = default;
};

// PL(d) = ref_loss + 10 n log10(d / d0)
struct LogDistance {
    double exponent = 3.0;
    double ref_loss_db = 40.05;
    double ref_dist_m = 1.0;
    bool operator==(const LogDistance&) const = default;
};

using PropagationModel = std::variant<FreeSpace, LogDistance>;

void validate(const PropagationModel& model, const std::string& field);

// Distances below this are clamped; the far-field formulas blow up at 0.
inline constexpr double kMinDistanceM = 0.1;

// Path loss in dB. Distances are clamped to kMinDistanceM.
double path_loss(const PropagationModel& model, double distance_m, const RadioParams& radio);

// Received power at rx for a transmission from tx separated by distance_m.
double received_power_dbm(const RadioParams& tx, const RadioParams& rx, double distance_m,
                          const PropagationModel& model);

double distance(const Pose2D& a, const Pose2D& b) noexcept;

}  // namespace cosim
