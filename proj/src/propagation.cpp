#include "cosim/propagation.hpp"

#include <algorithm>
#include <cmath>

#include "cosim/error.hpp"

namespace cosim {

void RadioParams::validate(const std::string& field) const {
    if (!(freq_hz > 0.0) || !std::isfinite(freq_hz)) {
        throw ValidationError(field + ".freq_hz", "must be > 0");
    }
    for (const auto& [name, value] : {std::pair{"tx_power_dbm", tx_power_dbm},
                                      {"antenna_gain_dbi", antenna_gain_dbi},
                                      {"noise_floor_dbm", noise_floor_dbm}}) {
        if (!std::isfinite(value)) {
            throw ValidationError(field + "." + name, "must be finite");
        }
    }
}

void validate(const PropagationModel& model, const std::string& field) {
    if (const auto* fs = std::get_if<FreeSpace>(&model)) {
        if (!(fs->system_loss_db >= 0.0) || !std::isfinite(fs->system_loss_db)) {
            throw ValidationError(field + ".system_loss_db", "must be >= 0");
        }
        return;
    }
    const auto& ld = std::get<LogDistance>(model);
    if (!(ld.exponent >= 1.0) || !std::isfinite(ld.exponent)) {
        throw ValidationError(field + ".exponent", "must be >= 1");
    }
    if (!(ld.ref_dist_m > 0.0) || !std::isfinite(ld.ref_dist_m)) {
        throw ValidationError(field + ".ref_dist_m", "must be > 0");
    }
    if (!std::isfinite(ld.ref_loss_db)) {
        throw ValidationError(field + ".ref_loss_db", "must be finite");
    }
}

double path_loss(const PropagationModel& model, double distance_m, const RadioParams& radio) {
    const double d = std::max(distance_m, kMinDistanceM);
    if (const auto* fs = std::get_if<FreeSpace>(&model)) {
        // 20 log10(4 pi / c) = -147.55 dB
        return 20.0 * std::log10(d) + 20.0 * std::log10(radio.freq_hz) - 147.55 +
               fs->system_loss_db;
    }
    const auto& ld = std::get<LogDistance>(model);
    return ld.ref_loss_db + 10.0 * ld.exponent * std::log10(d / ld.ref_dist_m);
}

double received_power_dbm(const RadioParams& tx, const RadioParams& rx, double distance_m,
                          const PropagationModel& model) {
    return tx.tx_power_dbm + tx.antenna_gain_dbi + rx.antenna_gain_dbi -
           path_loss(model, distance_m, tx);
}

double distance(const Pose2D& a, const Pose2D& b) noexcept {
    return std::hypot(a.x - b.x, a.y - b.y);
}

}  // namespace cosim
