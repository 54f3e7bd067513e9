#include "cosim/sim_time.hpp"

#include <cctype>
#include <cmath>
#include <limits>

#include "cosim/error.hpp"

namespace cosim {

Duration from_seconds(double seconds) {
    if (!std::isfinite(seconds)) {
        throw NonFiniteInput("duration is not finite");
    }
    return Duration{std::llround(seconds * 1e9)};
}

double to_seconds(Duration d) noexcept { return static_cast<double>(d.count()) / 1e9; }

double to_seconds(SimTime t) noexcept { return to_seconds(t.time_since_epoch()); }

namespace {

struct Unit {
    std::string_view suffix;
    std::int64_t ns;
};

constexpr Unit kUnits[] = {{"ns", 1}, {"us", 1'000}, {"ms", 1'000'000}, {"s", 1'000'000'000}};

}  // namespace

Duration parse_duration(std::string_view text) {
    const std::string original(text);
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) {
        text.remove_suffix(1);
    }
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) {
        text.remove_prefix(1);
    }

    std::int64_t scale = 1'000'000'000;
    // Two-letter suffixes come first in kUnits so "ms" is not read as "s".
    for (const auto& unit : kUnits) {
        if (text.size() > unit.suffix.size() && text.ends_with(unit.suffix)) {
            scale = unit.ns;
            text.remove_suffix(unit.suffix.size());
            break;
        }
    }

    bool negative = false;
    if (!text.empty() && (text.front() == '-' || text.front() == '+')) {
        negative = text.front() == '-';
        text.remove_prefix(1);
    }
    if (text.empty()) {
        throw ParseError("malformed duration '" + original + "'");
    }

    constexpr auto kMax = std::numeric_limits<std::int64_t>::max();
    std::int64_t whole = 0;
    std::int64_t frac_ns = 0;
    std::int64_t frac_scale = scale;
    bool seen_digit = false;
    bool in_fraction = false;
    for (char c : text) {
        if (c == '.' && !in_fraction) {
            in_fraction = true;
            continue;
        }
        if (!std::isdigit(static_cast<unsigned char>(c))) {
            throw ParseError("malformed duration '" + original + "'");
        }
        seen_digit = true;
        const int digit = c - '0';
        if (!in_fraction) {
            if (whole > (kMax - digit) / 10) {
                throw ParseError("duration out of range '" + original + "'");
            }
            whole = whole * 10 + digit;
        } else if (frac_scale >= 10) {
            frac_scale /= 10;
            frac_ns += digit * frac_scale;
        } else if (digit != 0) {
            throw ParseError("duration finer than 1ns '" + original + "'");
        }
    }
    if (!seen_digit) {
        throw ParseError("malformed duration '" + original + "'");
    }
    if (whole > (kMax - frac_ns) / scale) {
        throw ParseError("duration out of range '" + original + "'");
    }
    const std::int64_t ns = whole * scale + frac_ns;
    return Duration{negative ? -ns : ns};
}

std::string format_duration(Duration d) {
    const std::int64_t ns = d.count();
    if (ns == 0) {
        return "0s";
    }
    for (auto it = std::rbegin(kUnits); it != std::rend(kUnits); ++it) {
        if (ns % it->ns == 0) {
            return std::to_string(ns / it->ns) + std::string(it->suffix);
        }
    }
    return std::to_string(ns) + "ns";
}

}  // namespace cosim
