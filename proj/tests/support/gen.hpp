#pragma once

// Seeded generators for property tests. Every property loop prints its seed
// through doctest's CAPTURE so a failure replays deterministically.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

namespace cosim::testing {

inline constexpr int kCases = 2000;

class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    // Inclusive on both ends.
    std::int64_t integer(std::int64_t lo, std::int64_t hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return span == 0 ? static_cast<std::int64_t>(rng_()) : lo + static_cast<std::int64_t>(rng_() % span);
    }

    double real(double lo, double hi) {
        return lo + (hi - lo) * (static_cast<double>(rng_() >> 11) * 0x1.0p-53);
    }

    bool coin(double p = 0.5) { return real(0.0, 1.0) < p; }

    template <typename T>
    const T& pick(const std::vector<T>& items) {
        return items.at(static_cast<std::size_t>(integer(0, static_cast<std::int64_t>(items.size()) - 1)));
    }

    std::uint64_t raw() { return rng_(); }

private:
    std::mt19937_64 rng_;
};

// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("cosim_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

}  // namespace cosim::testing
