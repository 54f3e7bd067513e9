#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include "cosim/sim_time.hpp"

namespace cosim {

enum class TraceKind { Pose, Rssi, Assoc, Packet, Control };

inline constexpr std::array kAllTraceKinds = {TraceKind::Pose, TraceKind::Rssi, TraceKind::Assoc,
                                              TraceKind::Packet, TraceKind::Control};

const char* to_string(TraceKind kind) noexcept;
std::string trace_file_name(TraceKind kind);
// Column names after t_ns and the subject column.
const std::vector<std::string>& trace_header(TraceKind kind);

using TraceField = std::variant<std::int64_t, double, std::string>;

struct TraceRecord {
    SimTime t{};
    std::string subject;
    TraceKind kind = TraceKind::Pose;
    std::vector<TraceField> values;
};

// Fixed-format rendering shared by every CSV: integers verbatim, doubles
// with 9 significant digits.
std::string format_field(const TraceField& field);
std::string format_double(double value);

class TraceSink {
public:
    virtual ~TraceSink() = default;
    virtual void append(TraceRecord record) = 0;
    // Called by the coordinator at the end of every step. Records appended
    // so far never precede records appended later.
    virtual void commit() {}
};

// Writes one CSV per kind into a directory. Records are buffered per step,
// sorted by (t, subject, kind) and flushed on commit().
class TraceWriter final : public TraceSink {
public:
    explicit TraceWriter(const std::filesystem::path& dir);
    ~TraceWriter() override;

    TraceWriter(const TraceWriter&) = delete;
    TraceWriter& operator=(const TraceWriter&) = delete;

    void append(TraceRecord record) override;
    void commit() override;

private:
    std::array<std::ofstream, kAllTraceKinds.size()> files_;
    std::vector<TraceRecord> pending_;
    std::filesystem::path dir_;
};

// Keeps everything in memory; handy for runners that post-process traces.
class MemoryTrace final : public TraceSink {
public:
    void append(TraceRecord record) override { records_.push_back(std::move(record)); }
    const std::vector<TraceRecord>& records() const noexcept { return records_; }
    std::vector<TraceRecord> of_kind(TraceKind kind) const;

private:
    std::vector<TraceRecord> records_;
};

// Fans records out to several sinks.
class TeeTrace final : public TraceSink {
public:
    explicit TeeTrace(std::vector<TraceSink*> sinks) : sinks_(std::move(sinks)) {}
    void append(TraceRecord record) override;
    void commit() override;

private:
    std::vector<TraceSink*> sinks_;
};

// Writes a finished record stream. Throws IoError if dir is not writable.
void write_traces(std::vector<TraceRecord> records, const std::filesystem::path& dir);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Index of a named column; throws Error when absent.
    std::size_t column(const std::string& name) const;
};

// Reader for the CSVs this library writes (no quoting).
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace cosim
