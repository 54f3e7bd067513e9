#include "cosim/trace.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "cosim/error.hpp"

namespace cosim {

const char* to_string(TraceKind kind) noexcept {
    switch (kind) {
        case TraceKind::Pose: return "pose";
        case TraceKind::Rssi: return "rssi";
        case TraceKind::Assoc: return "assoc";
        case TraceKind::Packet: return "packet";
        case TraceKind::Control: return "control";
    }
    return "unknown";
}

std::string trace_file_name(TraceKind kind) { return std::string(to_string(kind)) + ".csv"; }

const std::vector<std::string>& trace_header(TraceKind kind) {
    static const std::vector<std::string> pose{"robot", "x", "y", "theta", "v", "w"};
    static const std::vector<std::string> rssi{"station", "x", "y", "rssi_dbm", "ap"};
    static const std::vector<std::string> assoc{"station", "from", "to", "ap", "x", "y"};
    static const std::vector<std::string> packet{"src",    "packet_id", "dst",     "event",
                                                 "sent_ns", "delay_ns", "reason"};
    static const std::vector<std::string> control{"plant",     "x",     "x_dot",
                                                  "theta",     "theta_dot", "force"};
    switch (kind) {
        case TraceKind::Pose: return pose;
        case TraceKind::Rssi: return rssi;
        case TraceKind::Assoc: return assoc;
        case TraceKind::Packet: return packet;
        case TraceKind::Control: return control;
    }
    return pose;
}

std::string format_double(double value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", value);
    return buf;
}

std::string format_field(const TraceField& field) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::int64_t>) {
                return std::to_string(v);
            } else if constexpr (std::is_same_v<T, double>) {
                return format_double(v);
            } else {
                return v;
            }
        },
        field);
}

TraceWriter::TraceWriter(const std::filesystem::path& dir) : dir_(dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create trace directory " + dir.string() + ": " + ec.message());
    }
    for (TraceKind kind : kAllTraceKinds) {
        auto& out = files_[static_cast<std::size_t>(kind)];
        const auto path = dir / trace_file_name(kind);
        out.open(path, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot open " + path.string() + " for writing");
        }
        out << "t_ns";
        for (const auto& col : trace_header(kind)) {
            out << ',' << col;
        }
        out << '\n';
        out.flush();
    }
}

TraceWriter::~TraceWriter() {
    try {
        commit();
    } catch (...) {
        // Destructors must not throw; a failed final flush is already lost.
    }
}

void TraceWriter::append(TraceRecord record) { pending_.push_back(std::move(record)); }

void TraceWriter::commit() {
    std::stable_sort(pending_.begin(), pending_.end(), [](const auto& a, const auto& b) {
        if (a.t != b.t) return a.t < b.t;
        if (a.subject != b.subject) return a.subject < b.subject;
        return a.kind < b.kind;
    });
    for (const TraceRecord& r : pending_) {
        auto& out = files_[static_cast<std::size_t>(r.kind)];
        out << to_ns(r.t) << ',' << r.subject;
        for (const auto& v : r.values) {
            out << ',' << format_field(v);
        }
        out << '\n';
    }
    pending_.clear();
    for (auto& out : files_) {
        out.flush();
        if (!out) {
            throw IoError("write to trace directory " + dir_.string() + " failed");
        }
    }
}

std::vector<TraceRecord> MemoryTrace::of_kind(TraceKind kind) const {
    std::vector<TraceRecord> out;
    std::copy_if(records_.begin(), records_.end(), std::back_inserter(out),
                 [kind](const TraceRecord& r) { return r.kind == kind; });
    return out;
}

void TeeTrace::append(TraceRecord record) {
    for (std::size_t i = 0; i + 1 < sinks_.size(); ++i) {
        sinks_[i]->append(record);
    }
    if (!sinks_.empty()) {
        sinks_.back()->append(std::move(record));
    }
}

void TeeTrace::commit() {
    for (TraceSink* s : sinks_) {
        s->commit();
    }
}

void write_traces(std::vector<TraceRecord> records, const std::filesystem::path& dir) {
    TraceWriter writer(dir);
    for (auto& r : records) {
        writer.append(std::move(r));
    }
    writer.commit();
}

std::size_t CsvTable::column(const std::string& name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
        throw Error("no column '" + name + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) {
        cells.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') {
        cells.emplace_back();
    }
    return cells;
}

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    CsvTable table;
    std::string line;
    if (std::getline(in, line)) {
        table.header = split_line(line);
    }
    while (std::getline(in, line)) {
        auto cells = split_line(line);
        if (cells.size() != table.header.size()) {
            throw ParseError(path.string() + ": row has " + std::to_string(cells.size()) +
                             " cells, header has " + std::to_string(table.header.size()));
        }
        table.rows.push_back(std::move(cells));
    }
    return table;
}

}  // namespace cosim
