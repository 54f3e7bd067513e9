#include "cosim/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <csignal>
#include <fstream>
#include <sstream>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <json.hpp>

#include "cosim/error.hpp"

namespace cosim {

using nlohmann::json;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Wire types

std::string to_json_string(const StateSnapshot& s) {
    ordered_json j;
    j["t_ns"] = to_ns(s.t);
    j["robots"] = ordered_json::array();
    for (const auto& r : s.robots) {
        ordered_json o;
        o["id"] = r.id;
        o["x"] = r.x;
        o["y"] = r.y;
        o["theta"] = r.theta;
        o["rssi"] = r.rssi_dbm;
        o["ap"] = r.ap ? ordered_json(*r.ap) : ordered_json(nullptr);
        j["robots"].push_back(std::move(o));
    }
    j["aps"] = ordered_json::array();
    for (const auto& a : s.aps) {
        j["aps"].push_back(ordered_json{{"id", a.id}, {"x", a.x}, {"y", a.y}});
    }
    j["counters"] = ordered_json{{"delivered", s.delivered}, {"discarded", s.discarded}};
    return j.dump();
}

namespace {

void only_keys(const json& j, std::initializer_list<std::string_view> allowed) {
    for (const auto& [key, value] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ValidationError(key, "unexpected field");
        }
    }
}

double number_field(const json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_number()) {
        throw ValidationError(key, "missing or not a number");
    }
    return it->get<double>();
}

}  // namespace

ClientFrame parse_client_frame(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed frame: ") + e.what());
    }
    if (!j.is_object()) {
        throw ValidationError("frame", "must be a JSON object");
    }
    const auto type = j.find("type");
    if (type == j.end() || !type->is_string()) {
        throw ValidationError("type", "missing or not a string");
    }
    const std::string t = type->get<std::string>();
    if (t == "cmd_vel") {
        only_keys(j, {"type", "robot", "v", "w", "stamp"});
        const auto robot = j.find("robot");
        if (robot == j.end() || !robot->is_string()) {
            throw ValidationError("robot", "missing or not a string");
        }
        TeleopCommand cmd;
        cmd.robot = robot->get<std::string>();
        cmd.v = number_field(j, "v");
        cmd.w = number_field(j, "w");
        if (j.contains("stamp")) {
            cmd.stamp_ms = static_cast<std::int64_t>(number_field(j, "stamp"));
        }
        return cmd;
    }
    only_keys(j, {"type"});
    if (t == "pause") return PauseRequest{};
    if (t == "resume") return ResumeRequest{};
    if (t == "reset") return ResetRequest{};
    throw ValidationError("type", "unknown frame type '" + t + "'");
}

std::string rejection_frame(const std::string& reason) {
    return ordered_json{{"type", "rejected"}, {"reason", reason}}.dump();
}

// ---------------------------------------------------------------------------
// Live simulation

// Applies delivered commands and enforces the command timeout. A timed-out
// robot stops dead rather than braking along its acceleration limit.
class LiveSim::TeleopApp final : public Application {
public:
    TeleopApp(std::string teleop, Duration timeout) : teleop_(std::move(teleop)), timeout_(timeout) {}

    void on_deliver(Coordinator& c, const Packet& p, SimTime at) override {
        if (p.src != teleop_) return;
        const std::vector<double> values = decode_doubles(p.payload);
        if (values.size() < 2) return;
        Robot& r = c.physics().robot(p.dst);
        r.external = VelocityCommand{std::clamp(values[0], -r.params.v_max, r.params.v_max),
                                     std::clamp(values[1], -r.params.w_max, r.params.w_max)};
        r.externally_driven = true;
        last_[p.dst] = at;
    }

    void on_step(Coordinator& c) override {
        for (auto it = last_.begin(); it != last_.end();) {
            if (c.now() - it->second < timeout_) {
                ++it;
                continue;
            }
            Robot& r = c.physics().robot(it->first);
            r.external = VelocityCommand{};
            r.state.v = 0.0;
            r.state.w = 0.0;
            it = last_.erase(it);
        }
    }

    void clear() { last_.clear(); }

private:
    std::string teleop_;
    Duration timeout_;
    std::map<std::string, SimTime> last_;  // time of the last delivered command
};

namespace {

// Live runs are paced by the gateway itself at real time.
ScenarioConfig live_config(ScenarioConfig cfg) {
    cfg.sync.real_time_factor = 1.0;
    cfg.sync.emulate_stall = false;
    cfg.validate();
    const bool has_teleop =
        std::any_of(cfg.hosts.begin(), cfg.hosts.end(),
                    [&](const HostSpec& h) { return h.id == cfg.gateway.teleop_node; });
    if (!has_teleop) {
        throw ValidationError("gateway.teleop_node",
                              "no wired host '" + cfg.gateway.teleop_node + "'");
    }
    return cfg;
}

}  // namespace

LiveSim::LiveSim(ScenarioConfig cfg, TraceSink* trace)
    : cfg_(live_config(std::move(cfg))), world_(build_world(cfg_)) {
    initial_robots_ = world_.physics.robots();
    initial_plants_ = world_.physics.plants();
    std::vector<std::string> ids;
    for (const Robot& r : initial_robots_) {
        robot_ids_.insert(r.state.id);
        ids.push_back(r.state.id);
    }
    app_ = std::make_unique<TeleopApp>(cfg_.gateway.teleop_node, cfg_.gateway.command_timeout);
    flows_ = std::make_unique<FlowApp>(cfg_.traffic);
    coord_ = std::make_unique<Coordinator>(world_.physics, world_.net, cfg_.sync, cfg_.profiles,
                                           trace, CoordinatorOptions{cfg_.trace_interval});
    coord_->add_application(*app_, ids);
    coord_->add_application(*flows_);
    coord_->begin();
    publish();
}

LiveSim::~LiveSim() = default;

InjectResult LiveSim::submit(ClientFrame frame) {
    if (const auto* cmd = std::get_if<TeleopCommand>(&frame)) {
        if (!robot_ids_.contains(cmd->robot)) return Rejected{"unknown robot"};
        if (!std::isfinite(cmd->v) || !std::isfinite(cmd->w)) return Rejected{"non-finite"};
    }
    std::lock_guard lock(queue_mutex_);
    queue_.push_back(std::move(frame));
    return Accepted{};
}

void LiveSim::tick() {
    if (failed_) return;
    std::deque<ClientFrame> frames;
    {
        std::lock_guard lock(queue_mutex_);
        frames.swap(queue_);
    }
    try {
        for (const ClientFrame& f : frames) {
            apply(f);
        }
        if (!paused_) {
            coord_->step();
        }
    } catch (const std::exception& e) {
        error_ = e.what();
        failed_ = true;
    }
    publish();
}

void LiveSim::apply(const ClientFrame& frame) {
    if (const auto* cmd = std::get_if<TeleopCommand>(&frame)) {
        coord_->send(cfg_.gateway.teleop_node, cmd->robot, kCommandBytes,
                     encode_doubles({cmd->v, cmd->w}), cfg_.gateway.profile);
    } else if (std::holds_alternative<PauseRequest>(frame)) {
        paused_ = true;
    } else if (std::holds_alternative<ResumeRequest>(frame)) {
        paused_ = false;
    } else {
        reset();
    }
}

// Poses and plant states go back to their initial values; sim time and
// packets already in flight are unaffected.
void LiveSim::reset() {
    std::copy(initial_robots_.begin(), initial_robots_.end(), world_.physics.robots().begin());
    std::copy(initial_plants_.begin(), initial_plants_.end(), world_.physics.plants().begin());
    app_->clear();
}

RunReport LiveSim::finish() {
    coord_->finish();
    RunReport report = coord_->report();
    if (failed_) report.error = error_;
    return report;
}

void LiveSim::publish() {
    auto s = std::make_shared<StateSnapshot>();
    const NetWorld& net = coord_->net();
    s->t = coord_->now();
    for (const Robot& r : world_.physics.robots()) {
        const Pose2D& p = r.state.pose;
        s->robots.push_back({r.state.id, p.x, p.y, p.theta, net.reported_rssi(r.state.id),
                             net.associated_ap(r.state.id)});
    }
    for (const NetNode& n : net.nodes()) {
        if (n.kind == NodeKind::AccessPoint) {
            s->aps.push_back({n.id, n.position.x, n.position.y});
        }
    }
    s->delivered = coord_->report().delivered;
    s->discarded = coord_->report().discarded;
    std::lock_guard lock(snapshot_mutex_);
    snapshot_ = std::move(s);
}

std::shared_ptr<const StateSnapshot> LiveSim::snapshot() const {
    std::lock_guard lock(snapshot_mutex_);
    return snapshot_;
}

// ---------------------------------------------------------------------------
// Service

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace {

class WsSession;

constexpr std::size_t kMaxQueuedFrames = 1024;

std::string mime_type(const std::filesystem::path& path) {
    static const std::map<std::string, std::string> types = {
        {".html", "text/html"},        {".js", "application/javascript"},
        {".css", "text/css"},          {".json", "application/json"},
        {".svg", "image/svg+xml"},     {".png", "image/png"},
        {".map", "application/json"},  {".ico", "image/x-icon"},
    };
    const auto it = types.find(path.extension().string());
    return it == types.end() ? "application/octet-stream" : it->second;
}

}  // namespace

struct Gateway::Impl {
    Impl(ScenarioConfig config, GatewayOptions opts)
        : options(std::move(opts)),
          trace(options.out_dir.empty() ? nullptr : std::make_unique<TraceWriter>(options.out_dir)),
          sim(std::move(config), trace.get()),
          scenario_json(to_json(sim.config()).dump()) {}

    void accept();
    void broadcast_loop();
    void run_sim();
    http::response<http::string_body> handle(const http::request<http::string_body>& req) const;

    GatewayOptions options;
    std::unique_ptr<TraceWriter> trace;
    LiveSim sim;
    std::string scenario_json;

    net::io_context ioc{1};
    tcp::acceptor acceptor{ioc};
    net::steady_timer broadcast_timer{ioc};
    std::chrono::steady_clock::time_point next_broadcast;
    std::set<std::shared_ptr<WsSession>> sessions;  // I/O thread only

    std::thread io_thread;
    std::thread sim_thread;
    std::atomic<bool> stepping{false};

    std::mutex lifecycle;
    bool started = false;
    bool stopped = false;
    unsigned short bound_port = 0;
    RunReport final_report;
};

namespace {

class WsSession : public std::enable_shared_from_this<WsSession> {
public:
    WsSession(tcp::socket&& socket, Gateway::Impl& gw) : ws_(std::move(socket)), gw_(gw) {}

    void run(http::request<http::string_body> req) {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept(req, beast::bind_front_handler(&WsSession::on_accept, shared_from_this()));
    }

    void send(std::shared_ptr<const std::string> frame) {
        if (closing_) return;
        if (queue_.size() >= kMaxQueuedFrames) {
            close();
            return;
        }
        queue_.push_back(std::move(frame));
        if (queue_.size() == 1) do_write();
    }

    void close() {
        if (closing_) return;
        closing_ = true;
        ws_.async_close(websocket::close_code::going_away,
                        [self = shared_from_this()](beast::error_code) { self->gw_.sessions.erase(self); });
    }

private:
    void on_accept(beast::error_code ec) {
        if (ec) return;
        gw_.sessions.insert(shared_from_this());
        do_read();
    }

    void do_read() {
        ws_.async_read(buffer_, beast::bind_front_handler(&WsSession::on_read, shared_from_this()));
    }

    void on_read(beast::error_code ec, std::size_t) {
        if (ec) {
            gw_.sessions.erase(shared_from_this());
            return;
        }
        const std::string text = beast::buffers_to_string(buffer_.data());
        buffer_.consume(buffer_.size());
        std::optional<std::string> reason;
        try {
            const InjectResult r = gw_.sim.submit(parse_client_frame(text));
            if (const auto* rej = std::get_if<Rejected>(&r)) reason = rej->reason;
        } catch (const Error& e) {
            reason = e.what();
        }
        if (reason) send(std::make_shared<const std::string>(rejection_frame(*reason)));
        do_read();
    }

    void do_write() {
        ws_.text(true);
        ws_.async_write(net::buffer(*queue_.front()),
                        beast::bind_front_handler(&WsSession::on_write, shared_from_this()));
    }

    void on_write(beast::error_code ec, std::size_t) {
        if (ec) {
            gw_.sessions.erase(shared_from_this());
            return;
        }
        queue_.pop_front();
        if (!queue_.empty() && !closing_) do_write();
    }

    websocket::stream<beast::tcp_stream> ws_;
    Gateway::Impl& gw_;
    beast::flat_buffer buffer_;
    std::deque<std::shared_ptr<const std::string>> queue_;
    bool closing_ = false;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
public:
    HttpSession(tcp::socket&& socket, Gateway::Impl& gw) : stream_(std::move(socket)), gw_(gw) {}

    void run() {
        stream_.expires_after(std::chrono::seconds(30));
        http::async_read(stream_, buffer_, req_,
                         beast::bind_front_handler(&HttpSession::on_read, shared_from_this()));
    }

private:
    void on_read(beast::error_code ec, std::size_t) {
        if (ec) return;
        if (websocket::is_upgrade(req_)) {
            stream_.expires_never();
            std::make_shared<WsSession>(stream_.release_socket(), gw_)->run(std::move(req_));
            return;
        }
        auto res = std::make_shared<http::response<http::string_body>>(gw_.handle(req_));
        http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
            beast::error_code ignored;
            self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        });
    }

    beast::tcp_stream stream_;
    Gateway::Impl& gw_;
    beast::flat_buffer buffer_;
    http::request<http::string_body> req_;
};

}  // namespace

void Gateway::Impl::accept() {
    acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
        if (ec == net::error::operation_aborted || !acceptor.is_open()) return;
        if (!ec) std::make_shared<HttpSession>(std::move(socket), *this)->run();
        accept();
    });
}

void Gateway::Impl::broadcast_loop() {
    const auto period = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(1.0 / sim.config().gateway.snapshot_hz));
    const auto now = std::chrono::steady_clock::now();
    next_broadcast += period;
    if (next_broadcast < now - std::chrono::seconds(1)) next_broadcast = now + period;
    broadcast_timer.expires_at(next_broadcast);
    broadcast_timer.async_wait([this](beast::error_code ec) {
        if (ec) return;
        const auto frame = std::make_shared<const std::string>(to_json_string(*sim.snapshot()));
        // Copy: a failing send may erase from the set.
        const auto targets = sessions;
        for (const auto& s : targets) {
            s->send(frame);
        }
        broadcast_loop();
    });
}

void Gateway::Impl::run_sim() {
    using clock = std::chrono::steady_clock;
    const auto dt = std::chrono::duration_cast<clock::duration>(sim.physics_step());
    auto origin = clock::now();
    std::int64_t ticks = 0;
    while (stepping) {
        sim.tick();
        ++ticks;
        const auto target = origin + ticks * dt;
        if (clock::now() > target + std::chrono::seconds(1)) {
            // Fell far behind (debugger, suspended host): re-anchor instead of bursting.
            origin = clock::now();
            ticks = 0;
            continue;
        }
        std::this_thread::sleep_until(target);
    }
}

http::response<http::string_body> Gateway::Impl::handle(const http::request<http::string_body>& req) const {
    http::response<http::string_body> res;
    res.version(req.version());
    res.keep_alive(false);
    res.set(http::field::server, "cosim-gateway");
    const auto reply = [&](http::status status, std::string body, const std::string& type) {
        res.result(status);
        res.set(http::field::content_type, type);
        res.body() = std::move(body);
        res.prepare_payload();
        return res;
    };

    if (req.method() != http::verb::get && req.method() != http::verb::head) {
        return reply(http::status::method_not_allowed, "{\"error\":\"method not allowed\"}",
                     "application/json");
    }
    std::string target(req.target());
    target = target.substr(0, target.find('?'));
    if (target == "/state") {
        return reply(http::status::ok, to_json_string(*sim.snapshot()), "application/json");
    }
    if (target == "/scenario") {
        return reply(http::status::ok, scenario_json, "application/json");
    }
    if (target == "/healthz") {
        const char* status = sim.failed() ? "failed" : sim.paused() ? "paused" : "stepping";
        const ordered_json body{{"status", status}, {"t_ns", to_ns(sim.snapshot()->t)}};
        return reply(sim.running() ? http::status::ok : http::status::service_unavailable, body.dump(),
                     "application/json");
    }

    const std::string& ui_dir = sim.config().gateway.ui_dir;
    const std::filesystem::path rel = std::filesystem::path(target == "/" ? "/index.html" : target).relative_path();
    const bool traversal = std::any_of(rel.begin(), rel.end(), [](const auto& part) { return part == ".."; });
    if (!ui_dir.empty() && !traversal) {
        const std::filesystem::path file = std::filesystem::path(ui_dir) / rel;
        std::ifstream in(file, std::ios::binary);
        if (in && std::filesystem::is_regular_file(file)) {
            std::ostringstream body;
            body << in.rdbuf();
            return reply(http::status::ok, body.str(), mime_type(file));
        }
    }
    return reply(http::status::not_found, "{\"error\":\"not found\"}", "application/json");
}

Gateway::Gateway(ScenarioConfig cfg, GatewayOptions options)
    : impl_(std::make_unique<Impl>(std::move(cfg), std::move(options))) {
    if (!impl_->options.out_dir.empty()) {
        write_resolved(impl_->sim.config(), impl_->options.out_dir);
    }
}

Gateway::~Gateway() {
    try {
        stop();
    } catch (...) {
        // Destructors stay silent; call stop() to observe failures.
    }
}

void Gateway::start() {
    std::lock_guard lock(impl_->lifecycle);
    if (impl_->started) return;
    Impl& g = *impl_;
    beast::error_code ec;
    const auto address = net::ip::make_address(g.options.address, ec);
    if (ec) throw BindError("invalid address '" + g.options.address + "'");
    const tcp::endpoint endpoint(address, g.options.port);
    g.acceptor.open(endpoint.protocol(), ec);
    if (!ec) g.acceptor.set_option(net::socket_base::reuse_address(true), ec);
    if (!ec) g.acceptor.bind(endpoint, ec);
    if (!ec) g.acceptor.listen(net::socket_base::max_listen_connections, ec);
    if (ec) {
        throw BindError("cannot listen on " + g.options.address + ":" + std::to_string(g.options.port) +
                        ": " + ec.message());
    }
    g.bound_port = g.acceptor.local_endpoint().port();
    g.started = true;
    g.accept();
    g.next_broadcast = std::chrono::steady_clock::now();
    g.broadcast_loop();
    g.stepping = true;
    g.sim_thread = std::thread([&g] { g.run_sim(); });
    g.io_thread = std::thread([&g] { g.ioc.run(); });
}

RunReport Gateway::stop() {
    std::lock_guard lock(impl_->lifecycle);
    Impl& g = *impl_;
    if (!g.started || g.stopped) return g.final_report;
    g.stopped = true;

    g.stepping = false;
    g.sim_thread.join();
    g.final_report = g.sim.finish();
    if (!g.options.out_dir.empty()) {
        std::ofstream out(g.options.out_dir / "run_report.json", std::ios::trunc);
        out << to_json_string(g.final_report) << '\n';
    }

    net::post(g.ioc, [&g] {
        beast::error_code ignored;
        g.acceptor.close(ignored);
        g.broadcast_timer.cancel();
        const auto targets = g.sessions;
        for (const auto& s : targets) {
            s->close();
        }
    });
    // Give close handshakes a moment, then force the loop down.
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(2);
    while (!g.ioc.stopped() && std::chrono::steady_clock::now() < deadline) {
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    g.ioc.stop();
    g.io_thread.join();
    g.sessions.clear();
    return g.final_report;
}

RunReport Gateway::wait_for_signal() {
    net::io_context signal_ioc;
    net::signal_set signals(signal_ioc, SIGINT, SIGTERM);
    signals.async_wait([](beast::error_code, int) {});
    signal_ioc.run();
    return stop();
}

unsigned short Gateway::port() const noexcept { return impl_->bound_port; }

LiveSim& Gateway::sim() noexcept { return impl_->sim; }

RunReport serve(const ScenarioConfig& cfg, unsigned short port, const std::filesystem::path& out_dir,
                const std::string& address) {
    Gateway gateway(cfg, GatewayOptions{address, port, out_dir});
    gateway.start();
    return gateway.wait_for_signal();
}

}  // namespace cosim
