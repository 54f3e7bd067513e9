#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <json.hpp>

#include "cosim/error.hpp"
#include "cosim/gateway.hpp"
#include "support/gen.hpp"

using namespace cosim;
using namespace std::chrono_literals;
using nlohmann::json;

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

const std::filesystem::path kScenarios = std::filesystem::path(COSIM_SOURCE_DIR) / "scenarios";

ScenarioConfig warehouse() { return load_scenario(kScenarios / "warehouse_teleop.json"); }

TeleopCommand cmd(const std::string& robot, double v, double w = 0.0) { return {robot, v, w, 0}; }

const Robot& robot(LiveSim& sim, const std::string& id) {
    return sim.coordinator().physics().robot(id);
}

void ticks(LiveSim& sim, int n) {
    for (int i = 0; i < n; ++i) sim.tick();
}

// Minimal blocking WebSocket client; reads give up after a timeout.
class WsClient {
public:
    explicit WsClient(unsigned short port) {
        beast::get_lowest_layer(ws_).connect(tcp::endpoint(asio::ip::make_address("127.0.0.1"), port));
        ws_.handshake("127.0.0.1", "/ws");
    }

    std::optional<std::string> read(std::chrono::milliseconds timeout = 2000ms) {
        beast::get_lowest_layer(ws_).expires_after(timeout);
        beast::error_code result;
        ws_.async_read(buffer_, [&](beast::error_code ec, std::size_t) { result = ec; });
        ioc_.restart();
        ioc_.run();
        if (result) return std::nullopt;
        std::string text = beast::buffers_to_string(buffer_.data());
        buffer_.consume(buffer_.size());
        return text;
    }

    void write(const std::string& text) {
        ws_.text(true);
        ws_.write(asio::buffer(text));
    }

private:
    asio::io_context ioc_;
    websocket::stream<beast::tcp_stream> ws_{ioc_};
    beast::flat_buffer buffer_;
};

http::response<http::string_body> get(unsigned short port, const std::string& target) {
    asio::io_context ioc;
    beast::tcp_stream stream(ioc);
    stream.connect(tcp::endpoint(asio::ip::make_address("127.0.0.1"), port));
    http::request<http::string_body> req{http::verb::get, target, 11};
    req.set(http::field::host, "127.0.0.1");
    http::write(stream, req);
    beast::flat_buffer buffer;
    http::response<http::string_body> res;
    http::read(stream, buffer, res);
    return res;
}

}  // namespace

// ---------------------------------------------------------------------------

TEST_CASE("client frames parse") {
    const auto c = std::get<TeleopCommand>(
        parse_client_frame(R"({"type":"cmd_vel","robot":"r1","v":0.5,"w":-0.25,"stamp":1712})"));
    CHECK(c.robot == "r1");
    CHECK(c.v == 0.5);
    CHECK(c.w == -0.25);
    CHECK(c.stamp_ms == 1712);
    CHECK(std::get<TeleopCommand>(parse_client_frame(R"({"type":"cmd_vel","robot":"r1","v":0,"w":0})"))
              .stamp_ms == 0);
    CHECK(std::holds_alternative<PauseRequest>(parse_client_frame(R"({"type":"pause"})")));
    CHECK(std::holds_alternative<ResumeRequest>(parse_client_frame(R"({"type":"resume"})")));
    CHECK(std::holds_alternative<ResetRequest>(parse_client_frame(R"({"type":"reset"})")));
}

TEST_CASE("malformed client frames are rejected") {
    CHECK_THROWS_AS(parse_client_frame("{"), ParseError);
    CHECK_THROWS_AS(parse_client_frame("[1,2]"), ValidationError);
    CHECK_THROWS_AS(parse_client_frame(R"({"robot":"r1"})"), ValidationError);
    CHECK_THROWS_AS(parse_client_frame(R"({"type":"jump"})"), ValidationError);
    CHECK_THROWS_AS(parse_client_frame(R"({"type":"pause","now":true})"), ValidationError);
    CHECK_THROWS_AS(parse_client_frame(R"({"type":"cmd_vel","robot":"r1","v":"fast","w":0})"),
                    ValidationError);
    CHECK_THROWS_AS(parse_client_frame(R"({"type":"cmd_vel","robot":"r1","w":0})"), ValidationError);
    CHECK_THROWS_AS(parse_client_frame(R"({"type":"cmd_vel","robot":7,"v":0,"w":0})"), ValidationError);
    CHECK_THROWS_AS(parse_client_frame(R"({"type":"cmd_vel","robot":"r1","v":0,"w":0,"x":1})"),
                    ValidationError);
}

TEST_CASE("property: random byte strings never crash the frame parser") {
    testing::Gen g(77);
    const std::string alphabet = R"({}[]":,0123456789.-eE truefalsnul"typecmd_velrobotvw)";
    for (int i = 0; i < testing::kCases; ++i) {
        std::string s;
        for (int k = 0; k < g.integer(0, 40); ++k) s += alphabet[g.integer(0, alphabet.size() - 1)];
        try {
            parse_client_frame(s);
        } catch (const ParseError&) {
        } catch (const ValidationError&) {
        }
    }
}

TEST_CASE("snapshot JSON layout") {
    StateSnapshot s;
    s.t = SimTime{1500ms};
    s.robots = {{"r1", 1, 2, 0.5, -60, "ap1"}, {"r3", 80, 10, 3, 0, std::nullopt}};
    s.aps = {{"ap1", 10, 10}};
    s.delivered = 4;
    const json j = json::parse(to_json_string(s));
    CHECK(j["t_ns"] == 1'500'000'000);
    CHECK(j["robots"][0]["ap"] == "ap1");
    CHECK(j["robots"][0]["rssi"] == -60);
    CHECK(j["robots"][1]["ap"].is_null());
    CHECK(j["aps"][0]["id"] == "ap1");
    CHECK(j["counters"]["delivered"] == 4);
    CHECK(j["counters"]["discarded"] == 0);
    CHECK(json::parse(rejection_frame("unknown robot")) == json{{"type", "rejected"}, {"reason", "unknown robot"}});
}

// ---------------------------------------------------------------------------

TEST_CASE("live sim rejects unknown robots and non-finite velocities") {
    LiveSim sim(warehouse());
    const auto r = sim.submit(cmd("ghost", 0.1));
    REQUIRE(std::holds_alternative<Rejected>(r));
    CHECK(std::get<Rejected>(r).reason == "unknown robot");
    const double nan = std::numeric_limits<double>::quiet_NaN();
    CHECK(std::get<Rejected>(sim.submit(cmd("r1", nan))).reason == "non-finite");
    CHECK(std::get<Rejected>(sim.submit(cmd("r1", 0.0, INFINITY))).reason == "non-finite");
    CHECK(std::holds_alternative<Accepted>(sim.submit(cmd("r1", 0.1))));
}

TEST_CASE("live sim requires the teleop host") {
    ScenarioConfig cfg = warehouse();
    cfg.gateway.teleop_node = "base2";
    try {
        LiveSim sim(cfg);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(e.field() == "gateway.teleop_node");
    }
}

TEST_CASE("a delivered command drives the robot at the commanded speed") {
    LiveSim sim(warehouse());
    CHECK(sim.snapshot()->t == SimTime{});
    for (int i = 0; i < 10; ++i) {
        sim.submit(cmd("r1", 0.5));
        ticks(sim, 10);
    }
    CHECK(robot(sim, "r1").externally_driven);
    CHECK(robot(sim, "r1").state.v == doctest::Approx(0.5));
    const auto snap = sim.snapshot();
    CHECK(snap->t == SimTime{1s});
    REQUIRE(snap->robots.size() == 3);
    CHECK(snap->robots[0].id == "r1");
    CHECK(snap->robots[0].x > 5.3);
    CHECK(snap->robots[0].ap == std::optional<std::string>("ap1"));
    CHECK(snap->robots[0].rssi_dbm < 0.0);
}

TEST_CASE("commands are clamped to the robot limits") {
    LiveSim sim(warehouse());
    for (int i = 0; i < 10; ++i) {
        sim.submit(cmd("r1", 5.0, -9.0));
        ticks(sim, 10);
    }
    REQUIRE(robot(sim, "r1").external.has_value());
    CHECK(robot(sim, "r1").external->v == 1.0);
    CHECK(robot(sim, "r1").external->w == -2.0);
}

TEST_CASE("an out-of-range robot never receives commands") {
    LiveSim sim(warehouse());
    const Pose2D start = robot(sim, "r3").state.pose;
    for (int i = 0; i < 10; ++i) {
        CHECK(std::holds_alternative<Accepted>(sim.submit(cmd("r3", 1.0))));
        ticks(sim, 10);
    }
    CHECK(robot(sim, "r3").state.pose == start);
    CHECK_FALSE(robot(sim, "r3").externally_driven);
    CHECK_FALSE(sim.snapshot()->robots[2].ap.has_value());
    CHECK(sim.coordinator().report().dropped >= 10);
}

TEST_CASE("the robot stops once commands stop arriving") {
    LiveSim sim(warehouse());
    sim.submit(cmd("r1", 0.8));
    std::optional<SimTime> moving, stopped;
    for (int i = 0; i < 200 && !stopped; ++i) {
        sim.tick();
        const double v = robot(sim, "r1").state.v;
        if (v > 0.0 && !moving) moving = sim.coordinator().now();
        if (moving && v == 0.0) stopped = sim.coordinator().now();
    }
    REQUIRE(stopped);
    // Command sent at t = 0; latency is at most 3 ms on this profile.
    CHECK(*stopped >= SimTime{500ms});
    CHECK(*stopped <= SimTime{500ms + 3ms + sim.physics_step()});
    CHECK(robot(sim, "r1").state.w == 0.0);
    const Pose2D at_stop = robot(sim, "r1").state.pose;
    ticks(sim, 50);
    CHECK(robot(sim, "r1").state.pose == at_stop);
}

TEST_CASE("pause, resume and reset") {
    LiveSim sim(warehouse());
    for (int i = 0; i < 5; ++i) {
        sim.submit(cmd("r1", 1.0));
        ticks(sim, 10);
    }
    sim.submit(PauseRequest{});
    sim.tick();
    CHECK(sim.paused());
    CHECK_FALSE(sim.running());
    const SimTime t = sim.coordinator().now();
    const Pose2D p = robot(sim, "r1").state.pose;
    ticks(sim, 20);
    CHECK(sim.coordinator().now() == t);
    CHECK(robot(sim, "r1").state.pose == p);
    CHECK(sim.snapshot()->t == t);

    sim.submit(ResumeRequest{});
    sim.tick();
    CHECK(sim.running());
    CHECK(sim.coordinator().now() == t + sim.physics_step());

    sim.submit(ResetRequest{});
    sim.tick();
    const Robot& r1 = robot(sim, "r1");
    CHECK(r1.state.pose.y == 10.0);
    CHECK(std::abs(r1.state.pose.x - 5.0) < 0.02);  // one step after the reset
    CHECK(sim.coordinator().now() == t + 2 * sim.physics_step());
}

TEST_CASE("every accepted command appears in packet.csv") {
    testing::TempDir dir("live_trace");
    std::size_t accepted = 0;
    {
        TraceWriter writer(dir.path());
        LiveSim sim(warehouse(), &writer);
        for (int i = 0; i < 30; ++i) {
            const std::string target = i % 3 == 0 ? "r3" : "r1";
            if (std::holds_alternative<Accepted>(sim.submit(cmd(target, 0.3)))) ++accepted;
            sim.submit(cmd("nobody", 0.3));
            ticks(sim, 3);
        }
        sim.finish();
    }
    CHECK(accepted == 30);
    const CsvTable t = read_csv(dir / "packet.csv");
    std::set<std::string> ids;
    std::size_t dropped_unassoc = 0;
    for (const auto& row : t.rows) {
        if (row[t.column("src")] != "teleop") continue;
        ids.insert(row[t.column("packet_id")]);
        if (row[t.column("event")] == "dropped" && row[t.column("reason")] == "unassociated") ++dropped_unassoc;
    }
    CHECK(ids.size() == accepted);
    CHECK(dropped_unassoc == 10);
}

// ---------------------------------------------------------------------------

TEST_CASE("gateway over sockets") {
    testing::TempDir dir("gateway");
    Gateway gw(warehouse(), GatewayOptions{"127.0.0.1", 0, dir.path()});
    gw.start();
    const unsigned short port = gw.port();
    REQUIRE(port != 0);
    CHECK(std::filesystem::exists(dir / "resolved.json"));

    SUBCASE("snapshots stream at the configured rate to every client") {
        WsClient a(port);
        WsClient b(port);
        std::vector<std::string> fa, fb;
        const auto start = std::chrono::steady_clock::now();
        while (std::chrono::steady_clock::now() - start < 2s) {
            auto f = a.read();
            REQUIRE(f);
            fa.push_back(*f);
        }
        for (std::size_t i = 0; i < fa.size() + 2; ++i) {
            auto f = b.read(500ms);
            if (!f) break;
            fb.push_back(*f);
        }
        // 10 Hz over 2 s, +-20 %.
        CHECK(fa.size() >= 16);
        CHECK(fa.size() <= 24);
        // Both clients see the same frames from the first one they share.
        const auto first = std::find(fb.begin(), fb.end(), fa.front());
        REQUIRE(first != fb.end());
        const std::size_t n = std::min<std::size_t>(fa.size(), fb.end() - first);
        CHECK(n >= 10);
        CHECK(std::equal(fa.begin(), fa.begin() + n, first));

        const json s = json::parse(fa.back());
        CHECK(s["robots"].size() == 3);
        CHECK(s["t_ns"].get<std::int64_t>() > json::parse(fa.front())["t_ns"].get<std::int64_t>());
    }

    SUBCASE("invalid frames get a rejection, commands move the robot") {
        WsClient c(port);
        c.write(R"({"type":"cmd_vel","robot":"ghost","v":1,"w":0})");
        c.write("not json");
        std::vector<std::string> reasons;
        for (int i = 0; i < 30 && reasons.size() < 2; ++i) {
            auto f = c.read();
            REQUIRE(f);
            const json j = json::parse(*f);
            if (j.contains("type") && j["type"] == "rejected") reasons.push_back(j["reason"]);
        }
        REQUIRE(reasons.size() == 2);
        CHECK(reasons[0] == "unknown robot");
        CHECK(reasons[1].find("malformed") != std::string::npos);

        const double x0 = json::parse(get(port, "/state").body())["robots"][0]["x"];
        for (int i = 0; i < 6; ++i) {
            c.write(R"({"type":"cmd_vel","robot":"r1","v":1,"w":0})");
            std::this_thread::sleep_for(100ms);
        }
        const double x1 = json::parse(get(port, "/state").body())["robots"][0]["x"];
        CHECK(x1 > x0 + 0.2);
    }

    SUBCASE("HTTP endpoints") {
        const auto state = get(port, "/state");
        CHECK(state.result() == http::status::ok);
        CHECK(state[http::field::content_type] == "application/json");
        CHECK(json::parse(state.body())["aps"][0]["id"] == "ap1");

        const auto scenario = get(port, "/scenario");
        CHECK(parse_scenario_text(scenario.body()).name == "warehouse_teleop");

        CHECK(get(port, "/healthz").result() == http::status::ok);
        gw.sim().submit(PauseRequest{});
        std::this_thread::sleep_for(100ms);
        const auto paused = get(port, "/healthz");
        CHECK(paused.result() == http::status::service_unavailable);
        CHECK(json::parse(paused.body())["status"] == "paused");
        gw.sim().submit(ResumeRequest{});
        std::this_thread::sleep_for(100ms);
        CHECK(get(port, "/healthz").result() == http::status::ok);

        CHECK(get(port, "/nope").result() == http::status::not_found);
    }

    SUBCASE("a second gateway on the same port fails to bind") {
        Gateway other(warehouse(), GatewayOptions{"127.0.0.1", port, {}});
        CHECK_THROWS_AS(other.start(), BindError);
    }

    const RunReport r = gw.stop();
    CHECK_FALSE(r.aborted());
    CHECK(r.steps > 0);
    const json report = json::parse(std::ifstream(dir / "run_report.json"));
    CHECK(report["steps"] == r.steps);
    CHECK(gw.stop() == r);
}

TEST_CASE("static UI files are served from ui_dir without escaping it") {
    testing::TempDir dir("ui");
    std::filesystem::create_directories(dir / "ui");
    std::ofstream(dir / "ui" / "index.html") << "<html>teleop</html>";
    std::ofstream(dir / "secret.txt") << "secret";
    ScenarioConfig cfg = warehouse();
    cfg.gateway.ui_dir = (dir / "ui").string();
    Gateway gw(cfg, GatewayOptions{});
    gw.start();
    const auto index = get(gw.port(), "/");
    CHECK(index.result() == http::status::ok);
    CHECK(index.body() == "<html>teleop</html>");
    CHECK(index[http::field::content_type] == "text/html");
    CHECK(get(gw.port(), "/../secret.txt").result() == http::status::not_found);
    CHECK(get(gw.port(), "/a/../../secret.txt").result() == http::status::not_found);
    gw.stop();
}
