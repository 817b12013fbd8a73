#include <doctest.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "etw/etw.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("etw_c_api_" + std::to_string(::getpid()) + "_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), "cannot open " << p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t line_count(const fs::path& p) {
    const auto s = slurp(p);
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

std::uint8_t crc8(const std::vector<std::uint8_t>& bytes) {
    std::uint8_t crc = 0;
    for (auto b : bytes) {
        crc ^= b;
        for (int i = 0; i < 8; ++i) crc = static_cast<std::uint8_t>(crc & 0x80 ? (crc << 1) ^ 0x07 : crc << 1);
    }
    return crc;
}

std::vector<std::uint8_t> frame(std::uint8_t op, std::vector<std::uint8_t> payload = {}) {
    std::vector<std::uint8_t> body{op, static_cast<std::uint8_t>(payload.size())};
    body.insert(body.end(), payload.begin(), payload.end());
    std::vector<std::uint8_t> f{0xAA};
    f.insert(f.end(), body.begin(), body.end());
    f.push_back(crc8(body));
    return f;
}

// Numbers within a relative tolerance, everything else equal.
void compare_json(const json& got, const json& want, const std::string& path) {
    INFO(path);
    if (want.is_number() && got.is_number()) {
        const double a = got.get<double>(), b = want.get<double>();
        CHECK(std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)));
        return;
    }
    REQUIRE(got.type() == want.type());
    if (want.is_object()) {
        REQUIRE(got.size() == want.size());
        for (auto it = want.begin(); it != want.end(); ++it) {
            REQUIRE(got.contains(it.key()));
            compare_json(got.at(it.key()), it.value(), path + "." + it.key());
        }
    } else if (want.is_array()) {
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < want.size(); ++i) compare_json(got[i], want[i], path + "[" + std::to_string(i) + "]");
    } else {
        CHECK(got == want);
    }
}

struct MapFixture {
    etw_handmap* map = nullptr;
    MapFixture() { REQUIRE(etw_handmap_load(nullptr, &map) == ETW_OK); }
    ~MapFixture() { etw_handmap_free(map); }
};

}  // namespace

TEST_CASE("status names and thread-local last error") {
    CHECK(std::strlen(etw_version()) > 0);
    CHECK(std::string(etw_status_name(ETW_OK)) == "ok");
    CHECK(std::string(etw_status_name(ETW_E_LOCKOUT)) == "lockout");
    CHECK(std::string(etw_status_name(ETW_E_NULL)) == "null");

    etw_waveform* w = nullptr;
    CHECK(etw_waveform_balanced(9.0, 5, 40, 10000, 0, &w) == ETW_E_RANGE);
    CHECK(w == nullptr);
    const std::string msg = etw_last_error();
    CHECK(msg.find("9") != std::string::npos);

    std::string other;
    std::thread([&] { other = etw_last_error(); }).join();
    CHECK(other.empty());

    CHECK(etw_waveform_balanced(1.0, 5, 40, 10000, 0, nullptr) == ETW_E_NULL);
    etw_waveform_free(nullptr);
    etw_string_free(nullptr);
}

TEST_CASE("waveforms") {
    etw_waveform* bal = nullptr;
    etw_waveform* mono = nullptr;
    REQUIRE(etw_waveform_balanced(1.6, 5, 40, 10000, 0, &bal) == ETW_OK);
    REQUIRE(etw_waveform_monophasic(1.0, 5, 10000, &mono) == ETW_OK);
    CHECK(etw_waveform_sample_count(bal) == 450);
    CHECK(etw_waveform_sample_rate(bal) == 10000.0);
    CHECK(etw_waveform_samples(bal)[0] == 0.2);
    CHECK(etw_waveform_samples(bal)[449] == -1.6);
    double q = 1.0;
    CHECK(etw_waveform_net_charge(bal, &q) == ETW_OK);
    CHECK(q == 0.0);
    CHECK(etw_waveform_net_charge(mono, &q) == ETW_OK);
    CHECK(q == -5.0);
    CHECK(etw_waveform_monophasic(1.0, 5, 999, &mono) != ETW_OK);

    const auto dir = scratch("wf");
    CHECK(etw_waveform_write_csv(bal, (dir / "b.csv").c_str()) == ETW_OK);
    CHECK(line_count(dir / "b.csv") >= 450);
    const etw_waveform* both[] = {bal, mono};
    const char* labels[] = {"balanced", "monophasic"};
    CHECK(etw_waveform_write_svg(both, labels, 2, "t", (dir / "w.svg").c_str()) == ETW_OK);
    CHECK(slurp(dir / "w.svg").find("<svg") != std::string::npos);
    CHECK(etw_waveform_write_csv(bal, (dir / "b.csv" / "x.csv").c_str()) == ETW_E_IO);
    etw_waveform_free(bal);
    etw_waveform_free(mono);
    fs::remove_all(dir);
}

TEST_CASE("hand map and perceiver") {
    MapFixture m;
    CHECK(etw_handmap_width(m.map) == 48);
    CHECK(etw_handmap_height(m.map) == 72);
    const auto dir = scratch("map");
    REQUIRE(etw_handmap_write(m.map, (dir / "map.txt").c_str()) == ETW_OK);
    etw_handmap* again = nullptr;
    REQUIRE(etw_handmap_load((dir / "map.txt").c_str(), &again) == ETW_OK);
    CHECK(etw_handmap_width(again) == 48);
    etw_handmap_free(again);
    CHECK(etw_handmap_load((dir / "missing.txt").c_str(), &again) == ETW_E_IO);

    etw_perceiver* p = nullptr;
    REQUIRE(etw_perceiver_load(nullptr, m.map, &p) == ETW_OK);
    REQUIRE(etw_perceiver_write(p, (dir / "p.json").c_str()) == ETW_OK);
    CHECK(slurp(dir / "p.json") == slurp(ETW_DATA_DIR "/perceiver_v1.json"));
    etw_perceiver_free(p);
    std::ofstream(dir / "bad.json") << "{";
    CHECK(etw_perceiver_load((dir / "bad.json").c_str(), m.map, &p) == ETW_E_PARSE);
    fs::remove_all(dir);
}

TEST_CASE("device over wire bytes") {
    etw_device* d = nullptr;
    REQUIRE(etw_device_create(1, &d) == ETW_OK);
    std::uint8_t out[64];
    std::size_t n = 0;

    auto arm = frame(0x08);
    REQUIRE(etw_device_receive(d, arm.data(), arm.size(), out, sizeof out, &n) == ETW_OK);
    REQUIRE(n == 5);
    CHECK(out[0] == 0xAA);
    CHECK(out[1] == 0x82);  // ACK
    CHECK(out[3] == 0x08);

    // 4.1 mA does not even decode: dropped and counted
    auto over = frame(0x02, {0x04, 0x10});
    REQUIRE(etw_device_receive(d, over.data(), over.size(), out, sizeof out, &n) == ETW_OK);
    CHECK(n == 0);

    auto ch = frame(0x01, {5});
    auto amp = frame(0x02, {0xBC, 0x02});
    auto once = frame(0x03);
    std::vector<std::uint8_t> batch;
    for (const auto* f : {&ch, &amp, &once}) batch.insert(batch.end(), f->begin(), f->end());
    // three ACKs do not fit in 10 bytes
    CHECK(etw_device_receive(d, batch.data(), batch.size(), out, 10, &n) == ETW_E_RANGE);
    CHECK(n == 15);
    REQUIRE(etw_device_run_until_idle(d) == ETW_OK);

    char* status = nullptr;
    REQUIRE(etw_device_status_json(d, &status) == ETW_OK);
    const auto j = json::parse(status);
    etw_string_free(status);
    CHECK(j.at("state") == "Armed");
    CHECK(j.at("channel") == 5);
    CHECK(j.at("intensity_ua") == 700);
    CHECK(j.at("played") == 1);
    CHECK(j.at("decode_errors") == 1);
    CHECK(etw_device_step(d, -1.0) == ETW_E_ARGUMENT);
    etw_device_free(d);
}

TEST_CASE("study run matches the golden logs and report") {
    MapFixture m;
    etw_study_config* c = nullptr;
    REQUIRE(etw_study_config_create(&c) == ETW_OK);
    REQUIRE(etw_study_config_set_seed(c, 7) == ETW_OK);
    REQUIRE(etw_study_config_set_participants(c, 2) == ETW_OK);
    CHECK(etw_study_config_set_participants(c, 0) == ETW_E_ARGUMENT);
    CHECK(etw_study_config_set_policy(c, "laser") == ETW_E_PARSE);
    CHECK(etw_study_config_set_calibration_mode(c, "study2") == ETW_E_ARGUMENT);

    const auto dir = scratch("run");
    etw_run_result res{};
    REQUIRE(etw_run(c, m.map, "all", dir.c_str(), &res) == ETW_OK);
    CHECK(res.aborted == 0);
    CHECK(res.study1_trials == 44);
    CHECK(res.study2_trials == 48);
    const fs::path golden = ETW_GOLDEN_DIR "/run";
    CHECK(slurp(dir / "study1.jsonl") == slurp(golden / "study1.jsonl"));
    CHECK(slurp(dir / "study2.jsonl") == slurp(golden / "study2.jsonl"));

    char* report = nullptr;
    // the logs may be given in either order
    REQUIRE(etw_analyze(m.map, (dir / "study2.jsonl").c_str(), (dir / "study1.jsonl").c_str(), (dir / "rep").c_str(),
                        0, 0, &report) == ETW_OK);
    const auto got = json::parse(report);
    etw_string_free(report);
    compare_json(got, json::parse(slurp(golden / "report.json")), "report");
    CHECK(got.at("conditions").size() == 6);
    for (const char* f : {"report.json", "channels.csv", "conditions.csv", "anova.csv", "ttests.csv"})
        CHECK(fs::exists(dir / "rep" / f));

    CHECK(etw_analyze(m.map, nullptr, nullptr, (dir / "rep").c_str(), 0, 0, nullptr) == ETW_E_ARGUMENT);
    std::ofstream(dir / "empty.jsonl").close();
    CHECK(etw_analyze(m.map, (dir / "empty.jsonl").c_str(), nullptr, (dir / "rep").c_str(), 0, 0, nullptr) ==
          ETW_E_PARSE);
    CHECK(std::string(etw_last_error()).find("empty") != std::string::npos);

    etw_study_config_free(c);
    fs::remove_all(dir);
}

TEST_CASE("lockout aborts the run and keeps the partial log") {
    MapFixture m;
    etw_study_config* c = nullptr;
    REQUIRE(etw_study_config_create(&c) == ETW_OK);
    REQUIRE(etw_study_config_set_inject_lockout(c, 3) == ETW_OK);
    const auto dir = scratch("lockout");
    etw_run_result res{};
    CHECK(etw_run(c, m.map, "study1", dir.c_str(), &res) == ETW_E_LOCKOUT);
    CHECK(res.aborted == 1);
    CHECK(res.study1_trials == 4);
    CHECK(line_count(dir / "study1.jsonl") == 5);
    CHECK(std::string(etw_last_error()).find("Lockout") != std::string::npos);
    etw_study_config_free(c);
    fs::remove_all(dir);
}

TEST_CASE("interaction replay") {
    MapFixture m;
    etw_perceiver* p = nullptr;
    REQUIRE(etw_perceiver_load(nullptr, m.map, &p) == ETW_OK);
    const auto dir = scratch("interact");
    std::size_t n = 0;
    REQUIRE(etw_interact(m.map, p, ETW_DATA_DIR "/scene_demo.json", ETW_DATA_DIR "/poses_demo.jsonl", "electro",
                         "finger", "full", 1, (dir / "a.jsonl").c_str(), &n) == ETW_OK);
    CHECK(n == 14);
    CHECK(line_count(dir / "a.jsonl") == 14);
    std::istringstream lines(slurp(dir / "a.jsonl"));
    for (std::string line; std::getline(lines, line);) {
        const auto j = json::parse(line);
        CHECK(j.at("emitted_ms") == j.at("scheduled_ms"));
        CHECK(j.at("visual").at("start_ms") == j.at("scheduled_ms"));
    }
    CHECK(etw_interact(m.map, p, ETW_DATA_DIR "/scene_demo.json", ETW_DATA_DIR "/poses_demo.jsonl", "electro",
                       "finger", nullptr, 1, (dir / "b.jsonl").c_str(), &n) == ETW_E_ARGUMENT);
    etw_perceiver_free(p);
    fs::remove_all(dir);
}

TEST_CASE("console server lifecycle") {
    etw_server* s = nullptr;
    REQUIRE(etw_server_create(0, 1, "electro", &s) == ETW_OK);
    const int port = etw_server_port(s);
    CHECK(port > 0);
    etw_server* clash = nullptr;
    CHECK(etw_server_create(port, 1, "electro", &clash) == ETW_E_IO);
    CHECK(clash == nullptr);

    std::atomic<etw_status> rc{ETW_E_INTERNAL};
    std::thread t([&] { rc = etw_server_run(s); });
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    etw_server_request_stop(s);
    t.join();
    CHECK(rc == ETW_OK);

    const auto dir = scratch("serve");
    CHECK(etw_server_write_logs(s, dir.c_str()) == ETW_OK);
    CHECK(fs::is_empty(dir));
    etw_server_free(s);
    fs::remove_all(dir);
}
