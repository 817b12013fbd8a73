#include "etw/etw.h"

#include <filesystem>
#include <fstream>
#include <memory>
#include <new>
#include <sstream>

#include <nlohmann/json.hpp>

#include "etw/console.hpp"
#include "etw/error.hpp"
#include "etw/interact.hpp"
#include "etw/report.hpp"
#include "etw/study.hpp"
#include "etw/waveform_io.hpp"

struct etw_waveform {
    etw::stim::WaveformSamples samples;
};

struct etw_handmap {
    etw::HandMap map;
};

struct etw_perceiver {
    etw::PerceiverConfig config;
};

struct etw_device {
    etw::device::Device device;
};

struct etw_study_config {
    etw::StudyConfig config;
};

struct etw_server {
    std::unique_ptr<etw::console::ConsoleSession> session;
    std::unique_ptr<etw::console::ConsoleServer> server;
};

namespace {

namespace fs = std::filesystem;

static_assert(static_cast<int>(etw::ErrorCode::Range) == ETW_E_RANGE);
static_assert(static_cast<int>(etw::ErrorCode::Lockout) == ETW_E_LOCKOUT);
static_assert(static_cast<int>(etw::ErrorCode::Aborted) == ETW_E_ABORTED);

thread_local std::string last_error;

etw_status set_error(etw_status s, const std::string& msg) {
    last_error = msg;
    return s;
}

template <class F>
etw_status guard(F&& f) {
    try {
        f();
        return ETW_OK;
    } catch (const etw::Error& e) {
        return set_error(static_cast<etw_status>(e.code()), e.what());
    } catch (const nlohmann::json::exception& e) {
        return set_error(ETW_E_PARSE, e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        return set_error(ETW_E_IO, e.what());
    } catch (const std::bad_alloc&) {
        return set_error(ETW_E_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return set_error(ETW_E_INTERNAL, e.what());
    }
}

#define ETW_REQUIRE(p)                                                   \
    do {                                                                 \
        if (!(p)) return set_error(ETW_E_NULL, #p " must not be NULL"); \
    } while (0)

std::string slurp(const char* path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) etw::fail(etw::ErrorCode::Io, std::string("cannot open ") + path);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void spit(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) etw::fail(etw::ErrorCode::Io, "cannot write " + path.string());
}

char* dup(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::copy(s.begin(), s.end(), out);
    out[s.size()] = '\0';
    return out;
}

}  // namespace

extern "C" {

const char* etw_version(void) { return "1.0.0"; }

const char* etw_status_name(etw_status status) {
    if (status == ETW_OK) return "ok";
    if (status == ETW_E_NULL) return "null";
    if (status == ETW_E_INTERNAL) return "internal";
    if (status >= ETW_E_RANGE && status <= ETW_E_ABORTED) return etw::to_string(static_cast<etw::ErrorCode>(status));
    return "unknown";
}

const char* etw_last_error(void) { return last_error.c_str(); }

void etw_string_free(char* s) { delete[] s; }

/* waveforms */

etw_status etw_waveform_balanced(double amp_ma, double width_ms, double priming_ms, double sample_rate_hz, int anodic,
                                 etw_waveform** out) {
    ETW_REQUIRE(out);
    return guard([&] {
        const auto spec = etw::stim::PulseSpec::balanced(
            amp_ma, anodic ? etw::stim::Polarity::Anodic : etw::stim::Polarity::Cathodic, width_ms, priming_ms);
        *out = new etw_waveform{etw::stim::synth_stimulus(spec, sample_rate_hz)};
    });
}

etw_status etw_waveform_monophasic(double amp_ma, double width_ms, double sample_rate_hz, etw_waveform** out) {
    ETW_REQUIRE(out);
    return guard([&] { *out = new etw_waveform{etw::stim::synth_monophasic(amp_ma, width_ms, sample_rate_hz)}; });
}

void etw_waveform_free(etw_waveform* w) { delete w; }

size_t etw_waveform_sample_count(const etw_waveform* w) { return w ? w->samples.size() : 0; }
double etw_waveform_sample_rate(const etw_waveform* w) { return w ? w->samples.sample_rate() : 0.0; }
const double* etw_waveform_samples(const etw_waveform* w) { return w ? w->samples.samples().data() : nullptr; }

etw_status etw_waveform_net_charge(const etw_waveform* w, double* out_uc) {
    ETW_REQUIRE(w);
    ETW_REQUIRE(out_uc);
    return guard([&] { *out_uc = etw::stim::net_charge(w->samples); });
}

etw_status etw_waveform_write_csv(const etw_waveform* w, const char* path) {
    ETW_REQUIRE(w);
    ETW_REQUIRE(path);
    return guard([&] {
        std::ostringstream s;
        etw::stim::write_csv(s, w->samples);
        spit(path, s.str());
    });
}

etw_status etw_waveform_write_svg(const etw_waveform* const* ws, const char* const* labels, size_t n,
                                  const char* title, const char* path) {
    ETW_REQUIRE(ws);
    ETW_REQUIRE(path);
    return guard([&] {
        static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
        std::vector<etw::stim::PlotTrace> traces;
        for (size_t i = 0; i < n; ++i) {
            if (!ws[i]) etw::fail(etw::ErrorCode::Argument, "NULL waveform in plot list");
            traces.push_back({labels && labels[i] ? labels[i] : "waveform", colors[i % 4], &ws[i]->samples});
        }
        std::ostringstream s;
        etw::stim::write_svg(s, traces, title ? title : "");
        spit(path, s.str());
    });
}

/* hand map and perceiver */

etw_status etw_handmap_load(const char* path, etw_handmap** out) {
    ETW_REQUIRE(out);
    return guard([&] {
        *out = new etw_handmap{path ? etw::HandMap::parse(slurp(path)) : etw::HandMap::standard()};
    });
}

void etw_handmap_free(etw_handmap* m) { delete m; }
int etw_handmap_width(const etw_handmap* m) { return m ? m->map.width() : 0; }
int etw_handmap_height(const etw_handmap* m) { return m ? m->map.height() : 0; }

etw_status etw_handmap_write(const etw_handmap* m, const char* path) {
    ETW_REQUIRE(m);
    ETW_REQUIRE(path);
    return guard([&] { spit(path, m->map.serialize()); });
}

etw_status etw_handmap_write_svg(const etw_handmap* m, const char* path) {
    ETW_REQUIRE(m);
    ETW_REQUIRE(path);
    return guard([&] { spit(path, etw::handmap_svg(m->map)); });
}

etw_status etw_perceiver_load(const char* path, const etw_handmap* map, etw_perceiver** out) {
    ETW_REQUIRE(map);
    ETW_REQUIRE(out);
    return guard([&] {
        auto cfg = path ? etw::PerceiverConfig::from_json(slurp(path)) : etw::PerceiverConfig::defaults();
        cfg.check(map->map);
        *out = new etw_perceiver{std::move(cfg)};
    });
}

void etw_perceiver_free(etw_perceiver* p) { delete p; }

etw_status etw_perceiver_write(const etw_perceiver* p, const char* path) {
    ETW_REQUIRE(p);
    ETW_REQUIRE(path);
    return guard([&] { spit(path, p->config.to_json()); });
}

/* device */

etw_status etw_device_create(uint64_t seed, etw_device** out) {
    ETW_REQUIRE(out);
    return guard([&] {
        etw::device::DeviceConfig cfg;
        cfg.seed = seed;
        *out = new etw_device{etw::device::Device(cfg)};
    });
}

void etw_device_free(etw_device* d) { delete d; }

etw_status etw_device_receive(etw_device* d, const uint8_t* in, size_t n, uint8_t* out, size_t cap, size_t* out_len) {
    ETW_REQUIRE(d);
    ETW_REQUIRE(in || n == 0);
    ETW_REQUIRE(out_len);
    etw_status status = ETW_OK;
    const auto s = guard([&] {
        const auto reply = d->device.receive({in, n});
        *out_len = reply.size();
        if (reply.size() > cap || (!out && !reply.empty())) {
            status = set_error(ETW_E_RANGE, "reply buffer too small");
            return;
        }
        std::copy(reply.begin(), reply.end(), out);
    });
    return s != ETW_OK ? s : status;
}

etw_status etw_device_step(etw_device* d, double ms) {
    ETW_REQUIRE(d);
    return guard([&] {
        if (!(ms >= 0.0)) etw::fail(etw::ErrorCode::Argument, "step must be non-negative");
        d->device.step(ms);
    });
}

etw_status etw_device_run_until_idle(etw_device* d) {
    ETW_REQUIRE(d);
    return guard([&] { d->device.run_until_idle(); });
}

etw_status etw_device_status_json(const etw_device* d, char** out) {
    ETW_REQUIRE(d);
    ETW_REQUIRE(out);
    return guard([&] {
        const auto s = d->device.status();
        nlohmann::ordered_json j;
        j["state"] = s.state.name();
        j["t_ms"] = d->device.now_ms();
        j["channel"] = s.channel;
        j["intensity_ua"] = s.intensity_ua;
        j["resistance_kohm"] = s.resistance_kohm ? nlohmann::ordered_json(*s.resistance_kohm) : nlohmann::ordered_json(nullptr);
        j["playing"] = s.playing;
        j["relay_frame"] = etw::relay::to_hex(d->device.relay_frame());
        j["played"] = d->device.played().size();
        j["decode_errors"] = d->device.decode_errors();
        *out = dup(j.dump());
    });
}

/* studies */

etw_status etw_study_config_create(etw_study_config** out) {
    ETW_REQUIRE(out);
    return guard([&] { *out = new etw_study_config{}; });
}

void etw_study_config_free(etw_study_config* c) { delete c; }

etw_status etw_study_config_set_seed(etw_study_config* c, uint64_t seed) {
    ETW_REQUIRE(c);
    c->config.seed = seed;
    return ETW_OK;
}

etw_status etw_study_config_set_participants(etw_study_config* c, int n) {
    ETW_REQUIRE(c);
    if (n < 1) return set_error(ETW_E_ARGUMENT, "need at least one participant");
    c->config.participants = n;
    return ETW_OK;
}

etw_status etw_study_config_set_policy(etw_study_config* c, const char* policy) {
    ETW_REQUIRE(c);
    ETW_REQUIRE(policy);
    return guard([&] { c->config.policy = etw::policy_from_name(policy); });
}

etw_status etw_study_config_set_calibration_mode(etw_study_config* c, const char* mode) {
    ETW_REQUIRE(c);
    ETW_REQUIRE(mode);
    const std::string m = mode;
    if (m == "study1") c->config.calibration_mode = etw::CalibrationMode::Study1;
    else if (m == "study3") c->config.calibration_mode = etw::CalibrationMode::Study3;
    else return set_error(ETW_E_ARGUMENT, "calibration mode must be study1 or study3");
    return ETW_OK;
}

etw_status etw_study_config_set_perceiver(etw_study_config* c, const etw_perceiver* p) {
    ETW_REQUIRE(c);
    ETW_REQUIRE(p);
    c->config.perceiver = p->config;
    return ETW_OK;
}

etw_status etw_study_config_set_inject_lockout(etw_study_config* c, int trial) {
    ETW_REQUIRE(c);
    if (trial < 0) c->config.inject_lockout_at.reset();
    else c->config.inject_lockout_at = trial;
    return ETW_OK;
}

etw_status etw_run(const etw_study_config* c, const etw_handmap* map, const char* study, const char* out_dir,
                   etw_run_result* result) {
    ETW_REQUIRE(c);
    ETW_REQUIRE(map);
    ETW_REQUIRE(study);
    ETW_REQUIRE(out_dir);
    etw_run_result res{};
    std::string reason;
    const auto s = guard([&] {
        const std::string kind = study;
        if (kind != "study1" && kind != "study2" && kind != "all")
            etw::fail(etw::ErrorCode::Argument, "study must be study1, study2 or all");
        fs::create_directories(out_dir);
        auto write = [&](etw::StudyKind k, const std::vector<etw::TrialRecord>& recs) {
            std::ostringstream s;
            etw::write_trial_log(s, k, recs, map->map);
            spit(fs::path(out_dir) / (std::string(etw::study_name(k)) + ".jsonl"), s.str());
        };
        if (kind == "study1") {
            const auto run = etw::run_study_protocol(etw::StudyKind::Study1, c->config, map->map);
            write(etw::StudyKind::Study1, run.records);
            res = {run.aborted ? 1 : 0, run.records.size(), 0};
            reason = run.abort_reason;
        } else {
            const auto run = etw::run_full_pipeline(c->config, map->map);
            if (kind == "all") write(etw::StudyKind::Study1, run.study1);
            write(etw::StudyKind::Study2, run.study2);
            res = {run.aborted ? 1 : 0, kind == "all" ? run.study1.size() : 0, run.study2.size()};
            reason = run.abort_reason;
        }
    });
    if (result) *result = res;
    if (s != ETW_OK) return s;
    if (res.aborted) return set_error(ETW_E_LOCKOUT, "run aborted, partial log written: " + reason);
    return ETW_OK;
}

/* analysis */

etw_status etw_analyze(const etw_handmap* map, const char* study1_log, const char* study2_log, const char* out_dir,
                       int greenhouse_geisser, int welch, char** report_json) {
    ETW_REQUIRE(map);
    ETW_REQUIRE(out_dir);
    return guard([&] {
        if (!study1_log && !study2_log) etw::fail(etw::ErrorCode::Argument, "no log to analyze");
        auto load = [&](const char* path) -> std::optional<etw::TrialLog> {
            if (!path) return std::nullopt;
            std::ifstream in(path, std::ios::binary);
            if (!in) etw::fail(etw::ErrorCode::Io, std::string("cannot open ") + path);
            try {
                return etw::read_trial_log(in, map->map);
            } catch (const etw::Error& e) {
                etw::fail(e.code(), std::string(path) + ": " + e.what());
            }
        };
        auto l1 = load(study1_log);
        auto l2 = load(study2_log);
        // logs may be passed in either order
        if (l1 && l1->study == etw::StudyKind::Study2 && (!l2 || l2->study == etw::StudyKind::Study1)) std::swap(l1, l2);
        etw::report::ReportOptions opts;
        opts.greenhouse_geisser = greenhouse_geisser != 0;
        opts.variance = welch ? etw::analysis::Variance::Welch : etw::analysis::Variance::Pooled;
        const auto rep = etw::report::analyze(l1, l2, map->map, opts);
        etw::report::write_report(rep, map->map, out_dir);
        if (report_json) *report_json = dup(rep.to_json());
    });
}

/* interaction */

etw_status etw_interact(const etw_handmap* map, const etw_perceiver* p, const char* scene_path, const char* poses_path,
                        const char* policy, const char* visual_size, const char* opacity, uint64_t seed,
                        const char* out_path, size_t* actions) {
    ETW_REQUIRE(map);
    ETW_REQUIRE(p);
    ETW_REQUIRE(scene_path);
    ETW_REQUIRE(poses_path);
    ETW_REQUIRE(out_path);
    return guard([&] {
        std::ifstream scene_in(scene_path), poses_in(poses_path);
        if (!scene_in) etw::fail(etw::ErrorCode::Io, std::string("cannot open ") + scene_path);
        if (!poses_in) etw::fail(etw::ErrorCode::Io, std::string("cannot open ") + poses_path);
        const auto scene = etw::read_scene(scene_in);
        const auto poses = etw::read_pose_stream(poses_in);

        etw::RenderConfig cfg;
        if (policy) cfg.policy = etw::policy_from_name(policy);
        if (!visual_size != !opacity) etw::fail(etw::ErrorCode::Argument, "visual size and opacity go together");
        if (visual_size)
            cfg.visual = etw::VisualEffect{etw::visual_size_from_name(visual_size), etw::opacity_from_name(opacity)};
        else
            cfg.visual.reset();

        const etw::Perceiver perceiver(p->config.for_participant(seed), map->map);
        etw::device::DeviceConfig dcfg;
        dcfg.seed = seed;
        etw::device::Device device(dcfg);
        const auto run = etw::run_interaction(scene, poses, cfg, perceiver, device, seed);
        std::ostringstream s;
        etw::write_action_log(s, run.actions);
        spit(out_path, s.str());
        if (actions) *actions = run.actions.size();
    });
}

/* console backend */

etw_status etw_server_create(int port, uint64_t seed, const char* policy, etw_server** out) {
    ETW_REQUIRE(out);
    return guard([&] {
        etw::console::SessionConfig cfg;
        cfg.seed = seed;
        cfg.device.seed = seed;
        if (policy) cfg.policy = etw::policy_from_name(policy);
        auto s = std::make_unique<etw_server>();
        s->session = std::make_unique<etw::console::ConsoleSession>(cfg, etw::HandMap::standard());
        s->server = std::make_unique<etw::console::ConsoleServer>(*s->session, port);
        *out = s.release();
    });
}

void etw_server_free(etw_server* s) { delete s; }

int etw_server_port(const etw_server* s) { return s ? s->server->port() : 0; }

etw_status etw_server_run(etw_server* s) {
    ETW_REQUIRE(s);
    return guard([&] { s->server->run(); });
}

void etw_server_request_stop(etw_server* s) {
    if (s) s->server->request_stop();
}

etw_status etw_server_write_logs(const etw_server* s, const char* out_dir) {
    ETW_REQUIRE(s);
    ETW_REQUIRE(out_dir);
    return guard([&] {
        for (auto kind : {etw::StudyKind::Study1, etw::StudyKind::Study2}) {
            std::vector<etw::TrialRecord> recs;
            for (const auto& r : s->session->records())
                if (r.study == kind) recs.push_back(r);
            if (recs.empty()) continue;
            std::ostringstream o;
            etw::write_trial_log(o, kind, recs, etw::HandMap::standard());
            spit(fs::path(out_dir) / (std::string("session-") + etw::study_name(kind) + ".jsonl"), o.str());
        }
    });
}

}  // extern "C"
