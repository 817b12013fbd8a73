// etw: command-line front end over the C API.

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "etw/etw.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitError = 2;
constexpr int kExitLockout = 3;

struct Failure {
    etw_status status;
};

void check(etw_status s) {
    if (s != ETW_OK) throw Failure{s};
}

int report(const Failure& f) {
    std::fprintf(stderr, "etw: error (%s): %s\n", etw_status_name(f.status), etw_last_error());
    return f.status == ETW_E_LOCKOUT ? kExitLockout : kExitError;
}

template <class T, void (*Free)(T*)>
struct Handle {
    T* p = nullptr;
    Handle() = default;
    Handle(const Handle&) = delete;
    Handle& operator=(const Handle&) = delete;
    ~Handle() { Free(p); }
    T** out() { return &p; }
    T* get() const { return p; }
};

using Waveform = Handle<etw_waveform, etw_waveform_free>;
using Map = Handle<etw_handmap, etw_handmap_free>;
using PerceiverH = Handle<etw_perceiver, etw_perceiver_free>;
using StudyConfig = Handle<etw_study_config, etw_study_config_free>;
using Server = Handle<etw_server, etw_server_free>;

const char* opt(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

void print_file(const fs::path& p) {
    std::ifstream in(p);
    std::cout << in.rdbuf();
}

etw_server* g_server = nullptr;

extern "C" void on_signal(int) {
    if (g_server) etw_server_request_stop(g_server);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Wrist-worn electro-tactile haptics toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(etw_version()));

    // shared flags; each can also come from an ETW_* environment variable
    std::uint64_t seed = 1;
    std::string policy = "electro";
    std::string visual_size;
    std::string opacity;
    std::string perceiver_path;
    std::string out_dir = ".";
    int port = 7878;

    auto add_seed = [&](CLI::App* c) { c->add_option("--seed", seed, "Random seed")->envname("ETW_SEED"); };
    auto add_policy = [&](CLI::App* c) {
        c->add_option("--policy", policy, "Feedback device")
            ->envname("ETW_POLICY")
            ->check(CLI::IsMember({"electro", "vibro"}));
    };
    auto add_perceiver = [&](CLI::App* c) {
        c->add_option("--perceiver", perceiver_path, "Perceiver configuration (JSON)")
            ->envname("ETW_PERCEIVER")
            ->check(CLI::ExistingFile);
    };
    auto add_out = [&](CLI::App* c, const char* what) {
        c->add_option("--out", out_dir, what)->envname("ETW_OUT");
    };

    // waveform
    auto* wf = app.add_subcommand("waveform", "Render balanced and monophasic stimuli to CSV/SVG");
    double amp = 1.0, width = 5.0, priming = 40.0, rate = 10000.0;
    bool monophasic = false, anodic = false;
    wf->add_option("--amp", amp, "Stimulation amplitude, mA");
    wf->add_option("--width", width, "Stimulation phase width, ms");
    wf->add_option("--priming", priming, "Priming phase width, ms");
    wf->add_option("--rate", rate, "Sample rate, Hz");
    wf->add_flag("--monophasic", monophasic, "Report the monophasic pulse as the primary waveform");
    wf->add_flag("--anodic", anodic, "Anodic stimulation phase");
    add_out(wf, "Output directory");

    // run
    auto* run = app.add_subcommand("run", "Run the study protocols against simulated participants");
    std::string study = "all";
    int participants = 12;
    std::string cal_mode = "study1";
    int inject_lockout = -1;
    run->add_option("--study", study, "study1 | study2 | all")->check(CLI::IsMember({"study1", "study2", "all"}));
    run->add_option("--participants", participants, "Simulated participants")->check(CLI::PositiveNumber);
    run->add_option("--calibration-mode", cal_mode, "study1 | study3")->check(CLI::IsMember({"study1", "study3"}));
    run->add_option("--inject-lockout", inject_lockout, "Inject an over-current on this trial (testing)")->group("");
    add_seed(run);
    run->get_option("--seed")->required();
    add_policy(run);
    add_perceiver(run);
    add_out(run, "Directory for the trial logs");

    // analyze
    auto* an = app.add_subcommand("analyze", "Rates, heatmaps and statistics from trial logs");
    std::vector<std::string> logs;
    bool gg = false, welch = false;
    an->add_option("logs", logs, "study1 and/or study2 log")->required()->expected(1, 2)->check(CLI::ExistingFile);
    an->add_flag("--greenhouse-geisser", gg, "Report Greenhouse-Geisser corrected p-values");
    an->add_flag("--welch", welch, "Welch unpaired t-tests instead of pooled variance");
    add_out(an, "Report directory");

    // serve
    auto* sv = app.add_subcommand("serve", "Console backend: JSON lines over TCP on 127.0.0.1");
    sv->add_option("--port", port, "TCP port (0 = any free port)")->envname("ETW_PORT")->check(CLI::Range(0, 65535));
    add_seed(sv);
    add_policy(sv);
    add_out(sv, "Directory for the session trial logs written on shutdown");

    // interact
    auto* ia = app.add_subcommand("interact", "Replay a hand-pose stream against a scene with haptic feedback");
    std::string scene, poses;
    bool no_visual = false;
    ia->add_option("--scene", scene, "Scene JSON")->required()->check(CLI::ExistingFile);
    ia->add_option("--poses", poses, "Pose stream (JSON lines)")->required()->check(CLI::ExistingFile);
    ia->add_option("--visual-size", visual_size, "Visual feedback size")
        ->envname("ETW_VISUAL_SIZE")
        ->check(CLI::IsMember({"fingertip", "finger", "fingertip-to-wrist"}));
    ia->add_option("--opacity", opacity, "Visual feedback opacity")
        ->envname("ETW_OPACITY")
        ->check(CLI::IsMember({"full", "half"}));
    ia->add_flag("--no-visual", no_visual, "No visual feedback");
    add_seed(ia);
    add_policy(ia);
    add_perceiver(ia);
    add_out(ia, "Output directory");

    // handmap
    auto* hm = app.add_subcommand("handmap", "Hand map utilities");
    hm->require_subcommand(1);
    auto* hx = hm->add_subcommand("export", "Write the hand map raster and an SVG drawing");
    std::string map_path;
    hx->add_option("--map", map_path, "Hand map to load instead of the bundled one")->check(CLI::ExistingFile);
    add_out(hx, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitError;
    }

    try {
        if (wf->parsed()) {
            fs::create_directories(out_dir);
            Waveform bal, mono;
            check(etw_waveform_balanced(amp, width, priming, rate, anodic ? 1 : 0, bal.out()));
            check(etw_waveform_monophasic(amp, width, rate, mono.out()));
            const auto dir = fs::path(out_dir);
            check(etw_waveform_write_csv(bal.get(), (dir / "balanced.csv").c_str()));
            check(etw_waveform_write_csv(mono.get(), (dir / "monophasic.csv").c_str()));
            check(etw_waveform_write_csv(monophasic ? mono.get() : bal.get(), (dir / "waveform.csv").c_str()));
            const etw_waveform* both[] = {bal.get(), mono.get()};
            const char* labels[] = {"charge-balanced", "monophasic"};
            check(etw_waveform_write_svg(both, labels, 2, "stimulus waveforms", (dir / "waveform.svg").c_str()));
            double qb = 0, qm = 0;
            check(etw_waveform_net_charge(bal.get(), &qb));
            check(etw_waveform_net_charge(mono.get(), &qm));
            std::printf("net charge (%s): %g uC\n", monophasic ? "monophasic" : "balanced", monophasic ? qm : qb);
            std::printf("balanced %g uC, monophasic %g uC -> %s\n", qb, qm, dir.string().c_str());
            return 0;
        }

        if (hx->parsed()) {
            Map map;
            check(etw_handmap_load(opt(map_path), map.out()));
            const auto dir = fs::path(out_dir);
            fs::create_directories(dir);
            check(etw_handmap_write(map.get(), (dir / "handmap_v1.txt").c_str()));
            check(etw_handmap_write_svg(map.get(), (dir / "handmap.svg").c_str()));
            std::printf("hand map %dx%d -> %s\n", etw_handmap_width(map.get()), etw_handmap_height(map.get()),
                        dir.string().c_str());
            return 0;
        }

        Map map;
        check(etw_handmap_load(nullptr, map.out()));

        if (run->parsed()) {
            StudyConfig cfg;
            check(etw_study_config_create(cfg.out()));
            check(etw_study_config_set_seed(cfg.get(), seed));
            check(etw_study_config_set_participants(cfg.get(), participants));
            check(etw_study_config_set_policy(cfg.get(), policy.c_str()));
            check(etw_study_config_set_calibration_mode(cfg.get(), cal_mode.c_str()));
            check(etw_study_config_set_inject_lockout(cfg.get(), inject_lockout));
            if (!perceiver_path.empty()) {
                PerceiverH p;
                check(etw_perceiver_load(perceiver_path.c_str(), map.get(), p.out()));
                check(etw_study_config_set_perceiver(cfg.get(), p.get()));
            }
            etw_run_result res{};
            const auto s = etw_run(cfg.get(), map.get(), study.c_str(), out_dir.c_str(), &res);
            std::printf("study1: %zu trials, study2: %zu trials -> %s%s\n", res.study1_trials, res.study2_trials,
                        out_dir.c_str(), res.aborted ? " (aborted)" : "");
            check(s);
            return 0;
        }

        if (an->parsed()) {
            const char* a = logs[0].c_str();
            const char* b = logs.size() > 1 ? logs[1].c_str() : nullptr;
            check(etw_analyze(map.get(), a, b, out_dir.c_str(), gg ? 1 : 0, welch ? 1 : 0, nullptr));
            const auto dir = fs::path(out_dir);
            for (const char* table : {"channels.csv", "conditions.csv", "anova.csv", "ttests.csv"})
                if (fs::exists(dir / table)) {
                    std::cout << "== " << table << "\n";
                    print_file(dir / table);
                }
            std::cout << "report -> " << dir.string() << "\n";
            return 0;
        }

        if (ia->parsed()) {
            if (no_visual && (!visual_size.empty() || !opacity.empty())) {
                std::fprintf(stderr, "etw: --no-visual excludes --visual-size/--opacity\n");
                return kExitError;
            }
            if (!no_visual) {
                if (visual_size.empty()) visual_size = "finger";
                if (opacity.empty()) opacity = "full";
            }
            PerceiverH p;
            check(etw_perceiver_load(opt(perceiver_path), map.get(), p.out()));
            const auto path = fs::path(out_dir) / "actions.jsonl";
            std::size_t n = 0;
            check(etw_interact(map.get(), p.get(), scene.c_str(), poses.c_str(), policy.c_str(),
                               no_visual ? nullptr : visual_size.c_str(), no_visual ? nullptr : opacity.c_str(), seed,
                               path.c_str(), &n));
            std::printf("%zu actions -> %s\n", n, path.string().c_str());
            return 0;
        }

        if (sv->parsed()) {
            Server server;
            check(etw_server_create(port, seed, policy.c_str(), server.out()));
            g_server = server.get();
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::printf("listening on 127.0.0.1:%d\n", etw_server_port(server.get()));
            std::fflush(stdout);
            const auto s = etw_server_run(server.get());
            g_server = nullptr;
            check(s);
            check(etw_server_write_logs(server.get(), out_dir.c_str()));
            std::printf("device stopped and disarmed\n");
            return 0;
        }
    } catch (const Failure& f) {
        return report(f);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "etw: error: %s\n", e.what());
        return kExitError;
    }
    return 0;
}
