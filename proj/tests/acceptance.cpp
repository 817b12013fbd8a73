// Acceptance suite: one PASS/FAIL line per primary criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "etw/analysis.hpp"
#include "etw/calibration.hpp"
#include "etw/device.hpp"
#include "etw/interact.hpp"
#include "etw/perceiver.hpp"
#include "etw/protocol.hpp"
#include "etw/relay.hpp"
#include "etw/report.hpp"
#include "etw/rng.hpp"
#include "etw/safety.hpp"
#include "etw/stim.hpp"
#include "etw/study.hpp"
#include "support/generators.hpp"

using namespace etw;
using nlohmann::json;

namespace {

struct Failed {
    std::string what;
};

void expect(bool ok, const std::string& what) {
    if (!ok) throw Failed{what};
}

std::string fmt(double v) {
    std::ostringstream ss;
    ss << v;
    return ss.str();
}

int failures = 0;

// Runs one criterion; `limit_s` <= 0 means no runtime bound.
void criterion(const char* name, double limit_s, const std::function<std::string()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = true;
    try {
        detail = body();
    } catch (const Failed& f) {
        ok = false;
        detail = f.what;
    } catch (const std::exception& e) {
        ok = false;
        detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (ok && limit_s > 0 && secs >= limit_s) {
        ok = false;
        detail += "; runtime " + fmt(secs) + " s over " + fmt(limit_s) + " s";
    }
    if (!ok) ++failures;
    std::printf("%s  %-28s %7.3f s  %s\n", ok ? "PASS" : "FAIL", name, secs, detail.c_str());
    std::fflush(stdout);
}

std::string charge_balance() {
    using namespace stim;
    Rng rng(101);
    for (int i = 0; i < 1000; ++i) {
        const double amp = rng.uniform(0.1, 4.0);
        const double rate = kSampleRateQuantumHz * static_cast<double>(rng.uniform_int(5, 250));
        const auto pol = rng.uniform() < 0.5 ? Polarity::Cathodic : Polarity::Anodic;
        const auto w = synth_stimulus(PulseSpec::balanced(amp, pol), rate);
        expect(net_charge(w) == 0.0, "spec " + std::to_string(i) + ": net charge " + fmt(net_charge(w)));
    }
    const double q = net_charge(synth_monophasic(1.0, 5.0));
    expect(q == -5.0, "monophasic 1 mA/5 ms gives " + fmt(q) + " uC");
    return "1000 balanced specs net 0; monophasic -5 uC";
}

std::string waveform_geometry() {
    using namespace stim;
    const auto def = PulseSpec::balanced(1.0);
    expect(def.total_duration() == 45.0, "default duration " + fmt(def.total_duration()));
    Rng rng(102);
    for (int i = 0; i < 100; ++i) {
        const double amp = rng.uniform(0.1, 4.0);
        const double rate = kSampleRateQuantumHz * static_cast<double>(rng.uniform_int(5, 250));
        const auto spec = PulseSpec::balanced(amp, rng.uniform() < 0.5 ? Polarity::Cathodic : Polarity::Anodic);
        const auto w = synth_stimulus(spec, rate);
        const auto s = w.samples();
        const auto n_prime = samples_for(spec.priming_width(), rate);
        const std::string tag = "spec " + std::to_string(i) + ": ";
        expect(w.duration_ms() == 45.0, tag + "duration " + fmt(w.duration_ms()));
        expect(n_prime + samples_for(spec.stim_width(), rate) == s.size(), tag + "phase sample counts");
        const double stim_amp = s.back();
        for (std::size_t k = 0; k < s.size(); ++k) {
            const double expected = k < n_prime ? -stim_amp / 8.0 : stim_amp;
            expect(s[k] == expected, tag + "sample " + std::to_string(k) + " = " + fmt(s[k]));
        }
        expect(std::abs(stim_amp) == amp, tag + "stimulation amplitude");
    }
    return "45 ms, priming first at exactly 1/8 over 100 specs";
}

std::string switching_safety() {
    using namespace relay;
    int routes = 0;
    for (int ch = 1; ch <= kChannelCount; ++ch)
        for (auto ph : {Phase::Priming, Phase::Stim}) {
            expect(validate(route(ElectrodeId::channel(ch), ph)).ok(), "route ch" + std::to_string(ch));
            ++routes;
        }
    Rng rng(103);
    int invalid = 0;
    for (int i = 0; i < 10000; ++i) {
        const int ch = static_cast<int>(rng.uniform_int(1, kChannelCount));
        auto f = route(ElectrodeId::channel(ch), rng.uniform() < 0.5 ? Phase::Priming : Phase::Stim);
        // force both rails closed on some node
        const int node = static_cast<int>(rng.uniform_int(0, kNodeCount - 1));
        f = close_relay(close_relay(f, node, Rail::High), node, Rail::Low);
        expect(!validate(f).ok(), "double-rail frame on node " + std::to_string(node) + " accepted");
        ++invalid;
    }
    std::vector<RoutingState> states{RoutingState::idle()};
    for (int ch = 1; ch <= kChannelCount; ++ch)
        for (auto ph : {Phase::Priming, Phase::Stim}) states.push_back({ElectrodeId::channel(ch), ph});
    int sequences = 0;
    for (const auto& a : states)
        for (const auto& b : states) {
            const auto seq = transition(a, b);
            expect(break_before_make(frame_for(a), seq), "transition not break-before-make");
            for (const auto& f : seq) expect(validate(f).ok(), "invalid intermediate frame");
            ++sequences;
        }
    return std::to_string(routes) + " routes ok, " + std::to_string(invalid) + " double-rail frames caught, " +
           std::to_string(sequences) + " transitions break-before-make";
}

std::string safety_interlock() {
    using namespace safety;
    const SafetyLimits limits;
    expect(check_command(4.1, limits).kind == CommandCheck::Kind::OverSoftwareLimit, "4.1 mA accepted by check");

    device::Device dev;
    dev.handle(proto::Arm{});
    const auto reply = dev.handle(proto::SetIntensity{4100});
    const auto* nak = std::get_if<proto::Nak>(&reply);
    expect(nak && nak->reason == proto::NakReason::OverLimit, "device accepted SET_INTENSITY 4100 uA");

    Interlock il(limits);
    il.arm();
    expect(il.observe({72.0, 5.0, 0.0}) == SafetyState::lockout(), "5 mA measurement did not lock out");
    Rng rng(105);
    for (int i = 0; i < 10000; ++i) {
        const LoadMeasurement m{rng.uniform(0.0, 80.0), rng.uniform(0.0, 6.0), 1.0 + i};
        expect(il.observe(m) == SafetyState::lockout(), "left Lockout at measurement " + std::to_string(i));
        if (i % 1000 == 0) expect(!il.arm() && !il.begin_stimulation(), "re-armed from Lockout");
    }
    return "4.1 mA rejected; 5 mA -> Lockout; absorbing over 10000 measurements";
}

std::string calibration() {
    // oracle: first 0.1 mA multiple at or above the threshold, counted in whole steps
    auto oracle = [](double threshold, CalibrationMode mode) {
        int steps = 0;
        for (int ua = 100;; ua += 100) {
            ++steps;
            if (ua / 1000.0 >= threshold - 1e-12) {
                const int result = mode == CalibrationMode::Study3 ? std::min(ua + 100, 4000) : ua;
                return std::pair{result / 1000.0, steps};
            }
        }
    };
    const Perceiver p(PerceiverConfig::defaults(), HandMap::standard());
    std::ostringstream out;
    const std::pair<Finger, int> fingers[] = {{Finger::Thumb, 5}, {Finger::Index, 8}};
    for (auto mode : {CalibrationMode::Study1, CalibrationMode::Study3}) {
        out << (mode == CalibrationMode::Study1 ? "study1 {" : " study3 {");
        for (const auto& [finger, ch] : fingers) {
            device::Device dev;
            dev.handle(proto::Arm{});
            const auto r = run_calibration(
                finger, {ch}, [&](int c, double ma) { return p.perceive(c, ma, std::nullopt, 1).has_value(); }, mode,
                &dev);
            const auto [want, want_steps] = oracle(p.threshold(ch), mode);
            expect(r.intensity_ma == want, "ch" + std::to_string(ch) + " calibrated to " + fmt(r.intensity_ma) +
                                               " mA, expected " + fmt(want));
            expect(r.steps == want_steps && r.steps <= 40, "ch" + std::to_string(ch) + " took " +
                                                                std::to_string(r.steps) + " steps");
            out << (ch == 5 ? "" : ", ") << r.intensity_ma;
        }
        out << "}";
    }
    return out.str() + " mA";
}

std::string protocol_counts() {
    StudyConfig cfg;
    cfg.seed = 107;
    cfg.participants = 2;
    const auto a = run_full_pipeline(cfg, HandMap::standard());
    expect(!a.aborted, "aborted: " + a.abort_reason);
    const auto& map = HandMap::standard();
    for (int p = 0; p < cfg.participants; ++p) {
        const auto id = participant_id(p);
        std::map<int, int> per_channel;
        std::map<std::string, int> cells;
        for (const auto& r : a.study1)
            if (r.participant == id) ++per_channel[r.condition.channel];
        for (const auto& r : a.study2)
            if (r.participant == id) {
                const auto v = r.condition.visual();
                expect(v.has_value(), "study2 trial without a visual");
                ++cells[std::to_string(static_cast<int>(v->size)) + std::to_string(static_cast<int>(v->opacity)) +
                        std::to_string(static_cast<int>(v->target))];
            }
        int n1 = 0;
        for (const auto& [ch, n] : per_channel) n1 += n;
        expect(n1 == 22, id + ": " + std::to_string(n1) + " study1 trials");
        expect(per_channel.size() == 11 && per_channel.begin()->first == 5, id + ": study1 channels");
        for (const auto& [ch, n] : per_channel) expect(n == 2, id + ": ch" + std::to_string(ch) + " repeated");
        int n2 = 0;
        for (const auto& [c, n] : cells) {
            expect(n == 2, id + ": study2 cell repeated " + std::to_string(n));
            n2 += n;
        }
        expect(n2 == 24 && cells.size() == 12, id + ": " + std::to_string(n2) + " study2 trials");
    }
    auto log_of = [&](StudyKind k, const std::vector<TrialRecord>& rs) {
        std::ostringstream ss;
        write_trial_log(ss, k, rs, map);
        return ss.str();
    };
    const auto b = run_full_pipeline(cfg, map);
    expect(log_of(StudyKind::Study1, a.study1) == log_of(StudyKind::Study1, b.study1), "study1 logs differ");
    expect(log_of(StudyKind::Study2, a.study2) == log_of(StudyKind::Study2, b.study2), "study2 logs differ");
    return "22 + 24 trials per participant; identical seeds give byte-identical logs";
}

std::string synchrony() {
    std::ifstream scene_in(ETW_DATA_DIR "/scene_demo.json");
    std::ifstream poses_in(ETW_DATA_DIR "/poses_demo.jsonl");
    expect(scene_in.good() && poses_in.good(), "demo scene or poses missing");
    const auto scene = read_scene(scene_in);
    const auto poses = read_pose_stream(poses_in);
    RenderConfig cfg;
    cfg.visual = VisualEffect{VisualSize::Finger, Opacity::Full, Finger::Index};
    const Perceiver p(PerceiverConfig::defaults(), HandMap::standard());
    device::Device dev;
    const auto run = run_interaction(scene, poses, cfg, p, dev, 108);
    expect(!run.actions.empty(), "no actions");
    double worst = 0.0;
    for (const auto& a : run.actions) {
        expect(a.action.visual.has_value(), "action without a visual");
        expect(a.action.visual->start_ms == a.action.scheduled_ms, "visual start differs from stimulus schedule");
        expect(a.emitted_ms == a.action.scheduled_ms, "emitted off schedule");
        const double lag = a.emitted_ms - a.action.event.timestamp_ms;
        expect(lag >= 0.0 && lag <= 10.0, "lag " + fmt(lag) + " ms");
        worst = std::max(worst, lag);
    }
    return std::to_string(run.actions.size()) + " event pairs in sync; max lag " + fmt(worst) + " ms";
}

std::string stats_oracles() {
    using namespace analysis;
    std::ifstream in(ETW_GOLDEN_DIR "/stats_oracle.json");
    expect(in.good(), "oracle fixtures missing");
    const auto j = json::parse(in);
    auto close = [](double a, double b, double tol) { return std::abs(a - b) <= tol; };
    auto rel = [](double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); };
    int checked = 0;
    double worst_closure = 0.0;
    for (const auto& c : j.at("rm_anova")) {
        const auto name = c.at("name").get<std::string>();
        const auto r = rm_anova_2way(c.at("data").get<std::vector<std::vector<std::vector<double>>>>());
        const std::pair<const char*, const FTest*> effects[] = {{"A", &r.a}, {"B", &r.b}, {"AB", &r.ab}};
        for (const auto& [key, f] : effects) {
            const auto& e = c.at("effects").at(key);
            expect(rel(f->F, e.at("F"), 1e-6) && close(f->p, e.at("p"), 1e-6) &&
                       close(f->partial_eta2, e.at("np2"), 1e-6),
                   name + " " + key + ": F/p/eta2");
        }
        for (const auto& [key, m] : {std::pair{"A", &r.mauchly_a}, std::pair{"AB", &r.mauchly_ab}}) {
            const auto& e = c.at("mauchly").at(key);
            expect(close(m->W, e.at("W"), 1e-6) && close(m->p, e.at("p"), 1e-6), name + " Mauchly " + key);
        }
        for (std::size_t k = 0; k < r.pairwise_a.size(); ++k)
            expect(close(r.pairwise_a[k].p_bonferroni, c.at("pairwise_A").at(k).at("p_bonferroni"), 1e-6),
                   name + " Bonferroni");
        const double closure = std::abs(r.ss_components() - r.ss_total) / r.ss_total;
        expect(closure <= 1e-9, name + " SS closure " + fmt(closure));
        worst_closure = std::max(worst_closure, closure);
        ++checked;
    }
    for (const auto& c : j.at("unpaired_t")) {
        for (auto [key, v] : {std::pair{"pooled", Variance::Pooled}, std::pair{"welch", Variance::Welch}}) {
            const auto r = unpaired_t(c.at("x").get<std::vector<double>>(), c.at("y").get<std::vector<double>>(), v);
            expect(rel(r.t, c.at(key).at("t"), 1e-6) && close(r.p, c.at(key).at("p"), 1e-6),
                   c.at("name").get<std::string>() + " " + key + " t");
        }
        ++checked;
    }
    for (const auto& c : j.at("wilcoxon")) {
        const auto r =
            wilcoxon_signed_rank(c.at("x").get<std::vector<double>>(), c.at("y").get<std::vector<double>>());
        expect(close(r.z, c.at("Z"), 1e-6) && close(r.p, c.at("p"), 1e-6),
               c.at("name").get<std::string>() + " Wilcoxon");
        ++checked;
    }
    return std::to_string(checked) + " fixtures within 1e-6; worst SS closure " + fmt(worst_closure);
}

std::string directional() {
    StudyConfig cfg;
    cfg.seed = 1;
    cfg.participants = 12;
    const auto& map = HandMap::standard();
    const auto run = run_full_pipeline(cfg, map);
    expect(!run.aborted, "aborted: " + run.abort_reason);
    const auto r = report::analyze(TrialLog{StudyKind::Study1, run.study1}, TrialLog{StudyKind::Study2, run.study2},
                                   map);
    auto row = [&](VisualSize s, Opacity o) -> const report::ConditionRow& {
        for (const auto& c : r.conditions)
            if (c.size == s && c.opacity == o) return c;
        throw Failed{"missing condition row"};
    };
    std::ostringstream out;
    for (const auto& f : r.fingers) {
        expect(f.baseline.has_value(), "no baseline");
        auto pick = [&](const report::ConditionRow& c) { return f.finger == Finger::Thumb ? c.thumb : c.index; };
        const double full_finger = pick(row(VisualSize::Finger, Opacity::Full)).mean;
        const double base = f.baseline->mean;
        const std::string fname = f.finger == Finger::Thumb ? "thumb" : "index";
        expect(full_finger > base, fname + ": finger/full " + fmt(full_finger) + " <= no-visual " + fmt(base));
        for (auto other : {VisualSize::Fingertip, VisualSize::FingertipToWrist})
            for (auto o : {Opacity::Full, Opacity::Half}) {
                const double v = pick(row(other, o)).mean;
                expect(full_finger > v, fname + ": finger/full " + fmt(full_finger) + " <= " + fmt(v));
            }
        out << fname << " " << std::lround(base * 10) / 10.0 << " -> " << std::lround(full_finger * 10) / 10.0
            << "%  ";
    }
    return out.str() + "(12 participants)";
}

std::string codec() {
    Rng rng(110);
    for (int i = 0; i < 10000; ++i) {
        const auto c = testing::random_command(rng);
        expect(proto::decode(proto::encode(c)) == c, "round trip " + std::to_string(i));
    }
    std::vector<proto::Command> sent;
    std::vector<std::uint8_t> stream;
    for (int i = 0; i < 100; ++i) {
        sent.push_back(testing::random_command(rng));
        const auto f = proto::encode(sent.back());
        stream.insert(stream.end(), f.begin(), f.end());
    }
    auto commands = [](const std::vector<proto::DecodeResult>& rs, std::vector<proto::Command>& out) {
        for (const auto& r : rs)
            if (const auto* c = std::get_if<proto::Command>(&r)) out.push_back(*c);
    };
    for (std::size_t cut = 0; cut <= stream.size(); ++cut) {
        proto::StreamDecoder d;
        std::vector<proto::Command> got;
        d.feed(std::span(stream).first(cut));
        commands(d.drain(), got);
        d.feed(std::span(stream).subspan(cut));
        commands(d.drain(), got);
        expect(got == sent, "split at byte " + std::to_string(cut));
    }
    return "10000 round trips; " + std::to_string(stream.size() + 1) + " split points of a 100-command stream";
}

}  // namespace

int main() {
    criterion("charge-balance", 1.0, charge_balance);
    criterion("waveform-geometry", 0, waveform_geometry);
    criterion("switching-safety", 1.0, switching_safety);
    criterion("safety-interlock", 0, safety_interlock);
    criterion("calibration", 0, calibration);
    criterion("protocol-counts", 0, protocol_counts);
    criterion("visuotactile-synchrony", 0, synchrony);
    criterion("statistics-oracles", 0, stats_oracles);
    criterion("directional-reproduction", 30.0, directional);
    criterion("protocol-codec", 0, codec);
    std::printf("%d/10 criteria passed\n", 10 - failures);
    return failures == 0 ? 0 : 1;
}
