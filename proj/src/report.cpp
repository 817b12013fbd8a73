#include "etw/report.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "etw/error.hpp"

namespace etw::report {

using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

bool usable(const TrialRecord& r) { return r.status == TrialStatus::Ok && r.report.has_value(); }

RateSummary summarize(const std::vector<const TrialRecord*>& recs, Region region, const HandMap& map) {
    RateSummary s;
    std::vector<double> rates;
    std::vector<SensationReport> reports;
    for (const auto* r : recs) {
        rates.push_back(analysis::in_region_rate(r->report->area, region, map));
        reports.push_back(*r->report);
    }
    s.n = static_cast<int>(rates.size());
    if (rates.empty()) return s;
    s.mean = analysis::mean(rates);
    s.sd = rates.size() > 1 ? analysis::sample_sd(rates) : 0.0;
    s.strongest_rate = analysis::strongest_point_rate(reports, region, map);
    return s;
}

std::string heatmap_name(const std::string& prefix, Finger f, VisualSize s, Opacity o) {
    return prefix + "-" + finger_name(f) + "-" + visual_size_name(s) + "-" + opacity_name(o);
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

ojson rate_json(const RateSummary& s) {
    return {{"n", s.n}, {"mean", s.mean}, {"sd", s.sd}, {"strongest_rate", s.strongest_rate}};
}

ojson ftest_json(const analysis::FTest& f) {
    return {{"ss", f.ss},       {"ss_error", f.ss_error}, {"df1", f.df1},
            {"df2", f.df2},     {"F", f.F},               {"p", f.p},
            {"partial_eta2", f.partial_eta2}, {"gg_epsilon", f.gg_epsilon}, {"p_gg", f.p_gg}};
}

ojson mauchly_json(const analysis::Mauchly& m) {
    return {{"W", m.W}, {"chi2", m.chi2}, {"df", m.df}, {"p", m.p}};
}

void collect_study1(Report& rep, const TrialLog& log, const HandMap& map) {
    std::map<int, std::vector<const TrialRecord*>> by_channel;
    std::map<int, int> trials;
    for (const auto& r : log.records) {
        ++trials[r.condition.channel];
        if (usable(r)) by_channel[r.condition.channel].push_back(&r);
    }
    for (const auto& [ch, n] : trials) {
        ChannelRow row;
        row.channel = ch;
        row.trials = n;
        const auto& recs = by_channel[ch];
        row.reports = static_cast<int>(recs.size());
        if (!recs.empty()) {
            double i = 0.0, s = 0.0;
            for (const auto* r : recs) {
                i += r->condition.intensity_ma;
                s += r->calibration_steps;
            }
            row.mean_intensity_ma = i / recs.size();
            row.mean_steps = s / recs.size();
            row.thumb = summarize(recs, Region::Thumb, map);
            row.index = summarize(recs, Region::Index, map);
            std::vector<SensationReport> reports;
            for (const auto* r : recs) reports.push_back(*r->report);
            char name[32];
            std::snprintf(name, sizeof name, "study1-ch%02d", ch);
            rep.heatmaps.push_back({name, analysis::aggregate_heatmap(reports)});
        }
        rep.channels.push_back(row);
    }
}

void collect_study2(Report& rep, const TrialLog& log, const std::optional<TrialLog>& study1, const HandMap& map) {
    using Key = std::tuple<Finger, VisualSize, Opacity>;
    std::map<Key, std::vector<const TrialRecord*>> cells;
    std::set<std::string> participants;
    for (const auto& r : log.records) {
        participants.insert(r.participant);
        if (usable(r)) cells[{*r.condition.target, *r.condition.size, *r.condition.opacity}].push_back(&r);
    }

    for (auto size : kVisualSizes)
        for (auto op : kOpacities) {
            ConditionRow row;
            row.size = size;
            row.opacity = op;
            row.thumb = summarize(cells[{Finger::Thumb, size, op}], Region::Thumb, map);
            row.index = summarize(cells[{Finger::Index, size, op}], Region::Index, map);
            rep.conditions.push_back(row);
            for (Finger f : {Finger::Thumb, Finger::Index}) {
                const auto& recs = cells[{f, size, op}];
                if (recs.empty()) continue;
                std::vector<SensationReport> reports;
                for (const auto* r : recs) reports.push_back(*r->report);
                rep.heatmaps.push_back({heatmap_name("study2", f, size, op), analysis::aggregate_heatmap(reports)});
            }
        }

    for (Finger f : {Finger::Thumb, Finger::Index}) {
        FingerStats fs;
        fs.finger = f;
        const Region region = region_of(f);

        // data[participant][size][opacity], averaged over repetitions
        std::vector<std::vector<std::vector<double>>> data;
        for (const auto& p : participants) {
            std::vector<std::vector<double>> grid(3, std::vector<double>(2, 0.0));
            bool complete = true;
            for (int a = 0; a < 3 && complete; ++a)
                for (int b = 0; b < 2 && complete; ++b) {
                    std::vector<double> v;
                    for (const auto* r : cells[{f, kVisualSizes[a], kOpacities[b]}])
                        if (r->participant == p) v.push_back(analysis::in_region_rate(r->report->area, region, map));
                    if (v.empty()) complete = false;
                    else grid[a][b] = analysis::mean(v);
                }
            if (complete) data.push_back(grid);
        }
        if (data.size() < 2) {
            fs.anova_note = "fewer than 2 participants with every condition";
        } else {
            try {
                fs.anova = analysis::rm_anova_2way(data, {rep.options.greenhouse_geisser});
            } catch (const Error& e) {
                fs.anova_note = e.what();
            }
        }

        if (study1) {
            // channel each participant used for this finger in study2
            std::map<std::string, int> chosen;
            for (const auto& r : log.records)
                if (r.condition.target == f && r.status != TrialStatus::CalibrationFailed)
                    chosen.emplace(r.participant, r.condition.channel);
            std::vector<const TrialRecord*> base;
            for (const auto& r : study1->records) {
                const auto it = chosen.find(r.participant);
                if (usable(r) && it != chosen.end() && it->second == r.condition.channel) base.push_back(&r);
            }
            if (!base.empty()) {
                fs.baseline = summarize(base, region, map);
                std::vector<double> bx;
                for (const auto* r : base) bx.push_back(analysis::in_region_rate(r->report->area, region, map));
                for (auto size : kVisualSizes)
                    for (auto op : kOpacities) {
                        std::vector<double> cx;
                        for (const auto* r : cells[{f, size, op}])
                            cx.push_back(analysis::in_region_rate(r->report->area, region, map));
                        try {
                            fs.vs_baseline.push_back({size, op, analysis::unpaired_t(cx, bx, rep.options.variance)});
                        } catch (const Error&) {
                        }
                    }
            }
        }
        rep.fingers.push_back(std::move(fs));
    }
}

}  // namespace

Report analyze(const std::optional<TrialLog>& study1, const std::optional<TrialLog>& study2, const HandMap& map,
               const ReportOptions& options) {
    if (!study1 && !study2) fail(ErrorCode::Argument, "nothing to analyze");
    if (study1 && study1->study != StudyKind::Study1) fail(ErrorCode::Argument, "first log is not a study1 log");
    if (study2 && study2->study != StudyKind::Study2) fail(ErrorCode::Argument, "second log is not a study2 log");

    Report rep;
    rep.options = options;
    std::set<std::string> participants;
    int usable_reports = 0;
    for (const auto* log : {study1 ? &*study1 : nullptr, study2 ? &*study2 : nullptr}) {
        if (!log) continue;
        for (const auto& r : log->records) {
            participants.insert(r.participant);
            ++rep.trials;
            if (r.status == TrialStatus::Aborted) ++rep.aborted;
            if (r.status == TrialStatus::CalibrationFailed) ++rep.calibration_failed;
            if (usable(r)) ++usable_reports;
        }
    }
    if (usable_reports == 0) fail(ErrorCode::Argument, "no usable sensation reports in the log");
    rep.participants = static_cast<int>(participants.size());

    if (study1) collect_study1(rep, *study1, map);
    if (study2) collect_study2(rep, *study2, study1, map);
    return rep;
}

std::string Report::to_json() const {
    ojson j;
    j["participants"] = participants;
    j["trials"] = trials;
    j["aborted"] = aborted;
    j["calibration_failed"] = calibration_failed;
    j["greenhouse_geisser"] = options.greenhouse_geisser;
    j["variance"] = options.variance == analysis::Variance::Pooled ? "pooled" : "welch";

    j["channels"] = ojson::array();
    for (const auto& c : channels)
        j["channels"].push_back({{"channel", c.channel},
                                 {"trials", c.trials},
                                 {"reports", c.reports},
                                 {"mean_intensity_ma", c.mean_intensity_ma},
                                 {"mean_steps", c.mean_steps},
                                 {"thumb", rate_json(c.thumb)},
                                 {"index", rate_json(c.index)}});

    j["conditions"] = ojson::array();
    for (const auto& c : conditions)
        j["conditions"].push_back({{"size", visual_size_name(c.size)},
                                   {"opacity", opacity_name(c.opacity)},
                                   {"thumb", rate_json(c.thumb)},
                                   {"index", rate_json(c.index)}});

    j["fingers"] = ojson::array();
    for (const auto& f : fingers) {
        ojson fj;
        fj["finger"] = finger_name(f.finger);
        if (f.anova) {
            const auto& a = *f.anova;
            ojson pw = ojson::array();
            for (const auto& p : a.pairwise_a)
                pw.push_back({{"a", visual_size_name(kVisualSizes[p.i])},
                              {"b", visual_size_name(kVisualSizes[p.j])},
                              {"mean_diff", p.mean_diff},
                              {"t", p.t},
                              {"df", p.df},
                              {"p", p.p},
                              {"p_bonferroni", p.p_bonferroni}});
            fj["anova"] = {{"subjects", a.subjects},
                           {"size", ftest_json(a.a)},
                           {"opacity", ftest_json(a.b)},
                           {"interaction", ftest_json(a.ab)},
                           {"mauchly_size", mauchly_json(a.mauchly_a)},
                           {"ss_total", a.ss_total},
                           {"pairwise_size", pw}};
        } else {
            fj["anova"] = nullptr;
            fj["anova_note"] = f.anova_note;
        }
        fj["baseline"] = f.baseline ? rate_json(*f.baseline) : ojson(nullptr);
        fj["vs_baseline"] = ojson::array();
        for (const auto& t : f.vs_baseline)
            fj["vs_baseline"].push_back({{"size", visual_size_name(t.size)},
                                         {"opacity", opacity_name(t.opacity)},
                                         {"t", t.test.t},
                                         {"df", t.test.df},
                                         {"p", t.test.p}});
        j["fingers"].push_back(fj);
    }

    j["heatmaps"] = ojson::array();
    for (const auto& h : heatmaps)
        j["heatmaps"].push_back({{"name", h.name},
                                 {"reports", h.heatmap.reports},
                                 {"max_count", h.heatmap.max_count()},
                                 {"mean_strongest", {h.heatmap.mean_strongest.x, h.heatmap.mean_strongest.y}}});
    return j.dump(2) + "\n";
}

std::string channels_csv(const Report& r) {
    std::ostringstream o;
    o << "channel,trials,reports,mean_intensity_ma,mean_steps,thumb_rate,thumb_sd,thumb_strongest,index_rate,"
         "index_sd,index_strongest\n";
    for (const auto& c : r.channels)
        o << c.channel << ',' << c.trials << ',' << c.reports << ',' << fmt(c.mean_intensity_ma) << ','
          << fmt(c.mean_steps) << ',' << fmt(c.thumb.mean) << ',' << fmt(c.thumb.sd) << ','
          << fmt(c.thumb.strongest_rate) << ',' << fmt(c.index.mean) << ',' << fmt(c.index.sd) << ','
          << fmt(c.index.strongest_rate) << '\n';
    return o.str();
}

std::string conditions_csv(const Report& r) {
    std::ostringstream o;
    o << "size,opacity,thumb_n,thumb_rate,thumb_sd,thumb_strongest,index_n,index_rate,index_sd,index_strongest\n";
    for (const auto& c : r.conditions)
        o << visual_size_name(c.size) << ',' << opacity_name(c.opacity) << ',' << c.thumb.n << ','
          << fmt(c.thumb.mean) << ',' << fmt(c.thumb.sd) << ',' << fmt(c.thumb.strongest_rate) << ',' << c.index.n
          << ',' << fmt(c.index.mean) << ',' << fmt(c.index.sd) << ',' << fmt(c.index.strongest_rate) << '\n';
    return o.str();
}

std::string anova_csv(const Report& r) {
    std::ostringstream o;
    o << "finger,effect,df1,df2,F,p,partial_eta2,gg_epsilon,p_gg\n";
    for (const auto& f : r.fingers) {
        if (!f.anova) continue;
        const std::pair<const char*, const analysis::FTest*> rows[] = {
            {"size", &f.anova->a}, {"opacity", &f.anova->b}, {"size:opacity", &f.anova->ab}};
        for (const auto& [name, t] : rows)
            o << finger_name(f.finger) << ',' << name << ',' << fmt(t->df1) << ',' << fmt(t->df2) << ','
              << fmt(t->F) << ',' << fmt(t->p) << ',' << fmt(t->partial_eta2) << ',' << fmt(t->gg_epsilon) << ','
              << fmt(t->p_gg) << '\n';
    }
    return o.str();
}

std::string ttests_csv(const Report& r) {
    std::ostringstream o;
    o << "finger,test,a,b,t,df,p,p_bonferroni\n";
    for (const auto& f : r.fingers) {
        if (f.anova)
            for (const auto& p : f.anova->pairwise_a)
                o << finger_name(f.finger) << ",paired," << visual_size_name(kVisualSizes[p.i]) << ','
                  << visual_size_name(kVisualSizes[p.j]) << ',' << fmt(p.t) << ',' << fmt(p.df) << ',' << fmt(p.p)
                  << ',' << fmt(p.p_bonferroni) << '\n';
        for (const auto& t : f.vs_baseline)
            o << finger_name(f.finger) << ",unpaired," << visual_size_name(t.size) << '-' << opacity_name(t.opacity)
              << ",no-visual," << fmt(t.test.t) << ',' << fmt(t.test.df) << ',' << fmt(t.test.p) << ",\n";
    }
    return o.str();
}

std::vector<fs::path> write_report(const Report& r, const HandMap& map, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir / "heatmaps", ec);
    if (ec) fail(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
    std::vector<fs::path> written;
    auto put = [&](const fs::path& p, const std::string& text) {
        std::ofstream out(p, std::ios::binary);
        out << text;
        if (!out) fail(ErrorCode::Io, "cannot write " + p.string());
        written.push_back(p);
    };
    put(dir / "report.json", r.to_json());
    if (!r.channels.empty()) put(dir / "channels.csv", channels_csv(r));
    if (!r.conditions.empty()) {
        put(dir / "conditions.csv", conditions_csv(r));
        put(dir / "anova.csv", anova_csv(r));
        put(dir / "ttests.csv", ttests_csv(r));
    }
    for (const auto& h : r.heatmaps) {
        std::ostringstream csv;
        analysis::write_heatmap_csv(csv, h.heatmap);
        put(dir / "heatmaps" / (h.name + ".csv"), csv.str());
        put(dir / "heatmaps" / (h.name + ".svg"), analysis::heatmap_svg(h.heatmap, map, h.name));
    }
    return written;
}

}  // namespace etw::report
