#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "etw/error.hpp"
#include "etw/perceiver.hpp"

using namespace etw;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE_MESSAGE(in.good(), "cannot open " << path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const HandMap& hand() { return HandMap::standard(); }

double shift_mm(const Perceiver& p, PointMm c, const std::optional<VisualEffect>& v) {
    return distance(c, p.shifted_centroid(c, v));
}

}  // namespace

TEST_CASE("bundled hand map file matches the built-in map") {
    CHECK(slurp(ETW_DATA_DIR "/handmap_v1.txt") == hand().serialize());
    const auto parsed = HandMap::parse(hand().serialize());
    CHECK(parsed.serialize() == hand().serialize());
    CHECK(parsed.width() == 48);
    CHECK(parsed.height() == 72);
    CHECK(parsed.scale_mm() == 2.5);
}

TEST_CASE("hand map regions") {
    const auto& m = hand();
    for (Region r : {Region::Wrist, Region::Palm, Region::Thumb, Region::Index, Region::Middle, Region::Ring,
                     Region::Little})
        CHECK_MESSAGE(m.region_cells(r) > 20, region_name(r));
    CHECK(m.at(m.cell_at(m.wrist_center())) == Region::Wrist);
    CHECK(m.at(m.cell_at(m.landmarks(Finger::Thumb).tip)) == Region::Thumb);
    CHECK(m.at(m.cell_at(m.landmarks(Finger::Index).tip)) == Region::Index);
    CHECK(m.at({0, 0}) == Region::Background);

    std::size_t total = 0;
    for (Region r : {Region::Wrist, Region::Palm, Region::Thumb, Region::Index, Region::Middle, Region::Ring,
                     Region::Little})
        total += m.region_cells(r);
    CHECK(total == m.foreground_mask().count());

    const Cell near = m.nearest_foreground({1.0, 1.0});
    CHECK(m.at(near) != Region::Background);
    CHECK(region_from_name("thumb") == Region::Thumb);
    CHECK_THROWS_AS(region_from_name("elbow"), Error);
}

TEST_CASE("hand map parser rejects malformed input") {
    auto text = hand().serialize();
    CHECK_THROWS_AS(HandMap::parse("version 2\n"), Error);
    auto bad = text;
    bad[bad.rfind('w')] = 'x';
    CHECK_THROWS_AS(HandMap::parse(bad), Error);
    bad = text.substr(0, text.size() - 50);
    CHECK_THROWS_AS(HandMap::parse(bad), Error);
}

TEST_CASE("mask hex round trip") {
    Mask m(48, 72);
    m.set({0, 0});
    m.set({47, 71});
    m.set({9, 3});
    const auto hex = m.to_hex();
    CHECK(hex.size() == 48 * 72 / 4);
    CHECK(hex.substr(0, 2) == "80");
    CHECK(hex.back() == '1');
    CHECK(Mask::from_hex(48, 72, hex) == m);
    CHECK_THROWS_AS(Mask::from_hex(48, 72, hex.substr(1)), Error);
}

TEST_CASE("visual centroids") {
    const auto& m = hand();
    const auto th = m.landmarks(Finger::Thumb);
    const VisualEffect tip{VisualSize::Fingertip, Opacity::Full, Finger::Thumb};
    const auto c = visual_centroid(tip, m);
    CHECK(c.x == doctest::Approx(th.base.x + 0.85 * (th.tip.x - th.base.x)));
    CHECK(c.y == doctest::Approx(th.base.y + 0.85 * (th.tip.y - th.base.y)));

    const VisualEffect finger{VisualSize::Finger, Opacity::Half, Finger::Index};
    const auto fc = visual_centroid(finger, m);
    const auto rc = m.region_centroid(Region::Index);
    CHECK(fc.x == rc.x);
    CHECK(fc.y == rc.y);

    const VisualEffect sweep{VisualSize::FingertipToWrist, Opacity::Full, Finger::Index};
    const auto path = highlight_path(sweep, m);
    CHECK(path.duration_ms == 45.0);
    const auto sc = visual_centroid(sweep, m);
    CHECK(sc.x == doctest::Approx((path.start.x + path.end.x) / 2));
    CHECK(sc.y == doctest::Approx((path.start.y + path.end.y) / 2));

    CHECK(visual_size_from_name("fingertip-to-wrist") == VisualSize::FingertipToWrist);
    CHECK(opacity_from_name("half") == Opacity::Half);
    CHECK_THROWS_AS(opacity_from_name("quarter"), Error);
}

TEST_CASE("bundled perceiver config matches the defaults") {
    const auto text = slurp(ETW_DATA_DIR "/perceiver_v1.json");
    CHECK(text == PerceiverConfig::defaults().to_json());
    const auto back = PerceiverConfig::from_json(text);
    CHECK(back.to_json() == text);
    CHECK_THROWS_AS(PerceiverConfig::from_json("{\"format\":\"other\"}"), Error);
}

TEST_CASE("sub-threshold stimulation is not felt") {
    const Perceiver p(PerceiverConfig::defaults(), hand());
    CHECK(p.threshold(5) == 0.65);
    CHECK(p.threshold(8) == 0.76);
    CHECK_FALSE(p.perceive(5, 0.64, std::nullopt, 1).has_value());
    CHECK(p.perceive(5, 0.65, std::nullopt, 1).has_value());
    CHECK_THROWS_AS(p.perceive(1, 2.0, std::nullopt, 1), Error);
}

TEST_CASE("reports are well formed and deterministic") {
    const Perceiver p(PerceiverConfig::defaults(), hand());
    for (int ch = 5; ch <= 15; ++ch) {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const auto r = p.perceive(ch, p.threshold(ch) * 1.3, VisualEffect{}, seed);
            REQUIRE(r.has_value());
            check_report(*r);
            CHECK(hand().at(r->strongest) != Region::Background);
            for (int y = 0; y < 72; ++y)
                for (int x = 0; x < 48; ++x)
                    if (r->area.get({x, y})) REQUIRE(hand().at({x, y}) != Region::Background);
            CHECK(*r == *p.perceive(ch, p.threshold(ch) * 1.3, VisualEffect{}, seed));
        }
    }
    SensationReport bad;
    bad.area = Mask(48, 72);
    CHECK_THROWS_AS(check_report(bad), Error);
}

TEST_CASE("painted area grows with intensity") {
    const Perceiver p(PerceiverConfig::defaults(), hand());
    const auto lo = p.perceive(8, 0.76, std::nullopt, 3);
    const auto hi = p.perceive(8, 3.04, std::nullopt, 3);
    CHECK(hi->area.count() > lo->area.count());
}

TEST_CASE("visual shift") {
    auto cfg = PerceiverConfig::defaults();
    const Perceiver p(cfg, hand());
    const PointMm c{40, 94};
    CHECK(shift_mm(p, c, std::nullopt) == 0.0);

    // with full gain and an infinitely wide falloff the centroid lands on the visual
    cfg.ventriloquism_gain = 1.0;
    cfg.ventriloquism_falloff_mm = 1e12;
    const Perceiver full(cfg, hand());
    const VisualEffect finger{VisualSize::Finger, Opacity::Full, Finger::Index};
    const auto v = visual_centroid(finger, hand());
    const auto s = full.shifted_centroid(c, finger);
    CHECK(s.x == doctest::Approx(v.x));
    CHECK(s.y == doctest::Approx(v.y));

    // shift grows with w0
    double prev = -1.0;
    for (double w0 : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
        auto k = PerceiverConfig::defaults();
        k.ventriloquism_gain = w0;
        const double d = shift_mm(Perceiver(k, hand()), c, finger);
        CHECK(d > prev);
        prev = d;
    }

    // effect sizes: finger > fingertip, finger > sweep, full > half
    const auto gain = [&](VisualSize sz, Opacity op) { return p.effective_gain({sz, op, Finger::Thumb}); };
    CHECK(gain(VisualSize::Finger, Opacity::Full) > gain(VisualSize::Fingertip, Opacity::Full));
    CHECK(gain(VisualSize::Finger, Opacity::Full) > gain(VisualSize::FingertipToWrist, Opacity::Full));
    CHECK(gain(VisualSize::Finger, Opacity::Full) > gain(VisualSize::Finger, Opacity::Half));

    cfg = PerceiverConfig::defaults();
    cfg.ventriloquism_gain = 1.5;
    CHECK_THROWS_AS(Perceiver(cfg, hand()), Error);
}

TEST_CASE("wrist vibration is barely moved by a finger visual") {
    const Perceiver p(PerceiverConfig::defaults(), hand());
    const PointMm w = p.config().wrist_blob.centroid;
    for (auto f : {Finger::Thumb, Finger::Index})
        for (auto sz : {VisualSize::Fingertip, VisualSize::Finger})
            for (auto op : kOpacities) {
                const VisualEffect v{sz, op, f};
                const double disparity = distance(w, visual_centroid(v, hand()));
                CHECK(shift_mm(p, w, v) < 0.02 * disparity);
            }
    CHECK_FALSE(p.perceive_vibration(0.0, std::nullopt, 1).has_value());
    const auto r = p.perceive_vibration(25.0, std::nullopt, 1);
    REQUIRE(r.has_value());
    CHECK(hand().at(r->strongest) == Region::Wrist);
}

TEST_CASE("participants differ but stay in range") {
    const auto base = PerceiverConfig::defaults();
    const auto a = base.for_participant(1);
    const auto b = base.for_participant(2);
    CHECK(a.channels.at(5).threshold_ma != b.channels.at(5).threshold_ma);
    CHECK(a.to_json() == base.for_participant(1).to_json());
    for (std::uint64_t s = 0; s < 200; ++s) {
        const auto c = base.for_participant(s);
        for (const auto& [ch, pc] : c.channels) {
            REQUIRE(pc.threshold_ma >= 0.2);
            REQUIRE(pc.threshold_ma <= 2.5);
        }
        CHECK_NOTHROW(c.check(hand()));
    }
}

TEST_CASE("best channel per finger") {
    const Perceiver p(PerceiverConfig::defaults(), hand());
    int best_thumb = 0;
    double best = -1;
    for (int ch = 5; ch <= 15; ++ch)
        if (p.expected_region_share(ch, Region::Thumb) > best) {
            best = p.expected_region_share(ch, Region::Thumb);
            best_thumb = ch;
        }
    CHECK(best_thumb == 5);
    CHECK(p.expected_region_share(15, Region::Thumb) == 0.0);
}
