#include "etw/perceiver.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "etw/error.hpp"

namespace etw {
namespace {

using nlohmann::json;

constexpr const char* kQualityNames[kQualityCount] = {"tapping", "vibrating", "tingling", "pressing",
                                                      "skin-stretching"};

Blob blob(double x, double y, double sx, double sy, double rho = 0.0, double weight = 1.0) {
    return {{x, y}, sx * sx, sy * sy, rho * sx * sy, weight};
}

json blob_to_json(const Blob& b) {
    return {{"centroid", {b.centroid.x, b.centroid.y}}, {"var_x", b.var_x}, {"var_y", b.var_y},
            {"cov_xy", b.cov_xy}, {"weight", b.weight}};
}

Blob blob_from_json(const json& j) {
    Blob b;
    b.centroid = {j.at("centroid").at(0).get<double>(), j.at("centroid").at(1).get<double>()};
    b.var_x = j.at("var_x").get<double>();
    b.var_y = j.at("var_y").get<double>();
    b.cov_xy = j.value("cov_xy", 0.0);
    b.weight = j.value("weight", 1.0);
    return b;
}

// 4-connected component of `m` containing `seed`.
Mask component(const Mask& m, Cell seed) {
    Mask out(m.width(), m.height());
    std::vector<Cell> stack{seed};
    out.set(seed);
    while (!stack.empty()) {
        const Cell c = stack.back();
        stack.pop_back();
        for (Cell n : {Cell{c.x + 1, c.y}, Cell{c.x - 1, c.y}, Cell{c.x, c.y + 1}, Cell{c.x, c.y - 1}}) {
            if (m.contains(n) && m.get(n) && !out.get(n)) {
                out.set(n);
                stack.push_back(n);
            }
        }
    }
    return out;
}

}  // namespace

const char* quality_name(Quality q) { return kQualityNames[static_cast<int>(q)]; }

Quality quality_from_name(const std::string& name) {
    for (int i = 0; i < kQualityCount; ++i)
        if (name == kQualityNames[i]) return static_cast<Quality>(i);
    fail(ErrorCode::Parse, "unknown quality keyword '" + name + "'");
}

void check_report(const SensationReport& r) {
    if (r.area.empty()) fail(ErrorCode::EmptyMask, "sensation report has an empty area");
    if (!r.area.contains(r.strongest) || !r.area.get(r.strongest))
        fail(ErrorCode::Argument, "strongest point lies outside the painted area");
}

PerceiverConfig PerceiverConfig::defaults() {
    PerceiverConfig c;
    // Radial-side channels refer to the thenar area and thumb, ch8 towards the
    // index base, ulnar/proximal channels stay in the palm or at the wrist.
    c.channels[5] = {0.65, {blob(33, 120, 9, 15, -0.3)}};
    c.channels[6] = {0.80, {blob(30, 112, 9, 13, 0.0, 0.6), blob(40, 90, 8, 10, 0.0, 0.4)}};
    c.channels[7] = {0.85, {blob(44, 98, 10, 12)}};
    c.channels[8] = {0.76, {blob(38, 84, 8, 15, 0.2)}};
    c.channels[9] = {0.90, {blob(52, 92, 9, 13)}};
    c.channels[10] = {0.95, {blob(62, 98, 10, 13)}};
    c.channels[11] = {1.00, {blob(72, 102, 10, 13)}};
    c.channels[12] = {1.05, {blob(80, 126, 10, 12)}};
    c.channels[13] = {1.10, {blob(62, 140, 11, 10)}};
    c.channels[14] = {1.15, {blob(54, 160, 11, 9)}};
    c.channels[15] = {1.20, {blob(70, 162, 11, 9)}};
    c.wrist_blob = blob(60, 165, 14, 8);
    return c;
}

PerceiverConfig PerceiverConfig::for_participant(std::uint64_t seed) const {
    PerceiverConfig c = *this;
    Rng rng(seed);
    const double dx = rng.normal(0.0, 3.0);
    const double dy = rng.normal(0.0, 3.0);
    for (auto& [ch, percept] : c.channels) {
        // Thumb/index channels follow the reported threshold spread; others scale.
        double t;
        if (ch == 5) t = rng.normal(0.65, 0.26);
        else if (ch == 8) t = rng.normal(0.76, 0.27);
        else t = percept.threshold_ma * rng.normal(1.0, 0.2);
        percept.threshold_ma = std::clamp(t, 0.2, 2.5);
        for (auto& b : percept.blobs) {
            b.centroid.x += dx + rng.normal(0.0, 2.0);
            b.centroid.y += dy + rng.normal(0.0, 2.0);
        }
    }
    return c;
}

void PerceiverConfig::check(const HandMap& map) const {
    if (!(ventriloquism_gain >= 0.0 && ventriloquism_gain <= 1.0))
        fail(ErrorCode::Argument, "ventriloquism gain must lie in [0, 1]");
    if (!(ventriloquism_falloff_mm > 0.0)) fail(ErrorCode::Argument, "ventriloquism falloff must be positive");
    for (double g : size_gain)
        if (!(g >= 0.0 && g <= 1.0)) fail(ErrorCode::Argument, "size gains must lie in [0, 1]");
    for (double g : opacity_gain)
        if (!(g >= 0.0 && g <= 1.0)) fail(ErrorCode::Argument, "opacity gains must lie in [0, 1]");
    const double w = map.width() * map.scale_mm(), h = map.height() * map.scale_mm();
    auto check_blob = [&](const Blob& b) {
        if (!(b.centroid.x >= 0 && b.centroid.x <= w && b.centroid.y >= 0 && b.centroid.y <= h))
            fail(ErrorCode::Argument, "sensation blob centroid outside the hand raster");
        if (!(b.var_x > 0 && b.var_y > 0 && b.var_x * b.var_y - b.cov_xy * b.cov_xy > 0 && b.weight > 0))
            fail(ErrorCode::Argument, "sensation blob covariance must be positive definite");
    };
    for (const auto& [ch, p] : channels) {
        if (ch < 1 || ch > 15) fail(ErrorCode::Argument, "perceiver channel outside 1..15");
        if (p.blobs.empty() || !(p.threshold_ma > 0)) fail(ErrorCode::Argument, "channel percept incomplete");
        for (const auto& b : p.blobs) check_blob(b);
    }
    check_blob(wrist_blob);
}

std::string PerceiverConfig::to_json() const {
    json j;
    j["format"] = "etw-perceiver";
    j["version"] = kVersion;
    json chans = json::object();
    for (const auto& [ch, p] : channels) {
        json blobs = json::array();
        for (const auto& b : p.blobs) blobs.push_back(blob_to_json(b));
        chans[std::to_string(ch)] = {{"threshold_ma", p.threshold_ma}, {"blobs", blobs}};
    }
    j["channels"] = chans;
    j["wrist_blob"] = blob_to_json(wrist_blob);
    j["ventriloquism_gain"] = ventriloquism_gain;
    j["ventriloquism_falloff_mm"] = ventriloquism_falloff_mm;
    j["size_gain"] = {{"fingertip", size_gain[0]}, {"finger", size_gain[1]}, {"fingertip-to-wrist", size_gain[2]}};
    j["opacity_gain"] = {{"full", opacity_gain[0]}, {"half", opacity_gain[1]}};
    j["centroid_jitter_mm"] = centroid_jitter_mm;
    j["mask_radius"] = mask_radius;
    j["mask_growth"] = mask_growth;
    json q = json::object();
    for (int i = 0; i < kQualityCount; ++i) q[kQualityNames[i]] = quality_weights[i];
    j["quality_weights"] = q;
    return j.dump(2) + "\n";
}

PerceiverConfig PerceiverConfig::from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        if (j.value("format", "") != "etw-perceiver" || j.value("version", 0) != kVersion)
            fail(ErrorCode::Parse, "perceiver config: expected format etw-perceiver version 1");
        PerceiverConfig c;
        for (const auto& [key, p] : j.at("channels").items()) {
            ChannelPercept cp;
            cp.threshold_ma = p.at("threshold_ma").get<double>();
            for (const auto& b : p.at("blobs")) cp.blobs.push_back(blob_from_json(b));
            c.channels[std::stoi(key)] = cp;
        }
        c.wrist_blob = blob_from_json(j.at("wrist_blob"));
        c.ventriloquism_gain = j.at("ventriloquism_gain").get<double>();
        c.ventriloquism_falloff_mm = j.at("ventriloquism_falloff_mm").get<double>();
        c.size_gain = {j.at("size_gain").at("fingertip").get<double>(), j.at("size_gain").at("finger").get<double>(),
                       j.at("size_gain").at("fingertip-to-wrist").get<double>()};
        c.opacity_gain = {j.at("opacity_gain").at("full").get<double>(), j.at("opacity_gain").at("half").get<double>()};
        c.centroid_jitter_mm = j.value("centroid_jitter_mm", c.centroid_jitter_mm);
        c.mask_radius = j.value("mask_radius", c.mask_radius);
        c.mask_growth = j.value("mask_growth", c.mask_growth);
        if (j.contains("quality_weights"))
            for (int i = 0; i < kQualityCount; ++i)
                c.quality_weights[i] = j.at("quality_weights").at(kQualityNames[i]).get<double>();
        return c;
    } catch (const json::exception& e) {
        fail(ErrorCode::Parse, std::string("perceiver config: ") + e.what());
    } catch (const std::invalid_argument&) {
        fail(ErrorCode::Parse, "perceiver config: channel keys must be integers");
    }
}

Perceiver::Perceiver(PerceiverConfig config, const HandMap& map) : config_(std::move(config)), map_(&map) {
    config_.check(map);
}

double Perceiver::threshold(int channel) const {
    const auto it = config_.channels.find(channel);
    if (it == config_.channels.end())
        fail(ErrorCode::UnknownChannel, "no percept configured for ch" + std::to_string(channel));
    return it->second.threshold_ma;
}

double Perceiver::effective_gain(const VisualEffect& visual) const {
    return config_.ventriloquism_gain * config_.size_gain[static_cast<int>(visual.size)] *
           config_.opacity_gain[static_cast<int>(visual.opacity)];
}

PointMm Perceiver::shifted_centroid(PointMm c, const std::optional<VisualEffect>& visual) const {
    if (!visual) return c;
    const PointMm v = visual_centroid(*visual, *map_);
    const double dx = v.x - c.x, dy = v.y - c.y;
    const double d2 = dx * dx + dy * dy;
    const double sigma = config_.ventriloquism_falloff_mm;
    const double pull = effective_gain(*visual) * std::exp(-d2 / (2.0 * sigma * sigma));
    return {c.x + pull * dx, c.y + pull * dy};
}

SensationReport Perceiver::paint(const Blob& b, double radius_scale, const std::optional<VisualEffect>& visual,
                                 Rng& rng, bool jitter) const {
    PointMm c = b.centroid;
    if (jitter && config_.centroid_jitter_mm > 0.0) {
        c.x += rng.normal(0.0, config_.centroid_jitter_mm);
        c.y += rng.normal(0.0, config_.centroid_jitter_mm);
    }
    const PointMm s = shifted_centroid(c, visual);

    Cell strongest = map_->cell_at(s);
    if (map_->at(strongest) == Region::Background) strongest = map_->nearest_foreground(s);

    const double det = b.var_x * b.var_y - b.cov_xy * b.cov_xy;
    const double r = config_.mask_radius * radius_scale;
    Mask raw(map_->width(), map_->height());
    for (int y = 0; y < map_->height(); ++y) {
        for (int x = 0; x < map_->width(); ++x) {
            if (map_->at({x, y}) == Region::Background) continue;
            const PointMm p = map_->center_of({x, y});
            const double dx = p.x - s.x, dy = p.y - s.y;
            const double m2 = (b.var_y * dx * dx - 2.0 * b.cov_xy * dx * dy + b.var_x * dy * dy) / det;
            if (m2 <= r * r) raw.set({x, y});
        }
    }
    raw.set(strongest);

    SensationReport report;
    report.area = component(raw, strongest);
    report.strongest = strongest;
    report.quality = static_cast<Quality>(
        rng.categorical(std::vector<double>(config_.quality_weights.begin(), config_.quality_weights.end())));
    return report;
}

std::optional<SensationReport> Perceiver::perceive(int channel, double intensity_ma,
                                                   const std::optional<VisualEffect>& visual,
                                                   std::uint64_t seed) const {
    const double th = threshold(channel);
    if (intensity_ma < th) return std::nullopt;
    const auto& percept = config_.channels.at(channel);
    Rng rng(seed);
    std::vector<double> weights;
    for (const auto& b : percept.blobs) weights.push_back(b.weight);
    const Blob& chosen = percept.blobs[weights.size() > 1 ? rng.categorical(weights) : 0];
    const double scale = 1.0 + config_.mask_growth * std::log2(intensity_ma / th);
    return paint(chosen, scale, visual, rng, true);
}

std::optional<SensationReport> Perceiver::perceive_vibration(double duration_ms,
                                                             const std::optional<VisualEffect>& visual,
                                                             std::uint64_t seed) const {
    if (!(duration_ms > 0.0)) return std::nullopt;
    Rng rng(seed);
    return paint(config_.wrist_blob, 1.0, visual, rng, true);
}

double Perceiver::expected_region_share(int channel, Region region) const {
    const auto it = config_.channels.find(channel);
    if (it == config_.channels.end()) return 0.0;
    Rng rng(0);
    double share = 0.0, total_weight = 0.0;
    for (const auto& b : it->second.blobs) {
        const auto r = paint(b, 1.0, std::nullopt, rng, false);
        std::size_t in = 0;
        for (int y = 0; y < r.area.height(); ++y)
            for (int x = 0; x < r.area.width(); ++x)
                if (r.area.get({x, y}) && map_->at({x, y}) == region) ++in;
        share += b.weight * static_cast<double>(in) / static_cast<double>(r.area.count());
        total_weight += b.weight;
    }
    return share / total_weight;
}

}  // namespace etw
