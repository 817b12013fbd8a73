#pragma once

// Parametric perceiver: a synthetic stand-in for a participant that turns a
// delivered stimulus into a painted sensation report. Every number in the
// default configuration is a fixture chosen to reproduce directional effects;
// none of it is a model of real perception.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "etw/handmap.hpp"
#include "etw/rng.hpp"
#include "etw/visual.hpp"

namespace etw {

enum class Quality { Tapping, Vibrating, Tingling, Pressing, SkinStretching };
inline constexpr int kQualityCount = 5;
const char* quality_name(Quality q);  // tapping | vibrating | tingling | pressing | skin-stretching
Quality quality_from_name(const std::string& name);

struct SensationReport {
    Mask area;
    Cell strongest;
    Quality quality = Quality::Tapping;

    friend bool operator==(const SensationReport&, const SensationReport&) = default;
};

// Throws Argument unless the mask is nonempty and contains the strongest point.
void check_report(const SensationReport& r);

// Anisotropic Gaussian sensation blob in hand-map millimetres.
struct Blob {
    PointMm centroid;
    double var_x = 100.0;  // mm^2
    double var_y = 100.0;
    double cov_xy = 0.0;
    double weight = 1.0;
};

struct ChannelPercept {
    double threshold_ma = 1.0;
    std::vector<Blob> blobs;
};

struct PerceiverConfig {
    static constexpr int kVersion = 1;

    std::map<int, ChannelPercept> channels;  // keyed by channel number
    Blob wrist_blob;                         // vibrotactile baseline locus

    double ventriloquism_gain = 0.5;         // w0 in [0, 1]
    double ventriloquism_falloff_mm = 25.0;  // sigma_v
    std::array<double, 3> size_gain{0.55, 1.0, 0.45};  // fingertip, finger, fingertip-to-wrist
    std::array<double, 2> opacity_gain{1.0, 0.9};      // full, half

    double centroid_jitter_mm = 3.0;  // per-report scatter of the felt location
    double mask_radius = 1.0;         // Mahalanobis radius of the painted area at threshold
    double mask_growth = 0.35;        // radius growth per doubling of intensity over threshold
    std::array<double, kQualityCount> quality_weights{0.40, 0.20, 0.20, 0.12, 0.08};

    static PerceiverConfig defaults();

    // Per-participant variation: thresholds and blob centroids perturbed from
    // the defaults. Deterministic in the seed.
    PerceiverConfig for_participant(std::uint64_t seed) const;

    void check(const HandMap& map) const;  // throws Argument

    std::string to_json() const;
    static PerceiverConfig from_json(const std::string& text);  // throws Parse
};

class Perceiver {
public:
    Perceiver(PerceiverConfig config, const HandMap& map);

    const PerceiverConfig& config() const noexcept { return config_; }
    const HandMap& map() const noexcept { return *map_; }

    bool knows(int channel) const { return config_.channels.count(channel) != 0; }
    double threshold(int channel) const;  // throws UnknownChannel

    // Centroid after the visuotactile pull: c + w * exp(-d^2 / (2 sigma^2)) * (v - c).
    PointMm shifted_centroid(PointMm blob_centroid, const std::optional<VisualEffect>& visual) const;
    double effective_gain(const VisualEffect& visual) const;

    // nullopt below threshold. Throws UnknownChannel for channels without a percept.
    std::optional<SensationReport> perceive(int channel, double intensity_ma,
                                            const std::optional<VisualEffect>& visual,
                                            std::uint64_t seed) const;

    // Sensation for a wrist vibration of the given duration (nullopt when zero).
    std::optional<SensationReport> perceive_vibration(double duration_ms,
                                                      const std::optional<VisualEffect>& visual,
                                                      std::uint64_t seed) const;

    // Expected share of a jitter-free report falling in `region`; used by
    // simulated participants to pick their best channel per finger.
    double expected_region_share(int channel, Region region) const;

private:
    SensationReport paint(const Blob& blob, double radius_scale, const std::optional<VisualEffect>& visual,
                          Rng& rng, bool jitter) const;

    PerceiverConfig config_;
    const HandMap* map_;
};

}  // namespace etw
