#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace etw {

enum class Region : std::uint8_t { Background, Wrist, Palm, Thumb, Index, Middle, Ring, Little };

const char* region_name(Region r);
Region region_from_name(const std::string& name);  // throws Parse

enum class Finger { Thumb, Index };
Region region_of(Finger f);
const char* finger_name(Finger f);
Finger finger_from_name(const std::string& name);  // throws Parse

struct Cell {
    int x = 0;
    int y = 0;
    friend bool operator==(const Cell&, const Cell&) = default;
};

struct PointMm {
    double x = 0.0;
    double y = 0.0;
};

double distance(PointMm a, PointMm b);

// Boolean raster with the same dimensions as a HandMap.
class Mask {
public:
    Mask() = default;
    Mask(int width, int height);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    bool get(Cell c) const { return bits_[index(c)] != 0; }
    void set(Cell c, bool on = true) { bits_[index(c)] = on ? 1 : 0; }
    bool contains(Cell c) const noexcept { return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_; }
    std::size_t count() const noexcept;
    bool empty() const noexcept { return count() == 0; }

    // Row-major bits packed MSB-first, rendered as lower-case hex.
    std::string to_hex() const;
    static Mask from_hex(int width, int height, const std::string& hex);

    friend bool operator==(const Mask&, const Mask&) = default;

private:
    std::size_t index(Cell c) const { return static_cast<std::size_t>(c.y) * width_ + c.x; }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> bits_;
};

struct FingerLandmarks {
    PointMm base;
    PointMm tip;
};

// Labeled raster of the palmar side of a right hand, palm facing the viewer,
// wrist at the bottom. x grows to the right, y grows downwards, both in cells.
class HandMap {
public:
    static constexpr int kVersion = 1;

    // Bundled map (version 1), identical to data/handmap_v1.txt.
    static const HandMap& standard();
    static HandMap parse(const std::string& text);  // throws Parse
    std::string serialize() const;

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    double scale_mm() const noexcept { return scale_mm_; }
    int version() const noexcept { return version_; }

    Region at(Cell c) const { return raster_[static_cast<std::size_t>(c.y) * width_ + c.x]; }
    bool contains(Cell c) const noexcept { return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_; }

    PointMm center_of(Cell c) const noexcept { return {(c.x + 0.5) * scale_mm_, (c.y + 0.5) * scale_mm_}; }
    Cell cell_at(PointMm p) const noexcept;  // clamped to the raster

    Mask region_mask(Region r) const;
    Mask foreground_mask() const;
    std::size_t region_cells(Region r) const;
    PointMm region_centroid(Region r) const;

    const FingerLandmarks& landmarks(Finger f) const { return fingers_[static_cast<int>(f)]; }
    PointMm wrist_center() const noexcept { return wrist_center_; }

    // Nearest non-background cell to p (ties: lowest row, then column).
    Cell nearest_foreground(PointMm p) const;

private:
    int version_ = kVersion;
    int width_ = 0;
    int height_ = 0;
    double scale_mm_ = 1.0;
    std::vector<Region> raster_;
    std::array<FingerLandmarks, 2> fingers_{};
    PointMm wrist_center_{};
};

// Region-coloured raster drawing of the map, one square per cell.
std::string handmap_svg(const HandMap& map);

}  // namespace etw
