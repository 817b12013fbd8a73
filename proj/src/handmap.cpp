#include "etw/handmap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "etw/error.hpp"

namespace etw {
namespace {

constexpr char kRegionChars[] = {'.', 'w', 'p', 't', 'i', 'm', 'r', 'l'};

Region region_from_char(char c) {
    for (int i = 0; i < 8; ++i)
        if (kRegionChars[i] == c) return static_cast<Region>(i);
    fail(ErrorCode::Parse, std::string("hand map: unknown region code '") + c + "'");
}

struct Capsule {
    PointMm a;
    PointMm b;
    double radius;

    bool contains(PointMm p) const {
        const double vx = b.x - a.x, vy = b.y - a.y;
        const double wx = p.x - a.x, wy = p.y - a.y;
        const double t = std::clamp((vx * wx + vy * wy) / (vx * vx + vy * vy), 0.0, 1.0);
        const double dx = p.x - (a.x + t * vx), dy = p.y - (a.y + t * vy);
        return dx * dx + dy * dy <= radius * radius;
    }
};

bool in_rect(PointMm p, double x0, double y0, double x1, double y1) {
    return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1;
}

// Version 1 geometry, millimetres on a 120 x 180 mm canvas.
HandMap build_standard() {
    constexpr int w = 48, h = 72;
    constexpr double s = 2.5;
    const FingerLandmarks thumb{{24, 130}, {8, 80}};
    const FingerLandmarks index{{36, 80}, {33, 20}};
    const Capsule thumb_c{thumb.base, thumb.tip, 10.0};
    const Capsule index_c{index.base, index.tip, 8.0};
    const Capsule middle_c{{53, 80}, {53, 8}, 8.0};
    const Capsule ring_c{{70, 80}, {72, 16}, 7.5};
    const Capsule little_c{{86, 84}, {94, 38}, 6.5};

    std::ostringstream os;
    os << "version 1\nsize " << w << ' ' << h << "\nscale_mm " << s << '\n';
    os << "finger thumb " << thumb.base.x << ' ' << thumb.base.y << ' ' << thumb.tip.x << ' ' << thumb.tip.y << '\n';
    os << "finger index " << index.base.x << ' ' << index.base.y << ' ' << index.tip.x << ' ' << index.tip.y << '\n';
    os << "wrist_center 60 165\nraster\n";
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const PointMm p{(x + 0.5) * s, (y + 0.5) * s};
            Region r = Region::Background;
            if (thumb_c.contains(p)) r = Region::Thumb;
            else if (in_rect(p, 26, 78, 96, 150)) r = Region::Palm;
            else if (in_rect(p, 36, 150, 84, 180)) r = Region::Wrist;
            else if (index_c.contains(p)) r = Region::Index;
            else if (middle_c.contains(p)) r = Region::Middle;
            else if (ring_c.contains(p)) r = Region::Ring;
            else if (little_c.contains(p)) r = Region::Little;
            os << kRegionChars[static_cast<int>(r)];
        }
        os << '\n';
    }
    return HandMap::parse(os.str());
}

}  // namespace

const char* region_name(Region r) {
    switch (r) {
    case Region::Background: return "background";
    case Region::Wrist: return "wrist";
    case Region::Palm: return "palm";
    case Region::Thumb: return "thumb";
    case Region::Index: return "index";
    case Region::Middle: return "middle";
    case Region::Ring: return "ring";
    case Region::Little: return "little";
    }
    return "?";
}

Region region_from_name(const std::string& name) {
    for (int i = 0; i < 8; ++i)
        if (name == region_name(static_cast<Region>(i))) return static_cast<Region>(i);
    fail(ErrorCode::Parse, "unknown region '" + name + "'");
}

Region region_of(Finger f) { return f == Finger::Thumb ? Region::Thumb : Region::Index; }
const char* finger_name(Finger f) { return f == Finger::Thumb ? "thumb" : "index"; }

Finger finger_from_name(const std::string& name) {
    if (name == "thumb") return Finger::Thumb;
    if (name == "index") return Finger::Index;
    fail(ErrorCode::Parse, "unknown finger '" + name + "'");
}

double distance(PointMm a, PointMm b) { return std::hypot(a.x - b.x, a.y - b.y); }

Mask::Mask(int width, int height)
    : width_(width), height_(height), bits_(static_cast<std::size_t>(width) * height, 0) {
    if (width <= 0 || height <= 0) fail(ErrorCode::Argument, "mask dimensions must be positive");
}

std::size_t Mask::count() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::string Mask::to_hex() const {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    const std::size_t nbytes = (bits_.size() + 7) / 8;
    out.reserve(nbytes * 2);
    for (std::size_t byte = 0; byte < nbytes; ++byte) {
        unsigned v = 0;
        for (std::size_t bit = 0; bit < 8; ++bit) {
            const std::size_t i = byte * 8 + bit;
            v = (v << 1) | (i < bits_.size() ? bits_[i] : 0u);
        }
        out.push_back(digits[v >> 4]);
        out.push_back(digits[v & 0xF]);
    }
    return out;
}

Mask Mask::from_hex(int width, int height, const std::string& hex) {
    Mask m(width, height);
    const std::size_t nbytes = (m.bits_.size() + 7) / 8;
    if (hex.size() != nbytes * 2) fail(ErrorCode::Parse, "mask hex length does not match dimensions");
    auto nibble = [](char c) -> unsigned {
        if (c >= '0' && c <= '9') return static_cast<unsigned>(c - '0');
        if (c >= 'a' && c <= 'f') return static_cast<unsigned>(c - 'a' + 10);
        if (c >= 'A' && c <= 'F') return static_cast<unsigned>(c - 'A' + 10);
        fail(ErrorCode::Parse, "bad hex digit in mask");
    };
    for (std::size_t byte = 0; byte < nbytes; ++byte) {
        const unsigned v = (nibble(hex[2 * byte]) << 4) | nibble(hex[2 * byte + 1]);
        for (std::size_t bit = 0; bit < 8; ++bit) {
            const std::size_t i = byte * 8 + bit;
            const bool on = (v >> (7 - bit)) & 1u;
            if (i < m.bits_.size()) m.bits_[i] = on ? 1 : 0;
            else if (on) fail(ErrorCode::Parse, "mask hex has bits set past the raster");
        }
    }
    return m;
}

const HandMap& HandMap::standard() {
    static const HandMap map = build_standard();
    return map;
}

HandMap HandMap::parse(const std::string& text) {
    HandMap m;
    std::istringstream in(text);
    std::string line;
    bool have_size = false, have_scale = false, have_wrist = false;
    bool have_finger[2] = {false, false};
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "version") {
            ls >> m.version_;
            if (m.version_ != kVersion) fail(ErrorCode::Parse, "hand map: unsupported version");
        } else if (key == "size") {
            ls >> m.width_ >> m.height_;
            have_size = m.width_ > 0 && m.height_ > 0;
        } else if (key == "scale_mm") {
            ls >> m.scale_mm_;
            have_scale = m.scale_mm_ > 0.0;
        } else if (key == "finger") {
            std::string name;
            FingerLandmarks lm;
            ls >> name >> lm.base.x >> lm.base.y >> lm.tip.x >> lm.tip.y;
            const Finger f = finger_from_name(name);
            m.fingers_[static_cast<int>(f)] = lm;
            have_finger[static_cast<int>(f)] = !ls.fail();
        } else if (key == "wrist_center") {
            ls >> m.wrist_center_.x >> m.wrist_center_.y;
            have_wrist = !ls.fail();
        } else if (key == "raster") {
            if (!have_size) fail(ErrorCode::Parse, "hand map: raster before size");
            m.raster_.reserve(static_cast<std::size_t>(m.width_) * m.height_);
            for (int y = 0; y < m.height_; ++y) {
                if (!std::getline(in, line) || static_cast<int>(line.size()) != m.width_)
                    fail(ErrorCode::Parse, "hand map: raster row " + std::to_string(y) + " has wrong width");
                for (char c : line) m.raster_.push_back(region_from_char(c));
            }
        } else {
            fail(ErrorCode::Parse, "hand map: unknown key '" + key + "'");
        }
        if (ls.fail()) fail(ErrorCode::Parse, "hand map: malformed '" + key + "' line");
    }
    if (!have_size || !have_scale || !have_wrist || !have_finger[0] || !have_finger[1] ||
        m.raster_.size() != static_cast<std::size_t>(m.width_) * m.height_)
        fail(ErrorCode::Parse, "hand map: incomplete definition");
    if (m.region_cells(Region::Thumb) == 0 || m.region_cells(Region::Index) == 0)
        fail(ErrorCode::Parse, "hand map: thumb and index regions must be nonempty");
    return m;
}

std::string HandMap::serialize() const {
    std::ostringstream os;
    os << "# palmar hand map, region codes: . background, w wrist, p palm, t thumb, i index, m middle, r ring, l little\n";
    os << "version " << version_ << "\nsize " << width_ << ' ' << height_ << "\nscale_mm " << scale_mm_ << '\n';
    for (Finger f : {Finger::Thumb, Finger::Index}) {
        const auto& lm = landmarks(f);
        os << "finger " << finger_name(f) << ' ' << lm.base.x << ' ' << lm.base.y << ' ' << lm.tip.x << ' '
           << lm.tip.y << '\n';
    }
    os << "wrist_center " << wrist_center_.x << ' ' << wrist_center_.y << "\nraster\n";
    for (int y = 0; y < height_; ++y) {
        for (int x = 0; x < width_; ++x) os << kRegionChars[static_cast<int>(at({x, y}))];
        os << '\n';
    }
    return os.str();
}

Cell HandMap::cell_at(PointMm p) const noexcept {
    const int x = std::clamp(static_cast<int>(std::floor(p.x / scale_mm_)), 0, width_ - 1);
    const int y = std::clamp(static_cast<int>(std::floor(p.y / scale_mm_)), 0, height_ - 1);
    return {x, y};
}

Mask HandMap::region_mask(Region r) const {
    Mask m(width_, height_);
    for (int y = 0; y < height_; ++y)
        for (int x = 0; x < width_; ++x)
            if (at({x, y}) == r) m.set({x, y});
    return m;
}

Mask HandMap::foreground_mask() const {
    Mask m(width_, height_);
    for (int y = 0; y < height_; ++y)
        for (int x = 0; x < width_; ++x)
            if (at({x, y}) != Region::Background) m.set({x, y});
    return m;
}

std::size_t HandMap::region_cells(Region r) const {
    return static_cast<std::size_t>(std::count(raster_.begin(), raster_.end(), r));
}

PointMm HandMap::region_centroid(Region r) const {
    double sx = 0, sy = 0;
    std::size_t n = 0;
    for (int y = 0; y < height_; ++y)
        for (int x = 0; x < width_; ++x)
            if (at({x, y}) == r) {
                const auto c = center_of({x, y});
                sx += c.x;
                sy += c.y;
                ++n;
            }
    if (n == 0) return {};
    return {sx / n, sy / n};
}

Cell HandMap::nearest_foreground(PointMm p) const {
    Cell best{};
    double best_d = std::numeric_limits<double>::infinity();
    for (int y = 0; y < height_; ++y)
        for (int x = 0; x < width_; ++x) {
            if (at({x, y}) == Region::Background) continue;
            const double d = distance(center_of({x, y}), p);
            if (d < best_d) {
                best_d = d;
                best = {x, y};
            }
        }
    return best;
}

std::string handmap_svg(const HandMap& map) {
    static constexpr const char* colors[] = {"#ffffff", "#c9b6a6", "#e8d2bf", "#f4a261", "#2a9d8f", "#a8dadc", "#b5c99a", "#cdb4db"};
    constexpr int px = 6;
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << map.width() * px << "\" height=\""
      << map.height() * px << "\">\n";
    for (int y = 0; y < map.height(); ++y)
        for (int x = 0; x < map.width(); ++x) {
            const Region r = map.at({x, y});
            if (r == Region::Background) continue;
            s << "<rect x=\"" << x * px << "\" y=\"" << y * px << "\" width=\"" << px << "\" height=\"" << px
              << "\" fill=\"" << colors[static_cast<int>(r)] << "\"><title>" << region_name(r) << "</title></rect>\n";
        }
    s << "</svg>\n";
    return s.str();
}

}  // namespace etw
