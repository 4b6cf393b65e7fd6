#include "icafusion/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace icafusion {

namespace {

// 3x5 glyphs for digits, '.', '-', and the lowercase letters used in metric
// names; each glyph is five rows of three bits (msb = left column).
struct Glyph {
    char ch;
    std::uint8_t rows[5];
};

constexpr Glyph kFont[] = {
    {'0', {0b111, 0b101, 0b101, 0b101, 0b111}}, {'1', {0b010, 0b110, 0b010, 0b010, 0b111}},
    {'2', {0b111, 0b001, 0b111, 0b100, 0b111}}, {'3', {0b111, 0b001, 0b111, 0b001, 0b111}},
    {'4', {0b101, 0b101, 0b111, 0b001, 0b001}}, {'5', {0b111, 0b100, 0b111, 0b001, 0b111}},
    {'6', {0b111, 0b100, 0b111, 0b101, 0b111}}, {'7', {0b111, 0b001, 0b010, 0b010, 0b010}},
    {'8', {0b111, 0b101, 0b111, 0b101, 0b111}}, {'9', {0b111, 0b101, 0b111, 0b001, 0b111}},
    {'.', {0b000, 0b000, 0b000, 0b000, 0b010}}, {'-', {0b000, 0b000, 0b111, 0b000, 0b000}},
    {'+', {0b000, 0b010, 0b111, 0b010, 0b000}}, {' ', {0b000, 0b000, 0b000, 0b000, 0b000}},
    {'a', {0b000, 0b011, 0b101, 0b101, 0b011}}, {'b', {0b100, 0b110, 0b101, 0b101, 0b110}},
    {'c', {0b000, 0b011, 0b100, 0b100, 0b011}}, {'d', {0b001, 0b011, 0b101, 0b101, 0b011}},
    {'e', {0b010, 0b101, 0b111, 0b100, 0b011}}, {'f', {0b001, 0b010, 0b111, 0b010, 0b010}},
    {'g', {0b011, 0b101, 0b011, 0b001, 0b110}}, {'i', {0b010, 0b000, 0b010, 0b010, 0b010}},
    {'m', {0b000, 0b110, 0b111, 0b101, 0b101}}, {'n', {0b000, 0b110, 0b101, 0b101, 0b101}},
    {'q', {0b011, 0b101, 0b011, 0b001, 0b001}}, {'s', {0b011, 0b100, 0b010, 0b001, 0b110}},
    {'v', {0b000, 0b101, 0b101, 0b101, 0b010}},
};

const Glyph* find_glyph(char c) {
    for (const auto& g : kFont)
        if (g.ch == c) return &g;
    return nullptr;
}

void draw_text(Raster8& img, int row, int col, const std::string& text, std::uint8_t shade) {
    for (char c : text) {
        if (const Glyph* g = find_glyph(c)) {
            for (int i = 0; i < 5; ++i)
                for (int j = 0; j < 3; ++j)
                    if (g->rows[i] & (0b100 >> j)) {
                        const int r = row + i, cc = col + j;
                        if (r >= 0 && r < img.h && cc >= 0 && cc < img.w) img.at(r, cc) = shade;
                    }
        }
        col += 4;
    }
}

void draw_line(Raster8& img, double r0, double c0, double r1, double c1, std::uint8_t shade) {
    const int steps = std::max(1, static_cast<int>(std::max(std::abs(r1 - r0),
                                                            std::abs(c1 - c0))) * 2);
    for (int s = 0; s <= steps; ++s) {
        const double t = static_cast<double>(s) / steps;
        const int r = static_cast<int>(std::lround(r0 + t * (r1 - r0)));
        const int c = static_cast<int>(std::lround(c0 + t * (c1 - c0)));
        if (r >= 0 && r < img.h && c >= 0 && c < img.w) img.at(r, c) = shade;
    }
}

std::string short_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

}  // namespace

Raster8 render_line_plot(const std::string& title, const std::vector<double>& values,
                         double mean_value) {
    const int width = 640, height = 360, left = 56, right = 16, top = 28, bottom = 28;
    Raster8 img(height, width);
    std::fill(img.v.begin(), img.v.end(), 255);

    double lo = mean_value, hi = mean_value;
    for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;

    const int ph = height - top - bottom, pw = width - left - right;
    auto ry = [&](double v) { return top + (hi - v) / (hi - lo) * ph; };
    auto cx = [&](std::size_t i) {
        return values.size() > 1
                   ? left + static_cast<double>(i) / (values.size() - 1) * pw
                   : left + pw / 2.0;
    };

    for (int g = 0; g <= 4; ++g) {  // horizontal grid + labels
        const double v = lo + (hi - lo) * g / 4.0;
        const int r = static_cast<int>(std::lround(ry(v)));
        for (int c = left; c < width - right; c += 2) img.at(r, c) = 220;
        draw_text(img, r - 2, 4, short_number(v), 80);
    }
    // frame
    draw_line(img, top, left, top, width - right, 0);
    draw_line(img, height - bottom, left, height - bottom, width - right, 0);
    draw_line(img, top, left, height - bottom, left, 0);
    draw_line(img, top, width - right, height - bottom, width - right, 0);

    for (std::size_t i = 0; i + 1 < values.size(); ++i)
        draw_line(img, ry(values[i]), cx(i), ry(values[i + 1]), cx(i + 1), 0);
    if (values.size() == 1) draw_line(img, ry(values[0]), left, ry(values[0]), width - right, 0);

    const int mr = static_cast<int>(std::lround(ry(mean_value)));
    for (int c = left; c < width - right; c += 6)  // dashed mean line
        for (int k = 0; k < 3 && c + k < width - right; ++k) img.at(mr, c + k) = 120;

    draw_text(img, 8, left, title + "  mean " + short_number(mean_value), 0);
    return img;
}

}  // namespace icafusion
