// Copyright 2026 The dyst Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dyst/svg.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <sstream>

namespace dyst {

namespace {

constexpr std::array<const char *, 10> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                                "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

std::string escape(const std::string &s) {
    std::string out;
    for (char ch : s) {
        switch (ch) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += ch;
        }
    }
    return out;
}

// Frame body without the <svg> wrapper.
std::string frame_body(const LayoutTimeline &t, const FrameLayout &frame) {
    const auto &g = t.geometry;
    const double w = static_cast<double>(g.width) * kCellPixels;
    const double h = static_cast<double>(g.height) * kCellPixels;
    std::ostringstream s;
    s << "<rect class=\"grid\" x=\"0\" y=\"0\" width=\"" << num(w) << "\" height=\"" << num(h)
      << "\" fill=\"#f4f4f4\" stroke=\"#999\"/>\n";

    for (std::size_t a = 0; a < frame.cells.size(); ++a) {
        for (std::size_t b = a + 1; b < frame.cells.size(); ++b) {
            const auto &x = frame.cells[a];
            const auto &y = frame.cells[b];
            if (!x.intersects(y)) continue;
            CellRect both{std::max(x.row0, y.row0), std::min(x.row1, y.row1), std::max(x.col0, y.col0),
                          std::min(x.col1, y.col1)};
            s << "<rect class=\"overlap\" data-entities=\"" << escape(t.entity_ids[a]) << " "
              << escape(t.entity_ids[b]) << "\" x=\"" << num(static_cast<double>(both.col0) * kCellPixels)
              << "\" y=\"" << num(static_cast<double>(both.row0) * kCellPixels) << "\" width=\""
              << num(static_cast<double>(both.col1 - both.col0) * kCellPixels) << "\" height=\""
              << num(static_cast<double>(both.row1 - both.row0) * kCellPixels)
              << "\" fill=\"#000\" fill-opacity=\"0.25\"/>\n";
        }
    }

    for (std::size_t e = 0; e < frame.boxes.size(); ++e) {
        const auto &b = frame.boxes[e];
        const char *color = kPalette[e % kPalette.size()];
        s << "<rect class=\"entity\" data-entity=\"" << escape(t.entity_ids[e]) << "\" x=\"" << num(b.x0 * w)
          << "\" y=\"" << num(b.y0 * h) << "\" width=\"" << num((b.x1 - b.x0) * w) << "\" height=\""
          << num((b.y1 - b.y0) * h) << "\" fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"" << color
          << "\" stroke-width=\"2\"/>\n";
        s << "<text class=\"label\" x=\"" << num(b.x0 * w + 4) << "\" y=\"" << num(b.y0 * h + 14) << "\" fill=\""
          << color << "\" font-family=\"monospace\" font-size=\"12\">" << escape(t.entity_ids[e]) << "</text>\n";
    }
    s << "<text class=\"frame-label\" x=\"4\" y=\"" << num(h + 16) << "\" font-family=\"monospace\" "
      << "font-size=\"12\">frame " << frame.frame << " / " << (g.frames - 1) << "</text>\n";
    return s.str();
}

std::string open_svg(double w, double h) {
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w) << "\" height=\"" << num(h)
      << "\" viewBox=\"0 0 " << num(w) << " " << num(h) << "\">\n";
    return s.str();
}

} // namespace

std::vector<std::string> render_frames(const LayoutTimeline &timeline) {
    const double w = static_cast<double>(timeline.geometry.width) * kCellPixels;
    const double h = static_cast<double>(timeline.geometry.height) * kCellPixels + 24;
    std::vector<std::string> out;
    for (const auto &frame : timeline.frames) {
        out.push_back(open_svg(w, h) + frame_body(timeline, frame) + "</svg>\n");
    }
    return out;
}

std::string render_animated(const LayoutTimeline &timeline) {
    const double w = static_cast<double>(timeline.geometry.width) * kCellPixels;
    const double h = static_cast<double>(timeline.geometry.height) * kCellPixels + 24;
    const std::size_t frames = timeline.frames.size();
    std::ostringstream s;
    s << open_svg(w, h);
    std::string key_times;
    for (std::size_t k = 0; k < frames; ++k) {
        key_times += (k ? ";" : "") + num(static_cast<double>(k) / static_cast<double>(frames));
    }
    for (const auto &frame : timeline.frames) {
        std::string values;
        for (std::size_t k = 0; k < frames; ++k) {
            values += (k ? ";" : "") + std::string(k == frame.frame ? "visible" : "hidden");
        }
        s << "<g class=\"frame\" data-frame=\"" << frame.frame << "\" visibility=\""
          << (frame.frame == 0 ? "visible" : "hidden") << "\">\n"
          << "<animate attributeName=\"visibility\" calcMode=\"discrete\" dur=\""
          << num(static_cast<double>(frames) / 8.0) << "s\" repeatCount=\"indefinite\" keyTimes=\"" << key_times
          << "\" values=\"" << values << "\"/>\n"
          << frame_body(timeline, frame) << "</g>\n";
    }
    s << "</svg>\n";
    return s.str();
}

std::string render_heatmap(const Matrix &heat, const std::string &title) {
    const double w = static_cast<double>(heat.cols) * kCellPixels;
    const double h = static_cast<double>(heat.rows) * kCellPixels + 24;
    double peak = 0.0;
    for (double v : heat.data) peak = std::max(peak, v);
    std::ostringstream s;
    s << open_svg(w, h);
    for (std::size_t r = 0; r < heat.rows; ++r) {
        for (std::size_t c = 0; c < heat.cols; ++c) {
            double v = peak > 0.0 ? heat(r, c) / peak : 0.0;
            int level = 255 - static_cast<int>(v * 255.0 + 0.5);
            char fill[8];
            std::snprintf(fill, sizeof(fill), "#%02x%02x%02x", level, level, level);
            s << "<rect class=\"cell\" data-row=\"" << r << "\" data-col=\"" << c << "\" data-weight=\""
              << heat(r, c) << "\" x=\"" << num(static_cast<double>(c) * kCellPixels) << "\" y=\""
              << num(static_cast<double>(r) * kCellPixels) << "\" width=\"" << num(kCellPixels) << "\" height=\""
              << num(kCellPixels) << "\" fill=\"" << fill << "\"/>\n";
        }
    }
    s << "<text x=\"4\" y=\"" << num(h - 8) << "\" font-family=\"monospace\" font-size=\"12\">" << escape(title)
      << "</text>\n</svg>\n";
    return s.str();
}

} // namespace dyst
