#pragma once

// Minimal self-contained SVG line charts.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace nemsfit::svg {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::string color = "#1f77b4";
    bool markers = false;
};

struct Chart {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
    int width = 720;
    int height = 420;
};

namespace detail {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace detail

inline std::string render(const Chart& c) {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : c.series)
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    if (!(x0 < x1)) { x0 -= 0.5; x1 += 0.5; }
    if (!(y0 < y1)) { y0 -= 0.5; y1 += 0.5; }
    if (!std::isfinite(x0)) { x0 = 0; x1 = 1; y0 = 0; y1 = 1; }

    const double ml = 70, mr = 20, mt = 36, mb = 50;
    const double pw = c.width - ml - mr, ph = c.height - mt - mb;
    auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return mt + (1.0 - (y - y0) / (y1 - y0)) * ph; };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << c.width << "\" height=\"" << c.height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << c.width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << detail::escape(c.title)
      << "</text>\n";
    o << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
        o << "<text x=\"" << detail::num(px(xv)) << "\" y=\"" << detail::num(mt + ph + 16)
          << "\" text-anchor=\"middle\">" << detail::tick(xv) << "</text>\n";
        o << "<text x=\"" << detail::num(ml - 6) << "\" y=\"" << detail::num(py(yv) + 4) << "\" text-anchor=\"end\">"
          << detail::tick(yv) << "</text>\n";
    }
    o << "<text x=\"" << ml + pw / 2 << "\" y=\"" << c.height - 10 << "\" text-anchor=\"middle\">"
      << detail::escape(c.x_label) << "</text>\n";
    o << "<text x=\"16\" y=\"" << mt + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << mt + ph / 2
      << ")\">" << detail::escape(c.y_label) << "</text>\n";

    int legend = 0;
    for (const auto& s : c.series) {
        o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
            if (std::isfinite(s.x[i]) && std::isfinite(s.y[i]))
                o << detail::num(px(s.x[i])) << ',' << detail::num(py(s.y[i])) << ' ';
        o << "\"/>\n";
        if (s.markers)
            for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
                if (std::isfinite(s.x[i]) && std::isfinite(s.y[i]))
                    o << "<circle cx=\"" << detail::num(px(s.x[i])) << "\" cy=\"" << detail::num(py(s.y[i]))
                      << "\" r=\"3\" fill=\"" << s.color << "\"/>\n";
        if (!s.label.empty()) {
            const double ly = mt + 14 + 16 * legend++;
            o << "<line x1=\"" << ml + pw - 120 << "\" y1=\"" << ly - 4 << "\" x2=\"" << ml + pw - 100 << "\" y2=\""
              << ly - 4 << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
            o << "<text x=\"" << ml + pw - 94 << "\" y=\"" << ly << "\">" << detail::escape(s.label) << "</text>\n";
        }
    }
    o << "</svg>\n";
    return o.str();
}

}  // namespace nemsfit::svg
