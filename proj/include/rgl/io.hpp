#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "rgl/errors.hpp"

// CSV/SVG/file plumbing: comma-separated with '.' decimals and LF endings,
// atomic writes (temp file + rename), and a tiny env-controlled logger.

namespace rgl {

inline int log_level() {
    static const int level = [] {
        const char* env = std::getenv("RGL_LOG");
        if (!env) return 0;
        const std::string v(env);
        if (v == "debug") return 2;
        if (v == "info") return 1;
        return 0;
    }();
    return level;
}

inline void log_info(const std::string& msg) {
    if (log_level() >= 1) std::fprintf(stderr, "[rgl] %s\n", msg.c_str());
}
inline void log_debug(const std::string& msg) {
    if (log_level() >= 2) std::fprintf(stderr, "[rgl:debug] %s\n", msg.c_str());
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// whole-file atomic write: the final path either holds the old content or the
// complete new content, never a partial file
inline void atomic_write(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(target.parent_path(), ec);
    }
    const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoFailure("cannot open " + tmp.string() + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw IoFailure("short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoFailure("rename to " + path + " failed: " + ec.message());
    }
}

class CsvBuilder {
  public:
    explicit CsvBuilder(const std::vector<std::string>& header) {
        append_row_strings(header);
    }
    void add(const std::vector<double>& row) {
        std::vector<std::string> cells;
        cells.reserve(row.size());
        for (double v : row) cells.push_back(format_double(v));
        append_row_strings(cells);
    }
    void add_mixed(const std::vector<std::string>& row) { append_row_strings(row); }
    const std::string& str() const { return body_; }

  private:
    void append_row_strings(const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) {
            if (i) body_ += ',';
            body_ += cells[i];
        }
        body_ += '\n';
    }
    std::string body_;
};

// Minimal self-contained SVG line plot with error bars.
inline std::string svg_curve_plot(const std::string& title, const std::vector<double>& xs,
                                  const std::vector<double>& ys, const std::vector<double>& errs,
                                  const std::string& x_label, const std::string& y_label,
                                  double reference_line = 0.0) {
    const int w = 640, h = 420, ml = 70, mr = 20, mt = 40, mb = 50;
    double xmin = xs.front(), xmax = xs.front(), ymin = ys.front(), ymax = ys.front();
    for (size_t i = 0; i < xs.size(); ++i) {
        xmin = std::min(xmin, xs[i]);
        xmax = std::max(xmax, xs[i]);
        ymin = std::min(ymin, ys[i] - errs[i]);
        ymax = std::max(ymax, ys[i] + errs[i]);
    }
    if (reference_line > 0.0) {
        ymin = std::min(ymin, reference_line);
        ymax = std::max(ymax, reference_line);
    }
    const double ypad = std::max(1e-12, 0.08 * (ymax - ymin));
    ymin -= ypad;
    ymax += ypad;
    const double xpad = std::max(1e-12, 0.05 * (xmax - xmin));
    xmin -= xpad;
    xmax += xpad;
    auto sx = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (w - ml - mr); };
    auto sy = [&](double y) { return h - mb - (y - ymin) / (ymax - ymin) * (h - mt - mb); };

    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) +
         "\" height=\"" + std::to_string(h) + "\" viewBox=\"0 0 " + std::to_string(w) + " " +
         std::to_string(h) + "\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<text x=\"" + std::to_string(w / 2) + "\" y=\"24\" text-anchor=\"middle\" "
         "font-family=\"monospace\" font-size=\"15\">" + title + "</text>\n";
    // axes
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"black\"/>\n", ml,
                  h - mb, w - mr, h - mb);
    s += buf;
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"black\"/>\n", ml, mt,
                  ml, h - mb);
    s += buf;
    for (int t = 0; t <= 4; ++t) {
        const double xv = xmin + (xmax - xmin) * t / 4.0;
        const double yv = ymin + (ymax - ymin) * t / 4.0;
        std::snprintf(buf, sizeof(buf),
                      "<text x=\"%.1f\" y=\"%d\" text-anchor=\"middle\" font-family=\"monospace\" "
                      "font-size=\"11\">%.3g</text>\n",
                      sx(xv), h - mb + 18, xv);
        s += buf;
        std::snprintf(buf, sizeof(buf),
                      "<text x=\"%d\" y=\"%.1f\" text-anchor=\"end\" font-family=\"monospace\" "
                      "font-size=\"11\">%.5g</text>\n",
                      ml - 6, sy(yv) + 4, yv);
        s += buf;
    }
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%d\" y=\"%d\" text-anchor=\"middle\" font-family=\"monospace\" "
                  "font-size=\"12\">%s</text>\n",
                  (ml + w - mr) / 2, h - 12, x_label.c_str());
    s += buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"16\" y=\"%d\" text-anchor=\"middle\" font-family=\"monospace\" "
                  "font-size=\"12\" transform=\"rotate(-90 16 %d)\">%s</text>\n",
                  (mt + h - mb) / 2, (mt + h - mb) / 2, y_label.c_str());
    s += buf;
    if (reference_line > 0.0) {
        std::snprintf(buf, sizeof(buf),
                      "<line x1=\"%d\" y1=\"%.2f\" x2=\"%d\" y2=\"%.2f\" stroke=\"#888\" "
                      "stroke-dasharray=\"6 4\"/>\n",
                      ml, sy(reference_line), w - mr, sy(reference_line));
        s += buf;
    }
    // error bars + markers + polyline
    std::string poly;
    for (size_t i = 0; i < xs.size(); ++i) {
        const double px = sx(xs[i]), py = sy(ys[i]);
        const double lo = sy(ys[i] - errs[i]), hi = sy(ys[i] + errs[i]);
        std::snprintf(buf, sizeof(buf),
                      "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"#c33\"/>\n",
                      px, lo, px, hi);
        s += buf;
        std::snprintf(buf, sizeof(buf),
                      "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"#c33\"/>\n",
                      px - 4, lo, px + 4, lo);
        s += buf;
        std::snprintf(buf, sizeof(buf),
                      "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"#c33\"/>\n",
                      px - 4, hi, px + 4, hi);
        s += buf;
        std::snprintf(buf, sizeof(buf), "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"#36c\"/>\n",
                      px, py);
        s += buf;
        std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", px, py);
        poly += buf;
    }
    s += "<polyline points=\"" + poly + "\" fill=\"none\" stroke=\"#36c\" stroke-width=\"1.5\"/>\n";
    s += "</svg>\n";
    return s;
}

}  // namespace rgl
