#include "invabc/svg.hpp"

#include "invabc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace invabc::svg {

namespace {

constexpr double kW = 640, kH = 420;
constexpr double kL = 70, kR = 610, kT = 45, kB = 370;

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

std::string esc(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '&') out += "&amp;";
        else if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else out += c;
    }
    return out;
}

struct Frame {
    double xlo = 0, xhi = 1, ylo = 0, yhi = 1;
    std::ostringstream out;

    double px(double x) const { return kL + (x - xlo) / (xhi - xlo) * (kR - kL); }
    double py(double y) const { return kB - (y - ylo) / (yhi - ylo) * (kB - kT); }

    void begin(const std::string& title, const std::string& xlabel, const std::string& ylabel) {
        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" "
               "viewBox=\"0 0 640 420\">\n";
        out << "<rect x=\"0\" y=\"0\" width=\"640\" height=\"420\" fill=\"#ffffff\"/>\n";
        out << "<text x=\"320\" y=\"24\" text-anchor=\"middle\" "
               "font-family=\"sans-serif\" font-size=\"15\">"
            << esc(title) << "</text>\n";
        out << "<text x=\"340\" y=\"408\" text-anchor=\"middle\" "
               "font-family=\"sans-serif\" font-size=\"13\">"
            << esc(xlabel) << "</text>\n";
        if (!ylabel.empty())
            out << "<text x=\"18\" y=\"208\" text-anchor=\"middle\" "
                   "font-family=\"sans-serif\" font-size=\"13\" "
                   "transform=\"rotate(-90 18 208)\">"
                << esc(ylabel) << "</text>\n";
    }

    void axes() {
        out << "<rect x=\"" << fmt("%.2f", kL) << "\" y=\"" << fmt("%.2f", kT) << "\" width=\""
            << fmt("%.2f", kR - kL) << "\" height=\"" << fmt("%.2f", kB - kT)
            << "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
        for (int i = 0; i <= 4; ++i) {
            double xv = xlo + (xhi - xlo) * i / 4.0;
            double yv = ylo + (yhi - ylo) * i / 4.0;
            double x = px(xv), y = py(yv);
            out << "<line x1=\"" << fmt("%.2f", x) << "\" y1=\"" << fmt("%.2f", kB) << "\" x2=\""
                << fmt("%.2f", x) << "\" y2=\"" << fmt("%.2f", kB + 5)
                << "\" stroke=\"#333333\"/>\n";
            out << "<text x=\"" << fmt("%.2f", x) << "\" y=\"" << fmt("%.2f", kB + 19)
                << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
                << fmt("%.4g", xv) << "</text>\n";
            out << "<line x1=\"" << fmt("%.2f", kL - 5) << "\" y1=\"" << fmt("%.2f", y)
                << "\" x2=\"" << fmt("%.2f", kL) << "\" y2=\"" << fmt("%.2f", y)
                << "\" stroke=\"#333333\"/>\n";
            out << "<text x=\"" << fmt("%.2f", kL - 8) << "\" y=\"" << fmt("%.2f", y + 4)
                << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
                << fmt("%.4g", yv) << "</text>\n";
        }
    }

    void vline(double x, const char* color) {
        out << "<line x1=\"" << fmt("%.2f", px(x)) << "\" y1=\"" << fmt("%.2f", kT) << "\" x2=\""
            << fmt("%.2f", px(x)) << "\" y2=\"" << fmt("%.2f", kB) << "\" stroke=\"" << color
            << "\" stroke-width=\"1.5\" stroke-dasharray=\"6,4\"/>\n";
    }

    void hline(double y, const char* color) {
        out << "<line x1=\"" << fmt("%.2f", kL) << "\" y1=\"" << fmt("%.2f", py(y)) << "\" x2=\""
            << fmt("%.2f", kR) << "\" y2=\"" << fmt("%.2f", py(y)) << "\" stroke=\"" << color
            << "\" stroke-width=\"1.5\" stroke-dasharray=\"6,4\"/>\n";
    }

    void save(const std::string& path) {
        out << "</svg>\n";
        std::ofstream f(path, std::ios::binary);
        if (!f) throw IoError("cannot write " + path);
        const std::string s = out.str();
        f.write(s.data(), static_cast<std::streamsize>(s.size()));
        if (!f) throw IoError("write error on " + path);
    }
};

void pad_range(double& lo, double& hi) {
    if (!(std::isfinite(lo) && std::isfinite(hi))) throw NumericError("non-finite plot range");
    if (lo == hi) {
        double d = lo == 0.0 ? 0.5 : std::abs(lo) * 0.05;
        lo -= d;
        hi += d;
        return;
    }
    double d = (hi - lo) * 0.05;
    lo -= d;
    hi += d;
}

} // namespace

void write_histogram(const std::string& path, const std::string& title,
                     const std::string& xlabel, const std::vector<double>& values,
                     const std::vector<double>& weights, std::size_t bins, double lo, double hi,
                     double marker) {
    if (!weights.empty() && weights.size() != values.size())
        throw ShapeError("histogram weights size mismatch");
    if (bins == 0) throw ConfigError("histogram needs at least one bin");
    if (!(lo < hi)) throw ConfigError("histogram range must have lo < hi");

    std::vector<double> mass(bins, 0.0);
    for (std::size_t i = 0; i < values.size(); ++i) {
        double v = values[i];
        if (!(v >= lo && v <= hi)) continue;
        auto b = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(bins));
        if (b >= bins) b = bins - 1;
        mass[b] += weights.empty() ? 1.0 : weights[i];
    }
    double peak = *std::max_element(mass.begin(), mass.end());
    if (peak <= 0.0) peak = 1.0;

    Frame fr;
    fr.xlo = lo;
    fr.xhi = hi;
    fr.ylo = 0.0;
    fr.yhi = peak * 1.05;
    fr.begin(title, xlabel, "weight");
    for (std::size_t b = 0; b < bins; ++b) {
        if (mass[b] <= 0.0) continue;
        double x0 = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins);
        double x1 = lo + (hi - lo) * static_cast<double>(b + 1) / static_cast<double>(bins);
        fr.out << "<rect x=\"" << fmt("%.2f", fr.px(x0)) << "\" y=\""
               << fmt("%.2f", fr.py(mass[b])) << "\" width=\""
               << fmt("%.2f", fr.px(x1) - fr.px(x0)) << "\" height=\""
               << fmt("%.2f", fr.py(0.0) - fr.py(mass[b]))
               << "\" fill=\"#5b8db8\" stroke=\"#2f5e86\" stroke-width=\"0.5\"/>\n";
    }
    if (std::isfinite(marker)) fr.vline(marker, "#c0392b");
    fr.axes();
    fr.save(path);
}

void write_line_plot(const std::string& path, const std::string& title,
                     const std::string& xlabel, const std::string& ylabel,
                     const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.empty()) throw ShapeError("line plot needs matching x/y");
    double xlo = *std::min_element(xs.begin(), xs.end());
    double xhi = *std::max_element(xs.begin(), xs.end());
    double ylo = *std::min_element(ys.begin(), ys.end());
    double yhi = *std::max_element(ys.begin(), ys.end());
    pad_range(xlo, xhi);
    pad_range(ylo, yhi);

    Frame fr;
    fr.xlo = xlo;
    fr.xhi = xhi;
    fr.ylo = ylo;
    fr.yhi = yhi;
    fr.begin(title, xlabel, ylabel);
    fr.out << "<polyline fill=\"none\" stroke=\"#2f5e86\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) fr.out << ' ';
        fr.out << fmt("%.2f", fr.px(xs[i])) << ',' << fmt("%.2f", fr.py(ys[i]));
    }
    fr.out << "\"/>\n";
    for (std::size_t i = 0; i < xs.size(); ++i)
        fr.out << "<circle cx=\"" << fmt("%.2f", fr.px(xs[i])) << "\" cy=\""
               << fmt("%.2f", fr.py(ys[i])) << "\" r=\"2.5\" fill=\"#2f5e86\"/>\n";
    fr.axes();
    fr.save(path);
}

void write_bar_plot(const std::string& path, const std::string& title, const std::string& xlabel,
                    const std::string& ylabel, const std::vector<double>& heights,
                    double reference) {
    if (heights.empty()) throw ShapeError("bar plot needs at least one bar");
    double peak = *std::max_element(heights.begin(), heights.end());
    if (std::isfinite(reference)) peak = std::max(peak, reference);
    if (peak <= 0.0) peak = 1.0;

    Frame fr;
    fr.xlo = 0.5;
    fr.xhi = static_cast<double>(heights.size()) + 0.5;
    fr.ylo = 0.0;
    fr.yhi = peak * 1.05;
    fr.begin(title, xlabel, ylabel);
    for (std::size_t i = 0; i < heights.size(); ++i) {
        if (heights[i] <= 0.0) continue;
        double c = static_cast<double>(i) + 1.0;
        fr.out << "<rect x=\"" << fmt("%.2f", fr.px(c - 0.35)) << "\" y=\""
               << fmt("%.2f", fr.py(heights[i])) << "\" width=\""
               << fmt("%.2f", fr.px(c + 0.35) - fr.px(c - 0.35)) << "\" height=\""
               << fmt("%.2f", fr.py(0.0) - fr.py(heights[i]))
               << "\" fill=\"#5b8db8\" stroke=\"#2f5e86\" stroke-width=\"0.5\"/>\n";
    }
    if (std::isfinite(reference)) fr.hline(reference, "#c0392b");
    fr.axes();
    fr.save(path);
}

} // namespace invabc::svg
