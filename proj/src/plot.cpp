#include "mdmt/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace mdmt {

namespace {

constexpr double kPanelW = 420, kPanelH = 300, kMarginL = 70, kMarginR = 20, kMarginT = 30,
                 kMarginB = 40;
const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::string escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
        if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else if (c == '&') out += "&amp;";
        else out += c;
    }
    return out;
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void add(double v)
    {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void settle()
    {
        if (!std::isfinite(lo)) lo = 0, hi = 1;
        if (hi == lo) lo -= 0.5, hi += 0.5;
    }
    double map(double v, double a, double b) const { return a + (v - lo) / (hi - lo) * (b - a); }
};

void draw_frame(std::ostringstream& o, double ox, double oy, const std::string& title, const Range& xr,
                const Range& yr, bool log_y)
{
    const double x0 = ox + kMarginL, x1 = ox + kPanelW - kMarginR;
    const double y0 = oy + kPanelH - kMarginB, y1 = oy + kMarginT;
    o << "<rect x='" << x0 << "' y='" << y1 << "' width='" << x1 - x0 << "' height='" << y0 - y1
      << "' fill='none' stroke='#444'/>\n";
    o << "<text x='" << (x0 + x1) / 2 << "' y='" << oy + 18
      << "' text-anchor='middle' font-size='13'>" << escape(title) << "</text>\n";
    auto ylab = [&](double v) { return log_y ? fmt(std::pow(10.0, v)) : fmt(v); };
    o << "<text x='" << x0 - 4 << "' y='" << y0 << "' text-anchor='end' font-size='10'>" << ylab(yr.lo)
      << "</text>\n";
    o << "<text x='" << x0 - 4 << "' y='" << y1 + 10 << "' text-anchor='end' font-size='10'>"
      << ylab(yr.hi) << "</text>\n";
    o << "<text x='" << x0 << "' y='" << y0 + 14 << "' font-size='10'>" << fmt(xr.lo) << "</text>\n";
    o << "<text x='" << x1 << "' y='" << y0 + 14 << "' text-anchor='end' font-size='10'>"
      << fmt(xr.hi) << "</text>\n";
}

std::string svg_open(double w, double h)
{
    std::ostringstream o;
    o << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h
      << "' font-family='sans-serif'>\n<rect width='100%' height='100%' fill='white'/>\n";
    return o.str();
}

} // namespace

std::string render_line_panels(const std::vector<Panel>& panels, std::size_t columns)
{
    columns = std::max<std::size_t>(1, std::min(columns, std::max<std::size_t>(1, panels.size())));
    const std::size_t rows = (panels.size() + columns - 1) / columns;
    std::ostringstream o;
    o << svg_open(kPanelW * static_cast<double>(columns), kPanelH * static_cast<double>(rows));

    for (std::size_t p = 0; p < panels.size(); ++p) {
        const auto& panel = panels[p];
        const double ox = kPanelW * static_cast<double>(p % columns);
        const double oy = kPanelH * static_cast<double>(p / columns);
        auto ty = [&](double v) { return panel.log_y ? std::log10(v) : v; };

        Range xr, yr;
        for (const auto& s : panel.series) {
            for (double x : s.x) xr.add(x);
            for (double y : s.y)
                if (!panel.log_y || y > 0) yr.add(ty(y));
        }
        for (double h : panel.hlines)
            if (!panel.log_y || h > 0) yr.add(ty(h));
        xr.settle();
        yr.settle();
        draw_frame(o, ox, oy, panel.title, xr, yr, panel.log_y);

        const double x0 = ox + kMarginL, x1 = ox + kPanelW - kMarginR;
        const double y0 = oy + kPanelH - kMarginB, y1 = oy + kMarginT;
        for (std::size_t s = 0; s < panel.series.size(); ++s) {
            const auto& series = panel.series[s];
            const char* color = kColors[s % std::size(kColors)];
            o << "<polyline fill='none' stroke-width='1.2' stroke='" << color << "' points='";
            for (std::size_t i = 0; i < series.x.size() && i < series.y.size(); ++i) {
                if (panel.log_y && series.y[i] <= 0) continue;
                if (!std::isfinite(series.y[i])) continue;
                o << xr.map(series.x[i], x0, x1) << ',' << yr.map(ty(series.y[i]), y0, y1) << ' ';
            }
            o << "'/>\n";
            o << "<text x='" << x1 - 4 << "' y='" << y1 + 14 + 12 * static_cast<double>(s)
              << "' text-anchor='end' font-size='10' fill='" << color << "'>" << escape(series.label)
              << "</text>\n";
        }
        for (double h : panel.hlines) {
            if (panel.log_y && h <= 0) continue;
            const double y = yr.map(ty(h), y0, y1);
            o << "<line x1='" << x0 << "' x2='" << x1 << "' y1='" << y << "' y2='" << y
              << "' stroke='#888' stroke-dasharray='4,3'/>\n";
        }
    }
    o << "</svg>\n";
    return o.str();
}

std::vector<Panel> loss_panels(const std::vector<LossBreakdown>& history, const LossWeights& w)
{
    const std::size_t stride = std::max<std::size_t>(1, history.size() / 1000);
    Series rec_a{"domain A", {}, {}}, rec_b{"domain B", {}, {}}, cls_a{"domain A", {}, {}},
        cls_b{"domain B", {}, {}}, sparse{"mask", {}, {}},
        total{"total", {}, {}};
    for (std::size_t e = 0; e < history.size(); e += stride) {
        const auto& l = history[e];
        const double x = static_cast<double>(e + 1);
        for (auto* s : {&rec_a, &rec_b, &cls_a, &cls_b, &sparse, &total}) s->x.push_back(x);
        rec_a.y.push_back(w.alpha * l.rec[0]);
        rec_b.y.push_back(w.alpha * l.rec[1]);
        cls_a.y.push_back(w.gamma * l.cls[0]);
        cls_b.y.push_back(w.gamma * l.cls[1]);
        sparse.y.push_back(w.theta * l.sparse);
        total.y.push_back(l.total);
    }
    const bool two = std::any_of(history.begin(), history.end(),
                                 [](const LossBreakdown& l) { return l.rec[1] != 0 || l.cls[1] != 0; });
    Panel a{"reconstruction (weighted)", {rec_a}, {}, true};
    Panel b{"classification (weighted)", {cls_a}, {}, true};
    if (two) {
        a.series.push_back(rec_b);
        b.series.push_back(cls_b);
    }
    return {a, b, Panel{"sparsity (weighted)", {sparse}, {}, false},
            Panel{"total", {total}, {}, true}};
}

Panel frequency_panel(const FeatureReport& report, const std::string& title)
{
    Series s{"frequency", {}, {}};
    for (std::size_t r = 0; r < report.ranked.size(); ++r) {
        s.x.push_back(static_cast<double>(r + 1));
        s.y.push_back(report.ranked[r].frequency);
    }
    return Panel{title, {s}, {report.frequency_threshold}, false};
}

std::string render_pca_scatter(const PcaProjection& pca, const std::string& title)
{
    std::ostringstream o;
    o << svg_open(kPanelW * 1.5, kPanelH * 1.5);
    const double sx = 1.5;
    Range xr, yr;
    for (Eigen::Index i = 0; i < pca.coords.rows(); ++i) {
        xr.add(pca.coords(i, 0));
        yr.add(pca.coords(i, 1));
    }
    xr.settle();
    yr.settle();
    const std::string t = pca.degenerate ? title + " (degenerate)" : title;

    const double x0 = kMarginL, x1 = kPanelW * sx - kMarginR;
    const double y0 = kPanelH * sx - kMarginB, y1 = kMarginT;
    o << "<rect x='" << x0 << "' y='" << y1 << "' width='" << x1 - x0 << "' height='" << y0 - y1
      << "' fill='none' stroke='#444'/>\n";
    o << "<text x='" << (x0 + x1) / 2 << "' y='18' text-anchor='middle' font-size='13'>" << escape(t)
      << "</text>\n";
    o << "<text x='" << (x0 + x1) / 2 << "' y='" << y0 + 28 << "' text-anchor='middle' font-size='11'>PC1 ("
      << fmt(pca.variance[0]) << ")</text>\n";
    o << "<text x='14' y='" << (y0 + y1) / 2 << "' font-size='11' transform='rotate(-90 14 "
      << (y0 + y1) / 2 << ")' text-anchor='middle'>PC2 (" << fmt(pca.variance[1]) << ")</text>\n";

    std::vector<std::string> domains;
    for (const auto& d : pca.domains)
        if (std::find(domains.begin(), domains.end(), d) == domains.end()) domains.push_back(d);
    for (Eigen::Index i = 0; i < pca.coords.rows(); ++i) {
        const auto k = static_cast<std::size_t>(i);
        const double x = xr.map(pca.coords(i, 0), x0, x1), y = yr.map(pca.coords(i, 1), y0, y1);
        const char* color = kColors[static_cast<std::size_t>(std::max(0, pca.labels[k])) % std::size(kColors)];
        const auto dom = std::find(domains.begin(), domains.end(), pca.domains[k]) - domains.begin();
        if (dom == 0)
            o << "<circle cx='" << x << "' cy='" << y << "' r='3' fill='" << color << "' fill-opacity='0.7'/>\n";
        else
            o << "<rect x='" << x - 3 << "' y='" << y - 3 << "' width='6' height='6' fill='none' stroke='"
              << color << "'/>\n";
    }
    for (std::size_t d = 0; d < domains.size(); ++d)
        o << "<text x='" << x1 - 4 << "' y='" << y1 + 14 + 12 * static_cast<double>(d)
          << "' text-anchor='end' font-size='10'>" << (d == 0 ? "o " : "[] ") << escape(domains[d])
          << "</text>\n";
    o << "</svg>\n";
    return o.str();
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

} // namespace mdmt
