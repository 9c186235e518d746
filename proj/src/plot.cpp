#include "bsmf/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "bsmf/errors.hpp"

namespace bsmf {

namespace {

constexpr int kWidth = 720;
constexpr int kHeight = 480;
constexpr int kMarginL = 70, kMarginR = 160, kMarginT = 40, kMarginB = 55;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt_tick(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

} // namespace

void write_svg_plot(const std::filesystem::path& path, const std::string& title,
                    const std::string& x_label, const std::string& y_label,
                    const std::vector<PlotSeries>& series) {
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    if (!(xmin < xmax)) xmax = xmin + 1.0;
    if (!(ymin < ymax)) ymax = ymin + 1.0;
    double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    auto sx = [&](double x) {
        return kMarginL + (x - xmin) / (xmax - xmin) * (kWidth - kMarginL - kMarginR);
    };
    auto sy = [&](double y) {
        return kHeight - kMarginB - (y - ymin) / (ymax - ymin) * (kHeight - kMarginT - kMarginB);
    };

    std::ofstream out(path);
    if (!out)
        throw Error(ErrorCode::InvalidArgument, "cannot write plot: " + path.string());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
        << "\" height=\"" << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">"
        << title << "</text>\n";

    // axes with 6 ticks per side
    out << "<line x1=\"" << kMarginL << "\" y1=\"" << kHeight - kMarginB << "\" x2=\""
        << kWidth - kMarginR << "\" y2=\"" << kHeight - kMarginB
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << kMarginL << "\" y1=\"" << kMarginT << "\" x2=\"" << kMarginL
        << "\" y2=\"" << kHeight - kMarginB << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        double xv = xmin + (xmax - xmin) * i / 5.0;
        double yv = ymin + (ymax - ymin) * i / 5.0;
        out << "<line x1=\"" << sx(xv) << "\" y1=\"" << kHeight - kMarginB << "\" x2=\""
            << sx(xv) << "\" y2=\"" << kHeight - kMarginB + 5 << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << sx(xv) << "\" y=\"" << kHeight - kMarginB + 18
            << "\" text-anchor=\"middle\">" << fmt_tick(xv) << "</text>\n";
        out << "<line x1=\"" << kMarginL - 5 << "\" y1=\"" << sy(yv) << "\" x2=\"" << kMarginL
            << "\" y2=\"" << sy(yv) << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << kMarginL - 8 << "\" y=\"" << sy(yv) + 4
            << "\" text-anchor=\"end\">" << fmt_tick(yv) << "</text>\n";
    }
    out << "<text x=\"" << (kMarginL + kWidth - kMarginR) / 2 << "\" y=\"" << kHeight - 12
        << "\" text-anchor=\"middle\">" << x_label << "</text>\n";
    out << "<text x=\"18\" y=\"" << (kMarginT + kHeight - kMarginB) / 2
        << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
        << (kMarginT + kHeight - kMarginB) / 2 << ")\">" << y_label << "</text>\n";

    int ci = 0;
    for (const auto& s : series) {
        const char* color = kPalette[ci % (sizeof kPalette / sizeof kPalette[0])];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.6\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i)
            out << sx(s.x[i]) << "," << sy(s.y[i]) << " ";
        out << "\"/>\n";
        int ly = kMarginT + 16 * ci;
        out << "<line x1=\"" << kWidth - kMarginR + 10 << "\" y1=\"" << ly << "\" x2=\""
            << kWidth - kMarginR + 34 << "\" y2=\"" << ly << "\" stroke=\"" << color
            << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << kWidth - kMarginR + 40 << "\" y=\"" << ly + 4 << "\">"
            << s.label << "</text>\n";
        ++ci;
    }
    out << "</svg>\n";
}

} // namespace bsmf
