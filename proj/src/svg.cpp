#include "lcsdive/svg.hpp"

#include "lcsdive/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace lcsdive::svg {

std::string num(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    std::string s(buf);
    s.erase(s.find_last_not_of('0') + 1);
    if (s.back() == '.') s.pop_back();
    if (s == "-0") s = "0";
    return s;
}

std::string escape(std::string_view s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string hex(const Rgb& c)
{
    char buf[8];
    auto channel = [](double v) { return static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); };
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", channel(c[0]), channel(c[1]), channel(c[2]));
    return buf;
}

Rgb gradient(double t)
{
    static constexpr Rgb dark{0.07, 0.05, 0.22};
    static constexpr Rgb mid{0.78, 0.18, 0.35};
    static constexpr Rgb bright{0.99, 0.91, 0.60};
    t = std::clamp(t, 0.0, 1.0);
    const Rgb& a = t < 0.5 ? dark : mid;
    const Rgb& b = t < 0.5 ? mid : bright;
    const double u = t < 0.5 ? 2.0 * t : 2.0 * t - 1.0;
    return {a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1]), a[2] + u * (b[2] - a[2])};
}

std::string category_color(std::size_t k)
{
    static constexpr std::array<const char*, 20> palette{
        "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
        "#aec7e8", "#ffbb78", "#98df8a", "#ff9896", "#c5b0d5", "#c49c94", "#f7b6d2", "#c7c7c7", "#dbdb8d", "#9edae5"};
    return palette[k % palette.size()];
}

Document::Document(double width, double height) : width_(width), height_(height) {}

Document& Document::rect(double x, double y, double w, double h, std::string_view fill, std::string_view extra)
{
    body_ << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w) << "\" height=\"" << num(h)
          << "\" fill=\"" << fill << '"';
    if (!extra.empty()) body_ << ' ' << extra;
    body_ << "/>\n";
    return *this;
}

Document& Document::line(double x1, double y1, double x2, double y2, std::string_view stroke, double width)
{
    body_ << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2) << "\" y2=\"" << num(y2)
          << "\" stroke=\"" << stroke << "\" stroke-width=\"" << num(width) << "\"/>\n";
    return *this;
}

Document& Document::polyline(std::string_view points, std::string_view stroke, double width)
{
    body_ << "<polyline points=\"" << points << "\" fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\""
          << num(width) << "\"/>\n";
    return *this;
}

Document& Document::circle(double cx, double cy, double r, std::string_view fill, std::string_view stroke)
{
    body_ << "<circle cx=\"" << num(cx) << "\" cy=\"" << num(cy) << "\" r=\"" << num(r) << "\" fill=\"" << fill
          << "\" stroke=\"" << stroke << "\"/>\n";
    return *this;
}

Document& Document::text(double x, double y, std::string_view content, double size, std::string_view anchor,
                         double rotate)
{
    body_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-size=\"" << num(size)
          << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << '"';
    if (rotate != 0.0) body_ << " transform=\"rotate(" << num(rotate) << ' ' << num(x) << ' ' << num(y) << ")\"";
    body_ << '>' << escape(content) << "</text>\n";
    return *this;
}

Document& Document::raw(std::string_view fragment)
{
    body_ << fragment;
    return *this;
}

std::string Document::str() const
{
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width_) << "\" height=\"" << num(height_)
        << "\" viewBox=\"0 0 " << num(width_) << ' ' << num(height_) << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n"
        << body_.str() << "</svg>\n";
    return out.str();
}

void Document::save(const std::filesystem::path& path) const
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeFailure("cannot write " + path.string());
    out << str();
    if (!out) throw RuntimeFailure("write failed: " + path.string());
}

} // namespace lcsdive::svg
