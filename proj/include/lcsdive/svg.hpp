#pragma once

#include <array>
#include <filesystem>
#include <sstream>
#include <string>
#include <string_view>

namespace lcsdive::svg {

/// Streaming SVG document with fixed-precision coordinates so output is stable across platforms.
class Document {
public:
    Document(double width, double height);

    Document& rect(double x, double y, double w, double h, std::string_view fill, std::string_view extra = {});
    Document& line(double x1, double y1, double x2, double y2, std::string_view stroke, double width = 1.0);
    Document& polyline(std::string_view points, std::string_view stroke, double width = 1.0);
    Document& circle(double cx, double cy, double r, std::string_view fill, std::string_view stroke = "none");
    Document& text(double x, double y, std::string_view content, double size = 10.0, std::string_view anchor = "start",
                   double rotate = 0.0);
    Document& raw(std::string_view fragment);

    void save(const std::filesystem::path& path) const;
    std::string str() const;

private:
    double width_;
    double height_;
    std::ostringstream body_;
};

/// Fixed three-decimal number for attribute values.
std::string num(double v);
std::string escape(std::string_view s);

using Rgb = std::array<double, 3>;
std::string hex(const Rgb& c);

/// Linear three-anchor gradient (dark, mid, bright) at t in [0, 1].
Rgb gradient(double t);

/// Distinct categorical colour for index k (cycles after the palette).
std::string category_color(std::size_t k);

} // namespace lcsdive::svg
