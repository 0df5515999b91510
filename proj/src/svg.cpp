#include "rastervec/svg.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace rastervec::geom {

namespace {

constexpr double kPi = 3.14159265358979323846;

void append_primitive(std::ostream& out, const Primitive& p, double w, double h,
                      const SvgOptions& opt) {
    switch (p.cls) {
        case PrimitiveClass::Line:
            out << "  <line x1=\"" << p.params[0] * w << "\" y1=\"" << p.params[1] * h
                << "\" x2=\"" << p.params[2] * w << "\" y2=\"" << p.params[3] * h
                << "\" stroke=\"" << opt.line_color << "\"/>\n";
            break;
        case PrimitiveClass::Circle:
            out << "  <circle cx=\"" << p.params[0] * w << "\" cy=\"" << p.params[1] * h
                << "\" r=\"" << p.params[2] * w << "\" fill=\"none\" stroke=\""
                << opt.circle_color << "\"/>\n";
            break;
        case PrimitiveClass::Arc: {
            // Center form computed on pixel coordinates so the path is exact
            // for non-square images too.
            const Primitive px = Primitive::arc(p.params[0] * w, p.params[1] * h,
                                                p.params[2] * w, p.params[3] * h,
                                                p.params[4] * w, p.params[5] * h);
            const ArcCenterForm f = arc_center_form(px);
            const int large_arc = std::abs(f.sweep) > kPi ? 1 : 0;
            const int sweep_flag = f.sweep > 0 ? 1 : 0;
            out << "  <path d=\"M " << px.params[0] << " " << px.params[1] << " A " << f.radius
                << " " << f.radius << " 0 " << large_arc << " " << sweep_flag << " "
                << px.params[2] << " " << px.params[3] << "\" fill=\"none\" stroke=\""
                << opt.arc_color << "\"/>\n";
            break;
        }
        default:
            break;
    }
}

}  // namespace

std::string annotation_to_svg(const Annotation& ann, const SvgOptions& opt) {
    std::ostringstream out;
    out.precision(10);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << ann.width << "\" height=\""
        << ann.height << "\" viewBox=\"0 0 " << ann.width << " " << ann.height << "\">\n";
    if (!opt.backdrop_href.empty()) {
        out << "  <image href=\"" << opt.backdrop_href << "\" x=\"0\" y=\"0\" width=\""
            << ann.width << "\" height=\"" << ann.height << "\"/>\n";
    }
    out << "  <g stroke-width=\"" << opt.stroke_width << "\" stroke-linecap=\"round\">\n";
    std::ostringstream body;
    body.precision(10);
    for (const auto& p : ann.primitives) append_primitive(body, p, ann.width, ann.height, opt);
    out << body.str() << "  </g>\n</svg>\n";
    return out.str();
}

void save_svg(const std::string& path, const Annotation& ann, const SvgOptions& opt) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << annotation_to_svg(ann, opt);
}

}  // namespace rastervec::geom
