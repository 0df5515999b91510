#pragma once

#include <string>

#include "rastervec/annotation.hpp"

namespace rastervec::geom {

struct SvgOptions {
    double stroke_width = 2.0;
    std::string line_color = "#e6194b";
    std::string circle_color = "#3cb44b";
    std::string arc_color = "#4363d8";
    std::string backdrop_href;  // optional raster layer under the strokes
};

// Lines as <line>, circles as <circle>, arcs as <path> elliptical-arc
// commands derived from the arc center form.
std::string annotation_to_svg(const Annotation& ann, const SvgOptions& opt = {});
void save_svg(const std::string& path, const Annotation& ann, const SvgOptions& opt = {});

}  // namespace rastervec::geom
