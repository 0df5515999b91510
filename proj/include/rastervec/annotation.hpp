#pragma once

#include <string>
#include <vector>

#include "rastervec/geometry.hpp"

namespace rastervec::geom {

// Ground-truth / prediction container. Primitives are stored normalized;
// the interchange JSON uses pixel coordinates.
struct Annotation {
    std::string image;
    int width = 0;
    int height = 0;
    std::vector<Primitive> primitives;
    std::vector<double> confidences;  // optional, parallel to primitives
};

struct Finding {
    std::string file;
    int index = -1;  // primitive index, -1 for file-level findings
    std::string code;
    std::string message;
};

std::string annotation_to_json(const Annotation& ann, int indent = 2);
Annotation annotation_from_json(const std::string& json_text);

void save_annotation(const std::string& path, const Annotation& ann);
Annotation load_annotation(const std::string& path);

// Lenient ingestion: schema problems, out-of-bounds parameters, collinear
// arcs and inconsistent circle radii become findings instead of throws.
Annotation validate_annotation(const std::string& path, std::vector<Finding>& findings);

}  // namespace rastervec::geom
