#include "rastervec/annotation.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace rastervec::geom {

using nlohmann::json;

namespace {

json primitive_to_json(const Primitive& p, double w, double h) {
    json j;
    j["type"] = class_name(p.cls);
    switch (p.cls) {
        case PrimitiveClass::Line:
            j["points"] = {{p.params[0] * w, p.params[1] * h}, {p.params[2] * w, p.params[3] * h}};
            break;
        case PrimitiveClass::Circle:
            j["center"] = {p.params[0] * w, p.params[1] * h};
            j["radius"] = p.params[2] * w;  // rx*W == ry*H by invariant
            break;
        case PrimitiveClass::Arc:
            // point order on disk: endpoint, midpoint, endpoint
            j["points"] = {{p.params[0] * w, p.params[1] * h},
                           {p.params[4] * w, p.params[5] * h},
                           {p.params[2] * w, p.params[3] * h}};
            break;
        default:
            break;
    }
    return j;
}

Primitive primitive_from_json(const json& j, double w, double h) {
    const std::string type = j.at("type").get<std::string>();
    const PrimitiveClass cls = class_from_name(type);
    switch (cls) {
        case PrimitiveClass::Line: {
            const auto& pts = j.at("points");
            if (pts.size() != 2) throw std::runtime_error("line expects 2 points");
            return Primitive::line(pts[0][0].get<double>() / w, pts[0][1].get<double>() / h,
                                   pts[1][0].get<double>() / w, pts[1][1].get<double>() / h);
        }
        case PrimitiveClass::Circle: {
            const auto& c = j.at("center");
            const double r = j.at("radius").get<double>();
            return Primitive::circle(c[0].get<double>() / w, c[1].get<double>() / h, r / w, r / h);
        }
        case PrimitiveClass::Arc: {
            const auto& pts = j.at("points");
            if (pts.size() != 3) throw std::runtime_error("arc expects 3 points");
            return Primitive::arc(pts[0][0].get<double>() / w, pts[0][1].get<double>() / h,
                                  pts[2][0].get<double>() / w, pts[2][1].get<double>() / h,
                                  pts[1][0].get<double>() / w, pts[1][1].get<double>() / h);
        }
        default:
            throw std::runtime_error("unsupported primitive type: " + type);
    }
}

}  // namespace

std::string annotation_to_json(const Annotation& ann, int indent) {
    json j;
    j["image"] = ann.image;
    j["width"] = ann.width;
    j["height"] = ann.height;
    j["primitives"] = json::array();
    for (size_t i = 0; i < ann.primitives.size(); ++i) {
        json p = primitive_to_json(ann.primitives[i], ann.width, ann.height);
        if (i < ann.confidences.size()) p["confidence"] = ann.confidences[i];
        j["primitives"].push_back(std::move(p));
    }
    return j.dump(indent);
}

Annotation annotation_from_json(const std::string& text) {
    const json j = json::parse(text);
    Annotation ann;
    ann.image = j.value("image", "");
    ann.width = j.at("width").get<int>();
    ann.height = j.at("height").get<int>();
    for (const auto& pj : j.at("primitives")) {
        ann.primitives.push_back(primitive_from_json(pj, ann.width, ann.height));
        if (pj.contains("confidence")) {
            ann.confidences.resize(ann.primitives.size(), 1.0);
            ann.confidences.back() = pj["confidence"].get<double>();
        }
    }
    return ann;
}

void save_annotation(const std::string& path, const Annotation& ann) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << annotation_to_json(ann) << "\n";
}

Annotation load_annotation(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return annotation_from_json(ss.str());
}

Annotation validate_annotation(const std::string& path, std::vector<Finding>& findings) {
    Annotation ann;
    std::ifstream in(path);
    if (!in) {
        findings.push_back({path, -1, "Unreadable", "cannot open file"});
        return ann;
    }
    std::stringstream ss;
    ss << in.rdbuf();
    json j;
    try {
        j = json::parse(ss.str());
        ann.image = j.value("image", "");
        ann.width = j.at("width").get<int>();
        ann.height = j.at("height").get<int>();
    } catch (const std::exception& e) {
        findings.push_back({path, -1, "Schema", e.what()});
        return ann;
    }
    if (ann.width <= 0 || ann.height <= 0) {
        findings.push_back({path, -1, "Schema", "non-positive image size"});
        return ann;
    }
    const auto prims = j.find("primitives");
    if (prims == j.end() || !prims->is_array()) {
        findings.push_back({path, -1, "Schema", "missing primitives array"});
        return ann;
    }
    int idx = 0;
    for (const auto& pj : *prims) {
        try {
            Primitive p = primitive_from_json(pj, ann.width, ann.height);
            for (int i = 0; i < p.n_params(); ++i) {
                if (p.params[i] < -1e-9 || p.params[i] > 1 + 1e-9) {
                    findings.push_back({path, idx, "OutOfBounds",
                                        "parameter " + std::to_string(i) + " outside [0,1]"});
                    break;
                }
            }
            if (p.cls == PrimitiveClass::Circle) {
                const double diff = std::abs(p.params[2] * ann.width - p.params[3] * ann.height);
                if (diff > 1e-6 * std::max(ann.width, ann.height)) {
                    findings.push_back({path, idx, "RadiusAspect",
                                        "circle radii disagree between axes"});
                }
            }
            if (p.cls == PrimitiveClass::Arc) {
                try {
                    arc_center_form(p);
                } catch (const CollinearArc&) {
                    findings.push_back({path, idx, "CollinearArc", "arc points are collinear"});
                }
            }
            ann.primitives.push_back(p);
        } catch (const std::exception& e) {
            findings.push_back({path, idx, "Schema", e.what()});
        }
        ++idx;
    }
    return ann;
}

}  // namespace rastervec::geom
