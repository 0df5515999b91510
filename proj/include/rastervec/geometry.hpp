#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

// Geometric primitives in normalized image coordinates.
//
// All coordinates are fractions of the image width (x) and height (y).
// Arc geometry (circumcircle, arc-length parametrization) is computed in
// the normalized unit square; generated images are square so the
// normalized arc coincides with the drawn pixel-space arc.

namespace rastervec::geom {

struct CollinearArc : std::runtime_error {
    explicit CollinearArc(const std::string& what) : std::runtime_error(what) {}
};
struct ClassMismatch : std::runtime_error {
    explicit ClassMismatch(const std::string& what) : std::runtime_error(what) {}
};
struct CropCutsPrimitive : std::runtime_error {
    explicit CropCutsPrimitive(const std::string& what) : std::runtime_error(what) {}
};

enum class PrimitiveClass : int { Line = 0, Circle = 1, Arc = 2, NoPrimitive = 3 };

constexpr int kNumClasses = 3;  // concrete classes only

constexpr int param_count(PrimitiveClass c) {
    switch (c) {
        case PrimitiveClass::Line: return 4;
        case PrimitiveClass::Circle: return 4;
        case PrimitiveClass::Arc: return 6;
        case PrimitiveClass::NoPrimitive: return 0;
    }
    return 0;
}

// Offset of each class's slice inside the concatenated parameter block.
// Layout is fixed everywhere: [line(4) | circle(4) | arc(6)], total 14.
constexpr int param_offset(PrimitiveClass c) {
    switch (c) {
        case PrimitiveClass::Line: return 0;
        case PrimitiveClass::Circle: return 4;
        case PrimitiveClass::Arc: return 8;
        case PrimitiveClass::NoPrimitive: return 14;
    }
    return 14;
}

constexpr int kParamTotal = 14;

const char* class_name(PrimitiveClass c);
PrimitiveClass class_from_name(const std::string& name);

struct Primitive {
    PrimitiveClass cls = PrimitiveClass::NoPrimitive;
    // Line: x1,y1,x2,y2. Circle: cx,cy,rx,ry. Arc: x1,y1,x2,y2,xm,ym.
    std::array<double, 6> params{};

    int n_params() const { return param_count(cls); }

    static Primitive line(double x1, double y1, double x2, double y2);
    static Primitive circle(double cx, double cy, double rx, double ry);
    static Primitive arc(double x1, double y1, double x2, double y2, double xm, double ym);
};

struct BBox {
    double cx = 0, cy = 0, w = 0, h = 0;
    double x0() const { return cx - w / 2; }
    double y0() const { return cy - h / 2; }
    double x1() const { return cx + w / 2; }
    double y1() const { return cy + h / 2; }
};

struct Point {
    double x = 0, y = 0;
};

// Center form of an arc. The sweep starts at angle `start_angle`
// (endpoint 1) and covers the signed angle `sweep` (positive =
// counter-clockwise in coordinate space); the arc midpoint sits at
// start_angle + sweep/2.
struct ArcCenterForm {
    double cx = 0, cy = 0, radius = 0;
    double start_angle = 0;
    double sweep = 0;
    Point at(double fraction) const;  // fraction in [0,1] along the sweep
};

Primitive canonicalize(const Primitive& p);
BBox bbox_of(const Primitive& p);
ArcCenterForm arc_center_form(const Primitive& arc);

// Normalized L1 distance, minimized over equivalent parametrizations.
double class_distance(PrimitiveClass c, const double* a, const double* b);
double class_distance(const Primitive& a, const Primitive& b);

double box_distance(const BBox& a, const BBox& b);

// Landmark points in a target pixel frame (the 128x128 evaluation frame).
std::vector<Point> eval_points(const Primitive& p, double target_w, double target_h);

// Mean point-wise L2 distance between landmarks, +inf across classes.
double eval_distance(const Primitive& pred, const Primitive& gt,
                     double target_w = 128.0, double target_h = 128.0);

struct Transform {
    enum class Kind { Resize, HFlip, VFlip, Rot90, Crop };
    Kind kind = Kind::Resize;
    int quarter_turns = 1;             // Rot90: counter-clockwise quarter turns
    double x0 = 0, y0 = 0, w = 1, h = 1;  // Crop window, normalized
};

Primitive transform_primitive(const Primitive& p, const Transform& t);
BBox transform_bbox(const BBox& b, const Transform& t);

// Uniform samples along the drawn primitive, in normalized coordinates.
std::vector<Point> sample_points(const Primitive& p, int count);

}  // namespace rastervec::geom
