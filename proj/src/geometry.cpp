#include "rastervec/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rastervec::geom {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kCollinearTol = 1e-9;

double wrap_angle(double a) {
    a = std::fmod(a, kTwoPi);
    if (a < 0) a += kTwoPi;
    return a;
}

bool point_less(double x1, double y1, double x2, double y2) {
    if (x1 != x2) return x1 < x2;
    return y1 < y2;
}

double l1(const double* a, const double* b, int n) {
    double s = 0;
    for (int i = 0; i < n; ++i) s += std::abs(a[i] - b[i]);
    return s;
}

// Angle lies on the sweep starting at `start` covering signed `sweep`.
bool angle_on_sweep(double angle, double start, double sweep) {
    if (sweep >= 0) return wrap_angle(angle - start) <= sweep;
    return wrap_angle(start - angle) <= -sweep;
}

}  // namespace

const char* class_name(PrimitiveClass c) {
    switch (c) {
        case PrimitiveClass::Line: return "line";
        case PrimitiveClass::Circle: return "circle";
        case PrimitiveClass::Arc: return "arc";
        case PrimitiveClass::NoPrimitive: return "none";
    }
    return "none";
}

PrimitiveClass class_from_name(const std::string& name) {
    if (name == "line") return PrimitiveClass::Line;
    if (name == "circle") return PrimitiveClass::Circle;
    if (name == "arc") return PrimitiveClass::Arc;
    if (name == "none") return PrimitiveClass::NoPrimitive;
    throw ClassMismatch("unknown primitive class: " + name);
}

Primitive Primitive::line(double x1, double y1, double x2, double y2) {
    Primitive p;
    p.cls = PrimitiveClass::Line;
    p.params = {x1, y1, x2, y2, 0, 0};
    return p;
}

Primitive Primitive::circle(double cx, double cy, double rx, double ry) {
    Primitive p;
    p.cls = PrimitiveClass::Circle;
    p.params = {cx, cy, rx, ry, 0, 0};
    return p;
}

Primitive Primitive::arc(double x1, double y1, double x2, double y2, double xm, double ym) {
    Primitive p;
    p.cls = PrimitiveClass::Arc;
    p.params = {x1, y1, x2, y2, xm, ym};
    return p;
}

Primitive canonicalize(const Primitive& p) {
    Primitive out = p;
    switch (p.cls) {
        case PrimitiveClass::Line:
        case PrimitiveClass::Arc:
            if (point_less(p.params[2], p.params[3], p.params[0], p.params[1])) {
                out.params[0] = p.params[2];
                out.params[1] = p.params[3];
                out.params[2] = p.params[0];
                out.params[3] = p.params[1];
            }
            break;
        default:
            break;
    }
    return out;
}

Point ArcCenterForm::at(double fraction) const {
    const double a = start_angle + fraction * sweep;
    return {cx + radius * std::cos(a), cy + radius * std::sin(a)};
}

ArcCenterForm arc_center_form(const Primitive& arc) {
    if (arc.cls != PrimitiveClass::Arc) throw ClassMismatch("arc_center_form expects an arc");
    const double x1 = arc.params[0], y1 = arc.params[1];
    const double x2 = arc.params[2], y2 = arc.params[3];
    const double xm = arc.params[4], ym = arc.params[5];

    const double cross = (x2 - x1) * (ym - y1) - (y2 - y1) * (xm - x1);
    if (std::abs(cross) < kCollinearTol) throw CollinearArc("arc points are collinear");

    // Circumcenter via the perpendicular-bisector linear system.
    const double d = 2.0 * (x1 * (y2 - ym) + x2 * (ym - y1) + xm * (y1 - y2));
    const double s1 = x1 * x1 + y1 * y1;
    const double s2 = x2 * x2 + y2 * y2;
    const double sm = xm * xm + ym * ym;
    ArcCenterForm f;
    f.cx = (s1 * (y2 - ym) + s2 * (ym - y1) + sm * (y1 - y2)) / d;
    f.cy = (s1 * (xm - x2) + s2 * (x1 - xm) + sm * (x2 - x1)) / d;
    f.radius = std::hypot(x1 - f.cx, y1 - f.cy);

    f.start_angle = std::atan2(y1 - f.cy, x1 - f.cx);
    const double t2 = std::atan2(y2 - f.cy, x2 - f.cx);
    const double tm = std::atan2(ym - f.cy, xm - f.cx);
    const double ccw = wrap_angle(t2 - f.start_angle);
    f.sweep = (wrap_angle(tm - f.start_angle) <= ccw) ? ccw : ccw - kTwoPi;
    return f;
}

BBox bbox_of(const Primitive& p) {
    double x0, y0, x1, y1;
    switch (p.cls) {
        case PrimitiveClass::Line: {
            x0 = std::min(p.params[0], p.params[2]);
            x1 = std::max(p.params[0], p.params[2]);
            y0 = std::min(p.params[1], p.params[3]);
            y1 = std::max(p.params[1], p.params[3]);
            break;
        }
        case PrimitiveClass::Circle: {
            x0 = p.params[0] - p.params[2];
            x1 = p.params[0] + p.params[2];
            y0 = p.params[1] - p.params[3];
            y1 = p.params[1] + p.params[3];
            break;
        }
        case PrimitiveClass::Arc: {
            const ArcCenterForm f = arc_center_form(p);
            x0 = std::min(p.params[0], p.params[2]);
            x1 = std::max(p.params[0], p.params[2]);
            y0 = std::min(p.params[1], p.params[3]);
            y1 = std::max(p.params[1], p.params[3]);
            const double cardinals[4] = {0.0, kTwoPi / 4, kTwoPi / 2, 3 * kTwoPi / 4};
            for (double a : cardinals) {
                if (!angle_on_sweep(a, f.start_angle, f.sweep)) continue;
                const double px = f.cx + f.radius * std::cos(a);
                const double py = f.cy + f.radius * std::sin(a);
                x0 = std::min(x0, px);
                x1 = std::max(x1, px);
                y0 = std::min(y0, py);
                y1 = std::max(y1, py);
            }
            break;
        }
        default:
            throw ClassMismatch("bbox_of: no bounding box for NoPrimitive");
    }
    return {(x0 + x1) / 2, (y0 + y1) / 2, x1 - x0, y1 - y0};
}

double class_distance(PrimitiveClass c, const double* a, const double* b) {
    const int m = param_count(c);
    switch (c) {
        case PrimitiveClass::Line: {
            const double swapped[4] = {b[2], b[3], b[0], b[1]};
            return std::min(l1(a, b, 4), l1(a, swapped, 4)) / 4.0;
        }
        case PrimitiveClass::Circle:
            return l1(a, b, 4) / 4.0;
        case PrimitiveClass::Arc: {
            const double swapped[6] = {b[2], b[3], b[0], b[1], b[4], b[5]};
            return std::min(l1(a, b, 6), l1(a, swapped, 6)) / 6.0;
        }
        default:
            throw ClassMismatch("class_distance: invalid class");
    }
    (void)m;
}

double class_distance(const Primitive& a, const Primitive& b) {
    if (a.cls != b.cls) throw ClassMismatch("class_distance: class mismatch");
    return class_distance(a.cls, a.params.data(), b.params.data());
}

double box_distance(const BBox& a, const BBox& b) {
    return std::abs(a.cx - b.cx) + std::abs(a.cy - b.cy) + std::abs(a.w - b.w) +
           std::abs(a.h - b.h);
}

std::vector<Point> eval_points(const Primitive& p, double tw, double th) {
    switch (p.cls) {
        case PrimitiveClass::Line:
            return {{p.params[0] * tw, p.params[1] * th}, {p.params[2] * tw, p.params[3] * th}};
        case PrimitiveClass::Circle: {
            const double cx = p.params[0], cy = p.params[1];
            const double rx = p.params[2], ry = p.params[3];
            return {{(cx + rx) * tw, cy * th},
                    {cx * tw, (cy + ry) * th},
                    {(cx - rx) * tw, cy * th},
                    {cx * tw, (cy - ry) * th}};
        }
        case PrimitiveClass::Arc: {
            const ArcCenterForm f = arc_center_form(p);
            const Point mid = f.at(0.5);
            return {{p.params[0] * tw, p.params[1] * th},
                    {mid.x * tw, mid.y * th},
                    {p.params[2] * tw, p.params[3] * th}};
        }
        default:
            return {};
    }
}

double eval_distance(const Primitive& pred, const Primitive& gt, double tw, double th) {
    if (pred.cls != gt.cls) return std::numeric_limits<double>::infinity();
    const auto a = eval_points(pred, tw, th);
    const auto b = eval_points(gt, tw, th);
    auto mean_dist = [](const std::vector<Point>& u, const std::vector<Point>& v) {
        double s = 0;
        for (size_t i = 0; i < u.size(); ++i) s += std::hypot(u[i].x - v[i].x, u[i].y - v[i].y);
        return s / static_cast<double>(u.size());
    };
    switch (pred.cls) {
        case PrimitiveClass::Line: {
            const std::vector<Point> swapped = {b[1], b[0]};
            return std::min(mean_dist(a, b), mean_dist(a, swapped));
        }
        case PrimitiveClass::Circle:
            return mean_dist(a, b);  // cardinal points matched by angle
        case PrimitiveClass::Arc: {
            const std::vector<Point> swapped = {b[2], b[1], b[0]};
            return std::min(mean_dist(a, b), mean_dist(a, swapped));
        }
        default:
            return std::numeric_limits<double>::infinity();
    }
}

namespace {

Point transform_point(Point p, const Transform& t) {
    switch (t.kind) {
        case Transform::Kind::Resize:
            return p;  // aspect-preserving resize leaves normalized coords unchanged
        case Transform::Kind::HFlip:
            return {1.0 - p.x, p.y};
        case Transform::Kind::VFlip:
            return {p.x, 1.0 - p.y};
        case Transform::Kind::Rot90: {
            Point q = p;
            const int k = ((t.quarter_turns % 4) + 4) % 4;
            for (int i = 0; i < k; ++i) q = {q.y, 1.0 - q.x};
            return q;
        }
        case Transform::Kind::Crop:
            return {(p.x - t.x0) / t.w, (p.y - t.y0) / t.h};
    }
    return p;
}

}  // namespace

Primitive transform_primitive(const Primitive& p, const Transform& t) {
    if (t.kind == Transform::Kind::Crop) {
        const BBox box = bbox_of(p);
        const double tol = 1e-9;
        if (box.x0() < t.x0 - tol || box.x1() > t.x0 + t.w + tol || box.y0() < t.y0 - tol ||
            box.y1() > t.y0 + t.h + tol) {
            throw CropCutsPrimitive("crop window cuts primitive");
        }
    }
    Primitive out = p;
    switch (p.cls) {
        case PrimitiveClass::Line:
        case PrimitiveClass::Arc: {
            const int np = p.cls == PrimitiveClass::Arc ? 3 : 2;
            for (int i = 0; i < np; ++i) {
                const Point q = transform_point({p.params[2 * i], p.params[2 * i + 1]}, t);
                out.params[2 * i] = q.x;
                out.params[2 * i + 1] = q.y;
            }
            break;
        }
        case PrimitiveClass::Circle: {
            const Point c = transform_point({p.params[0], p.params[1]}, t);
            out.params[0] = c.x;
            out.params[1] = c.y;
            double rx = p.params[2], ry = p.params[3];
            if (t.kind == Transform::Kind::Rot90 && (((t.quarter_turns % 4) + 4) % 4) % 2 == 1) {
                std::swap(rx, ry);
            } else if (t.kind == Transform::Kind::Crop) {
                rx /= t.w;
                ry /= t.h;
            }
            out.params[2] = rx;
            out.params[3] = ry;
            break;
        }
        default:
            break;
    }
    return out;
}

BBox transform_bbox(const BBox& b, const Transform& t) {
    const Point c0 = transform_point({b.x0(), b.y0()}, t);
    const Point c1 = transform_point({b.x1(), b.y1()}, t);
    const double x0 = std::min(c0.x, c1.x), x1 = std::max(c0.x, c1.x);
    const double y0 = std::min(c0.y, c1.y), y1 = std::max(c0.y, c1.y);
    double w = x1 - x0, h = y1 - y0;
    if (t.kind == Transform::Kind::Crop) {
        // already divided through transform_point
    }
    return {(x0 + x1) / 2, (y0 + y1) / 2, w, h};
}

std::vector<Point> sample_points(const Primitive& p, int count) {
    std::vector<Point> pts;
    pts.reserve(static_cast<size_t>(count));
    switch (p.cls) {
        case PrimitiveClass::Line: {
            for (int i = 0; i < count; ++i) {
                const double u = count > 1 ? static_cast<double>(i) / (count - 1) : 0.0;
                pts.push_back({p.params[0] + u * (p.params[2] - p.params[0]),
                               p.params[1] + u * (p.params[3] - p.params[1])});
            }
            break;
        }
        case PrimitiveClass::Circle: {
            for (int i = 0; i < count; ++i) {
                const double a = kTwoPi * i / count;
                pts.push_back({p.params[0] + p.params[2] * std::cos(a),
                               p.params[1] + p.params[3] * std::sin(a)});
            }
            break;
        }
        case PrimitiveClass::Arc: {
            const ArcCenterForm f = arc_center_form(p);
            for (int i = 0; i < count; ++i) {
                const double u = count > 1 ? static_cast<double>(i) / (count - 1) : 0.0;
                pts.push_back(f.at(u));
            }
            break;
        }
        default:
            break;
    }
    return pts;
}

}  // namespace rastervec::geom
