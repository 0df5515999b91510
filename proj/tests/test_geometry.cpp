#include <doctest.h>

#include <cmath>
#include <random>

#include "rastervec/geometry.hpp"

using namespace rastervec::geom;

namespace {

Primitive random_primitive(PrimitiveClass cls, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.1, 0.9);
    switch (cls) {
        case PrimitiveClass::Line:
            return Primitive::line(u(rng), u(rng), u(rng), u(rng));
        case PrimitiveClass::Circle: {
            const double r = std::uniform_real_distribution<double>(0.05, 0.3)(rng);
            return Primitive::circle(u(rng), u(rng), r, r);
        }
        case PrimitiveClass::Arc: {
            // Build from a random center form so the midpoint is exact.
            ArcCenterForm f;
            f.cx = u(rng);
            f.cy = u(rng);
            f.radius = std::uniform_real_distribution<double>(0.05, 0.3)(rng);
            f.start_angle = std::uniform_real_distribution<double>(-3.14, 3.14)(rng);
            f.sweep = std::uniform_real_distribution<double>(0.3, 5.5)(rng);
            if (rng() & 1) f.sweep = -f.sweep;
            const Point a = f.at(0.0), b = f.at(1.0), m = f.at(0.5);
            return Primitive::arc(a.x, a.y, b.x, b.y, m.x, m.y);
        }
        default:
            return {};
    }
}

Primitive swap_endpoints(const Primitive& p) {
    Primitive q = p;
    std::swap(q.params[0], q.params[2]);
    std::swap(q.params[1], q.params[3]);
    return q;
}

}  // namespace

TEST_CASE("canonicalize sorts endpoints lexicographically") {
    const Primitive l = canonicalize(Primitive::line(0.5, 0.5, 0.1, 0.1));
    CHECK(l.params[0] == doctest::Approx(0.1));
    CHECK(l.params[2] == doctest::Approx(0.5));

    const Primitive c = canonicalize(Primitive::circle(0.5, 0.5, 0.2, 0.2));
    CHECK(c.params[0] == 0.5);
    CHECK(c.params[2] == 0.2);

    const Primitive a = canonicalize(Primitive::arc(0.9, 0.1, 0.1, 0.1, 0.5, 0.4));
    CHECK(a.params[0] == doctest::Approx(0.1));
    CHECK(a.params[2] == doctest::Approx(0.9));
    CHECK(a.params[4] == doctest::Approx(0.5));
    CHECK(a.params[5] == doctest::Approx(0.4));
}

TEST_CASE("bbox_of line and circle") {
    const BBox lb = bbox_of(Primitive::line(0.1, 0.1, 0.5, 0.3));
    CHECK(lb.cx == doctest::Approx(0.3));
    CHECK(lb.cy == doctest::Approx(0.2));
    CHECK(lb.w == doctest::Approx(0.4));
    CHECK(lb.h == doctest::Approx(0.2));

    const BBox cb = bbox_of(Primitive::circle(0.5, 0.5, 0.25, 0.25));
    CHECK(cb.cx == doctest::Approx(0.5));
    CHECK(cb.w == doctest::Approx(0.5));
    CHECK(cb.h == doctest::Approx(0.5));
}

TEST_CASE("bbox_of arc matches dense sampling oracle") {
    const Primitive arc = Primitive::arc(0.2, 0.5, 0.8, 0.5, 0.5, 0.2);
    const BBox b = bbox_of(arc);
    CHECK(b.cx == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(b.cy == doctest::Approx(0.35).epsilon(1e-9));
    CHECK(b.w == doctest::Approx(0.6).epsilon(1e-9));
    CHECK(b.h == doctest::Approx(0.3).epsilon(1e-9));

    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const Primitive p = random_primitive(PrimitiveClass::Arc, rng);
        const auto pts = sample_points(p, 10000);
        double x0 = 1e9, x1 = -1e9, y0 = 1e9, y1 = -1e9;
        for (const auto& q : pts) {
            x0 = std::min(x0, q.x);
            x1 = std::max(x1, q.x);
            y0 = std::min(y0, q.y);
            y1 = std::max(y1, q.y);
        }
        const BBox bb = bbox_of(p);
        CHECK(bb.x0() == doctest::Approx(x0).epsilon(1e-5));
        CHECK(bb.x1() == doctest::Approx(x1).epsilon(1e-5));
        CHECK(bb.y0() == doctest::Approx(y0).epsilon(1e-5));
        CHECK(bb.y1() == doctest::Approx(y1).epsilon(1e-5));
    }
}

TEST_CASE("class_distance examples") {
    const double a[4] = {0.1, 0.1, 0.5, 0.5};
    const double b[4] = {0.5, 0.5, 0.1, 0.1};
    CHECK(class_distance(PrimitiveClass::Line, a, b) == doctest::Approx(0.0));

    const double c1[4] = {0.5, 0.5, 0.3, 0.3};
    const double c2[4] = {0.5, 0.5, 0.2, 0.2};
    CHECK(class_distance(PrimitiveClass::Circle, c1, c2) == doctest::Approx(0.05));

    std::mt19937_64 rng(3);
    const Primitive arc = random_primitive(PrimitiveClass::Arc, rng);
    CHECK(class_distance(arc, swap_endpoints(arc)) == doctest::Approx(0.0));
}

TEST_CASE("box_distance is elementwise L1") {
    const BBox x{0.5, 0.5, 0.2, 0.2};
    CHECK(box_distance(x, x) == 0.0);
    CHECK(box_distance(x, {0.5, 0.5, 0.2, 0.4}) == doctest::Approx(0.2));

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0, 1);
    for (int t = 0; t < 100; ++t) {
        const BBox a{u(rng), u(rng), u(rng), u(rng)};
        const BBox b{u(rng), u(rng), u(rng), u(rng)};
        const double expect = std::abs(a.cx - b.cx) + std::abs(a.cy - b.cy) +
                              std::abs(a.w - b.w) + std::abs(a.h - b.h);
        CHECK(box_distance(a, b) == doctest::Approx(expect));
    }
}

TEST_CASE("eval_points") {
    const auto circ = eval_points(Primitive::circle(0.5, 0.5, 0.25, 0.25), 128, 128);
    REQUIRE(circ.size() == 4);
    CHECK(circ[0].x == doctest::Approx(96));
    CHECK(circ[0].y == doctest::Approx(64));
    CHECK(circ[1].x == doctest::Approx(64));
    CHECK(circ[1].y == doctest::Approx(96));
    CHECK(circ[2].x == doctest::Approx(32));
    CHECK(circ[3].y == doctest::Approx(32));

    const auto line = eval_points(Primitive::line(0, 0, 1, 1), 128, 128);
    REQUIRE(line.size() == 2);
    CHECK(line[1].x == doctest::Approx(128));

    std::mt19937_64 rng(5);
    const Primitive arc = random_primitive(PrimitiveClass::Arc, rng);
    const auto pts = eval_points(arc, 128, 128);
    REQUIRE(pts.size() == 3);
    const ArcCenterForm f = arc_center_form(arc);
    const Point mid = f.at(0.5);
    CHECK(pts[1].x == doctest::Approx(mid.x * 128).epsilon(1e-9));
    CHECK(pts[1].y == doctest::Approx(mid.y * 128).epsilon(1e-9));
}

TEST_CASE("eval_distance examples") {
    const Primitive c1 = Primitive::circle(0.5, 0.5, 0.25, 0.25);
    CHECK(eval_distance(c1, c1) == 0.0);
    const Primitive c2 = Primitive::circle(0.5, 0.5, 30.0 / 128, 30.0 / 128);
    CHECK(eval_distance(c1, c2) == doctest::Approx(2.0));

    const Primitive l1 = Primitive::line(0.1, 0.2, 0.6, 0.7);
    const Primitive l2 = Primitive::line(0.1 + 3.0 / 128, 0.2, 0.6 + 3.0 / 128, 0.7);
    CHECK(eval_distance(l1, l2) == doctest::Approx(3.0));

    CHECK(std::isinf(eval_distance(c1, l1)));
}

TEST_CASE("transform_primitive") {
    std::mt19937_64 rng(17);
    for (auto cls : {PrimitiveClass::Line, PrimitiveClass::Circle, PrimitiveClass::Arc}) {
        const Primitive p = random_primitive(cls, rng);
        Transform rot;
        rot.kind = Transform::Kind::Rot90;
        Primitive q = p;
        for (int i = 0; i < 4; ++i) q = transform_primitive(q, rot);
        for (int i = 0; i < p.n_params(); ++i)
            CHECK(q.params[i] == doctest::Approx(p.params[i]).epsilon(1e-12));
    }

    Transform hflip;
    hflip.kind = Transform::Kind::HFlip;
    const Primitive flipped =
        canonicalize(transform_primitive(Primitive::line(0.1, 0.2, 0.4, 0.2), hflip));
    CHECK(flipped.params[0] == doctest::Approx(0.6));
    CHECK(flipped.params[2] == doctest::Approx(0.9));

    // crop then inverse crop composes to the identity
    Transform crop;
    crop.kind = Transform::Kind::Crop;
    crop.x0 = 0.05;
    crop.y0 = 0.1;
    crop.w = 0.8;
    crop.h = 0.7;
    Transform uncrop;
    uncrop.kind = Transform::Kind::Crop;
    uncrop.x0 = -crop.x0 / crop.w;
    uncrop.y0 = -crop.y0 / crop.h;
    uncrop.w = 1.0 / crop.w;
    uncrop.h = 1.0 / crop.h;
    const Primitive line = Primitive::line(0.2, 0.3, 0.6, 0.5);
    const Primitive rt = transform_primitive(transform_primitive(line, crop), uncrop);
    for (int i = 0; i < 4; ++i)
        CHECK(rt.params[i] == doctest::Approx(line.params[i]).epsilon(1e-9));

    CHECK_THROWS_AS(transform_primitive(Primitive::line(0.0, 0.3, 0.6, 0.5), crop),
                    CropCutsPrimitive);
}

TEST_CASE("arc_center_form") {
    const ArcCenterForm f = arc_center_form(Primitive::arc(0, 0.5, 1, 0.5, 0.5, 0));
    CHECK(f.cx == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(f.cy == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(f.radius == doctest::Approx(0.5).epsilon(1e-12));

    CHECK_THROWS_AS(arc_center_form(Primitive::arc(0.1, 0.1, 0.5, 0.5, 0.3, 0.3)), CollinearArc);

    // circumcenter matches an algebraic least-squares circle fit (Kasa fit)
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        const Primitive arc = random_primitive(PrimitiveClass::Arc, rng);
        const auto pts = sample_points(arc, 100);
        double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0, sxz = 0, syz = 0, sz = 0;
        for (const auto& p : pts) {
            const double z = p.x * p.x + p.y * p.y;
            sx += p.x; sy += p.y; sxx += p.x * p.x; syy += p.y * p.y;
            sxy += p.x * p.y; sxz += p.x * z; syz += p.y * z; sz += z;
        }
        const double n = pts.size();
        // solve [sxx sxy sx; sxy syy sy; sx sy n] [a b c]' = [sxz syz sz]'
        // with center (a/2, b/2)
        double A[3][4] = {{sxx, sxy, sx, sxz}, {sxy, syy, sy, syz}, {sx, sy, n, sz}};
        for (int i = 0; i < 3; ++i) {
            int piv = i;
            for (int r = i + 1; r < 3; ++r)
                if (std::abs(A[r][i]) > std::abs(A[piv][i])) piv = r;
            std::swap(A[i], A[piv]);
            for (int r = 0; r < 3; ++r) {
                if (r == i) continue;
                const double m = A[r][i] / A[i][i];
                for (int cidx = i; cidx < 4; ++cidx) A[r][cidx] -= m * A[i][cidx];
            }
        }
        const double fit_cx = A[0][3] / A[0][0] / 2;
        const double fit_cy = A[1][3] / A[1][1] / 2;
        const ArcCenterForm cf = arc_center_form(arc);
        CHECK(cf.cx == doctest::Approx(fit_cx).epsilon(1e-6));
        CHECK(cf.cy == doctest::Approx(fit_cy).epsilon(1e-6));
    }
}

TEST_CASE("distance axioms over random pairs") {
    std::mt19937_64 rng(42);
    for (auto cls : {PrimitiveClass::Line, PrimitiveClass::Circle, PrimitiveClass::Arc}) {
        for (int t = 0; t < 1000; ++t) {
            const Primitive a = random_primitive(cls, rng);
            const Primitive b = random_primitive(cls, rng);
            const double dab = class_distance(a, b);
            CHECK(dab >= 0.0);
            CHECK(std::abs(dab - class_distance(b, a)) <= 1e-12);
            CHECK(class_distance(a, a) == 0.0);
            // canonicalization never changes distances
            CHECK(std::abs(class_distance(canonicalize(a), canonicalize(b)) - dab) <= 1e-12);
            // eval distance symmetry and endpoint-swap invariance
            const double e = eval_distance(a, b);
            CHECK(std::abs(e - eval_distance(b, a)) <= 1e-9);
            if (cls != PrimitiveClass::Circle) {
                CHECK(std::abs(eval_distance(swap_endpoints(a), b) - e) <= 1e-9);
                CHECK(class_distance(a, swap_endpoints(a)) <= 1e-12);
            }
        }
    }
}

TEST_CASE("bbox commutes with flips") {
    std::mt19937_64 rng(9);
    Transform hflip;
    hflip.kind = Transform::Kind::HFlip;
    Transform vflip;
    vflip.kind = Transform::Kind::VFlip;
    for (auto cls : {PrimitiveClass::Line, PrimitiveClass::Circle, PrimitiveClass::Arc}) {
        for (int t = 0; t < 100; ++t) {
            const Primitive p = random_primitive(cls, rng);
            for (const auto& tf : {hflip, vflip}) {
                const BBox direct = bbox_of(transform_primitive(p, tf));
                const BBox mapped = transform_bbox(bbox_of(p), tf);
                CHECK(direct.cx == doctest::Approx(mapped.cx).epsilon(1e-9));
                CHECK(direct.cy == doctest::Approx(mapped.cy).epsilon(1e-9));
                CHECK(direct.w == doctest::Approx(mapped.w).epsilon(1e-9));
                CHECK(direct.h == doctest::Approx(mapped.h).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("arc center form round trip") {
    std::mt19937_64 rng(31);
    for (int t = 0; t < 200; ++t) {
        const Primitive arc = random_primitive(PrimitiveClass::Arc, rng);
        const ArcCenterForm f = arc_center_form(arc);
        const Point e1 = f.at(0.0), e2 = f.at(1.0), m = f.at(0.5);
        CHECK(e1.x == doctest::Approx(arc.params[0]).epsilon(1e-9));
        CHECK(e1.y == doctest::Approx(arc.params[1]).epsilon(1e-9));
        CHECK(e2.x == doctest::Approx(arc.params[2]).epsilon(1e-9));
        CHECK(e2.y == doctest::Approx(arc.params[3]).epsilon(1e-9));
        CHECK(m.x == doctest::Approx(arc.params[4]).epsilon(1e-9));
        CHECK(m.y == doctest::Approx(arc.params[5]).epsilon(1e-9));
    }
}
