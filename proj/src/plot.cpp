#include <algorithm>
#include <cmath>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "rastervec/plot.hpp"

namespace rastervec::plot {

namespace {

const cv::Scalar kPalette[] = {{60, 76, 231}, {96, 174, 39}, {216, 99, 67},
                               {0, 140, 255}, {164, 73, 163}, {0, 0, 0}};

constexpr int kW = 920, kH = 640, kMargin = 80;

cv::Point2d to_px(double x, double y, double x0, double x1, double y0, double y1) {
    const double fx = x1 > x0 ? (x - x0) / (x1 - x0) : 0.5;
    const double fy = y1 > y0 ? (y - y0) / (y1 - y0) : 0.5;
    return {kMargin + fx * (kW - 2 * kMargin), kH - kMargin - fy * (kH - 2 * kMargin)};
}

void draw_frame(cv::Mat& img, const std::string& title, double x0, double x1, double y0,
                double y1) {
    cv::rectangle(img, {kMargin, kMargin}, {kW - kMargin, kH - kMargin}, {90, 90, 90}, 1);
    cv::putText(img, title, {kMargin, kMargin - 30}, cv::FONT_HERSHEY_SIMPLEX, 0.8,
                {30, 30, 30}, 2, cv::LINE_AA);
    char buf[64];
    for (int t = 0; t <= 4; ++t) {
        const double xv = x0 + (x1 - x0) * t / 4, yv = y0 + (y1 - y0) * t / 4;
        const auto px = to_px(xv, y0, x0, x1, y0, y1);
        const auto py = to_px(x0, yv, x0, x1, y0, y1);
        std::snprintf(buf, sizeof buf, "%.3g", xv);
        cv::putText(img, buf, {int(px.x) - 12, kH - kMargin + 24}, cv::FONT_HERSHEY_SIMPLEX,
                    0.45, {60, 60, 60}, 1, cv::LINE_AA);
        std::snprintf(buf, sizeof buf, "%.3g", yv);
        cv::putText(img, buf, {10, int(py.y) + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.45, {60, 60, 60},
                    1, cv::LINE_AA);
        cv::line(img, {int(px.x), kH - kMargin}, {int(px.x), kH - kMargin + 5}, {90, 90, 90}, 1);
        cv::line(img, {kMargin - 5, int(py.y)}, {kMargin, int(py.y)}, {90, 90, 90}, 1);
    }
}

}  // namespace

std::pair<std::vector<double>, std::map<std::string, std::vector<double>>> curve_series(
    const eval::Report& report) {
    if (report.curve.empty()) throw EmptyInput("report has no AP sweep");
    std::vector<double> x;
    std::map<std::string, std::vector<double>> series;
    for (const auto& [delta, values] : report.curve) {
        x.push_back(delta);
        for (const auto& [name, ap] : values) series[name].push_back(ap);
    }
    return {x, series};
}

void line_chart(const std::string& path, const std::string& title,
                const std::vector<double>& x,
                const std::map<std::string, std::vector<double>>& series) {
    if (x.empty() || series.empty()) throw EmptyInput("line_chart: nothing to draw");
    double y0 = 0, y1 = 0;
    for (const auto& [name, ys] : series) {
        if (ys.size() != x.size()) throw EmptyInput("line_chart: series length mismatch");
        for (const double v : ys) {
            y0 = std::min(y0, v);
            y1 = std::max(y1, v);
        }
    }
    if (y1 <= y0) y1 = y0 + 1;
    const double x0 = x.front(), x1 = x.back() > x.front() ? x.back() : x.front() + 1;

    cv::Mat img(kH, kW, CV_8UC3, cv::Scalar(255, 255, 255));
    draw_frame(img, title, x0, x1, y0, y1);
    int si = 0;
    for (const auto& [name, ys] : series) {
        const cv::Scalar color = kPalette[si % 6];
        for (size_t i = 0; i + 1 < x.size(); ++i) {
            const auto a = to_px(x[i], ys[i], x0, x1, y0, y1);
            const auto b = to_px(x[i + 1], ys[i + 1], x0, x1, y0, y1);
            cv::line(img, {int(a.x), int(a.y)}, {int(b.x), int(b.y)}, color, 2, cv::LINE_AA);
        }
        for (size_t i = 0; i < x.size(); ++i) {
            const auto a = to_px(x[i], ys[i], x0, x1, y0, y1);
            cv::circle(img, {int(a.x), int(a.y)}, 3, color, cv::FILLED, cv::LINE_AA);
        }
        cv::putText(img, name, {kW - kMargin - 140, kMargin + 24 + 24 * si},
                    cv::FONT_HERSHEY_SIMPLEX, 0.55, color, 2, cv::LINE_AA);
        ++si;
    }
    if (!cv::imwrite(path, img)) throw std::runtime_error("cannot write plot: " + path);
}

void histogram(const std::string& path, const std::string& title,
               const std::map<std::string, int>& counts) {
    if (counts.empty()) throw EmptyInput("histogram: nothing to draw");
    int peak = 1;
    for (const auto& [name, c] : counts) peak = std::max(peak, c);

    cv::Mat img(kH, kW, CV_8UC3, cv::Scalar(255, 255, 255));
    draw_frame(img, title, 0, static_cast<double>(counts.size()), 0, peak);
    const double span = kW - 2.0 * kMargin;
    const double bar = span / counts.size();
    int i = 0;
    char buf[32];
    for (const auto& [name, c] : counts) {
        const auto top = to_px(0, c, 0, 1, 0, peak);
        cv::rectangle(img,
                      {int(kMargin + i * bar + bar * 0.15), int(top.y)},
                      {int(kMargin + (i + 1) * bar - bar * 0.15), kH - kMargin},
                      kPalette[i % 6], cv::FILLED);
        cv::putText(img, name, {int(kMargin + i * bar + bar * 0.2), kH - kMargin + 24},
                    cv::FONT_HERSHEY_SIMPLEX, 0.5, {30, 30, 30}, 1, cv::LINE_AA);
        std::snprintf(buf, sizeof buf, "%d", c);
        cv::putText(img, buf, {int(kMargin + i * bar + bar * 0.3), int(top.y) - 8},
                    cv::FONT_HERSHEY_SIMPLEX, 0.5, {30, 30, 30}, 1, cv::LINE_AA);
        ++i;
    }
    if (!cv::imwrite(path, img)) throw std::runtime_error("cannot write plot: " + path);
}

}  // namespace rastervec::plot
