#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "rastervec/evaluation.hpp"

namespace rastervec::plot {

struct EmptyInput : std::runtime_error {
    explicit EmptyInput(const std::string& what) : std::runtime_error(what) {}
};

// Per-class AP series extracted verbatim from a report's sweep (no
// smoothing); first element of the pair is the shared x axis.
std::pair<std::vector<double>, std::map<std::string, std::vector<double>>> curve_series(
    const eval::Report& report);

void line_chart(const std::string& path, const std::string& title,
                const std::vector<double>& x,
                const std::map<std::string, std::vector<double>>& series);

void histogram(const std::string& path, const std::string& title,
               const std::map<std::string, int>& counts);

}  // namespace rastervec::plot
