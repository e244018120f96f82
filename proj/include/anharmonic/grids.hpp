#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace anharmonic {

inline std::vector<double> geometric_grid(double lo, double hi, std::size_t points) {
    if (!(lo > 0.0) || !(hi >= lo) || points == 0) throw std::invalid_argument("geometric_grid: need 0 < lo <= hi");
    if (points == 1) return {lo};
    std::vector<double> g(points);
    const double r = std::log(hi / lo) / static_cast<double>(points - 1);
    for (std::size_t i = 0; i < points; ++i) g[i] = lo * std::exp(r * static_cast<double>(i));
    g.back() = hi;
    return g;
}

inline std::vector<double> linear_grid(double lo, double hi, std::size_t points) {
    if (!(hi >= lo) || points == 0) throw std::invalid_argument("linear_grid: need lo <= hi");
    if (points == 1) return {lo};
    std::vector<double> g(points);
    for (std::size_t i = 0; i < points; ++i)
        g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    g.back() = hi;
    return g;
}

}  // namespace anharmonic
