#pragma once

#include <cmath>
#include <cstddef>
#include <limits>

namespace nvsim {

/// Golden-section search for a minimum of a unimodal f on [a, b].
template <class F>
double golden_section_minimize(F&& f, double a, double b, double tolerance)
{
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c);
    double fd = f(d);
    while (std::abs(b - a) > tolerance) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

/// Brackets the global minimum on a uniform grid, then refines it with
/// golden-section search inside the neighbouring grid cells.
template <class F>
double minimize_on_grid_then_golden(F&& f, double lo, double hi, std::size_t grid_points,
                                    double tolerance)
{
    std::size_t best = 0;
    double best_value = std::numeric_limits<double>::infinity();
    const double step = (hi - lo) / static_cast<double>(grid_points - 1);
    for (std::size_t i = 0; i < grid_points; ++i) {
        const double v = f(lo + step * static_cast<double>(i));
        if (v < best_value) {
            best_value = v;
            best = i;
        }
    }
    const double a = lo + step * static_cast<double>(best == 0 ? 0 : best - 1);
    const double b = lo + step * static_cast<double>(best + 1 >= grid_points ? grid_points - 1 : best + 1);
    return golden_section_minimize(f, a, b, tolerance);
}

} // namespace nvsim
