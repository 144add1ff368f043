#pragma once

#include <cmath>
#include <string>

#include "nvsim/params.hpp"

namespace testing {

inline nvsim::Config defaults(double h_p = 4e-9)
{
    nvsim::Config c;
    c.probe.h_p = h_p;
    return c;
}

inline bool rel_close(double a, double b, double tol)
{
    return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
}

inline bool contains(const std::string& haystack, const std::string& needle)
{
    return haystack.find(needle) != std::string::npos;
}

} // namespace testing
