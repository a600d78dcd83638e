#pragma once

#include <cstdio>
#include <string>

namespace isloss {

/// printf-style %.{digits}g, locale independent enough for CSV output.
inline std::string format_number(double v, int digits = 12) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

inline std::string format_fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

}  // namespace isloss
