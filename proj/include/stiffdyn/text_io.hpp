#pragma once

// Small text-format helpers shared by the file writers. All floating-point
// values are emitted with %.17g so that save/load round-trips are exact and
// repeated runs produce byte-identical files.

#include <cstdio>
#include <string>

namespace stiffdyn {

inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace stiffdyn
