#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <string>
#include <vector>

#include "spectralnet/errors.hpp"

namespace spectralnet {

// Binary (P5) 8-bit PGM with min-max scaling; a constant raster maps to 0.
inline void write_pgm(const std::string& path, const double* data, std::size_t height,
                      std::size_t width) {
    const std::size_t n = height * width;
    double lo = data[0], hi = data[0];
    for (std::size_t i = 1; i < n; ++i) {
        lo = std::min(lo, data[i]);
        hi = std::max(hi, data[i]);
    }
    const double span = hi - lo;

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError(path + ": cannot open for writing");
    out << "P5\n" << width << " " << height << "\n255\n";
    std::vector<unsigned char> row(width);
    for (std::size_t r = 0; r < height; ++r) {
        for (std::size_t c = 0; c < width; ++c) {
            const double v = span > 0.0 ? (data[r * width + c] - lo) / span : 0.0;
            row[c] = static_cast<unsigned char>(std::clamp(v * 255.0 + 0.5, 0.0, 255.0));
        }
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(width));
    }
    if (!out) throw InputError(path + ": write failed");
}

}  // namespace spectralnet
