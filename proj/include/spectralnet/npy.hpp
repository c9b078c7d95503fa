#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "spectralnet/errors.hpp"
#include "spectralnet/tensor.hpp"

namespace spectralnet {
namespace npy {

static_assert(std::endian::native == std::endian::little,
              "NPY reader assumes a little-endian host");

// Loaded NPY payload. Values are widened to double; every accepted dtype
// (<f4, <f8, <i2, <i4, <u1, <u2) round-trips exactly through a double.
struct NpyArray {
    std::vector<std::size_t> shape;
    std::string descr;
    std::vector<double> values;

    bool integer_typed() const {
        return descr.size() >= 2 && (descr[1] == 'i' || descr[1] == 'u');
    }
    std::size_t count() const { return Tensor::count(shape); }
};

namespace detail {

inline std::string dict_value(const std::string& header, const std::string& key,
                              const std::string& path) {
    const std::string needle = "'" + key + "':";
    const std::size_t pos = header.find(needle);
    if (pos == std::string::npos)
        throw InputError(path + ": NPY header missing key '" + key + "'");
    std::size_t i = pos + needle.size();
    while (i < header.size() && header[i] == ' ') ++i;
    if (i >= header.size()) throw InputError(path + ": truncated NPY header");

    if (header[i] == '\'') {
        const std::size_t end = header.find('\'', i + 1);
        if (end == std::string::npos) throw InputError(path + ": unterminated string in header");
        return header.substr(i + 1, end - i - 1);
    }
    if (header[i] == '(') {
        const std::size_t end = header.find(')', i);
        if (end == std::string::npos) throw InputError(path + ": unterminated tuple in header");
        return header.substr(i, end - i + 1);
    }
    std::size_t end = i;
    while (end < header.size() && header[end] != ',' && header[end] != '}') ++end;
    return header.substr(i, end - i);
}

inline std::vector<std::size_t> parse_shape(const std::string& tuple, const std::string& path) {
    std::vector<std::size_t> shape;
    std::string body = tuple.substr(1, tuple.size() - 2);
    std::istringstream is(body);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        std::size_t a = tok.find_first_not_of(" \t");
        if (a == std::string::npos) continue;
        std::size_t b = tok.find_last_not_of(" \t");
        tok = tok.substr(a, b - a + 1);
        if (tok.empty()) continue;
        try {
            shape.push_back(static_cast<std::size_t>(std::stoull(tok)));
        } catch (const std::exception&) {
            throw InputError(path + ": bad extent '" + tok + "' in NPY shape");
        }
    }
    return shape;
}

template <typename T>
void widen(const std::vector<char>& raw, std::vector<double>& out) {
    const std::size_t n = raw.size() / sizeof(T);
    out.resize(n);
    const T* p = reinterpret_cast<const T*>(raw.data());
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<double>(p[i]);
}

}  // namespace detail

inline NpyArray load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError(path + ": cannot open file");

    char magic[6];
    in.read(magic, 6);
    if (!in || std::memcmp(magic, "\x93NUMPY", 6) != 0)
        throw InputError(path + ": not an NPY file (bad magic)");
    unsigned char version[2];
    in.read(reinterpret_cast<char*>(version), 2);
    if (!in || version[0] != 1 || version[1] != 0)
        throw InputError(path + ": unsupported NPY version " + std::to_string(version[0]) + "." +
                         std::to_string(version[1]) + " (need 1.0)");
    unsigned char len_bytes[2];
    in.read(reinterpret_cast<char*>(len_bytes), 2);
    if (!in) throw InputError(path + ": truncated NPY header");
    const std::size_t header_len = len_bytes[0] | (std::size_t(len_bytes[1]) << 8);

    std::string header(header_len, '\0');
    in.read(header.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw InputError(path + ": truncated NPY header");

    NpyArray arr;
    arr.descr = detail::dict_value(header, "descr", path);
    const std::string fortran = detail::dict_value(header, "fortran_order", path);
    if (fortran != "False")
        throw InputError(path + ": fortran_order must be False");
    arr.shape = detail::parse_shape(detail::dict_value(header, "shape", path), path);

    std::size_t word = 0;
    if (arr.descr == "<f4") word = 4;
    else if (arr.descr == "<f8") word = 8;
    else if (arr.descr == "<i2") word = 2;
    else if (arr.descr == "<i4") word = 4;
    else if (arr.descr == "<u1") word = 1;
    else if (arr.descr == "<u2") word = 2;
    else
        throw InputError(path + ": unsupported descr '" + arr.descr +
                         "' (accepted: <f4 <f8 <i2 <i4 <u1 <u2)");

    const std::size_t n = arr.count();
    std::vector<char> raw(n * word);
    in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (!in)
        throw InputError(path + ": payload shorter than shape " +
                         std::to_string(n) + " x " + std::to_string(word) + " bytes");

    if (arr.descr == "<f4") detail::widen<float>(raw, arr.values);
    else if (arr.descr == "<f8") detail::widen<double>(raw, arr.values);
    else if (arr.descr == "<i2") detail::widen<std::int16_t>(raw, arr.values);
    else if (arr.descr == "<i4") detail::widen<std::int32_t>(raw, arr.values);
    else if (arr.descr == "<u1") detail::widen<std::uint8_t>(raw, arr.values);
    else detail::widen<std::uint16_t>(raw, arr.values);
    return arr;
}

namespace detail {

inline void write_header(std::ofstream& out, const std::string& descr,
                         const std::vector<std::size_t>& shape) {
    std::ostringstream dict;
    dict << "{'descr': '" << descr << "', 'fortran_order': False, 'shape': (";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        dict << shape[i];
        if (shape.size() == 1 || i + 1 < shape.size()) dict << ",";
        if (i + 1 < shape.size()) dict << " ";
    }
    dict << "), }";
    std::string header = dict.str();
    // pad with spaces so magic+version+len+header is a multiple of 64
    const std::size_t base = 6 + 2 + 2;
    std::size_t total = base + header.size() + 1;
    const std::size_t pad = (64 - total % 64) % 64;
    header.append(pad, ' ');
    header.push_back('\n');

    out.write("\x93NUMPY", 6);
    const unsigned char version[2] = {1, 0};
    out.write(reinterpret_cast<const char*>(version), 2);
    const std::size_t len = header.size();
    const unsigned char len_bytes[2] = {static_cast<unsigned char>(len & 0xff),
                                        static_cast<unsigned char>((len >> 8) & 0xff)};
    out.write(reinterpret_cast<const char*>(len_bytes), 2);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
}

}  // namespace detail

inline void save_f64(const std::string& path, const std::vector<std::size_t>& shape,
                     const double* data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError(path + ": cannot open for writing");
    detail::write_header(out, "<f8", shape);
    out.write(reinterpret_cast<const char*>(data),
              static_cast<std::streamsize>(Tensor::count(shape) * sizeof(double)));
    if (!out) throw InputError(path + ": write failed");
}

inline void save_i32(const std::string& path, const std::vector<std::size_t>& shape,
                     const std::int32_t* data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError(path + ": cannot open for writing");
    detail::write_header(out, "<i4", shape);
    out.write(reinterpret_cast<const char*>(data),
              static_cast<std::streamsize>(Tensor::count(shape) * sizeof(std::int32_t)));
    if (!out) throw InputError(path + ": write failed");
}

inline void save_tensor(const std::string& path, const Tensor& t) {
    save_f64(path, t.shape(), t.data());
}

inline Tensor load_tensor(const std::string& path) {
    NpyArray arr = load(path);
    return Tensor::from_data(arr.shape, std::move(arr.values));
}

}  // namespace npy
}  // namespace spectralnet
