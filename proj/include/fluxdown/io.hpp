/// @file io.hpp
/// @brief FGRD binary grids, CSV grids, spectrum profiles and refinement traces.
///
/// FGRD layout (all little-endian):
///
///   offset  size  field
///        0     4  magic "FGRD"
///        4     2  version (uint16) = 1
///        6     4  height (uint32)
///       10     4  width (uint32)
///       14     8  dx (IEEE-754 binary64)
///       22     8  dy (IEEE-754 binary64)
///       30   4*N  values, row-major IEEE-754 binary32, N = height * width
#pragma once

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "fluxdown/error.hpp"
#include "fluxdown/grid.hpp"
#include "fluxdown/refine.hpp"
#include "fluxdown/spectral.hpp"

namespace fluxdown {

inline constexpr std::array<char, 4> fgrd_magic{'F', 'G', 'R', 'D'};
inline constexpr std::uint16_t fgrd_version = 1;
inline constexpr std::size_t fgrd_header_size = 30;

class FormatError : public Error {
public:
    FormatError(std::size_t offset, const std::string& what)
        : Error(ErrorKind::format, "FGRD format error at byte offset " + std::to_string(offset) + ": " + what),
          offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

namespace detail {

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U v) {
    for (std::size_t b = 0; b < sizeof(U); ++b) {
        out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
    }
}

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::size_t offset() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

    template <typename U>
    U get_le(const char* what) {
        if (remaining() < sizeof(U)) {
            throw FormatError(bytes_.size(), std::string("unexpected end of data while reading ") + what);
        }
        U v = 0;
        for (std::size_t b = 0; b < sizeof(U); ++b) {
            v |= static_cast<U>(static_cast<U>(bytes_[pos_ + b]) << (8 * b));
        }
        pos_ += sizeof(U);
        return v;
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::io, "cannot open '" + path + "' for reading");
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) {
        throw Error(ErrorKind::io, "failed reading '" + path + "'");
    }
    return bytes;
}

inline void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::io, "cannot open '" + path + "' for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error(ErrorKind::io, "failed writing '" + path + "'");
    }
}

inline void write_text_file(const std::string& path, const std::string& text) {
    write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline std::string format_double(double v) {
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 17);
    return std::string(buf.data(), res.ptr);
}

}  // namespace detail

inline std::vector<std::uint8_t> serialize_fgrd(const Grid2D& grid) {
    if (grid.height() > UINT32_MAX || grid.width() > UINT32_MAX) {
        throw Error(ErrorKind::invalid_argument, "grid too large for FGRD");
    }
    std::vector<std::uint8_t> out;
    out.reserve(fgrd_header_size + 4 * grid.size());
    for (char c : fgrd_magic) out.push_back(static_cast<std::uint8_t>(c));
    detail::put_le<std::uint16_t>(out, fgrd_version);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(grid.height()));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(grid.width()));
    detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(grid.dx()));
    detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(grid.dy()));
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const auto f = static_cast<float>(grid.values()[k]);
        if (!std::isfinite(f)) {
            throw Error(ErrorKind::invalid_argument,
                        "value at index " + std::to_string(k) + " is not representable as a finite float32");
        }
        detail::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
    }
    return out;
}

inline Grid2D parse_fgrd(std::span<const std::uint8_t> bytes) {
    detail::ByteReader rd(bytes);
    for (std::size_t b = 0; b < fgrd_magic.size(); ++b) {
        const auto c = rd.get_le<std::uint8_t>("magic");
        if (c != static_cast<std::uint8_t>(fgrd_magic[b])) {
            throw FormatError(0, "bad magic, expected \"FGRD\"");
        }
    }
    const auto version = rd.get_le<std::uint16_t>("version");
    if (version != fgrd_version) {
        throw FormatError(4, "unsupported version " + std::to_string(version));
    }
    const auto height = rd.get_le<std::uint32_t>("height");
    if (height == 0) throw FormatError(6, "height is zero");
    const auto width = rd.get_le<std::uint32_t>("width");
    if (width == 0) throw FormatError(10, "width is zero");
    const double dx = std::bit_cast<double>(rd.get_le<std::uint64_t>("dx"));
    if (!(dx > 0.0) || !std::isfinite(dx)) throw FormatError(14, "dx must be positive and finite");
    const double dy = std::bit_cast<double>(rd.get_le<std::uint64_t>("dy"));
    if (!(dy > 0.0) || !std::isfinite(dy)) throw FormatError(22, "dy must be positive and finite");

    const std::size_t n = static_cast<std::size_t>(height) * width;
    const std::size_t payload = 4 * n;
    if (rd.remaining() < payload) {
        throw FormatError(bytes.size(), "unexpected end of data: payload needs " + std::to_string(payload) +
                                            " bytes, " + std::to_string(rd.remaining()) + " present");
    }
    std::vector<double> values(n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t at = rd.offset();
        const float f = std::bit_cast<float>(rd.get_le<std::uint32_t>("value"));
        if (!std::isfinite(f)) throw FormatError(at, "non-finite value");
        values[k] = f;
    }
    if (rd.remaining() != 0) {
        throw FormatError(rd.offset(), std::to_string(rd.remaining()) + " trailing bytes after payload");
    }
    return Grid2D(height, width, dx, dy, std::move(values));
}

inline void write_fgrd(const Grid2D& grid, const std::string& path) {
    detail::write_file_bytes(path, serialize_fgrd(grid));
}

inline Grid2D read_fgrd(const std::string& path) {
    const auto bytes = detail::read_file_bytes(path);
    return parse_fgrd(bytes);
}

inline Grid2D parse_csv(std::string_view text, double dx = 1.0, double dy = 1.0) {
    std::vector<double> values;
    std::size_t width = 0;
    std::size_t rows = 0;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    std::vector<std::string_view> lines;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const auto end = nl == std::string_view::npos ? text.size() : nl;
        lines.push_back(text.substr(pos, end - pos));
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    while (!lines.empty() && lines.back().find_first_not_of(" \t\r") == std::string_view::npos) {
        lines.pop_back();
    }
    for (std::string_view line : lines) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        std::size_t col = 0;
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            std::string_view cell = line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                                      : comma - start);
            ++col;
            const auto b = cell.find_first_not_of(" \t");
            const auto e = cell.find_last_not_of(" \t");
            cell = b == std::string_view::npos ? std::string_view{} : cell.substr(b, e - b + 1);
            double v = 0.0;
            const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (cell.empty() || res.ec != std::errc{} || res.ptr != cell.data() + cell.size() || !std::isfinite(v)) {
                throw Error(ErrorKind::parse, "CSV non-numeric cell at (row " + std::to_string(line_no) + ", col " +
                                                  std::to_string(col) + "): '" + std::string(cell) + "'");
            }
            values.push_back(v);
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (rows == 0) {
            width = col;
        } else if (col != width) {
            throw Error(ErrorKind::parse, "CSV row " + std::to_string(line_no) + " has " + std::to_string(col) +
                                              " columns, expected " + std::to_string(width));
        }
        ++rows;
    }
    if (rows == 0) {
        throw Error(ErrorKind::parse, "CSV input is empty");
    }
    return Grid2D(rows, width, dx, dy, std::move(values));
}

inline Grid2D read_csv(const std::string& path, double dx = 1.0, double dy = 1.0) {
    const auto bytes = detail::read_file_bytes(path);
    return parse_csv(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), dx, dy);
}

inline std::string format_csv(const Grid2D& grid) {
    std::string out;
    for (std::size_t i = 0; i < grid.height(); ++i) {
        for (std::size_t j = 0; j < grid.width(); ++j) {
            if (j > 0) out += ',';
            out += detail::format_double(grid(i, j));
        }
        out += '\n';
    }
    return out;
}

inline void write_csv(const Grid2D& grid, const std::string& path) {
    detail::write_text_file(path, format_csv(grid));
}

/// Two whitespace-separated columns, k and psi, after one '#' header line.
inline std::string format_profile(const SpectrumProfile& prof) {
    std::string out = "# k psi\n";
    for (std::size_t b = 0; b < prof.k_bins.size(); ++b) {
        out += detail::format_double(prof.k_bins[b]) + ' ' + detail::format_double(prof.psi[b]) + '\n';
    }
    return out;
}

inline void write_profile(const SpectrumProfile& prof, const std::string& path) {
    detail::write_text_file(path, format_profile(prof));
}

inline std::string format_trace_csv(const RefineTrace& trace) {
    std::string out = "iter,objective,fidelity,pde\n";
    for (std::size_t k = 0; k < trace.objective.size(); ++k) {
        out += std::to_string(k) + ',' + detail::format_double(trace.objective[k]) + ',' +
               detail::format_double(trace.fidelity[k]) + ',' + detail::format_double(trace.pde[k]) + '\n';
    }
    return out;
}

inline void write_trace_csv(const RefineTrace& trace, const std::string& path) {
    detail::write_text_file(path, format_trace_csv(trace));
}

/// FNV-1a 64-bit digest, hex encoded; identifies inputs in reports.
inline std::string fnv1a_hex(std::span<const std::uint8_t> bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int k = 15; k >= 0; --k) {
        out[static_cast<std::size_t>(k)] = digits[h & 0xF];
        h >>= 4;
    }
    return out;
}

}  // namespace fluxdown
