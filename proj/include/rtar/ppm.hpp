#pragma once

#include <fstream>
#include <istream>
#include <string>

#include "rtar/pipeline.hpp"

namespace rtar {

/// Binary PPM (P6, maxval 255) reader.
inline Frame read_ppm(std::istream& in, const std::string& origin = "<stream>") {
    std::string magic;
    in >> magic;
    if (magic != "P6") throw FormatError(origin + ": not a P6 ppm (magic '" + magic + "')");
    auto next_token = [&]() -> long {
        // skip whitespace and '#' comment lines between header fields
        while (true) {
            int ch = in.peek();
            if (ch == '#') {
                std::string line;
                std::getline(in, line);
            } else if (std::isspace(ch)) {
                in.get();
            } else {
                break;
            }
        }
        long v = -1;
        in >> v;
        return v;
    };
    const long w = next_token(), h = next_token(), maxval = next_token();
    if (!in || w < 1 || h < 1) throw FormatError(origin + ": bad ppm dimensions");
    if (maxval != 255) throw FormatError(origin + ": only maxval 255 supported");
    in.get();  // single whitespace byte before the raster
    Frame frame;
    frame.width = w;
    frame.height = h;
    frame.pixels.resize(static_cast<std::size_t>(w) * h * 3);
    in.read(reinterpret_cast<char*>(frame.pixels.data()),
            static_cast<std::streamsize>(frame.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(frame.pixels.size()))
        throw FormatError(origin + ": truncated raster, got " + std::to_string(in.gcount()) +
                          " of " + std::to_string(frame.pixels.size()) + " bytes");
    return frame;
}

inline Frame read_ppm_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open frame: " + path);
    return read_ppm(f, path);
}

inline void write_ppm_file(const Frame& frame, const std::string& path) {
    frame.validate();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << "P6\n" << frame.width << " " << frame.height << "\n255\n";
    f.write(reinterpret_cast<const char*>(frame.pixels.data()),
            static_cast<std::streamsize>(frame.pixels.size()));
    if (!f) throw IoError("write failed: " + path);
}

/// Reads one raw RGB24 frame of known geometry from a byte stream. Returns
/// false on clean end-of-stream, throws FormatError on a partial frame.
inline bool read_raw_frame(std::istream& in, std::int64_t width, std::int64_t height,
                           Frame& out) {
    out.width = width;
    out.height = height;
    out.pixels.resize(static_cast<std::size_t>(width) * height * 3);
    in.read(reinterpret_cast<char*>(out.pixels.data()),
            static_cast<std::streamsize>(out.pixels.size()));
    if (in.gcount() == 0) return false;
    if (in.gcount() != static_cast<std::streamsize>(out.pixels.size()))
        throw FormatError("truncated raw frame: got " + std::to_string(in.gcount()) + " of " +
                          std::to_string(out.pixels.size()) + " bytes");
    return true;
}

}  // namespace rtar
