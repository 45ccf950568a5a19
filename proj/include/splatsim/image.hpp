#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace splatsim {

/// 8-bit RGB image, row-major, 3 bytes per pixel.
struct ImageRgb8 {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data; // size = width*height*3

    ImageRgb8() = default;
    ImageRgb8(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0) {}

    std::uint8_t* px(int x, int y) { return &data[(static_cast<std::size_t>(y) * width + x) * 3]; }
    const std::uint8_t* px(int x, int y) const { return &data[(static_cast<std::size_t>(y) * width + x) * 3]; }
};

/// 16-bit single channel image (label maps, quantized depth).
struct ImageGray16 {
    int width = 0;
    int height = 0;
    std::vector<std::uint16_t> data; // size = width*height

    ImageGray16() = default;
    ImageGray16(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0) {}

    std::uint16_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    std::uint16_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

// PNG. Color images load as RGB8 (alpha stripped, palette expanded, 16-bit
// downshifted); label images load as Gray16 (8-bit files widened).
ImageRgb8 load_png_rgb8(const std::string& path);
ImageGray16 load_png_gray16(const std::string& path);
void save_png(const ImageRgb8& img, const std::string& path);
void save_png(const ImageGray16& img, const std::string& path);

// In-memory PNG encoding, used for network payloads.
std::vector<std::uint8_t> encode_png(const ImageRgb8& img);
std::vector<std::uint8_t> encode_png(const ImageGray16& img);

// Binary PGM (P5), maxval 65535, big-endian sample bytes per the format.
ImageGray16 load_pgm16(const std::string& path, std::vector<std::string>* comments = nullptr);
void save_pgm16(const ImageGray16& img, const std::string& path,
                const std::vector<std::string>& comments = {});

} // namespace splatsim
