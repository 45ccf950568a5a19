#include "splatsim/image.hpp"

#include "splatsim/types.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <memory>

namespace splatsim {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw ParseError("cannot open file: " + path);
    return f;
}

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;

    PngReader() {
        png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        if (png) info = png_create_info_struct(png);
        if (!png || !info) throw std::runtime_error("libpng init failed");
    }
    ~PngReader() { png_destroy_read_struct(&png, &info, nullptr); }
};

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;

    PngWriter() {
        png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        if (png) info = png_create_info_struct(png);
        if (!png || !info) throw std::runtime_error("libpng init failed");
    }
    ~PngWriter() { png_destroy_write_struct(&png, &info); }
};

} // namespace

ImageRgb8 load_png_rgb8(const std::string& path) {
    auto f = open_file(path, "rb");
    PngReader r;
    if (setjmp(png_jmpbuf(r.png))) throw ParseError("PNG decode failed: " + path);
    png_init_io(r.png, f.get());
    png_read_info(r.png, r.info);

    png_set_palette_to_rgb(r.png);
    png_set_expand_gray_1_2_4_to_8(r.png);
    if (png_get_valid(r.png, r.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(r.png);
    png_set_strip_16(r.png);
    png_set_strip_alpha(r.png);
    png_set_gray_to_rgb(r.png);
    png_read_update_info(r.png, r.info);

    ImageRgb8 img(static_cast<int>(png_get_image_width(r.png, r.info)),
                  static_cast<int>(png_get_image_height(r.png, r.info)));
    if (png_get_rowbytes(r.png, r.info) != static_cast<std::size_t>(img.width) * 3)
        throw ParseError("unexpected PNG row layout: " + path);
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y) rows[y] = img.px(0, y);
    png_read_image(r.png, rows.data());
    png_read_end(r.png, nullptr);
    return img;
}

ImageGray16 load_png_gray16(const std::string& path) {
    auto f = open_file(path, "rb");
    PngReader r;
    if (setjmp(png_jmpbuf(r.png))) throw ParseError("PNG decode failed: " + path);
    png_init_io(r.png, f.get());
    png_read_info(r.png, r.info);

    const int color = png_get_color_type(r.png, r.info);
    if (color != PNG_COLOR_TYPE_GRAY)
        throw ParseError("label PNG must be single-channel grayscale: " + path);
    png_set_expand_gray_1_2_4_to_8(r.png);
    png_read_update_info(r.png, r.info);
    const int depth = png_get_bit_depth(r.png, r.info);

    ImageGray16 img(static_cast<int>(png_get_image_width(r.png, r.info)),
                    static_cast<int>(png_get_image_height(r.png, r.info)));
    if (depth == 16) {
        // PNG stores 16-bit samples big-endian.
        std::vector<std::uint8_t> rowbuf(static_cast<std::size_t>(img.width) * 2);
        for (int y = 0; y < img.height; ++y) {
            png_read_row(r.png, rowbuf.data(), nullptr);
            for (int x = 0; x < img.width; ++x)
                img.at(x, y) = static_cast<std::uint16_t>((rowbuf[2 * x] << 8) | rowbuf[2 * x + 1]);
        }
    } else {
        std::vector<std::uint8_t> rowbuf(static_cast<std::size_t>(img.width));
        for (int y = 0; y < img.height; ++y) {
            png_read_row(r.png, rowbuf.data(), nullptr);
            for (int x = 0; x < img.width; ++x) img.at(x, y) = rowbuf[x];
        }
    }
    png_read_end(r.png, nullptr);
    return img;
}

void save_png(const ImageRgb8& img, const std::string& path) {
    auto f = open_file(path, "wb");
    PngWriter w;
    if (setjmp(png_jmpbuf(w.png))) throw std::runtime_error("PNG encode failed: " + path);
    png_init_io(w.png, f.get());
    png_set_IHDR(w.png, w.info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(w.png, w.info);
    for (int y = 0; y < img.height; ++y)
        png_write_row(w.png, const_cast<png_bytep>(img.px(0, y)));
    png_write_end(w.png, nullptr);
}

void save_png(const ImageGray16& img, const std::string& path) {
    auto f = open_file(path, "wb");
    PngWriter w;
    if (setjmp(png_jmpbuf(w.png))) throw std::runtime_error("PNG encode failed: " + path);
    png_init_io(w.png, f.get());
    png_set_IHDR(w.png, w.info, img.width, img.height, 16, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(w.png, w.info);
    std::vector<std::uint8_t> rowbuf(static_cast<std::size_t>(img.width) * 2);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const std::uint16_t v = img.at(x, y);
            rowbuf[2 * x] = static_cast<std::uint8_t>(v >> 8);
            rowbuf[2 * x + 1] = static_cast<std::uint8_t>(v & 0xff);
        }
        png_write_row(w.png, rowbuf.data());
    }
    png_write_end(w.png, nullptr);
}

namespace {

void append_bytes(png_structp png, png_bytep data, png_size_t len) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + len);
}

} // namespace

std::vector<std::uint8_t> encode_png(const ImageRgb8& img) {
    std::vector<std::uint8_t> out;
    PngWriter w;
    if (setjmp(png_jmpbuf(w.png))) throw std::runtime_error("in-memory PNG encode failed");
    png_set_write_fn(w.png, &out, append_bytes, nullptr);
    png_set_IHDR(w.png, w.info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(w.png, w.info);
    for (int y = 0; y < img.height; ++y)
        png_write_row(w.png, const_cast<png_bytep>(img.px(0, y)));
    png_write_end(w.png, nullptr);
    return out;
}

std::vector<std::uint8_t> encode_png(const ImageGray16& img) {
    std::vector<std::uint8_t> out;
    PngWriter w;
    if (setjmp(png_jmpbuf(w.png))) throw std::runtime_error("in-memory PNG encode failed");
    png_set_write_fn(w.png, &out, append_bytes, nullptr);
    png_set_IHDR(w.png, w.info, img.width, img.height, 16, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(w.png, w.info);
    std::vector<std::uint8_t> rowbuf(static_cast<std::size_t>(img.width) * 2);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const std::uint16_t v = img.at(x, y);
            rowbuf[2 * x] = static_cast<std::uint8_t>(v >> 8);
            rowbuf[2 * x + 1] = static_cast<std::uint8_t>(v & 0xff);
        }
        png_write_row(w.png, rowbuf.data());
    }
    png_write_end(w.png, nullptr);
    return out;
}

ImageGray16 load_pgm16(const std::string& path, std::vector<std::string>* comments) {
    auto f = open_file(path, "rb");
    // Header: "P5" <ws> width <ws> height <ws> maxval, single whitespace, raster.
    auto next_token = [&](std::string& tok) {
        tok.clear();
        int c;
        for (;;) {
            c = std::fgetc(f.get());
            if (c == EOF) throw ParseError("truncated PGM header: " + path);
            if (c == '#') {
                std::string comment;
                while ((c = std::fgetc(f.get())) != EOF && c != '\n') comment.push_back(static_cast<char>(c));
                if (comments) comments->push_back(comment);
                continue;
            }
            if (!std::isspace(c)) break;
        }
        do {
            tok.push_back(static_cast<char>(c));
            c = std::fgetc(f.get());
        } while (c != EOF && !std::isspace(c));
    };

    std::string tok;
    next_token(tok);
    if (tok != "P5") throw ParseError("not a binary PGM (expected P5): " + path);
    next_token(tok);
    const int w = std::stoi(tok);
    next_token(tok);
    const int h = std::stoi(tok);
    next_token(tok);
    const int maxval = std::stoi(tok);
    if (maxval != 65535) throw ParseError("expected 16-bit PGM (maxval 65535): " + path);
    if (w <= 0 || h <= 0) throw ParseError("bad PGM dimensions: " + path);

    ImageGray16 img(w, h);
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(w) * h * 2);
    if (std::fread(raw.data(), 1, raw.size(), f.get()) != raw.size())
        throw ParseError("truncated PGM raster: " + path);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        img.data[i] = static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
    return img;
}

void save_pgm16(const ImageGray16& img, const std::string& path,
                const std::vector<std::string>& comments) {
    auto f = open_file(path, "wb");
    std::string header = "P5\n";
    for (const auto& c : comments) header += "#" + c + "\n";
    header += std::to_string(img.width) + " " + std::to_string(img.height) + "\n65535\n";
    if (std::fwrite(header.data(), 1, header.size(), f.get()) != header.size())
        throw std::runtime_error("PGM write failed: " + path);
    std::vector<std::uint8_t> raw(img.data.size() * 2);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        raw[2 * i] = static_cast<std::uint8_t>(img.data[i] >> 8);
        raw[2 * i + 1] = static_cast<std::uint8_t>(img.data[i] & 0xff);
    }
    if (std::fwrite(raw.data(), 1, raw.size(), f.get()) != raw.size())
        throw std::runtime_error("PGM write failed: " + path);
}

} // namespace splatsim
