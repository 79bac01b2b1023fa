#include "suft/image.hpp"

#include <png.h>

#include <bit>
#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

#include "suft/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts are unsupported");

namespace suft {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) {
        if (mode[0] == 'r') throw FileNotFound("cannot open file: " + path);
        throw IoError("cannot create file: " + path);
    }
    return f;
}

// libpng reports errors through longjmp; keep all C++ objects alive in the
// caller frame and only cleanup + throw from the jump target.
struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReader() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    }
};

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWriter() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    }
};

void init_reader(PngReader& r, const std::string& path) {
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!r.png) throw IoError("png_create_read_struct failed");
    r.info = png_create_info_struct(r.png);
    if (!r.info) throw IoError("png_create_info_struct failed");
    (void)path;
}

void init_writer(PngWriter& w) {
    w.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!w.png) throw IoError("png_create_write_struct failed");
    w.info = png_create_info_struct(w.png);
    if (!w.info) throw IoError("png_create_info_struct failed");
}

}  // namespace

void DepthMap::validate() const {
    if (values.rows() != valid_mask.rows() || values.cols() != valid_mask.cols())
        throw ShapeError("DepthMap: mask shape differs from values");
    if (unit_to_cm <= 0.0f) throw InvalidArgument("DepthMap: unit_to_cm must be > 0");
    for (Eigen::Index i = 0; i < values.size(); ++i)
        if (valid_mask.data()[i] && values.data()[i] < 0.0f)
            throw InvalidArgument("DepthMap: valid values must be >= 0");
}

void GuidanceImage::validate() const {
    if (values.channels != 3) throw ShapeError("GuidanceImage: expected 3 channels");
    if ((values.data < 0.0f).any() || (values.data > 1.0f).any())
        throw InvalidArgument("GuidanceImage: values must be in [0, 1]");
}

DepthMap read_depth_png(const std::string& path) {
    FilePtr fp = open_file(path, "rb");
    PngReader r;
    init_reader(r, path);

    std::vector<std::uint16_t> buf;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(r.png))) throw MalformedFile("malformed PNG: " + path);

    png_init_io(r.png, fp.get());
    png_read_info(r.png, r.info);

    const png_uint_32 w = png_get_image_width(r.png, r.info);
    const png_uint_32 h = png_get_image_height(r.png, r.info);
    const int bit_depth = png_get_bit_depth(r.png, r.info);
    const int color_type = png_get_color_type(r.png, r.info);
    if (bit_depth != 16 || color_type != PNG_COLOR_TYPE_GRAY)
        throw MalformedFile("depth PNG must be 16-bit grayscale: " + path);

    png_set_swap(r.png);  // PNG stores 16-bit big-endian
    buf.resize(static_cast<std::size_t>(w) * h);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y)
        rows[y] = reinterpret_cast<png_bytep>(buf.data() + static_cast<std::size_t>(y) * w);
    png_read_image(r.png, rows.data());
    png_read_end(r.png, nullptr);

    DepthMap d;
    d.values.resize(h, w);
    d.valid_mask.resize(h, w);
    for (png_uint_32 y = 0; y < h; ++y) {
        for (png_uint_32 x = 0; x < w; ++x) {
            const std::uint16_t mm = buf[static_cast<std::size_t>(y) * w + x];
            d.values(y, x) = static_cast<float>(mm) / 1000.0f;  // millimeters -> meters
            d.valid_mask(y, x) = mm != 0;
        }
    }
    d.unit_to_cm = 100.0f;
    return d;
}

void write_depth_png(const std::string& path, const DepthMap& depth) {
    const int h = depth.height();
    const int w = depth.width();
    std::vector<std::uint16_t> buf(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            float mm = depth.valid_mask(y, x) ? depth.values(y, x) * 1000.0f : 0.0f;
            if (mm < 0.0f) mm = 0.0f;
            if (mm > 65535.0f) mm = 65535.0f;
            buf[static_cast<std::size_t>(y) * w + x] = static_cast<std::uint16_t>(mm + 0.5f);
        }
    }

    FilePtr fp = open_file(path, "wb");
    PngWriter wr;
    init_writer(wr);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y)
        rows[y] = reinterpret_cast<png_bytep>(buf.data() + static_cast<std::size_t>(y) * w);

    if (setjmp(png_jmpbuf(wr.png))) throw IoError("PNG write failed: " + path);
    png_init_io(wr.png, fp.get());
    png_set_IHDR(wr.png, wr.info, w, h, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(wr.png, wr.info);
    png_set_swap(wr.png);
    png_write_image(wr.png, rows.data());
    png_write_end(wr.png, nullptr);
}

GuidanceImage read_rgb_png(const std::string& path) {
    FilePtr fp = open_file(path, "rb");
    PngReader r;
    init_reader(r, path);

    std::vector<std::uint8_t> buf;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(r.png))) throw MalformedFile("malformed PNG: " + path);

    png_init_io(r.png, fp.get());
    png_read_info(r.png, r.info);

    png_set_expand(r.png);         // palette/low-bit gray -> 8-bit
    png_set_strip_16(r.png);
    png_set_strip_alpha(r.png);
    png_set_gray_to_rgb(r.png);
    png_read_update_info(r.png, r.info);

    const png_uint_32 w = png_get_image_width(r.png, r.info);
    const png_uint_32 h = png_get_image_height(r.png, r.info);
    if (png_get_channels(r.png, r.info) != 3)
        throw MalformedFile("RGB PNG expected 3 channels after expansion: " + path);

    buf.resize(static_cast<std::size_t>(w) * h * 3);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y)
        rows[y] = buf.data() + static_cast<std::size_t>(y) * w * 3;
    png_read_image(r.png, rows.data());
    png_read_end(r.png, nullptr);

    GuidanceImage img;
    img.values = Tensor<float>(3, static_cast<int>(h), static_cast<int>(w));
    for (png_uint_32 y = 0; y < h; ++y)
        for (png_uint_32 x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.values(c, y, x) = buf[(static_cast<std::size_t>(y) * w + x) * 3 + c] / 255.0f;
    return img;
}

void write_rgb_png(const std::string& path, const GuidanceImage& img) {
    const int h = img.height();
    const int w = img.width();
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(h) * w * 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                float v = img.values(c, y, x) * 255.0f;
                if (v < 0.0f) v = 0.0f;
                if (v > 255.0f) v = 255.0f;
                buf[(static_cast<std::size_t>(y) * w + x) * 3 + c] = static_cast<std::uint8_t>(v + 0.5f);
            }
        }
    }

    FilePtr fp = open_file(path, "wb");
    PngWriter wr;
    init_writer(wr);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y)
        rows[y] = buf.data() + static_cast<std::size_t>(y) * w * 3;

    if (setjmp(png_jmpbuf(wr.png))) throw IoError("PNG write failed: " + path);
    png_init_io(wr.png, fp.get());
    png_set_IHDR(wr.png, wr.info, w, h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(wr.png, wr.info);
    png_write_image(wr.png, rows.data());
    png_write_end(wr.png, nullptr);
}

DepthMap read_depth_raw(const std::string& path, float unit_to_cm) {
    FilePtr fp = open_file(path, "rb");
    std::int32_t dims[2];
    if (std::fread(dims, sizeof(std::int32_t), 2, fp.get()) != 2)
        throw MalformedFile("raw depth: truncated header: " + path);
    if (dims[0] < 1 || dims[1] < 1)
        throw MalformedFile("raw depth: non-positive dims in header: " + path);
    const int h = dims[0];
    const int w = dims[1];

    DepthMap d;
    d.values.resize(h, w);
    const std::size_t n = static_cast<std::size_t>(h) * w;
    if (std::fread(d.values.data(), sizeof(float), n, fp.get()) != n)
        throw MalformedFile("raw depth: truncated payload: " + path);
    for (Eigen::Index i = 0; i < d.values.size(); ++i)
        if (d.values.data()[i] < 0.0f)
            throw MalformedFile("raw depth: negative value: " + path);
    d.valid_mask = d.values > 0.0f;
    d.unit_to_cm = unit_to_cm;
    return d;
}

void write_depth_raw(const std::string& path, const Plane<float>& values) {
    FilePtr fp = open_file(path, "wb");
    const std::int32_t dims[2] = {static_cast<std::int32_t>(values.rows()),
                                  static_cast<std::int32_t>(values.cols())};
    if (std::fwrite(dims, sizeof(std::int32_t), 2, fp.get()) != 2)
        throw IoError("raw depth: write failed: " + path);
    const std::size_t n = static_cast<std::size_t>(values.size());
    if (std::fwrite(values.data(), sizeof(float), n, fp.get()) != n)
        throw IoError("raw depth: write failed: " + path);
}

void write_false_color_png(const std::string& path, const Plane<float>& values, float vmax) {
    const int h = static_cast<int>(values.rows());
    const int w = static_cast<int>(values.cols());
    GuidanceImage img;
    img.values = Tensor<float>(3, h, w);
    auto ramp = [](float t) { return t < 0.0f ? 0.0f : (t > 1.0f ? 1.0f : t); };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const float t = vmax > 0.0f ? ramp(values(y, x) / vmax) : 0.0f;
            img.values(0, y, x) = ramp(1.5f - std::abs(4.0f * t - 3.0f));
            img.values(1, y, x) = ramp(1.5f - std::abs(4.0f * t - 2.0f));
            img.values(2, y, x) = ramp(1.5f - std::abs(4.0f * t - 1.0f));
        }
    }
    write_rgb_png(path, img);
}

}  // namespace suft
