#include "prf/image_io.hpp"

#include "prf/error.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fmt/format.h>
#include <fstream>
#include <iterator>
#include <png.h>
#include <string>

namespace prf {

namespace fs = std::filesystem;

namespace {

std::vector<unsigned char> slurp(const fs::path& path) {
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) throw io_error(fmt::format("cannot open {}: no such file", path.string()));
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error(fmt::format("cannot open {}", path.string()));
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spill(const fs::path& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error(fmt::format("cannot write {}", path.string()));
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw io_error(fmt::format("write failed for {}", path.string()));
}

// Minimal netpbm tokenizer: whitespace and '#' comments between header fields.
class PnmReader {
public:
    PnmReader(const std::vector<unsigned char>& bytes, const fs::path& path) : b_(bytes), path_(path) {}

    long next_int() {
        skip();
        if (pos_ >= b_.size() || !std::isdigit(b_[pos_])) throw bad("malformed header");
        long v = 0;
        while (pos_ < b_.size() && std::isdigit(b_[pos_])) {
            v = v * 10 + (b_[pos_++] - '0');
            if (v > 1'000'000'000) throw bad("header value out of range");
        }
        return v;
    }

    // Exactly one whitespace byte separates the header from binary data.
    std::size_t raster_start() {
        if (pos_ >= b_.size() || !std::isspace(b_[pos_])) throw bad("malformed header");
        return pos_ + 1;
    }

    std::size_t pos_ = 2;

    Error bad(const std::string& what) const { return format_error(fmt::format("{}: {}", path_.string(), what)); }

private:
    void skip() {
        while (pos_ < b_.size()) {
            if (std::isspace(b_[pos_])) {
                ++pos_;
            } else if (b_[pos_] == '#') {
                while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    const std::vector<unsigned char>& b_;
    const fs::path& path_;
};

Image read_pnm(const std::vector<unsigned char>& bytes, const fs::path& path, ImageInfo& info) {
    const char kind = static_cast<char>(bytes[1]);
    const bool color = kind == '3' || kind == '6';
    const bool ascii = kind == '2' || kind == '3';
    PnmReader r(bytes, path);
    const long w = r.next_int();
    const long h = r.next_int();
    const long maxval = r.next_int();
    if (w <= 0 || h <= 0) throw r.bad("empty image");
    if (maxval <= 0 || maxval > 65535) throw r.bad(fmt::format("unsupported maxval {}", maxval));
    const int channels = color ? 3 : 1;
    const std::size_t count = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * channels;

    std::vector<double> samples(count);
    if (ascii) {
        for (auto& s : samples) {
            const long v = r.next_int();
            if (v > maxval) throw r.bad("sample exceeds maxval");
            s = static_cast<double>(v) / static_cast<double>(maxval);
        }
    } else {
        const std::size_t start = r.raster_start();
        const std::size_t width = maxval > 255 ? 2 : 1;
        if (bytes.size() < start + count * width) throw r.bad("truncated raster");
        for (std::size_t i = 0; i < count; ++i) {
            const unsigned char* p = &bytes[start + i * width];
            const long v = width == 2 ? (static_cast<long>(p[0]) << 8) | p[1] : p[0];
            if (v > maxval) throw r.bad("sample exceeds maxval");
            samples[i] = static_cast<double>(v) / static_cast<double>(maxval);
        }
    }

    info.format = ImageFormat::pgm;
    info.converted_from_color = color;
    info.bit_depth = maxval > 255 ? 16 : 8;
    Image img(static_cast<int>(w), static_cast<int>(h));
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        img.data[i] = color ? rec601_luma(samples[3 * i], samples[3 * i + 1], samples[3 * i + 2]) : samples[i];
    }
    return img;
}

Image read_png(const std::vector<unsigned char>& bytes, const fs::path& path, ImageInfo& info) {
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
        throw format_error(fmt::format("{}: {}", path.string(), png.message));
    }
    const bool color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
    // 16-bit files are read as linear 16-bit so no gamma re-encoding happens.
    const bool wide = (png.format & PNG_FORMAT_FLAG_LINEAR) != 0;
    png.format = (color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY) | (wide ? PNG_FORMAT_FLAG_LINEAR : 0u);
    const std::size_t channels = color ? 3 : 1;
    const std::size_t count = static_cast<std::size_t>(png.width) * png.height * channels;
    const double scale = wide ? 65535.0 : 255.0;

    std::vector<double> samples(count);
    if (wide) {
        std::vector<png_uint_16> buf(count);
        if (!png_image_finish_read(&png, nullptr, buf.data(), 0, nullptr)) {
            throw format_error(fmt::format("{}: {}", path.string(), png.message));
        }
        std::transform(buf.begin(), buf.end(), samples.begin(), [&](png_uint_16 v) { return v / scale; });
    } else {
        std::vector<png_byte> buf(count);
        if (!png_image_finish_read(&png, nullptr, buf.data(), 0, nullptr)) {
            throw format_error(fmt::format("{}: {}", path.string(), png.message));
        }
        std::transform(buf.begin(), buf.end(), samples.begin(), [&](png_byte v) { return v / scale; });
    }

    info.format = ImageFormat::png;
    info.converted_from_color = color;
    info.bit_depth = wide ? 16 : 8;
    Image img(static_cast<int>(png.width), static_cast<int>(png.height));
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        img.data[i] = color ? rec601_luma(samples[3 * i], samples[3 * i + 1], samples[3 * i + 2]) : samples[i];
    }
    return img;
}

constexpr std::array<unsigned char, 4> kMagic{'P', 'R', 'F', '1'};
constexpr std::size_t kHeader = 16;

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

Image decode_sidecar(const std::vector<unsigned char>& bytes, const fs::path& path) {
    if (bytes.size() < kHeader || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
        throw format_error(fmt::format("{}: not a PRF1 sidecar", path.string()));
    }
    const std::uint32_t w = get_u32(&bytes[4]);
    const std::uint32_t h = get_u32(&bytes[8]);
    if (w == 0 || h == 0 || w > (1u << 16) || h > (1u << 16)) {
        throw format_error(fmt::format("{}: bad sidecar dimensions {}x{}", path.string(), w, h));
    }
    const std::size_t n = static_cast<std::size_t>(w) * h;
    if (bytes.size() != kHeader + 4 * n) {
        throw format_error(fmt::format("{}: sidecar payload is {} bytes, expected {}", path.string(), bytes.size() - kHeader, 4 * n));
    }
    Image img(static_cast<int>(w), static_cast<int>(h));
    for (std::size_t i = 0; i < n; ++i) {
        const float v = std::bit_cast<float>(get_u32(&bytes[kHeader + 4 * i]));
        if (!std::isfinite(v)) throw format_error(fmt::format("{}: non-finite sample at index {}", path.string(), i));
        img.data[i] = static_cast<double>(v);
    }
    return img;
}

std::string lower_extension(const fs::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext;
}

} // namespace

double rec601_luma(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

unsigned char to_byte(double v) {
    return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

Image read_image(const fs::path& path, ImageInfo* info) {
    const auto bytes = slurp(path);
    ImageInfo local;
    ImageInfo& out = info ? *info : local;
    out = {};
    if (bytes.size() >= 2 && bytes[0] == 'P' && std::strchr("2356", bytes[1]) != nullptr && bytes[1] != 0) {
        return read_pnm(bytes, path, out);
    }
    if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return read_png(bytes, path, out);
    if (bytes.size() >= 4 && std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
        out.format = ImageFormat::sidecar;
        out.bit_depth = 32;
        return decode_sidecar(bytes, path);
    }
    throw format_error(fmt::format("{}: unsupported image format (expected PGM, PNG or PRF1)", path.string()));
}

Image read_sidecar(const fs::path& path) { return decode_sidecar(slurp(path), path); }

void write_pgm(const Image& img, const fs::path& path) {
    const std::string header = fmt::format("P5\n{} {}\n255\n", img.width, img.height);
    std::vector<unsigned char> bytes(header.begin(), header.end());
    bytes.reserve(bytes.size() + img.data.size());
    for (double v : img.data) bytes.push_back(to_byte(v));
    spill(path, bytes);
}

void write_png(const Image& img, const fs::path& path) {
    std::vector<png_byte> buf(img.data.size());
    std::transform(img.data.begin(), img.data.end(), buf.begin(), to_byte);
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(img.width);
    png.height = static_cast<png_uint_32>(img.height);
    png.format = PNG_FORMAT_GRAY;
    png_alloc_size_t size = 0;
    if (!png_image_write_get_memory_size(png, size, 0, buf.data(), 0, nullptr)) {
        throw io_error(fmt::format("cannot encode {}: {}", path.string(), png.message));
    }
    std::vector<unsigned char> bytes(size);
    if (!png_image_write_to_memory(&png, bytes.data(), &size, 0, buf.data(), 0, nullptr)) {
        throw io_error(fmt::format("cannot encode {}: {}", path.string(), png.message));
    }
    bytes.resize(size);
    spill(path, bytes);
}

void write_sidecar(const Image& img, const fs::path& path) {
    if (img.width <= 0 || img.height <= 0 || img.data.size() != static_cast<std::size_t>(img.width) * img.height) {
        throw config_error("cannot write an empty or inconsistent image");
    }
    std::vector<unsigned char> bytes(kMagic.begin(), kMagic.end());
    bytes.reserve(kHeader + 4 * img.data.size());
    put_u32(bytes, static_cast<std::uint32_t>(img.width));
    put_u32(bytes, static_cast<std::uint32_t>(img.height));
    put_u32(bytes, 0);
    for (double v : img.data) put_u32(bytes, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    spill(path, bytes);
}

void write_image(const Image& img, const fs::path& path) {
    const std::string ext = lower_extension(path);
    if (ext == ".pgm") {
        write_pgm(img, path);
    } else if (ext == ".png") {
        write_png(img, path);
    } else if (ext == ".prf" || ext == ".f32") {
        write_sidecar(img, path);
    } else {
        throw format_error(fmt::format("{}: unsupported output extension '{}' (use .pgm, .png or .prf)", path.string(), ext));
    }
}

} // namespace prf
