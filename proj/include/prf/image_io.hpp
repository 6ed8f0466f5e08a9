#pragma once

#include "prf/image.hpp"

#include <filesystem>

namespace prf {

enum class ImageFormat { pgm, png, sidecar };

struct ImageInfo {
    ImageFormat format = ImageFormat::pgm;
    bool converted_from_color = false;  // Rec. 601 luma was applied
    int bit_depth = 8;
};

// Reads PGM (P2/P5), PPM (P3/P6), PNG or a PRF1 float sidecar; the format is
// detected from the leading bytes, not the extension. Missing or unreadable
// paths raise io errors, anything unrecognised a format error.
Image read_image(const std::filesystem::path& path, ImageInfo* info = nullptr);

// Chooses the encoder from the extension: .pgm, .png, or .prf/.f32 for the sidecar.
void write_image(const Image& img, const std::filesystem::path& path);

void write_pgm(const Image& img, const std::filesystem::path& path);
void write_png(const Image& img, const std::filesystem::path& path);

// Raw float32 little-endian, row-major, after a 16-byte header:
// "PRF1", u32 width, u32 height, u32 reserved (0).
void write_sidecar(const Image& img, const std::filesystem::path& path);
Image read_sidecar(const std::filesystem::path& path);

// 8-bit quantisation used by every 8-bit writer: round(v * 255) after clamping.
unsigned char to_byte(double v);

double rec601_luma(double r, double g, double b);

} // namespace prf
