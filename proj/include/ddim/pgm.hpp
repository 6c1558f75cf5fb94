#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ddim {

// 8-bit grayscale raster, row-major, top row first.
struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;

    GrayImage() = default;
    GrayImage(std::size_t w, std::size_t h, std::uint8_t fill = 0) : width(w), height(h), pixels(w * h, fill) {}

    std::uint8_t& at(std::size_t row, std::size_t col) { return pixels[row * width + col]; }
    std::uint8_t at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }

    bool operator==(const GrayImage&) const = default;
};

class PgmError : public std::runtime_error {
public:
    PgmError(const std::string& source, std::size_t offset, const std::string& what);
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

// Binary P5 encoding: "P5\n<w> <h>\n255\n" followed by the raw rows.
std::vector<std::uint8_t> encode_pgm(const GrayImage& image);
// Accepts any whitespace between header tokens and '#' comments; maxval must be 255.
GrayImage decode_pgm(std::span<const std::uint8_t> bytes, const std::string& source = "<memory>");

void write_pgm(const GrayImage& image, const std::filesystem::path& path);
GrayImage read_pgm(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace ddim
