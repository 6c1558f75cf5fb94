#include "ddim/pgm.hpp"

#include <cctype>
#include <fstream>
#include <iterator>

namespace ddim {

PgmError::PgmError(const std::string& source, std::size_t offset, const std::string& what)
    : std::runtime_error(source + ": byte " + std::to_string(offset) + ": " + what), offset_(offset) {}

std::vector<std::uint8_t> encode_pgm(const GrayImage& image) {
    if (image.pixels.size() != image.width * image.height || image.width == 0 || image.height == 0) {
        throw std::invalid_argument("encode_pgm: pixel buffer does not match " + std::to_string(image.width) + "x" +
                                    std::to_string(image.height));
    }
    const std::string header =
        "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), image.pixels.begin(), image.pixels.end());
    return out;
}

namespace {

class HeaderReader {
public:
    HeaderReader(std::span<const std::uint8_t> bytes, const std::string& source) : bytes_(bytes), source_(source) {}

    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n' && bytes_[pos_] != '\r') ++pos_;
            } else if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    std::size_t read_number(const char* field) {
        skip_space_and_comments();
        const std::size_t start = pos_;
        std::size_t value = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            value = value * 10 + (bytes_[pos_] - '0');
            if (value > (1u << 24)) throw PgmError(source_, start, std::string(field) + " is too large");
            ++pos_;
        }
        if (pos_ == start) throw PgmError(source_, start, std::string("expected ") + field);
        return value;
    }

    std::size_t pos_ = 0;
    std::span<const std::uint8_t> bytes_;
    const std::string& source_;
};

}  // namespace

GrayImage decode_pgm(std::span<const std::uint8_t> bytes, const std::string& source) {
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
        throw PgmError(source, 0, "not a binary PGM (magic must be P5)");
    }
    HeaderReader r(bytes, source);
    r.pos_ = 2;
    const std::size_t width = r.read_number("width");
    const std::size_t height = r.read_number("height");
    const std::size_t maxval_at = r.pos_;
    const std::size_t maxval = r.read_number("maxval");
    if (width == 0 || height == 0) throw PgmError(source, maxval_at, "zero image dimension");
    if (maxval != 255) throw PgmError(source, maxval_at, "maxval must be 255, got " + std::to_string(maxval));
    if (r.pos_ >= bytes.size() || !std::isspace(bytes[r.pos_])) {
        throw PgmError(source, r.pos_, "missing whitespace after maxval");
    }
    const std::size_t data_at = r.pos_ + 1;
    const std::size_t need = width * height;
    if (bytes.size() - data_at < need) {
        throw PgmError(source, bytes.size(), "truncated payload: expected " + std::to_string(need) + " bytes, found " +
                                                 std::to_string(bytes.size() - data_at));
    }
    GrayImage img(width, height);
    std::copy(bytes.begin() + data_at, bytes.begin() + data_at + need, img.pixels.begin());
    return img;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string() + " for reading");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_pgm(const GrayImage& image, const std::filesystem::path& path) { write_file(path, encode_pgm(image)); }

GrayImage read_pgm(const std::filesystem::path& path) { return decode_pgm(read_file(path), path.string()); }

}  // namespace ddim
