#include <gtest/gtest.h>

#include <filesystem>

#include "ddim/pgm.hpp"

using namespace ddim;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

}  // namespace

TEST(Pgm, ExactEncoding) {
    GrayImage img(2, 1);
    img.pixels = {0, 255};
    auto expect = bytes_of("P5\n2 1\n255\n");
    expect.push_back(0x00);
    expect.push_back(0xFF);
    EXPECT_EQ(encode_pgm(img), expect);
}

TEST(Pgm, RoundTripThroughFile) {
    GrayImage img(5, 3);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<std::uint8_t>(i * 17);
    const auto path = std::filesystem::temp_directory_path() / "ddim_pgm_roundtrip.pgm";
    write_pgm(img, path);
    EXPECT_EQ(read_pgm(path), img);
    std::filesystem::remove(path);
}

TEST(Pgm, CommentsAndWhitespaceTolerated) {
    auto b = bytes_of("P5 # a comment\n# another\n 2\t1\r\n255\n");
    b.push_back(7);
    b.push_back(9);
    const auto img = decode_pgm(b);
    EXPECT_EQ(img.width, 2u);
    EXPECT_EQ(img.height, 1u);
    EXPECT_EQ(img.pixels, (std::vector<std::uint8_t>{7, 9}));
}

TEST(Pgm, WrongMagicRejected) {
    EXPECT_THROW(decode_pgm(bytes_of("P2\n1 1\n255\n0")), PgmError);
}

TEST(Pgm, MaxvalMustBe255) {
    try {
        decode_pgm(bytes_of("P5\n1 1\n65535\n\x01\x02"), "img.pgm");
        FAIL() << "expected PgmError";
    } catch (const PgmError& e) {
        EXPECT_NE(std::string(e.what()).find("img.pgm"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("maxval"), std::string::npos);
    }
}

TEST(Pgm, TruncatedPayloadReportsFileAndOffset) {
    auto b = bytes_of("P5\n3 2\n255\n");
    b.insert(b.end(), {1, 2, 3});
    try {
        decode_pgm(b, "short.pgm");
        FAIL() << "expected PgmError";
    } catch (const PgmError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("short.pgm"), std::string::npos) << msg;
        EXPECT_EQ(e.offset(), b.size());
        EXPECT_NE(msg.find("byte " + std::to_string(b.size())), std::string::npos) << msg;
    }
}

TEST(Pgm, MissingDimensionReported) {
    EXPECT_THROW(decode_pgm(bytes_of("P5\n12\n")), PgmError);
}
