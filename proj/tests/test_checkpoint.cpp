#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <limits>

#include "ddim/checkpoint.hpp"
#include "ddim/pgm.hpp"
#include "suites.hpp"

using namespace ddim;

namespace {

UNet<float> trained_toy(std::uint64_t seed) {
    UNet<float> m(suites::toy_config());
    Rng rng(seed, "init");
    m.initialize(rng);
    std::mt19937_64 gen(seed);
    for (auto& [name, t] : m.parameters()) {
        if (name.rfind("head.", 0) == 0) t = oracle::random_tensor<float>(t.shape(), gen);
    }
    for (auto& [name, t] : m.buffers()) t = oracle::random_tensor<float>(t.shape(), gen, 0.5, 1.5);
    return m;
}

std::uint32_t read_u32(const std::vector<std::uint8_t>& b, std::size_t at) {
    return b[at] | (b[at + 1] << 8) | (b[at + 2] << 16) | (std::uint32_t(b[at + 3]) << 24);
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitExact) {
    const auto m = trained_toy(1);
    const NormStats norm{0.8123, 0.3141};
    const DiffusionSchedule sched(0.9, 0.05);
    const auto ckpt = decode_checkpoint(encode_checkpoint(Checkpoint::from_model(m, norm, sched)));
    EXPECT_EQ(ckpt.config, m.config());
    EXPECT_EQ(ckpt.norm, norm);
    EXPECT_EQ(ckpt.schedule, sched);
    const auto back = ckpt.to_model();
    EXPECT_EQ(back.parameters(), m.parameters());
    EXPECT_EQ(back.buffers(), m.buffers());
}

TEST(Checkpoint, HeaderLayout) {
    const auto m = trained_toy(2);
    const auto b = encode_checkpoint(Checkpoint::from_model(m, {}, {}));
    EXPECT_EQ(std::string(b.begin(), b.begin() + 8), "DDIMBRG1");
    EXPECT_EQ(read_u32(b, 8), 1u);
    EXPECT_EQ(read_u32(b, 12), 8u);   // height
    EXPECT_EQ(read_u32(b, 16), 16u);  // width
    double max_rate;
    std::memcpy(&max_rate, b.data() + 20, 8);
    EXPECT_EQ(max_rate, 0.95);
}

TEST(Checkpoint, TwoSavesAreByteIdentical) {
    const auto m = trained_toy(3);
    const auto dir = std::filesystem::temp_directory_path();
    save_checkpoint(m, {0.5, 0.2}, {}, dir / "ddim_a.ckpt");
    save_checkpoint(m, {0.5, 0.2}, {}, dir / "ddim_b.ckpt");
    EXPECT_EQ(read_file(dir / "ddim_a.ckpt"), read_file(dir / "ddim_b.ckpt"));
    EXPECT_EQ(load_checkpoint(dir / "ddim_a.ckpt").to_model().parameters(), m.parameters());
    std::filesystem::remove(dir / "ddim_a.ckpt");
    std::filesystem::remove(dir / "ddim_b.ckpt");
}

TEST(Checkpoint, TamperedMagicNamed) {
    auto b = encode_checkpoint(Checkpoint::from_model(trained_toy(4), {}, {}));
    b[0] = 'X';
    try {
        decode_checkpoint(b);
        FAIL() << "expected CheckpointError";
    } catch (const CheckpointError& e) {
        EXPECT_NE(std::string(e.what()).find("XDIMBRG1"), std::string::npos) << e.what();
    }
}

TEST(Checkpoint, UnknownVersionRejected) {
    auto b = encode_checkpoint(Checkpoint::from_model(trained_toy(5), {}, {}));
    b[8] = 2;
    EXPECT_THROW(decode_checkpoint(b), CheckpointError);
}

TEST(Checkpoint, TruncationAndTrailingBytesRejected) {
    const auto b = encode_checkpoint(Checkpoint::from_model(trained_toy(6), {}, {}));
    EXPECT_THROW(decode_checkpoint(std::span(b).first(b.size() - 3)), CheckpointError);
    auto longer = b;
    longer.push_back(0);
    EXPECT_THROW(decode_checkpoint(longer), CheckpointError);
}

TEST(Checkpoint, WiringMismatchRejected) {
    auto ckpt = Checkpoint::from_model(trained_toy(7), {}, {});
    ckpt.tensors.erase("mid.block1.conv2.bias");
    EXPECT_THROW(ckpt.to_model(), CheckpointError);
    ckpt = Checkpoint::from_model(trained_toy(7), {}, {});
    ckpt.tensors.at("head.bias") = Tensor<float>(Shape{2});
    EXPECT_THROW(ckpt.to_model(), CheckpointError);
}

TEST(Checkpoint, NonFiniteParameterRefused) {
    auto m = trained_toy(8);
    m.parameters().at("stem.bias")[0] = std::numeric_limits<float>::infinity();
    EXPECT_THROW(encode_checkpoint(Checkpoint::from_model(m, {}, {})), CheckpointError);
}

TEST(Checkpoint, MissingFileNamesPath) {
    try {
        load_checkpoint("/nonexistent/dir/x.ckpt");
        FAIL() << "expected CheckpointError";
    } catch (const CheckpointError& e) {
        EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/x.ckpt"), std::string::npos) << e.what();
    }
}
