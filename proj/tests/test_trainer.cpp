#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "ddim/checkpoint.hpp"
#include "ddim/trainer.hpp"
#include "suites.hpp"

using namespace ddim;

namespace {

std::vector<Tensor<float>> toy_corpus(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::vector<Tensor<float>> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(oracle::random_tensor<float>({8, 16, 1}, gen, 0, 1));
    return out;
}

UNet<float> toy_model(std::uint64_t seed) {
    UNet<float> m(suites::toy_config());
    Rng rng(seed, "init");
    m.initialize(rng);
    return m;
}

}  // namespace

TEST(NormStats, ConstantCorpusRejected) {
    const std::vector<Tensor<float>> c{Tensor<float>(Shape{4, 4, 1}, 0.5f)};
    EXPECT_THROW(compute_norm_stats(c), std::invalid_argument);
    EXPECT_THROW(compute_norm_stats({}), std::invalid_argument);
}

TEST(NormStats, TwoPointPopulation) {
    const std::vector<Tensor<float>> c{Tensor<float>(Shape{4, 4, 1}, 0.0f), Tensor<float>(Shape{4, 4, 1}, 1.0f)};
    const auto s = compute_norm_stats(c);
    EXPECT_DOUBLE_EQ(s.mean, 0.5);
    EXPECT_DOUBLE_EQ(s.std, 0.5);
}

TEST(NormStats, NormalizedCorpusIsStandard) {
    const auto corpus = toy_corpus(10, 1);
    const auto s = compute_norm_stats(corpus);
    const auto z = normalize_corpus(corpus, s);
    const auto again = compute_norm_stats(z);
    EXPECT_NEAR(again.mean, 0.0, 1e-6);
    EXPECT_NEAR(again.std, 1.0, 1e-4);
    for (double p : {0.0, 0.25, 1.0}) EXPECT_NEAR(s.denormalize(s.normalize(p)), p, 1e-6);
}

TEST(AdamW, ZeroGradientOnlyDecays) {
    TrainConfig c;
    c.learning_rate = 0.01;
    c.weight_decay = 0.1;
    AdamW opt(c);
    std::map<std::string, Tensor<float>> p{{"w", Tensor<float>(Shape{1}, 2.0f)}};
    std::map<std::string, Tensor<float>> g{{"w", Tensor<float>(Shape{1}, 0.0f)}};
    opt.step(p, g);
    EXPECT_FLOAT_EQ(p.at("w")[0], 2.0f - 0.01f * 0.1f * 2.0f);
}

TEST(AdamW, FirstStepMovesByLearningRate) {
    TrainConfig c;
    c.learning_rate = 0.01;
    c.weight_decay = 0.0;
    AdamW opt(c);
    std::map<std::string, Tensor<float>> p{{"w", Tensor<float>(Shape{2}, std::vector<float>{1.0f, 1.0f})}};
    std::map<std::string, Tensor<float>> g{{"w", Tensor<float>(Shape{2}, std::vector<float>{0.5f, -3.0f})}};
    opt.step(p, g);
    EXPECT_NEAR(p.at("w")[0], 1.0 - 0.01, 1e-6);
    EXPECT_NEAR(p.at("w")[1], 1.0 + 0.01, 1e-6);
    EXPECT_EQ(opt.steps(), 1u);
}

TEST(Trainer, ZeroLearningRateLeavesWeightsUnchanged) {
    auto m = toy_model(1);
    const auto before = m.parameters();
    TrainConfig c;
    c.learning_rate = 0.0;
    Trainer t(m, c);
    const auto corpus = toy_corpus(4, 2);
    const std::vector<std::size_t> idx{0, 1, 2, 3};
    t.train_step(stack_batch(corpus, idx));
    EXPECT_EQ(m.parameters(), before);
}

TEST(Trainer, ZeroHeadLossEqualsMeanAbsNoise) {
    auto m = toy_model(2);
    TrainConfig c;
    c.seed = 9;
    Trainer t(m, c);
    const auto corpus = normalize_corpus(toy_corpus(32, 3), compute_norm_stats(toy_corpus(32, 3)));
    std::vector<std::size_t> idx(32);
    std::iota(idx.begin(), idx.end(), 0);
    const auto batch = stack_batch(corpus, idx);

    // Replay the trainer's draws to compute mean|eps| independently.
    Rng replay(9, "training");
    for (std::size_t i = 0; i < 32; ++i) replay.uniform();
    double sum = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) sum += std::abs(static_cast<float>(replay.normal()));
    const double expected = sum / static_cast<double>(batch.size());

    const double loss = t.train_step(batch);
    EXPECT_NEAR(loss, expected, 1e-6);
    EXPECT_NEAR(loss, std::sqrt(2.0 / std::numbers::pi), 0.02);
}

TEST(Trainer, SameSeedSameLossSequenceAndCheckpoint) {
    const auto corpus = normalize_corpus(toy_corpus(12, 4), compute_norm_stats(toy_corpus(12, 4)));
    auto run = [&] {
        auto m = toy_model(3);
        TrainConfig c;
        c.batch_size = 5;
        c.epochs = 3;
        c.seed = 11;
        Trainer t(m, c);
        auto log = t.fit(corpus);
        return std::make_pair(log, encode_checkpoint(Checkpoint::from_model(m, {}, {})));
    };
    const auto a = run(), b = run();
    EXPECT_EQ(a.first, b.first);
    EXPECT_EQ(a.first.size(), 3u);
    EXPECT_EQ(a.second, b.second);
}

TEST(Trainer, EpochCallbackSeesEveryEpoch) {
    const auto corpus = normalize_corpus(toy_corpus(6, 5), compute_norm_stats(toy_corpus(6, 5)));
    auto m = toy_model(4);
    TrainConfig c;
    c.batch_size = 4;
    c.epochs = 2;
    Trainer t(m, c);
    std::vector<std::string> lines;
    const auto log = t.fit(corpus, [&](std::size_t e, double l) { lines.push_back(format_loss_line(e, l)); });
    ASSERT_EQ(lines.size(), 2u);
    EXPECT_EQ(lines[0], format_loss_line(1, log[0]));
    EXPECT_EQ(lines[1].rfind("epoch 2 loss ", 0), 0u);
}

TEST(Trainer, NonFiniteLossNamesParameter) {
    auto m = toy_model(5);
    m.parameters().at("mid.block0.conv1.bias")[0] = std::numeric_limits<float>::quiet_NaN();
    Trainer t(m, TrainConfig{});
    const auto corpus = toy_corpus(2, 6);
    const std::vector<std::size_t> idx{0, 1};
    try {
        t.train_step(stack_batch(corpus, idx));
        FAIL() << "expected NonFiniteLoss";
    } catch (const NonFiniteLoss& e) {
        EXPECT_NE(std::string(e.what()).find("mid.block0.conv1.bias"), std::string::npos) << e.what();
    }
}

TEST(Trainer, InvalidConfigRejected) {
    auto m = toy_model(6);
    TrainConfig c;
    c.batch_size = 0;
    EXPECT_THROW(Trainer(m, c), std::invalid_argument);
}

TEST(LossLine, Format) { EXPECT_EQ(format_loss_line(3, 0.5), "epoch 3 loss 0.500000"); }
