// ddim_bridge: dataset generation, training, sampling and inspection.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "ddim/bridge.hpp"
#include "ddim/checkpoint.hpp"
#include "ddim/diffusion.hpp"
#include "ddim/sampler.hpp"
#include "ddim/trainer.hpp"

namespace {

using namespace ddim;

constexpr double kOracleTolerance = 1e-4;

struct GenArgs {
    std::string out;
    std::size_t per_class = 1200;
    std::uint64_t seed = 0;
    std::size_t width = 192, height = 48;
};

struct TrainArgs {
    std::string data, out, loss_log;
    std::size_t epochs = 1, batch = 64, block_depth = 2, bottleneck = 0, embedding = 32;
    double lr = 1e-3, weight_decay = 1e-4;
    std::vector<std::size_t> widths{32, 64, 96};
    std::uint64_t seed = 0;
};

struct SampleArgs {
    std::string ckpt, out, grid;
    std::size_t count = 8, steps = 20;
    std::uint64_t seed = 0;
};

struct NoisifyArgs {
    std::string data, out;
    std::size_t index = 0, levels = 8;
    std::uint64_t seed = 0;
};

struct OracleArgs {
    std::size_t trials = 50, steps = 20;
    std::uint64_t seed = 0;
};

std::string numbered(const std::string& stem, std::size_t k) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%03zu.pgm", stem.c_str(), k);
    return buf;
}

int run_gen(const GenArgs& a) {
    const RenderConfig rc{a.width, a.height};
    const auto entries = generate_corpus(a.per_class, a.seed, a.out, rc);
    std::cout << "wrote " << entries.size() << " images (" << a.per_class << " per class, " << a.width << "x"
              << a.height << ") to " << a.out << "\n";
    return 0;
}

int run_train(const TrainArgs& a) {
    const auto corpus = load_corpus(a.data);
    const auto& shape = corpus.front().shape();

    UNetConfig mc;
    mc.image_height = shape[0];
    mc.image_width = shape[1];
    mc.widths = a.widths;
    mc.bottleneck_width =
        a.bottleneck ? a.bottleneck : static_cast<std::size_t>(std::lround(a.widths.back() * 4.0 / 3.0));
    mc.block_depth = a.block_depth;
    mc.embedding_size = a.embedding;
    mc.validate();

    const NormStats norm = compute_norm_stats(corpus);
    const auto standardized = normalize_corpus(corpus, norm);

    UNet<float> model(mc);
    Rng init(a.seed, "init");
    model.initialize(init);

    TrainConfig tc;
    tc.epochs = a.epochs;
    tc.batch_size = a.batch;
    tc.learning_rate = a.lr;
    tc.weight_decay = a.weight_decay;
    tc.seed = a.seed;
    const DiffusionSchedule schedule;
    Trainer trainer(model, tc, schedule);

    std::ofstream log;
    if (!a.loss_log.empty()) {
        log.open(a.loss_log);
        if (!log) throw std::runtime_error("cannot write loss log " + a.loss_log);
    }
    std::cout << "training on " << corpus.size() << " images " << mc.image_width << "x" << mc.image_height << ", "
              << model.parameter_count() << " parameters\n";
    trainer.fit(standardized, [&](std::size_t epoch, double loss) {
        const auto line = format_loss_line(epoch, loss);
        std::cout << line << std::endl;
        if (log.is_open()) log << line << '\n' << std::flush;
    });
    save_checkpoint(model, norm, schedule, a.out);
    std::cout << "saved " << a.out << "\n";
    return 0;
}

int run_sample(const SampleArgs& a) {
    const auto ckpt = load_checkpoint(a.ckpt);
    const auto model = ckpt.to_model();
    SamplerConfig sc;
    sc.steps = a.steps;
    sc.schedule = ckpt.schedule;
    sc.norm = ckpt.norm;
    const auto images = generate(a.count, a.seed, model, sc);
    std::filesystem::create_directories(a.out);
    for (std::size_t k = 0; k < images.size(); ++k) write_pgm(images[k], std::filesystem::path(a.out) / numbered("sample", k));
    if (!a.grid.empty()) write_pgm(contact_sheet(images), a.grid);
    std::cout << "wrote " << images.size() << " samples to " << a.out << "\n";
    return 0;
}

int run_noisify(const NoisifyArgs& a) {
    const auto corpus = load_corpus(a.data);
    if (a.index >= corpus.size()) {
        throw std::out_of_range("image index " + std::to_string(a.index) + " outside corpus of " +
                                std::to_string(corpus.size()));
    }
    if (a.levels < 2) throw std::invalid_argument("--levels must be >= 2");
    const NormStats norm = compute_norm_stats(corpus);
    const auto x0 = normalize_corpus(std::span(&corpus[a.index], 1), norm).front();
    Rng rng(a.seed, "noisify");
    Tensor<float> eps(x0.shape());
    for (auto& v : eps.values()) v = static_cast<float>(rng.normal());

    const DiffusionSchedule schedule;
    std::filesystem::create_directories(a.out);
    std::vector<GrayImage> strip;
    for (std::size_t k = 0; k < a.levels; ++k) {
        const double t = static_cast<double>(k) / static_cast<double>(a.levels - 1);
        strip.push_back(to_pixels(noisify(x0, eps, t, schedule).x_t, norm));
        write_pgm(strip.back(), std::filesystem::path(a.out) / numbered("noisy", k));
    }
    write_pgm(contact_sheet(strip, a.levels), std::filesystem::path(a.out) / "strip.pgm");
    std::cout << "wrote " << a.levels << " noise levels of image " << a.index << " to " << a.out << "\n";
    return 0;
}

int run_oracle(const OracleArgs& a) {
    const auto r = reconstruct_oracle(a.trials, a.steps, a.seed);
    const bool ok = r.max_error <= kOracleTolerance;
    std::printf("trials %zu steps %zu max error %.3e (tolerance %.0e) %s\n", r.trials, r.steps, r.max_error,
                kOracleTolerance, ok ? "ok" : "FAILED");
    return ok ? 0 : 1;
}

int run_info(const std::string& path) {
    const auto ckpt = load_checkpoint(path);
    const auto& c = ckpt.config;
    std::cout << "format DDIMBRG1 version " << kCheckpointVersion << "\n";
    std::cout << "image " << c.image_width << "x" << c.image_height << "\n";
    std::cout << "widths";
    for (auto w : c.widths) std::cout << ' ' << w;
    std::cout << "\nbottleneck " << c.bottleneck_width << "\n";
    std::cout << "block depth " << c.block_depth << "\n";
    std::cout << "embedding size " << c.embedding_size << "\n";
    std::printf("signal rate max %.6f min %.6f\n", ckpt.schedule.max_signal_rate(), ckpt.schedule.min_signal_rate());
    std::printf("norm mean %.6f std %.6f\n", ckpt.norm.mean, ckpt.norm.std);
    std::cout << "parameters " << ckpt.to_model().parameter_count() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DDIM bridge-image pipeline"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-dataset", "Render the bridge corpus and its manifest");
    gen_cmd->add_option("--out", gen.out, "Output directory")->required();
    gen_cmd->add_option("--per-class", gen.per_class, "Images per class")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--seed", gen.seed, "Random seed");
    gen_cmd->add_option("--width", gen.width, "Image width (multiple of 8)");
    gen_cmd->add_option("--height", gen.height, "Image height (multiple of 8)");

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "Train the noise predictor");
    train_cmd->add_option("--data", train.data, "Corpus directory")->required();
    train_cmd->add_option("--out", train.out, "Checkpoint path")->required();
    train_cmd->add_option("--epochs", train.epochs)->check(CLI::PositiveNumber);
    train_cmd->add_option("--batch", train.batch)->check(CLI::PositiveNumber);
    train_cmd->add_option("--lr", train.lr)->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--weight-decay", train.weight_decay)->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--widths", train.widths, "Level widths, e.g. 32,64,96")->delimiter(',');
    train_cmd->add_option("--bottleneck", train.bottleneck, "Bottleneck width (default 4/3 of the last width)");
    train_cmd->add_option("--block-depth", train.block_depth)->check(CLI::PositiveNumber);
    train_cmd->add_option("--embedding", train.embedding, "Noise embedding size")->check(CLI::PositiveNumber);
    train_cmd->add_option("--seed", train.seed);
    train_cmd->add_option("--loss-log", train.loss_log, "Write one loss line per epoch");

    SampleArgs smp;
    auto* sample_cmd = app.add_subcommand("sample", "Generate images from latent noise");
    sample_cmd->add_option("--ckpt", smp.ckpt)->required();
    sample_cmd->add_option("--count", smp.count)->check(CLI::PositiveNumber);
    sample_cmd->add_option("--steps", smp.steps)->check(CLI::PositiveNumber);
    sample_cmd->add_option("--seed", smp.seed);
    sample_cmd->add_option("--out", smp.out)->required();
    sample_cmd->add_option("--grid", smp.grid, "Contact sheet path");

    NoisifyArgs noi;
    auto* noisify_cmd = app.add_subcommand("noisify-demo", "Noise one corpus image at evenly spaced times");
    noisify_cmd->add_option("--data", noi.data)->required();
    noisify_cmd->add_option("--index", noi.index);
    noisify_cmd->add_option("--levels", noi.levels)->check(CLI::Range(2, 1000));
    noisify_cmd->add_option("--seed", noi.seed);
    noisify_cmd->add_option("--out", noi.out)->required();

    OracleArgs ora;
    auto* oracle_cmd = app.add_subcommand("reconstruct-oracle", "Recover images with an exact denoiser");
    oracle_cmd->add_option("--trials", ora.trials)->check(CLI::PositiveNumber);
    oracle_cmd->add_option("--steps", ora.steps)->check(CLI::PositiveNumber);
    oracle_cmd->add_option("--seed", ora.seed);

    std::string info_path;
    auto* info_cmd = app.add_subcommand("info", "Print checkpoint header fields");
    info_cmd->add_option("--ckpt", info_path)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*gen_cmd) return run_gen(gen);
        if (*train_cmd) return run_train(train);
        if (*sample_cmd) return run_sample(smp);
        if (*noisify_cmd) return run_noisify(noi);
        if (*oracle_cmd) return run_oracle(ora);
        if (*info_cmd) return run_info(info_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
