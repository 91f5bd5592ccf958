#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "amnce/checkpoint.hpp"
#include "amnce/config.hpp"
#include "amnce/dataset.hpp"

using namespace amnce;

namespace {

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("amnce_test_" + name);
}

void write_file(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary);
    REQUIRE(out.good());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void push_be_u32(std::vector<unsigned char>& v, std::uint32_t value) {
    v.push_back(static_cast<unsigned char>(value >> 24));
    v.push_back(static_cast<unsigned char>(value >> 16));
    v.push_back(static_cast<unsigned char>(value >> 8));
    v.push_back(static_cast<unsigned char>(value));
}

std::vector<unsigned char> idx_images_bytes(std::uint32_t count, std::uint32_t rows, std::uint32_t cols,
                                            const std::vector<unsigned char>& pixels) {
    std::vector<unsigned char> bytes;
    push_be_u32(bytes, 0x00000803);
    push_be_u32(bytes, count);
    push_be_u32(bytes, rows);
    push_be_u32(bytes, cols);
    bytes.insert(bytes.end(), pixels.begin(), pixels.end());
    return bytes;
}

std::vector<double> flatten_params(const Mlp& net) {
    std::vector<double> out;
    for (const Tensor* p : std::as_const(net).params()) {
        out.insert(out.end(), p->data.begin(), p->data.end());
    }
    return out;
}

Checkpoint small_trained_checkpoint(std::uint64_t seed, std::size_t stop_iter = 0) {
    Rng data_rng(33);
    const Dataset ds = synth_dataset(SynthKind::Ring, 64, data_rng);

    RunConfig run;
    run.dataset = "synth:ring";
    run.synth_n = 64;
    run.train.latent_dim = 2;
    run.train.batch_size = 8;
    run.train.decoder_hidden = {8};
    run.train.estimator_hidden = {8};
    run.train.posterior_ld = {4, 0.1};
    run.train.seed = seed;
    run.iters = 20;
    run.stages = 2;

    Trainer trainer(ds.examples, run.train, run.schedule_for(ds.size()));
    if (stop_iter > 0) {
        trainer.run_until(stop_iter);
    } else {
        trainer.run();
    }
    return Checkpoint{run.serialize(), trainer.export_state()};
}

}  // namespace

TEST_CASE("idx pixel scaling endpoints") {
    const auto path = temp_path("scale.idx");
    write_file(path, idx_images_bytes(1, 1, 2, {255, 0}));
    const Dataset ds = load_idx(path.string());
    CHECK(ds.examples.at(0, 0) == 1.0);
    CHECK(ds.examples.at(0, 1) == -1.0);
    std::filesystem::remove(path);
}

TEST_CASE("idx header arithmetic") {
    // Header 0x803, 2, 28, 28 -> two 784-pixel images.
    std::vector<unsigned char> pixels(2 * 28 * 28, 7);
    const auto path = temp_path("header.idx");
    write_file(path, idx_images_bytes(2, 28, 28, pixels));
    const Dataset ds = load_idx(path.string());
    CHECK(ds.size() == 2);
    CHECK(ds.dim() == 784);
    std::filesystem::remove(path);
}

TEST_CASE("idx write-then-read round trip") {
    Rng rng(3);
    std::vector<unsigned char> pixels(2 * 4 * 3);
    for (auto& p : pixels) p = static_cast<unsigned char>(rng.uniform_index(256));
    const auto path = temp_path("roundtrip.idx");
    write_file(path, idx_images_bytes(2, 4, 3, pixels));
    const Dataset ds = load_idx(path.string());
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        const double expect = static_cast<double>(pixels[i]) / 127.5 - 1.0;
        CHECK(ds.examples.data[i] == expect);
    }
    std::filesystem::remove(path);
}

TEST_CASE("idx labels pair with images") {
    const auto ipath = temp_path("pair.idx");
    const auto lpath = temp_path("pair.labels");
    write_file(ipath, idx_images_bytes(3, 2, 2, std::vector<unsigned char>(12, 100)));
    std::vector<unsigned char> lbytes;
    push_be_u32(lbytes, 0x00000801);
    push_be_u32(lbytes, 3);
    lbytes.insert(lbytes.end(), {5, 0, 9});
    write_file(lpath, lbytes);

    const Dataset ds = load_idx(ipath.string(), lpath.string());
    REQUIRE(ds.labels.has_value());
    CHECK((*ds.labels)[0] == 5);
    CHECK((*ds.labels)[2] == 9);

    const Dataset dropped = ds.filter_label(5, /*keep=*/false);
    CHECK(dropped.size() == 2);
    const Dataset kept = ds.filter_label(9, /*keep=*/true);
    CHECK(kept.size() == 1);

    std::filesystem::remove(ipath);
    std::filesystem::remove(lpath);
}

TEST_CASE("idx malformed inputs raise typed errors") {
    const auto path = temp_path("bad.idx");

    // Bad magic.
    auto bytes = idx_images_bytes(1, 2, 2, std::vector<unsigned char>(4, 1));
    bytes[3] = 0x99;
    write_file(path, bytes);
    CHECK_THROWS_WITH_AS(load_idx(path.string()), doctest::Contains("magic"), std::runtime_error);

    // Truncated payload.
    bytes = idx_images_bytes(2, 2, 2, std::vector<unsigned char>(4, 1));  // needs 8 pixels
    write_file(path, bytes);
    CHECK_THROWS_WITH_AS(load_idx(path.string()), doctest::Contains("truncated"), std::runtime_error);

    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_idx(path.string()), std::runtime_error);  // missing file
}

TEST_CASE("idx header fuzzing never crashes") {
    Rng rng(99);
    const auto path = temp_path("fuzz.idx");
    const auto good = idx_images_bytes(2, 3, 3, std::vector<unsigned char>(18, 42));
    for (int trial = 0; trial < 300; ++trial) {
        auto bytes = good;
        const std::size_t pos = rng.uniform_index(16);
        bytes[pos] = static_cast<unsigned char>(rng.uniform_index(256));
        const bool magic_mutated =
            pos < 4 && (bytes[0] != 0 || bytes[1] != 0 || bytes[2] != 8 || bytes[3] != 3);
        write_file(path, bytes);
        try {
            const Dataset ds = load_idx(path.string());
            CHECK_FALSE(magic_mutated);  // a broken magic must never parse
            ds.validate();
        } catch (const std::exception&) {
            // rejected; that is fine
        }
    }
    std::filesystem::remove(path);
}

TEST_CASE("synthetic datasets are deterministic and in range") {
    Rng a(5), b(5);
    const Dataset da = synth_dataset(SynthKind::TwoSpirals, 500, a);
    const Dataset db = synth_dataset(SynthKind::TwoSpirals, 500, b);
    CHECK(da.examples.data == db.examples.data);
    da.validate();

    SynthParams grid;
    grid.grid_size = 1;
    grid.grid_std = 1e-3;
    Rng c(6);
    const Dataset dg = synth_dataset(SynthKind::GaussianGrid, 200, c, grid);
    for (double v : dg.examples.data) CHECK(std::abs(v) < 0.01);

    Rng d(7);
    SynthParams ring;
    ring.ring_radius = 0.6;
    ring.ring_std = 0.02;
    const Dataset dr = synth_dataset(SynthKind::Ring, 2000, d, ring);
    double mean_r = 0.0;
    for (std::size_t i = 0; i < dr.size(); ++i) {
        mean_r += std::sqrt(dr.examples.at(i, 0) * dr.examples.at(i, 0) +
                            dr.examples.at(i, 1) * dr.examples.at(i, 1));
    }
    CHECK(mean_r / 2000.0 == doctest::Approx(0.6).epsilon(0.02));

    CHECK_THROWS_AS(synth_dataset(SynthKind::Ring, 0, d), std::runtime_error);
    CHECK_THROWS_AS(parse_synth_kind("nope"), std::runtime_error);
}

TEST_CASE("pgm endpoints and grid layout") {
    const auto path = temp_path("grid.pgm");

    // All -1 maps to 0x00, all +1 maps to 0xff.
    emit_samples_pgm(Tensor::full({1, 4}, -1.0), 2, 2, 1, path.string());
    {
        std::ifstream in(path, std::ios::binary);
        std::string header;
        std::getline(in, header);
        CHECK(header == "P5");
        std::string dims, maxval;
        std::getline(in, dims);
        std::getline(in, maxval);
        CHECK(dims == "2 2");
        CHECK(maxval == "255");
        char px[4];
        in.read(px, 4);
        for (char c : px) CHECK(static_cast<unsigned char>(c) == 0);
    }
    emit_samples_pgm(Tensor::full({1, 4}, 1.0), 2, 2, 1, path.string());
    {
        std::ifstream in(path, std::ios::binary);
        in.ignore(64, '\n');
        in.ignore(64, '\n');
        in.ignore(64, '\n');
        char px[4];
        in.read(px, 4);
        for (char c : px) CHECK(static_cast<unsigned char>(c) == 255);
    }

    // 2x2 grid of 1x1 images: byte offsets follow row-major cells.
    Tensor imgs({4, 1}, {-1.0, 1.0, 1.0, -1.0});
    emit_samples_pgm(imgs, 1, 1, 2, path.string());
    {
        std::ifstream in(path, std::ios::binary);
        in.ignore(64, '\n');
        in.ignore(64, '\n');
        in.ignore(64, '\n');
        unsigned char px[4];
        in.read(reinterpret_cast<char*>(px), 4);
        CHECK(px[0] == 0);
        CHECK(px[1] == 255);
        CHECK(px[2] == 255);
        CHECK(px[3] == 0);
    }

    CHECK_THROWS_AS(emit_samples_pgm(Tensor({1, 3}), 2, 2, 1, path.string()), std::runtime_error);
    std::filesystem::remove(path);
}

TEST_CASE("run config parse, override, serialize round trip") {
    const std::string text =
        "# sample configuration\n"
        "dataset = synth:two_spirals\n"
        "latent_dim = 4\n"
        "batch_size = 32   # inline comment\n"
        "lr_generator = 2e-4\n"
        "adaptive = false\n"
        "decoder_hidden = 64,32\n"
        "seed = 9\n";
    RunConfig cfg = RunConfig::from_text(text);
    CHECK(cfg.dataset == "synth:two_spirals");
    CHECK(cfg.train.latent_dim == 4);
    CHECK(cfg.train.batch_size == 32);
    CHECK(cfg.train.lr_generator == doctest::Approx(2e-4));
    CHECK_FALSE(cfg.train.adaptive);
    CHECK(cfg.train.decoder_hidden == std::vector<std::size_t>{64, 32});
    CHECK(cfg.seed_given);
    CHECK(cfg.train.seed == 9);

    // Defaults survive a serialize/parse cycle.
    RunConfig again = RunConfig::from_text(cfg.serialize());
    CHECK(again.serialize() == cfg.serialize());

    CHECK_THROWS_WITH_AS(RunConfig::from_text("no_such_key = 1\n"), doctest::Contains("unknown key"),
                         std::runtime_error);
    CHECK_THROWS_AS(RunConfig::from_text("latent_dim == 3\n"), std::runtime_error);
    CHECK_THROWS_AS(RunConfig::from_text("batch_size = many\n"), std::runtime_error);
}

TEST_CASE("epoch to iteration conversion") {
    RunConfig cfg;
    cfg.epochs = 10;
    cfg.train.batch_size = 32;
    cfg.stages = 2;
    const StageSchedule s = cfg.schedule_for(320);  // 10 batches per epoch
    CHECK(s.total_iters == 100);
    CHECK(s.num_stages == 2);

    cfg.iters = 44;  // explicit override wins
    CHECK(cfg.schedule_for(320).total_iters == 44);
}

TEST_CASE("seed fallback from the environment") {
    RunConfig cfg;
    CHECK_FALSE(cfg.seed_given);
#ifdef _WIN32
    _putenv_s("AMNCE_SEED", "123");
#else
    setenv("AMNCE_SEED", "123", 1);
#endif
    apply_seed_fallback(cfg);
    CHECK(cfg.train.seed == 123);
#ifndef _WIN32
    unsetenv("AMNCE_SEED");
#endif

    RunConfig explicit_cfg;
    explicit_cfg.set("seed", "77");
    apply_seed_fallback(explicit_cfg);
    CHECK(explicit_cfg.train.seed == 77);
}

TEST_CASE("checkpoint round trip is bit exact") {
    const Checkpoint ckpt = small_trained_checkpoint(17);
    const auto path = temp_path("roundtrip.amce");
    save_checkpoint(path.string(), ckpt);
    const Checkpoint loaded = load_checkpoint(path.string());

    CHECK(loaded.config_echo == ckpt.config_echo);
    CHECK(loaded.state.iteration == ckpt.state.iteration);
    CHECK(loaded.state.finalized == ckpt.state.finalized);
    CHECK(loaded.state.rng_state == ckpt.state.rng_state);
    CHECK(flatten_params(loaded.state.generator.decoder) == flatten_params(ckpt.state.generator.decoder));
    REQUIRE(loaded.state.prior.num_stages() == ckpt.state.prior.num_stages());
    for (std::size_t k = 0; k < ckpt.state.prior.num_stages(); ++k) {
        CHECK(flatten_params(loaded.state.prior.stages[k].net) ==
              flatten_params(ckpt.state.prior.stages[k].net));
        CHECK(loaded.state.prior.stages[k].frozen);
    }
    CHECK(loaded.state.memory_samples.data == ckpt.state.memory_samples.data);
    REQUIRE(loaded.state.memory_snapshot.has_value() == ckpt.state.memory_snapshot.has_value());
    if (loaded.state.memory_snapshot) {
        CHECK(loaded.state.memory_snapshot->data == ckpt.state.memory_snapshot->data);
    }
    for (std::size_t i = 0; i < ckpt.state.adam_generator.first_moment.size(); ++i) {
        CHECK(loaded.state.adam_generator.first_moment[i].data ==
              ckpt.state.adam_generator.first_moment[i].data);
        CHECK(loaded.state.adam_generator.second_moment[i].data ==
              ckpt.state.adam_generator.second_moment[i].data);
    }

    // Saving the loaded checkpoint reproduces the file byte for byte.
    const auto path2 = temp_path("roundtrip2.amce");
    save_checkpoint(path2.string(), loaded);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);

    std::filesystem::remove(path);
    std::filesystem::remove(path2);
}

TEST_CASE("checkpoint rejects corruption") {
    const Checkpoint ckpt = small_trained_checkpoint(18);
    const auto path = temp_path("corrupt.amce");
    save_checkpoint(path.string(), ckpt);

    // Corrupt the magic.
    {
        std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
        f.seekp(0);
        f.put('X');
    }
    CHECK_THROWS_WITH_AS(load_checkpoint(path.string()), doctest::Contains("magic"), std::runtime_error);

    // Truncate the file.
    save_checkpoint(path.string(), ckpt);
    const auto full = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, full / 2);
    CHECK_THROWS_AS(load_checkpoint(path.string()), std::runtime_error);

    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_checkpoint(path.string()), std::runtime_error);
}

TEST_CASE("mid-stage resume reproduces the uninterrupted trajectory") {
    Rng data_rng(33);
    const Dataset ds = synth_dataset(SynthKind::Ring, 64, data_rng);

    RunConfig run;
    run.synth_n = 64;
    run.train.latent_dim = 2;
    run.train.batch_size = 8;
    run.train.decoder_hidden = {8};
    run.train.estimator_hidden = {8};
    run.train.posterior_ld = {4, 0.1};
    run.train.seed = 55;
    run.iters = 24;
    run.stages = 2;

    // Straight run.
    Trainer straight(ds.examples, run.train, run.schedule_for(ds.size()));
    straight.run();

    // Interrupted at iteration 13 (mid second stage), saved, reloaded, resumed.
    Trainer first_half(ds.examples, run.train, run.schedule_for(ds.size()));
    first_half.run_until(13);
    const auto path = temp_path("resume.amce");
    save_checkpoint(path.string(), {run.serialize(), first_half.export_state()});

    const Checkpoint loaded = load_checkpoint(path.string());
    const RunConfig echoed = RunConfig::from_text(loaded.config_echo);
    Trainer resumed(ds.examples, echoed.train, echoed.schedule_for(ds.size()), loaded.state);
    resumed.run();

    CHECK(flatten_params(resumed.generator().decoder) == flatten_params(straight.generator().decoder));
    REQUIRE(resumed.prior().num_stages() == straight.prior().num_stages());
    for (std::size_t k = 0; k < resumed.prior().num_stages(); ++k) {
        CHECK(flatten_params(resumed.prior().stages[k].net) ==
              flatten_params(straight.prior().stages[k].net));
    }
    CHECK(resumed.memory().samples().data == straight.memory().samples().data);

    std::filesystem::remove(path);
}
