#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>

#include "vqb/check.hpp"
#include "vqb/experiment.hpp"
#include "vqb/serialize.hpp"

using namespace vqb;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
}

std::filesystem::path temp_file(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("array container round-trips matrices, vectors and u64 arrays") {
    Rng rng(1);
    const auto path = temp_file("vqb_container.bin");

    for (int trial = 0; trial < 10; ++trial) {
        ArrayContainer c;
        const Matrix m = random_matrix(1 + rng.uniform_index(6), 1 + rng.uniform_index(6), rng);
        std::vector<double> v(1 + rng.uniform_index(9));
        for (auto& x : v) x = rng.normal();
        std::vector<std::uint64_t> u(1 + rng.uniform_index(5));
        for (auto& x : u) x = rng.next_u64();

        c.add("m", m);
        c.add("v", v);
        c.add_u64("u", u);
        c.save(path.string());

        const ArrayContainer back = ArrayContainer::load(path.string());
        CHECK(back.matrix("m") == m);
        CHECK(back.vec("v") == v);
        CHECK(back.u64("u") == u);
        CHECK(back.has("m"));
        CHECK_FALSE(back.has("w"));
        CHECK_THROWS(back.matrix("u"));
    }
    std::filesystem::remove(path);
}

TEST_CASE("codebook file layout: 3-field header then head-major rows") {
    Rng rng(2);
    const auto path = temp_file("vqb_codebook.bin");
    const std::vector<Codebook> cbs = {Codebook{random_matrix(4, 3, rng)},
                                       Codebook{random_matrix(4, 3, rng)}};
    save_codebooks(path.string(), cbs);

    CHECK(std::filesystem::file_size(path) == 24 + sizeof(double) * 2 * 4 * 3);

    std::ifstream in(path, std::ios::binary);
    std::uint64_t header[3];
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    CHECK(header[0] == 4);  // K
    CHECK(header[1] == 3);  // d
    CHECK(header[2] == 2);  // num_heads
    double first = 0.0;
    in.read(reinterpret_cast<char*>(&first), sizeof(first));
    CHECK(first == cbs[0].words(0, 0));

    const std::vector<Codebook> back = load_codebooks(path.string());
    REQUIRE(back.size() == 2);
    CHECK(back[0].words == cbs[0].words);
    CHECK(back[1].words == cbs[1].words);
    std::filesystem::remove(path);
}

TEST_CASE("reservoir snapshots reuse the codebook array format") {
    Rng rng(21);
    const auto path = temp_file("vqb_reservoir.bin");
    Reservoir res(8, 3);
    reservoir_update(res, random_matrix(5, 3, rng), rng);
    save_reservoir_snapshot(path.string(), res);

    const std::vector<Codebook> back = load_codebooks(path.string());
    REQUIRE(back.size() == 1);
    CHECK(back[0].words == res.contents());
    std::filesystem::remove(path);

    Reservoir empty(8, 3);
    CHECK_THROWS(save_reservoir_snapshot(path.string(), empty));
}

TEST_CASE("checkpoint restores training bit for bit") {
    const auto path = temp_file("vqb_checkpoint.bin");

    TrainerConfig cfg;
    cfg.method.batchnorm = true;
    cfg.method.reestimate = true;
    cfg.schedule = {10, 40, 10};
    cfg.codebook_size = 8;
    cfg.reservoir_capacity = 128;
    cfg.polyak = true;
    cfg.seed = 33;

    const Dataset ds = make_synthetic(Task::Autoencode, cfg.seed);
    const auto batch_at = [&](TrainerState& st) {
        std::vector<std::size_t> idx(16);
        for (auto& i : idx) i = st.train_rng.uniform_index(ds.train_x.rows());
        return ds.train_batch(idx);
    };

    // Uninterrupted reference run.
    TrainerState straight = make_trainer(cfg);
    for (int i = 0; i < 40; ++i) train_step(straight, batch_at(straight));

    // Run 20 steps, checkpoint, keep going in a fresh state.
    TrainerState first = make_trainer(cfg);
    for (int i = 0; i < 20; ++i) train_step(first, batch_at(first));
    save_checkpoint(path.string(), first);

    TrainerState resumed = make_trainer(cfg);
    load_checkpoint(path.string(), resumed);
    CHECK(resumed.iteration == 20);
    for (int i = 0; i < 20; ++i) train_step(resumed, batch_at(resumed));

    for (std::size_t l = 0; l < straight.encoder.layers.size(); ++l)
        CHECK(straight.encoder.layers[l].weight == resumed.encoder.layers[l].weight);
    for (std::size_t l = 0; l < straight.decoder.layers.size(); ++l)
        CHECK(straight.decoder.layers[l].weight == resumed.decoder.layers[l].weight);
    CHECK(straight.codebooks[0].words == resumed.codebooks[0].words);
    CHECK(straight.bn.running_mean == resumed.bn.running_mean);
    CHECK(straight.bn.running_var == resumed.bn.running_var);
    CHECK(straight.reservoir.items == resumed.reservoir.items);
    CHECK(straight.reservoir.seen == resumed.reservoir.seen);
    CHECK(straight.avg.codebooks[0].words == resumed.avg.codebooks[0].words);
    CHECK(straight.train_rng.state() == resumed.train_rng.state());
    CHECK(straight.sample_rng.state() == resumed.sample_rng.state());
    CHECK(straight.reest_rng.state() == resumed.reest_rng.state());

    const Batch test = ds.test_batch();
    const EvalResult ea = evaluate(straight, test, true);
    const EvalResult eb = evaluate(resumed, test, true);
    CHECK(ea.task_loss == eb.task_loss);

    std::filesystem::remove(path);
}

TEST_CASE("checkpoint into a mismatched configuration is rejected") {
    const auto path = temp_file("vqb_checkpoint_mismatch.bin");
    TrainerConfig cfg;
    cfg.codebook_size = 8;
    TrainerState st = make_trainer(cfg);
    save_checkpoint(path.string(), st);

    TrainerConfig other = cfg;
    other.codebook_size = 16;
    TrainerState bad = make_trainer(other);
    CHECK_THROWS_AS(load_checkpoint(path.string(), bad), config_error);
    std::filesystem::remove(path);
}

TEST_CASE("run_experiment save/resume reproduces the uninterrupted CSV") {
    const auto ckpt = temp_file("vqb_run_checkpoint.bin");

    ExperimentConfig cfg;
    cfg.method = Method::BnReest;
    cfg.iterations = 120;
    cfg.eval_every = 30;
    cfg.m_init = 20;
    cfg.m_reestim = 60;
    cfg.r_reestim = 20;
    cfg.train_size = 256;
    cfg.test_size = 64;
    cfg.codebook_size = 16;
    cfg.reservoir_capacity = 256;

    RunOptions save_opts;
    save_opts.checkpoint_save = ckpt.string();
    save_opts.checkpoint_at = 50;  // mid-schedule, inside the reestimation window
    const RunResult full = run_experiment(cfg, save_opts);

    RunOptions resume_opts;
    resume_opts.resume_from = ckpt.string();
    const RunResult tail = run_experiment(cfg, resume_opts);

    // Rows at iterations > 50 must be byte-identical between the two runs.
    const std::string full_tail = full.csv.substr(full.csv.find("\n60,") + 1);
    const std::string resumed_tail = tail.csv.substr(tail.csv.find("\n60,") + 1);
    CHECK(full_tail == resumed_tail);
    CHECK(tail.rows.front().iteration == 60);

    std::filesystem::remove(ckpt);
}
