#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "vqb/batchnorm.hpp"
#include "vqb/check.hpp"
#include "vqb/ema.hpp"
#include "vqb/gradcheck.hpp"
#include "vqb/trainer.hpp"

using namespace vqb;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
}

Assignment one_per_codeword(std::size_t k) {
    Assignment a;
    a.num_heads = 1;
    a.usage = UsageHistogram(k);
    a.indices.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
        a.indices[i] = static_cast<std::uint32_t>(i);
        a.usage.add(i);
    }
    return a;
}

Assignment single(std::size_t k, std::uint32_t index) {
    Assignment a;
    a.num_heads = 1;
    a.usage = UsageHistogram(k);
    a.indices = {index};
    a.usage.add(index);
    return a;
}

}  // namespace

TEST_CASE("schedule_step follows the warm-up/reestimation windows") {
    const TrainSchedule s{100, 200, 50};
    CHECK(schedule_step(50, s).kind == PhaseKind::Warmup);
    CHECK(schedule_step(99, s).kind == PhaseKind::Warmup);

    const Phase at100 = schedule_step(100, s);
    CHECK(at100.kind == PhaseKind::Quantize);
    CHECK(at100.reestimate_now);

    CHECK(schedule_step(150, s).reestimate_now);
    CHECK_FALSE(schedule_step(151, s).reestimate_now);
    CHECK_FALSE(schedule_step(350, s).reestimate_now);
    CHECK(schedule_step(350, s).kind == PhaseKind::Quantize);

    CHECK_THROWS_AS(schedule_step(0, TrainSchedule{0, 0, 0}), std::invalid_argument);
}

TEST_CASE("sgd_codebook_update arithmetic") {
    Codebook cb{Matrix::from_rows({{1.0, 0.0}})};
    const Matrix zero(1, 2);
    sgd_codebook_update(cb, zero, OptimConfig{0.1, 10.0});
    CHECK(cb.words(0, 0) == 1.0);
    CHECK(cb.words(0, 1) == 0.0);

    // Single sample at the origin, effective step 0.05: w <- w - 0.05*2*(w-e).
    const Matrix e = Matrix::from_rows({{0.0, 0.0}});
    const Matrix grad = codebook_grad(e, single(1, 0), cb);
    sgd_codebook_update(cb, grad, OptimConfig{0.05, 1.0});
    CHECK(cb.words(0, 0) == doctest::Approx(0.9));
    CHECK(cb.words(0, 1) == doctest::Approx(0.0));

    Matrix bad(1, 2);
    bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(sgd_codebook_update(cb, bad, OptimConfig{}), numeric_error);
}

TEST_CASE("codebook SGD with full assignment is an online k-means step") {
    // All n samples assigned to the one codeword; effective step n/(2*n)
    // lands the codeword exactly on the batch mean.
    Rng rng(1);
    Codebook cb{random_matrix(1, 3, rng)};
    const Matrix e = random_matrix(6, 3, rng);
    Assignment a;
    a.num_heads = 1;
    a.usage = UsageHistogram(1);
    a.indices.assign(6, 0);
    for (int i = 0; i < 6; ++i) a.usage.add(0);

    const Matrix grad = codebook_grad(e, a, cb);
    sgd_codebook_update(cb, grad, OptimConfig{0.5, 1.0});
    for (std::size_t j = 0; j < 3; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < 6; ++i) mean += e(i, j);
        mean /= 6.0;
        CHECK(cb.words(0, j) == doctest::Approx(mean).epsilon(1e-12));
    }
}

TEST_CASE("EMA single-sample update matches the SGD form") {
    Rng rng(2);
    Codebook cb{random_matrix(4, 3, rng)};
    const Codebook before = cb;
    EmaState state = make_ema_state(cb, 0.9);

    const Matrix e = random_matrix(1, 3, rng);
    ema_codebook_update(state, e, single(4, 2), 0, cb);
    for (std::size_t j = 0; j < 3; ++j)
        CHECK(cb.words(2, j) == doctest::Approx(0.9 * before.words(2, j) + 0.1 * e(0, j))
                                    .epsilon(1e-12));
    // Unassigned codewords are exactly unchanged.
    for (std::size_t i = 0; i < 4; ++i) {
        if (i == 2) continue;
        for (std::size_t j = 0; j < 3; ++j) CHECK(cb.words(i, j) == before.words(i, j));
    }
}

TEST_CASE("unassigned codewords stay fixed for any number of EMA steps") {
    Rng rng(3);
    Codebook cb{random_matrix(3, 2, rng)};
    const Codebook before = cb;
    EmaState state = make_ema_state(cb, 0.9);

    for (int t = 0; t < 50; ++t) {
        const Matrix e = random_matrix(1, 2, rng);
        ema_codebook_update(state, e, single(3, 0), 0, cb);
    }
    // Codewords 1 and 2 were never assigned; counts and means decayed by the
    // same factor so the stored words are bit-identical.
    for (std::size_t i = 1; i < 3; ++i)
        for (std::size_t j = 0; j < 2; ++j) CHECK(cb.words(i, j) == before.words(i, j));
    CHECK(state.counts[1] == doctest::Approx(std::pow(0.9, 50.0)));
}

TEST_CASE("EMA with counts pinned at 1 tracks SGD with step (1-gamma)/2") {
    // One fresh sample per codeword per step keeps every N_i at exactly 1,
    // the regime where the two update rules coincide.
    Rng rng(4);
    const std::size_t k = 8, d = 4;
    Codebook sgd_cb{random_matrix(k, d, rng)};
    Codebook ema_cb = sgd_cb;
    const double discount = 0.9;
    EmaState state = make_ema_state(ema_cb, discount);
    const OptimConfig optim{(1.0 - discount) / 2.0, 1.0};

    for (int step = 0; step < 100; ++step) {
        const Matrix e = random_matrix(k, d, rng);
        const Assignment a = one_per_codeword(k);

        Matrix grad(k, d);
        for (std::size_t i = 0; i < k; ++i) {
            Matrix sample(1, d);
            for (std::size_t j = 0; j < d; ++j) sample(0, j) = e(i, j);
            const Matrix gi = codebook_grad(sample, single(k, static_cast<std::uint32_t>(i)),
                                            sgd_cb);
            for (std::size_t j = 0; j < d; ++j) grad(i, j) = gi(i, j);
        }
        sgd_codebook_update(sgd_cb, grad, optim);
        ema_codebook_update(state, e, a, 0, ema_cb);

        for (std::size_t i = 0; i < k; ++i) CHECK(state.counts[i] == 1.0);
    }
    CHECK(max_abs(sgd_cb.words - ema_cb.words) < 1e-10);
}

TEST_CASE("EMA learning rate adapts to usage against the running count") {
    // Two identical codewords see the same single sample, but A carries a
    // small running count and B a large one; A must move further.
    const Matrix w = Matrix::from_rows({{1.0, 1.0}, {1.0, 1.0}});
    Codebook cb{w};
    EmaState state = make_ema_state(cb, 0.9);
    state.counts = {0.5, 4.0};
    for (std::size_t j = 0; j < 2; ++j) {
        state.means(0, j) = 0.5 * w(0, j);  // keep w = m/N consistent
        state.means(1, j) = 4.0 * w(1, j);
    }

    const Matrix e = Matrix::from_rows({{0.0, 0.0}, {0.0, 0.0}});
    Assignment a;
    a.num_heads = 1;
    a.usage = UsageHistogram(2);
    a.indices = {0, 1};
    a.usage.add(0);
    a.usage.add(1);
    ema_codebook_update(state, e, a, 0, cb);

    const double moved_a = std::abs(1.0 - cb.words(0, 0));
    const double moved_b = std::abs(1.0 - cb.words(1, 0));
    CHECK(moved_a > moved_b);
}

TEST_CASE("EMA count underflow raises a numeric error") {
    Codebook cb{Matrix::from_rows({{1.0}, {2.0}})};
    EmaState state = make_ema_state(cb, 0.9);
    state.discount = 0.4;
    state.counts[1] = std::numeric_limits<double>::denorm_min();

    const Matrix e = Matrix::from_rows({{0.5}});
    CHECK_THROWS_AS(ema_codebook_update(state, e, single(2, 0), 0, cb), numeric_error);
}

TEST_CASE("batch norm forward hand cases") {
    BatchNormState state(2);

    // Already zero-mean, unit-variance batch passes through (up to eps).
    Matrix x = Matrix::from_rows({{1.0, -1.0}, {-1.0, 1.0}});
    const Matrix y = batchnorm_forward(x, state, true);
    for (std::size_t i = 0; i < y.size(); ++i)
        CHECK(y.data()[i] == doctest::Approx(x.data()[i]).epsilon(1e-4));

    // Constant batch collapses to the bias row.
    BatchNormState st2(2);
    st2.bias = {0.3, -0.7};
    Matrix c(3, 2);
    for (std::size_t i = 0; i < 3; ++i) {
        c(i, 0) = 5.0;
        c(i, 1) = -2.0;
    }
    const Matrix yc = batchnorm_forward(c, st2, true);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(yc(i, 0) == doctest::Approx(0.3));
        CHECK(yc(i, 1) == doctest::Approx(-0.7));
    }

    CHECK_THROWS_AS(batchnorm_forward(Matrix(1, 2), state, true), std::invalid_argument);
}

TEST_CASE("batch norm output statistics are normalized") {
    Rng rng(5);
    Matrix x = random_matrix(64, 3, rng);
    x *= 3.0;
    BatchNormState state(3);
    const Matrix y = batchnorm_forward(x, state, true);
    for (std::size_t j = 0; j < 3; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < 64; ++i) mean += y(i, j);
        mean /= 64.0;
        double var = 0.0;
        for (std::size_t i = 0; i < 64; ++i) var += (y(i, j) - mean) * (y(i, j) - mean);
        var /= 64.0;
        CHECK(std::abs(mean) < 1e-10);
        CHECK(std::abs(var - 1.0) < 1e-4);
    }
}

TEST_CASE("eval-mode batch norm uses running statistics") {
    Rng rng(6);
    BatchNormState state(2);
    for (int i = 0; i < 200; ++i) batchnorm_forward(random_matrix(32, 2, rng) * 2.0, state, true);
    // Running variance should be near the data variance of 4.
    CHECK(state.running_var[0] == doctest::Approx(4.0).epsilon(0.2));

    const Matrix x = Matrix::from_rows({{2.0, -2.0}});
    const Matrix y = batchnorm_forward(x, state, false);  // n=1 fine in eval
    CHECK(std::abs(y(0, 0)) < 1.5);
}

TEST_CASE("batch norm backward projection identity") {
    // Zero-mean unit-variance input with gain 1; a gradient that is zero-mean
    // and uncorrelated with x_hat passes through unchanged.
    BatchNormState state(1);
    const Matrix x = Matrix::from_rows({{1.0}, {-1.0}, {1.0}, {-1.0}});
    BatchNormCache cache;
    batchnorm_forward(x, state, true, &cache);

    const Matrix g = Matrix::from_rows({{1.0}, {1.0}, {-1.0}, {-1.0}});
    const BatchNormGrads grads = batchnorm_backward(g, state, cache);
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(grads.grad_in(i, 0) == doctest::Approx(g(i, 0)).epsilon(1e-4));
}

TEST_CASE("batch norm backward matches finite differences") {
    Rng rng(7);
    for (int trial = 0; trial < 5; ++trial) {
        const std::size_t n = 8, d = 3;
        const Matrix x = random_matrix(n, d, rng);
        const Matrix g = random_matrix(n, d, rng);
        BatchNormState state(d);
        for (std::size_t j = 0; j < d; ++j) {
            state.gain[j] = 1.0 + 0.2 * rng.normal();
            state.bias[j] = 0.2 * rng.normal();
        }

        BatchNormCache cache;
        batchnorm_forward(x, state, true, &cache);
        const BatchNormGrads grads = batchnorm_backward(g, state, cache);

        const Matrix fd = finite_diff_grad(
            [&](const Matrix& probe) {
                BatchNormState s = state;
                const Matrix y = batchnorm_forward(probe, s, true);
                double dot = 0.0;
                for (std::size_t i = 0; i < y.size(); ++i) dot += g.data()[i] * y.data()[i];
                return dot;
            },
            x, 1e-5);
        CHECK(relative_error(grads.grad_in, fd) < 1e-6);

        // Gain and bias gradients against the same probe.
        Matrix gain_mat(1, d);
        for (std::size_t j = 0; j < d; ++j) gain_mat(0, j) = state.gain[j];
        const Matrix fd_gain = finite_diff_grad(
            [&](const Matrix& probe) {
                BatchNormState s = state;
                for (std::size_t j = 0; j < d; ++j) s.gain[j] = probe(0, j);
                const Matrix y = batchnorm_forward(x, s, true);
                double dot = 0.0;
                for (std::size_t i = 0; i < y.size(); ++i) dot += g.data()[i] * y.data()[i];
                return dot;
            },
            gain_mat, 1e-5);
        for (std::size_t j = 0; j < d; ++j)
            CHECK(grads.grad_gain[j] == doctest::Approx(fd_gain(0, j)).epsilon(1e-6));
    }
}

TEST_CASE("batch norm backward of a zero gradient is zero") {
    Rng rng(8);
    const Matrix x = random_matrix(4, 2, rng);
    BatchNormState state(2);
    BatchNormCache cache;
    batchnorm_forward(x, state, true, &cache);
    const BatchNormGrads grads = batchnorm_backward(Matrix(4, 2), state, cache);
    CHECK(max_abs(grads.grad_in) == 0.0);
    CHECK(grads.grad_gain[0] == 0.0);
    CHECK(grads.grad_bias[1] == 0.0);
}

TEST_CASE("batch norm backward requires the forward cache") {
    BatchNormState state(2);
    BatchNormCache cache;  // never filled
    CHECK_THROWS_AS(batchnorm_backward(Matrix(4, 2), state, cache), std::invalid_argument);
}

TEST_CASE("polyak averaging") {
    Rng rng(9);
    Matrix avg = random_matrix(3, 3, rng);
    const Matrix params = random_matrix(3, 3, rng);

    Matrix snap = avg;
    polyak_average(snap, params, 0.0);
    CHECK(snap == params);

    for (int i = 0; i < 400; ++i) polyak_average(avg, params, 0.9);
    CHECK(max_abs(avg - params) < 1e-12);
}

TEST_CASE("warm-up steps match the bottleneck-free model exactly") {
    TrainerConfig warm;
    warm.method.bottleneck = true;
    warm.schedule = {1000, 0, 100};
    TrainerConfig off = warm;
    off.method.bottleneck = false;

    TrainerState a = make_trainer(warm);
    TrainerState b = make_trainer(off);

    Rng rng(10);
    for (int step = 0; step < 5; ++step) {
        Batch batch;
        batch.x = random_matrix(8, warm.model.input_dim, rng);
        batch.recon_targets.assign(8 * warm.model.input_dim, 3);
        const StepStats sa = train_step(a, batch);
        const StepStats sb = train_step(b, batch);
        CHECK(sa.phase == PhaseKind::Warmup);
        CHECK(sa.loss.codebook == 0.0);
        CHECK(sa.loss.commitment == 0.0);
        CHECK(sa.loss.total == sb.loss.total);
    }
    for (std::size_t l = 0; l < a.encoder.layers.size(); ++l)
        CHECK(a.encoder.layers[l].weight == b.encoder.layers[l].weight);
    for (std::size_t l = 0; l < a.decoder.layers.size(); ++l)
        CHECK(a.decoder.layers[l].weight == b.decoder.layers[l].weight);
    // The codebook was never touched during warm-up.
    CHECK(a.codebooks[0].words == make_trainer(warm).codebooks[0].words);
}

TEST_CASE("codewords unassigned in a batch are untouched by either rule") {
    Rng rng(11);
    const std::size_t k = 6, d = 3;
    Codebook cb{random_matrix(k, d, rng)};
    // Push codeword 5 far away so it never wins.
    for (std::size_t j = 0; j < d; ++j) cb.words(5, j) = 100.0;

    const Matrix e = random_matrix(10, d, rng);
    const Assignment a = nearest_code(e, cb);
    for (std::size_t i = 0; i < 10; ++i) CHECK(a.indices[i] != 5);

    Codebook sgd_cb = cb;
    sgd_codebook_update(sgd_cb, codebook_grad(e, a, sgd_cb), OptimConfig{0.1, 10.0});
    for (std::size_t j = 0; j < d; ++j) CHECK(sgd_cb.words(5, j) == cb.words(5, j));

    Codebook ema_cb = cb;
    EmaState state = make_ema_state(ema_cb, 0.95);
    ema_codebook_update(state, e, a, 0, ema_cb);
    for (std::size_t j = 0; j < d; ++j) CHECK(ema_cb.words(5, j) == cb.words(5, j));
}

TEST_CASE("reestimation resets EMA state and breaks Polyak averages") {
    TrainerConfig cfg;
    cfg.method.batchnorm = true;
    cfg.method.reestimate = true;
    cfg.method.rule = CodebookRule::Ema;
    cfg.schedule = {20, 100, 25};
    cfg.polyak = true;
    cfg.polyak_decay = 0.95;
    cfg.codebook_size = 8;
    cfg.reservoir_capacity = 256;

    TrainerState st = make_trainer(cfg);
    Rng rng(12);
    double divergence_before = 0.0;
    bool saw_reestimate = false;
    for (int step = 0; step < 30; ++step) {
        Batch batch;
        batch.x = random_matrix(16, cfg.model.input_dim, rng);
        batch.recon_targets.assign(16 * cfg.model.input_dim, 1);
        const StepStats stats = train_step(st, batch);
        if (stats.reestimated) {
            saw_reestimate = true;
            const double divergence_after =
                max_abs(st.avg.codebooks[0].words - st.codebooks[0].words);
            CHECK(divergence_after > divergence_before);
            // State was re-initialized to N=1 just before this step's EMA
            // update folded in one batch of counts.
            for (double n : st.ema[0].counts) {
                CHECK(n >= 0.99);
                CHECK(n <= 0.99 + 0.01 * 16 + 1e-12);
            }
            break;
        }
        divergence_before = max_abs(st.avg.codebooks[0].words - st.codebooks[0].words);
    }
    CHECK(saw_reestimate);
}

TEST_CASE("EMA rule rejects a codebook learning-rate boost") {
    TrainerConfig cfg;
    cfg.method.rule = CodebookRule::Ema;
    cfg.method.codebook_lr_boost = true;
    CHECK_THROWS_AS(make_trainer(cfg), config_error);
}

TEST_CASE("trainer validates head divisibility") {
    TrainerConfig cfg;
    cfg.quant.num_heads = 3;  // latent_dim 8 not divisible
    CHECK_THROWS_AS(make_trainer(cfg), config_error);
}
