#include "vqb/trainer.hpp"

#include <cmath>
#include <string>
#include <tuple>

#include "vqb/check.hpp"
#include "vqb/losses.hpp"

namespace vqb {

Phase schedule_step(std::size_t it, const TrainSchedule& s) {
    VQB_REQUIRE(s.r_reestim >= 1, "r_reestim must be at least 1");
    if (it < s.m_init) return {PhaseKind::Warmup, false};
    const bool reestimate =
        (it % s.r_reestim == 0) && (it < s.m_init + s.m_reestim);
    return {PhaseKind::Quantize, reestimate};
}

void sgd_codebook_update(Codebook& codebook, const Matrix& grad, const OptimConfig& cfg) {
    VQB_REQUIRE(grad.same_shape(codebook.words), "gradient shape mismatch");
    if (!grad.all_finite()) throw numeric_error("non-finite codebook gradient");
    const double step = cfg.lr * cfg.codebook_lr_mult;
    for (std::size_t i = 0; i < codebook.words.size(); ++i)
        codebook.words.data()[i] -= step * grad.data()[i];
}

void polyak_average(Matrix& avg, const Matrix& params, double decay) {
    VQB_REQUIRE(avg.same_shape(params), "shape mismatch in polyak_average");
    VQB_REQUIRE(decay >= 0.0 && decay < 1.0, "polyak decay must be in [0,1)");
    for (std::size_t i = 0; i < avg.size(); ++i)
        avg.data()[i] = decay * avg.data()[i] + (1.0 - decay) * params.data()[i];
}

void polyak_average(std::vector<double>& avg, const std::vector<double>& params, double decay) {
    VQB_REQUIRE(avg.size() == params.size(), "size mismatch in polyak_average");
    VQB_REQUIRE(decay >= 0.0 && decay < 1.0, "polyak decay must be in [0,1)");
    for (std::size_t i = 0; i < avg.size(); ++i)
        avg[i] = decay * avg[i] + (1.0 - decay) * params[i];
}

void polyak_average(MlpStack& avg, const MlpStack& params, double decay) {
    VQB_REQUIRE(avg.layers.size() == params.layers.size(), "stack mismatch in polyak_average");
    for (std::size_t l = 0; l < avg.layers.size(); ++l) {
        polyak_average(avg.layers[l].weight, params.layers[l].weight, decay);
        polyak_average(avg.layers[l].bias, params.layers[l].bias, decay);
    }
}

namespace {

void validate(const TrainerConfig& cfg) {
    const auto fail = [](const std::string& msg) { throw config_error(msg); };
    if (cfg.codebook_size < 1) fail("codebook_size must be at least 1");
    if (cfg.quant.num_heads < 1) fail("num_heads must be at least 1");
    if (cfg.model.latent_dim % cfg.quant.num_heads != 0)
        fail("num_heads must divide latent_dim");
    if (cfg.quant.init_scale <= 0.0) fail("init_scale must be positive");
    if (cfg.quant.gamma_commit < 0.0) fail("gamma_commit must be nonnegative");
    if (cfg.optim.lr <= 0.0) fail("lr must be positive");
    if (cfg.optim.codebook_lr_mult <= 0.0) fail("codebook_lr_mult must be positive");
    if (cfg.schedule.r_reestim < 1) fail("r_reestim must be at least 1");
    if (cfg.ema_discount <= 0.0 || cfg.ema_discount >= 1.0)
        fail("ema_discount must be in (0,1)");
    if (cfg.polyak_decay < 0.0 || cfg.polyak_decay >= 1.0)
        fail("polyak_decay must be in [0,1)");
    if (cfg.method.rule == CodebookRule::Ema && cfg.method.codebook_lr_boost)
        fail("the EMA rule replaces codebook SGD; codebook_lr_boost does not apply");
}

std::size_t decoder_output_dim(const ModelConfig& m) {
    return m.task == Task::Autoencode ? m.input_dim * m.levels : m.num_classes;
}

}  // namespace

TrainerState make_trainer(const TrainerConfig& cfg) {
    validate(cfg);

    TrainerState st;
    st.cfg = cfg;

    Rng root(cfg.seed);
    Rng param_rng = root.split();
    Rng codebook_rng = root.split();
    st.train_rng = root.split();
    st.sample_rng = root.split();
    st.reest_rng = root.split();

    const auto& m = cfg.model;
    const std::size_t enc_dims[] = {m.input_dim, m.hidden_dim, m.latent_dim};
    const std::size_t dec_dims[] = {m.latent_dim, m.hidden_dim, decoder_output_dim(m)};
    st.encoder = make_mlp(enc_dims, Activation::Tanh, param_rng);
    st.decoder = make_mlp(dec_dims, Activation::Tanh, param_rng);
    st.bn = BatchNormState(m.latent_dim);

    const std::size_t dh = m.latent_dim / cfg.quant.num_heads;
    for (std::size_t h = 0; h < cfg.quant.num_heads; ++h)
        st.codebooks.push_back(
            init_codebook(cfg.codebook_size, dh, cfg.quant.init_scale, codebook_rng));
    if (cfg.method.rule == CodebookRule::Ema)
        for (const Codebook& cb : st.codebooks)
            st.ema.push_back(make_ema_state(cb, cfg.ema_discount));

    const std::size_t cap =
        cfg.reservoir_capacity ? cfg.reservoir_capacity : 64 * cfg.codebook_size;
    st.reservoir = Reservoir(cap, m.latent_dim);

    st.avg.encoder = st.encoder;
    st.avg.decoder = st.decoder;
    st.avg.bn_gain = st.bn.gain;
    st.avg.bn_bias = st.bn.bias;
    st.avg.codebooks = st.codebooks;
    return st;
}

void reestimate_now(TrainerState& st) {
    const std::size_t heads = st.cfg.quant.num_heads;
    const std::size_t dh = st.cfg.model.latent_dim / heads;
    for (std::size_t h = 0; h < heads; ++h) {
        Reservoir view(st.reservoir.capacity, dh);
        view.items = head_block(st.reservoir.items, h, heads);
        view.seen = st.reservoir.seen;
        st.codebooks[h].words = reestimate_codebook(
            view, st.cfg.codebook_size, st.reest_rng, st.cfg.lloyd_iters, st.cfg.lloyd_tol);
        if (st.cfg.method.rule == CodebookRule::Ema)
            st.ema[h] = make_ema_state(st.codebooks[h], st.cfg.ema_discount);
    }
}

namespace {

struct TaskLoss {
    double value = 0.0;
    Matrix grad_logits;
};

TaskLoss task_loss_and_grad(const TrainerConfig& cfg, const Batch& batch,
                            const Matrix& logits) {
    TaskLoss out;
    if (cfg.model.task == Task::Autoencode) {
        const DiscretizedLikelihoodHead head{cfg.model.input_dim, cfg.model.levels};
        out.value = recon_nll(batch.recon_targets, logits, head);
        out.grad_logits = recon_nll_backward(batch.recon_targets, logits, head);
    } else {
        out.value = classify_nll(batch.labels, logits);
        out.grad_logits = classify_nll_backward(batch.labels, logits);
    }
    return out;
}

}  // namespace

StepStats train_step(TrainerState& st, const Batch& batch) {
    const TrainerConfig& cfg = st.cfg;
    VQB_REQUIRE(batch.x.rows() > 0, "empty training batch");

    MlpCache enc_cache;
    const Matrix latents = mlp_forward(st.encoder, batch.x, &enc_cache);

    BatchNormCache bn_cache;
    Matrix z = cfg.method.batchnorm
                   ? batchnorm_forward(latents, st.bn, /*training=*/true, &bn_cache)
                   : latents;

    reservoir_update(st.reservoir, z, st.sample_rng);

    Phase phase = cfg.method.bottleneck ? schedule_step(st.iteration, cfg.schedule)
                                        : Phase{PhaseKind::Warmup, false};
    StepStats stats;
    stats.phase = phase.kind;

    Matrix quantized;
    Assignment assignment;
    const bool quantizing = phase.kind == PhaseKind::Quantize;
    if (quantizing) {
        if (phase.reestimate_now && cfg.method.reestimate) {
            reestimate_now(st);
            stats.reestimated = true;
        }
        std::tie(quantized, assignment) = quantize(z, st.codebooks, cfg.quant);
    } else {
        quantized = z;
    }

    MlpCache dec_cache;
    const Matrix logits = mlp_forward(st.decoder, quantized, &dec_cache);
    const TaskLoss task = task_loss_and_grad(cfg, batch, logits);

    stats.loss = vq_loss(z, quantized, task.value, cfg.quant.gamma_commit);
    if (!std::isfinite(stats.loss.total))
        throw numeric_error("non-finite loss at iteration " + std::to_string(st.iteration));

    MlpGrads dec_grads = zero_grads(st.decoder);
    const Matrix grad_q = mlp_backward(st.decoder, dec_cache, task.grad_logits, dec_grads);
    const Matrix grad_z =
        straight_through_backward(grad_q, z, quantized, cfg.quant.gamma_commit);

    MlpGrads enc_grads = zero_grads(st.encoder);
    BatchNormGrads bn_grads;
    if (cfg.method.batchnorm) {
        bn_grads = batchnorm_backward(grad_z, st.bn, bn_cache);
        mlp_backward(st.encoder, enc_cache, bn_grads.grad_in, enc_grads);
    } else {
        mlp_backward(st.encoder, enc_cache, grad_z, enc_grads);
    }

    const double lr = cfg.optim.lr;
    sgd_update(st.encoder, enc_grads, lr);
    sgd_update(st.decoder, dec_grads, lr);
    if (cfg.method.batchnorm) {
        for (std::size_t j = 0; j < st.bn.dim(); ++j) {
            st.bn.gain[j] -= lr * bn_grads.grad_gain[j];
            st.bn.bias[j] -= lr * bn_grads.grad_bias[j];
        }
    }

    if (quantizing) {
        const std::size_t heads = cfg.quant.num_heads;
        OptimConfig cb_optim{lr, cfg.method.codebook_lr_boost ? cfg.optim.codebook_lr_mult : 1.0};
        for (std::size_t h = 0; h < heads; ++h) {
            const Matrix block = heads == 1 ? z : head_block(z, h, heads);
            if (cfg.method.rule == CodebookRule::Sgd) {
                const Matrix grad = codebook_grad(block, assignment, h, st.codebooks[h]);
                sgd_codebook_update(st.codebooks[h], grad, cb_optim);
            } else {
                ema_codebook_update(st.ema[h], block, assignment, h, st.codebooks[h]);
            }
        }
    }

    if (cfg.polyak) {
        const double decay = cfg.polyak_decay;
        polyak_average(st.avg.encoder, st.encoder, decay);
        polyak_average(st.avg.decoder, st.decoder, decay);
        polyak_average(st.avg.bn_gain, st.bn.gain, decay);
        polyak_average(st.avg.bn_bias, st.bn.bias, decay);
        for (std::size_t h = 0; h < st.codebooks.size(); ++h)
            polyak_average(st.avg.codebooks[h].words, st.codebooks[h].words, decay);
    }

    st.iteration += 1;
    return stats;
}

EvalResult evaluate(const TrainerState& st, const Batch& data, bool use_polyak) {
    const TrainerConfig& cfg = st.cfg;
    VQB_REQUIRE(data.x.rows() > 0, "empty evaluation set");

    const MlpStack& encoder = use_polyak ? st.avg.encoder : st.encoder;
    const MlpStack& decoder = use_polyak ? st.avg.decoder : st.decoder;
    const std::vector<Codebook>& codebooks = use_polyak ? st.avg.codebooks : st.codebooks;

    const Matrix latents = mlp_forward(encoder, data.x);

    Matrix z = latents;
    if (cfg.method.batchnorm) {
        BatchNormState bn = st.bn;  // eval mode reads running stats only
        if (use_polyak) {
            bn.gain = st.avg.bn_gain;
            bn.bias = st.avg.bn_bias;
        }
        z = batchnorm_forward(latents, bn, /*training=*/false);
    }

    EvalResult out;
    Matrix decoder_in = z;
    const bool quantizing =
        cfg.method.bottleneck &&
        schedule_step(st.iteration, cfg.schedule).kind == PhaseKind::Quantize;
    if (quantizing) {
        auto [quantized, assignment] = quantize(z, codebooks, cfg.quant);
        decoder_in = std::move(quantized);
        out.usage = std::move(assignment.usage);
        out.quantized = true;
    }

    const Matrix logits = mlp_forward(decoder, decoder_in);
    if (cfg.model.task == Task::Autoencode) {
        const DiscretizedLikelihoodHead head{cfg.model.input_dim, cfg.model.levels};
        out.task_loss = recon_nll(data.recon_targets, logits, head);
    } else {
        out.task_loss = classify_nll(data.labels, logits);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < logits.rows(); ++i) {
            std::size_t best = 0;
            for (std::size_t c = 1; c < logits.cols(); ++c)
                if (logits(i, c) > logits(i, best)) best = c;
            if (static_cast<std::int32_t>(best) == data.labels[i]) ++correct;
        }
        out.accuracy = static_cast<double>(correct) / static_cast<double>(logits.rows());
    }
    if (!std::isfinite(out.task_loss))
        throw numeric_error("non-finite evaluation loss");
    return out;
}

}  // namespace vqb
