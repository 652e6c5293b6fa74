#pragma once

#include <cstdint>
#include <vector>

#include "vqb/batchnorm.hpp"
#include "vqb/clustering.hpp"
#include "vqb/ema.hpp"
#include "vqb/matrix.hpp"
#include "vqb/mlp.hpp"
#include "vqb/quantizer.hpp"
#include "vqb/rng.hpp"

namespace vqb {

// Phase parameters of the data-dependent reestimation schedule: M_init
// warm-up iterations with the bottleneck bypassed, then reestimation every
// r_reestim iterations while it < m_init + m_reestim.
struct TrainSchedule {
    std::size_t m_init = 200;
    std::size_t m_reestim = 1000;
    std::size_t r_reestim = 100;
};

enum class PhaseKind { Warmup, Quantize };

struct Phase {
    PhaseKind kind = PhaseKind::Quantize;
    bool reestimate_now = false;
};

Phase schedule_step(std::size_t it, const TrainSchedule& s);

struct OptimConfig {
    double lr = 0.05;
    double codebook_lr_mult = 10.0;  // multiplier on codebook updates
};

// w <- w - (lr * codebook_lr_mult) * grad. Throws numeric_error on a
// non-finite gradient.
void sgd_codebook_update(Codebook& codebook, const Matrix& grad, const OptimConfig& cfg);

// avg <- decay*avg + (1-decay)*params.
void polyak_average(Matrix& avg, const Matrix& params, double decay);
void polyak_average(std::vector<double>& avg, const std::vector<double>& params, double decay);
void polyak_average(MlpStack& avg, const MlpStack& params, double decay);

enum class Task { Autoencode, Classify };
enum class CodebookRule { Sgd, Ema };

// The switches the experiment presets toggle.
struct MethodFlags {
    bool bottleneck = true;
    bool batchnorm = false;
    bool codebook_lr_boost = false;
    CodebookRule rule = CodebookRule::Sgd;
    bool reestimate = false;
};

struct ModelConfig {
    std::size_t input_dim = 16;
    std::size_t hidden_dim = 32;
    std::size_t latent_dim = 8;
    std::size_t levels = 16;       // discretized output levels per dimension
    std::size_t num_classes = 16;  // classify task output
    Task task = Task::Autoencode;
};

struct TrainerConfig {
    ModelConfig model;
    QuantizerConfig quant;
    std::size_t codebook_size = 64;
    TrainSchedule schedule;
    OptimConfig optim;
    MethodFlags method;
    double ema_discount = 0.99;
    bool polyak = false;
    double polyak_decay = 0.99;
    std::size_t reservoir_capacity = 0;  // 0 -> 64 * codebook_size
    std::size_t lloyd_iters = 10;
    double lloyd_tol = 1e-6;
    std::uint64_t seed = 1;
};

// Polyak-averaged copies of everything evaluation reads.
struct AveragedParams {
    MlpStack encoder;
    MlpStack decoder;
    std::vector<double> bn_gain;
    std::vector<double> bn_bias;
    std::vector<Codebook> codebooks;
};

struct Batch {
    Matrix x;
    std::vector<std::int32_t> recon_targets;  // batch x input_dim level indices
    std::vector<std::int32_t> labels;         // batch class labels
};

struct StepStats {
    LossBreakdown loss;
    PhaseKind phase = PhaseKind::Quantize;
    bool reestimated = false;
};

struct TrainerState {
    TrainerConfig cfg;
    MlpStack encoder;
    MlpStack decoder;
    BatchNormState bn;
    std::vector<Codebook> codebooks;
    std::vector<EmaState> ema;
    Reservoir reservoir;
    AveragedParams avg;
    std::size_t iteration = 0;
    Rng train_rng;   // batch sampling, owned by the data loop
    Rng sample_rng;  // reservoir
    Rng reest_rng;   // k-means++ / lloyd

    TrainerState() : train_rng(0), sample_rng(0), reest_rng(0) {}
};

// Builds and seeds the full training state. Throws config_error on an
// inconsistent configuration.
TrainerState make_trainer(const TrainerConfig& cfg);

// One optimization step: encoder forward, optional batch norm, reservoir
// update, warm-up passthrough or (reestimate +) quantize, decoder forward,
// three-term loss, straight-through backward, parameter updates, Polyak
// averaging. Throws numeric_error if the loss goes non-finite.
StepStats train_step(TrainerState& st, const Batch& batch);

// Replaces every head's codebook with k-means++ plus Lloyd refinement over
// the reservoir, and resets EMA state to match.
void reestimate_now(TrainerState& st);

struct EvalResult {
    double task_loss = 0.0;    // nats
    bool quantized = false;    // false during warm-up or without a bottleneck
    UsageHistogram usage;      // pooled over heads when quantized
    double accuracy = 0.0;     // classify task only
};

// Deterministic evaluation on a frozen snapshot. Batch norm runs in eval
// mode off the running statistics; usage is pooled over the whole pass.
EvalResult evaluate(const TrainerState& st, const Batch& data, bool use_polyak);

}  // namespace vqb
