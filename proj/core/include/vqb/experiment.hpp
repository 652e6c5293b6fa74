#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vqb/metrics.hpp"
#include "vqb/synthetic.hpp"
#include "vqb/trainer.hpp"

namespace vqb {

// The seven training variants of the ablation, Table-1 style: the baseline,
// cumulative additions of batch norm / codebook learning rate / EMA /
// reestimation, and the bottleneck-free reference model.
enum class Method {
    Vanilla,
    Bn,
    BnLr,
    BnEma,
    BnReest,
    BnReestLr,
    NoBottleneck,
};

const std::vector<std::string>& method_names();
std::string to_string(Method m);
Method parse_method(const std::string& name);  // throws config_error

Task parse_task(const std::string& name);
std::string to_string(Task t);

struct ExperimentConfig {
    Method method = Method::Vanilla;
    Task task = Task::Autoencode;
    std::size_t codebook_size = 64;  // K
    std::size_t latent_dim = 8;      // d
    std::size_t num_heads = 1;
    double gamma_commit = 0.25;
    double init_scale = 1.0;
    double lr = 0.1;
    double codebook_lr_mult = 10.0;
    double ema_discount = 0.99;
    std::size_t m_init = 200;
    std::size_t m_reestim = 1000;
    std::size_t r_reestim = 100;
    std::uint64_t seed = 1;
    std::size_t iterations = 2000;
    std::size_t eval_every = 100;
    std::size_t batch_size = 32;
    double dims_per_latent = 16.0;
    bool polyak = false;
    double polyak_decay = 0.99;
    bool eval_raw = false;  // evaluate raw parameters even when polyak is on
    std::size_t input_dim = 16;
    std::size_t hidden_dim = 32;
    std::size_t levels = 16;
    std::size_t components = 16;
    std::size_t train_size = 4096;
    std::size_t test_size = 512;
    std::size_t reservoir_capacity = 0;  // 0 -> 64 * K
    std::size_t lloyd_iters = 10;
};

// The one combination of trainer flags each preset stands for.
MethodFlags method_flags(Method m);

// Full trainer configuration implied by an experiment config. Non-reestimating
// presets run with no warm-up and no reestimation window.
TrainerConfig to_trainer_config(const ExperimentConfig& cfg);

// Flat key=value config file; '#' starts a comment. Unknown keys are a
// config_error. Keys are the ExperimentConfig field names.
void apply_config_file(const std::string& path, ExperimentConfig& cfg);
void apply_config_line(const std::string& key, const std::string& value,
                       ExperimentConfig& cfg);

struct RunOptions {
    std::string csv_path;            // empty: do not write a file
    std::string checkpoint_save;     // save a checkpoint when reaching...
    std::size_t checkpoint_at = 0;   // ...this iteration (0 = never)
    std::string resume_from;         // load this checkpoint before training
    std::string final_codebook_path; // write the trained codebook here
};

struct RunResult {
    std::vector<MetricsRow> rows;
    std::string csv;  // exact bytes written to csv_path
};

// Trains per config, evaluating every eval_every iterations on the held-out
// split. Deterministic: identical config and seed give identical CSV bytes.
RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

struct SweepRow {
    double scale = 0.0;
    std::size_t used_tokens = 0;
    double task_loss = 0.0;
};

inline constexpr const char* kSweepCsvHeader = "scale,used_tokens,task_loss";

struct SweepResult {
    std::vector<SweepRow> rows;
    std::string csv;
};

// Codebook-scale sweep: for each relative scale s, warm the model up,
// initialize the codebook at s times the measured RMS of the warm-up encoder
// outputs, train briefly, and record final used tokens and task loss.
SweepResult scaling_sweep(const std::vector<double>& scales, ExperimentConfig cfg,
                          const std::string& csv_path = {});

}  // namespace vqb
