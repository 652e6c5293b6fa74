// Command-line harness: single runs, the seven-preset ablation, the codebook
// scale sweep, and a quick self-check suite.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vqb/check.hpp"
#include "vqb/clustering.hpp"
#include "vqb/ema.hpp"
#include "vqb/experiment.hpp"
#include "vqb/gradcheck.hpp"
#include "vqb/metrics.hpp"
#include "vqb/serialize.hpp"

namespace {

using namespace vqb;

// Every ExperimentConfig field is exposed as one flag; values are parsed by
// the same code that reads config files, so flags override file values.
const std::vector<std::pair<std::string, std::string>>& flag_specs() {
    static const std::vector<std::pair<std::string, std::string>> specs = {
        {"method", "training variant: vanilla|bn|bn_lr|bn_ema|bn_reest|bn_reest_lr|no_bottleneck"},
        {"task", "autoencode|classify"},
        {"codebook_size", "codewords per head (K)"},
        {"latent_dim", "encoder output dimension (d)"},
        {"num_heads", "independent codebooks over equal latent blocks"},
        {"gamma_commit", "commitment loss coefficient"},
        {"init_scale", "codeword init scale"},
        {"lr", "base learning rate"},
        {"codebook_lr_mult", "codebook learning-rate multiplier"},
        {"ema_discount", "EMA rule discount factor"},
        {"m_init", "warm-up iterations before quantization"},
        {"m_reestim", "length of the reestimation window"},
        {"r_reestim", "reestimation period in iterations"},
        {"seed", "RNG seed"},
        {"iterations", "training iterations"},
        {"eval_every", "evaluation period in iterations"},
        {"batch_size", "training batch size"},
        {"dims_per_latent", "data dimensions amortizing one latent index"},
        {"polyak", "evaluate on Polyak-averaged parameters (0|1)"},
        {"polyak_decay", "Polyak averaging decay"},
        {"eval_raw", "force evaluation on raw parameters (0|1)"},
        {"input_dim", "synthetic data dimensions"},
        {"hidden_dim", "MLP hidden width"},
        {"levels", "discretized output levels per dimension"},
        {"components", "synthetic mixture components"},
        {"train_size", "synthetic training samples"},
        {"test_size", "synthetic held-out samples"},
        {"reservoir_capacity", "reservoir size (0 = 64*K)"},
        {"lloyd_iters", "Lloyd iterations per reestimation"},
    };
    return specs;
}

struct CommonArgs {
    std::string config_path;
    std::string out_dir = ".";
    std::map<std::string, std::string> overrides;  // config key -> raw value
};

void add_experiment_flags(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "key=value config file");
    cmd->add_option("--out-dir", args.out_dir, "output directory")->capture_default_str();
    for (const auto& [key, help] : flag_specs()) {
        std::string flag = "--" + key;
        std::replace(flag.begin(), flag.end(), '_', '-');
        const std::string k = key;
        cmd->add_option_function<std::string>(
            flag, [k, &args](const std::string& v) { args.overrides[k] = v; }, help);
    }
}

ExperimentConfig build_config(const CommonArgs& args) {
    ExperimentConfig cfg;
    if (!args.config_path.empty()) apply_config_file(args.config_path, cfg);
    for (const auto& [key, value] : args.overrides) apply_config_line(key, value, cfg);
    return cfg;
}

std::string run_csv_name(const ExperimentConfig& cfg) {
    return to_string(cfg.method) + "_" + to_string(cfg.task) + "_seed" +
           std::to_string(cfg.seed) + ".csv";
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int cmd_run(const CommonArgs& args, const RunOptions& extra,
            const std::string& codebook_path) {
    ExperimentConfig cfg = build_config(args);
    std::filesystem::create_directories(args.out_dir);
    RunOptions opts = extra;
    opts.csv_path = (std::filesystem::path(args.out_dir) / run_csv_name(cfg)).string();
    opts.final_codebook_path = codebook_path;
    const RunResult result = run_experiment(cfg, opts);
    std::cout << "wrote " << opts.csv_path << " (" << result.rows.size() << " rows)\n";
    return 0;
}

int cmd_ablation(const CommonArgs& args, std::size_t num_seeds) {
    if (num_seeds == 0) throw config_error("--seeds must be positive");
    const ExperimentConfig base = build_config(args);
    std::filesystem::create_directories(args.out_dir);

    std::printf("%-16s %12s %12s\n", "method", "final_pplx", "final_loss");
    for (const std::string& name : method_names()) {
        std::vector<double> pplx;
        std::vector<double> loss;
        for (std::size_t s = 0; s < num_seeds; ++s) {
            ExperimentConfig cfg = base;
            cfg.method = parse_method(name);
            cfg.seed = base.seed + s;
            RunOptions opts;
            opts.csv_path = (std::filesystem::path(args.out_dir) / run_csv_name(cfg)).string();
            const RunResult result = run_experiment(cfg, opts);
            const MetricsRow& last = result.rows.back();
            loss.push_back(last.task_loss);
            if (last.perplexity) pplx.push_back(*last.perplexity);
        }
        if (pplx.empty())
            std::printf("%-16s %12s %12.4f\n", name.c_str(), "n/a", median(loss));
        else
            std::printf("%-16s %12.2f %12.4f\n", name.c_str(), median(pplx), median(loss));
    }
    return 0;
}

int cmd_sweep(const CommonArgs& args, const std::string& scales_arg) {
    std::vector<double> scales;
    std::string token;
    for (char ch : scales_arg + ",") {
        if (ch == ',') {
            if (!token.empty()) {
                try {
                    scales.push_back(std::stod(token));
                } catch (const std::exception&) {
                    throw config_error("bad scale '" + token + "'");
                }
                token.clear();
            }
        } else {
            token += ch;
        }
    }

    ExperimentConfig cfg = build_config(args);
    if (!args.overrides.count("iterations")) cfg.iterations = 500;
    std::filesystem::create_directories(args.out_dir);
    const std::string path = (std::filesystem::path(args.out_dir) / "sweep.csv").string();
    const SweepResult result = scaling_sweep(scales, cfg, path);
    for (const SweepRow& row : result.rows)
        std::printf("scale %10g  used_tokens %4zu  task_loss %.4f\n", row.scale,
                    row.used_tokens, row.task_loss);
    std::cout << "wrote " << path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// `check`: fast oracle suite. The full acceptance suite lives in tests/.

struct CheckReport {
    int failures = 0;
    void record(const std::string& name, bool ok) {
        std::printf("[%s] %s\n", ok ? " ok " : "FAIL", name.c_str());
        if (!ok) ++failures;
    }
};

bool check_ema_sgd_equivalence() {
    Rng rng(7);
    const std::size_t k = 8, d = 4;
    Codebook cb_sgd = init_codebook(k, d, 1.0, rng);
    Codebook cb_ema = cb_sgd;
    const double discount = 0.9;
    EmaState ema = make_ema_state(cb_ema, discount);
    const OptimConfig optim{(1.0 - discount) / 2.0, 1.0};

    for (int step = 0; step < 50; ++step) {
        // One fresh sample per codeword keeps every N_i pinned at 1.
        Matrix e(k, d);
        for (std::size_t i = 0; i < e.size(); ++i) e.data()[i] = rng.normal();
        Assignment assign;
        assign.num_heads = 1;
        assign.usage = UsageHistogram(k);
        assign.indices.resize(k);
        for (std::size_t i = 0; i < k; ++i) {
            assign.indices[i] = static_cast<std::uint32_t>(i);
            assign.usage.add(i);
        }
        Matrix grad(k, d);
        for (std::size_t i = 0; i < k; ++i) {
            Matrix sample(1, d);
            for (std::size_t j = 0; j < d; ++j) sample(0, j) = e(i, j);
            Assignment one;
            one.num_heads = 1;
            one.indices = {static_cast<std::uint32_t>(i)};
            one.usage = UsageHistogram(k);
            one.usage.add(i);
            const Matrix gi = codebook_grad(sample, one, cb_sgd);
            for (std::size_t j = 0; j < d; ++j) grad(i, j) = gi(i, j);
        }
        sgd_codebook_update(cb_sgd, grad, optim);
        ema_codebook_update(ema, e, assign, 0, cb_ema);
    }
    return max_abs(cb_sgd.words - cb_ema.words) < 1e-10;
}

bool check_nelbo_table() {
    const struct {
        double bpd, pplx, uniform, unigram;
    } rows[] = {
        {0.213, 322, 0.307, 0.278},  {0.216, 260, 0.309, 0.278},
        {0.212, 432, 0.306, 0.281},  {0.207, 1118, 0.301, 0.287},
        {0.200, 2388, 0.294, 0.288}, {0.200, 2446, 0.294, 0.288},
    };
    for (const auto& r : rows) {
        if (std::abs(nelbo_uniform(r.bpd, 4096, 128.0) - r.uniform) > 1e-3) return false;
        if (std::abs(nelbo_unigram(r.bpd, r.pplx, 128.0) - r.unigram) > 1e-3) return false;
    }
    return true;
}

bool check_gradients() {
    Rng rng(11);
    for (int trial = 0; trial < 3; ++trial) {
        const std::size_t n = 6, d = 4, k = 5;
        Matrix e(n, d), g(n, d);
        for (std::size_t i = 0; i < e.size(); ++i) e.data()[i] = rng.normal();
        for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] = rng.normal();
        Codebook cb = init_codebook(k, d, 1.0, rng);
        const Assignment assign = nearest_code(e, cb);
        Matrix q(n, d);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) q(i, j) = cb.words(assign.indices[i], j);

        const double gamma = 0.25;
        const Matrix st = straight_through_backward(g, e, q, gamma);
        const Matrix st_fd = finite_diff_grad(
            [&](const Matrix& x) {
                double dot = 0.0;
                for (std::size_t i = 0; i < x.size(); ++i) dot += g.data()[i] * x.data()[i];
                double sq = 0.0;
                for (std::size_t i = 0; i < x.size(); ++i) {
                    const double diff = x.data()[i] - q.data()[i];
                    sq += diff * diff;
                }
                return dot + gamma * sq / static_cast<double>(n);
            },
            e, 1e-5);
        if (relative_error(st, st_fd) > 1e-6) return false;

        const Matrix cg = codebook_grad(e, assign, cb);
        const Matrix cg_fd = finite_diff_grad(
            [&](const Matrix& words) {
                double sq = 0.0;
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < d; ++j) {
                        const double diff = e(i, j) - words(assign.indices[i], j);
                        sq += diff * diff;
                    }
                return sq / static_cast<double>(n);
            },
            cb.words, 1e-5);
        if (relative_error(cg, cg_fd) > 1e-6) return false;
    }
    return true;
}

bool check_quantizer_invariants() {
    Rng rng(23);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t k = 1 + rng.uniform_index(16);
        const std::size_t d = 1 + rng.uniform_index(6);
        const std::size_t n = 1 + rng.uniform_index(12);
        Codebook cb = init_codebook(k, d, 1.0, rng);
        Matrix e(n, d);
        for (std::size_t i = 0; i < e.size(); ++i) e.data()[i] = rng.normal();

        QuantizerConfig qc;
        auto [q, assign] = quantize(e, {cb}, qc);
        auto [qq, assign2] = quantize(q, {cb}, qc);
        if (!(qq == q)) return false;

        for (std::size_t i = 0; i < n; ++i) {
            const double chosen = sq_dist(e.row(i), cb.words.row(assign.indices[i]));
            for (std::size_t j = 0; j < k; ++j)
                if (sq_dist(e.row(i), cb.words.row(j)) < chosen - 1e-15) return false;
        }

        const double pplx = perplexity(assign.usage);
        const std::size_t used = used_tokens(assign.usage);
        if (pplx < 1.0 - 1e-12 || pplx > static_cast<double>(k) + 1e-9) return false;
        if (static_cast<double>(used) < std::ceil(pplx - 1e-9)) return false;
    }
    return true;
}

bool check_reservoir_uniformity() {
    const std::size_t capacity = 1, stream = 4, trials = 20000;
    Rng rng(31);
    std::vector<std::size_t> inclusion(stream, 0);
    for (std::size_t t = 0; t < trials; ++t) {
        Reservoir res(capacity, 1);
        Matrix batch(stream, 1);
        for (std::size_t i = 0; i < stream; ++i) batch(i, 0) = static_cast<double>(i);
        reservoir_update(res, batch, rng);
        inclusion[static_cast<std::size_t>(res.items(0, 0))] += 1;
    }
    const double expected = static_cast<double>(trials) / static_cast<double>(stream);
    double chi2 = 0.0;
    for (std::size_t c : inclusion) {
        const double diff = static_cast<double>(c) - expected;
        chi2 += diff * diff / expected;
    }
    return chi2 < 16.266;  // chi-square 0.999 quantile, 3 degrees of freedom
}

bool check_lloyd_monotone() {
    Rng rng(41);
    for (int trial = 0; trial < 5; ++trial) {
        Matrix pts(60, 3);
        for (std::size_t i = 0; i < pts.size(); ++i) pts.data()[i] = rng.normal();
        const Matrix init = kmeanspp_seed(pts, 6, rng);
        double prev = -1.0;
        bool monotone = true;
        lloyd(pts, init, 15, 1e-9, [&](std::size_t, const Matrix&, double cost) {
            if (prev >= 0.0 && cost > prev + 1e-9) monotone = false;
            prev = cost;
        });
        if (!monotone) return false;
    }
    return true;
}

bool check_determinism() {
    ExperimentConfig cfg;
    cfg.iterations = 60;
    cfg.eval_every = 20;
    cfg.train_size = 256;
    cfg.test_size = 64;
    const RunResult a = run_experiment(cfg);
    const RunResult b = run_experiment(cfg);
    return a.csv == b.csv;
}

int cmd_check() {
    CheckReport report;
    report.record("EMA/SGD codebook update equivalence", check_ema_sgd_equivalence());
    report.record("uniform/unigram NELBO arithmetic", check_nelbo_table());
    report.record("straight-through and codebook gradients vs finite differences",
                  check_gradients());
    report.record("quantizer invariants (idempotence, optimality, perplexity bounds)",
                  check_quantizer_invariants());
    report.record("reservoir inclusion uniformity (chi-square)", check_reservoir_uniformity());
    report.record("Lloyd cost monotonicity", check_lloyd_monotone());
    report.record("experiment determinism (identical CSV bytes)", check_determinism());
    if (report.failures) {
        std::printf("%d check(s) failed\n", report.failures);
        return 2;
    }
    std::printf("all checks passed\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"vector-quantized bottleneck training harness"};
    app.require_subcommand(1);

    CommonArgs run_args;
    RunOptions run_opts;
    CLI::App* run = app.add_subcommand("run", "train one experiment and write its CSV");
    add_experiment_flags(run, run_args);
    std::string codebook_path;
    run->add_option("--checkpoint", run_opts.checkpoint_save, "checkpoint file to write");
    run->add_option("--checkpoint-at", run_opts.checkpoint_at,
                    "iteration at which to write the checkpoint");
    run->add_option("--resume", run_opts.resume_from, "checkpoint file to resume from");
    run->add_option("--save-codebook", codebook_path, "write the final codebook here");

    CommonArgs ablation_args;
    std::size_t num_seeds = 5;
    CLI::App* ablation =
        app.add_subcommand("ablation", "run all seven presets over several seeds");
    add_experiment_flags(ablation, ablation_args);
    ablation->add_option("--seeds", num_seeds, "seeds per preset")->capture_default_str();

    CommonArgs sweep_args;
    std::string scales = "0.001,0.01,0.1,1,10,100";
    CLI::App* sweep = app.add_subcommand("sweep", "codebook scale sweep");
    add_experiment_flags(sweep, sweep_args);
    sweep->add_option("--scales", scales, "comma-separated relative scales")
        ->capture_default_str();

    CLI::App* check = app.add_subcommand("check", "run the fast invariant/oracle suite");

    try {
        app.parse(argc, argv);
        if (run->parsed()) return cmd_run(run_args, run_opts, codebook_path);
        if (ablation->parsed()) return cmd_ablation(ablation_args, num_seeds);
        if (sweep->parsed()) return cmd_sweep(sweep_args, scales);
        if (check->parsed()) return cmd_check();
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const vqb::numeric_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const vqb::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
