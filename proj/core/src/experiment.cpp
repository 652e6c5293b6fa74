#include "vqb/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "vqb/check.hpp"
#include "vqb/serialize.hpp"

namespace vqb {

const std::vector<std::string>& method_names() {
    static const std::vector<std::string> names = {
        "vanilla", "bn", "bn_lr", "bn_ema", "bn_reest", "bn_reest_lr", "no_bottleneck"};
    return names;
}

std::string to_string(Method m) {
    return method_names()[static_cast<std::size_t>(m)];
}

Method parse_method(const std::string& name) {
    const auto& names = method_names();
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<Method>(i);
    throw config_error("unknown method '" + name + "'");
}

Task parse_task(const std::string& name) {
    if (name == "autoencode") return Task::Autoencode;
    if (name == "classify") return Task::Classify;
    throw config_error("unknown task '" + name + "'");
}

std::string to_string(Task t) {
    return t == Task::Autoencode ? "autoencode" : "classify";
}

MethodFlags method_flags(Method m) {
    MethodFlags f;
    switch (m) {
        case Method::Vanilla:
            break;
        case Method::Bn:
            f.batchnorm = true;
            break;
        case Method::BnLr:
            f.batchnorm = true;
            f.codebook_lr_boost = true;
            break;
        case Method::BnEma:
            f.batchnorm = true;
            f.rule = CodebookRule::Ema;
            break;
        case Method::BnReest:
            f.batchnorm = true;
            f.reestimate = true;
            break;
        case Method::BnReestLr:
            f.batchnorm = true;
            f.reestimate = true;
            f.codebook_lr_boost = true;
            break;
        case Method::NoBottleneck:
            f.bottleneck = false;
            break;
    }
    return f;
}

TrainerConfig to_trainer_config(const ExperimentConfig& cfg) {
    TrainerConfig tc;
    tc.model.input_dim = cfg.input_dim;
    tc.model.hidden_dim = cfg.hidden_dim;
    tc.model.latent_dim = cfg.latent_dim;
    tc.model.levels = cfg.levels;
    tc.model.num_classes = cfg.components;
    tc.model.task = cfg.task;
    tc.quant.gamma_commit = cfg.gamma_commit;
    tc.quant.num_heads = cfg.num_heads;
    tc.quant.init_scale = cfg.init_scale;
    tc.codebook_size = cfg.codebook_size;
    tc.method = method_flags(cfg.method);
    // Warm-up and periodic reestimation belong to the reestimation schedule;
    // the other presets quantize from the first iteration.
    tc.schedule = tc.method.reestimate
                      ? TrainSchedule{cfg.m_init, cfg.m_reestim, cfg.r_reestim}
                      : TrainSchedule{0, 0, std::max<std::size_t>(cfg.r_reestim, 1)};
    tc.optim.lr = cfg.lr;
    tc.optim.codebook_lr_mult = cfg.codebook_lr_mult;
    tc.ema_discount = cfg.ema_discount;
    tc.polyak = cfg.polyak;
    tc.polyak_decay = cfg.polyak_decay;
    tc.reservoir_capacity = cfg.reservoir_capacity;
    tc.lloyd_iters = cfg.lloyd_iters;
    tc.seed = cfg.seed;
    return tc;
}

namespace {

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const std::uint64_t out = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw config_error("bad integer for '" + key + "': '" + v + "'");
    }
}

double parse_f64(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw config_error("bad number for '" + key + "': '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw config_error("bad flag for '" + key + "': '" + v + "'");
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

}  // namespace

void apply_config_line(const std::string& key, const std::string& value,
                       ExperimentConfig& cfg) {
    if (key == "method") cfg.method = parse_method(value);
    else if (key == "task") cfg.task = parse_task(value);
    else if (key == "codebook_size") cfg.codebook_size = parse_u64(key, value);
    else if (key == "latent_dim") cfg.latent_dim = parse_u64(key, value);
    else if (key == "num_heads") cfg.num_heads = parse_u64(key, value);
    else if (key == "gamma_commit") cfg.gamma_commit = parse_f64(key, value);
    else if (key == "init_scale") cfg.init_scale = parse_f64(key, value);
    else if (key == "lr") cfg.lr = parse_f64(key, value);
    else if (key == "codebook_lr_mult") cfg.codebook_lr_mult = parse_f64(key, value);
    else if (key == "ema_discount") cfg.ema_discount = parse_f64(key, value);
    else if (key == "m_init") cfg.m_init = parse_u64(key, value);
    else if (key == "m_reestim") cfg.m_reestim = parse_u64(key, value);
    else if (key == "r_reestim") cfg.r_reestim = parse_u64(key, value);
    else if (key == "seed") cfg.seed = parse_u64(key, value);
    else if (key == "iterations") cfg.iterations = parse_u64(key, value);
    else if (key == "eval_every") cfg.eval_every = parse_u64(key, value);
    else if (key == "batch_size") cfg.batch_size = parse_u64(key, value);
    else if (key == "dims_per_latent") cfg.dims_per_latent = parse_f64(key, value);
    else if (key == "polyak") cfg.polyak = parse_bool(key, value);
    else if (key == "polyak_decay") cfg.polyak_decay = parse_f64(key, value);
    else if (key == "eval_raw") cfg.eval_raw = parse_bool(key, value);
    else if (key == "input_dim") cfg.input_dim = parse_u64(key, value);
    else if (key == "hidden_dim") cfg.hidden_dim = parse_u64(key, value);
    else if (key == "levels") cfg.levels = parse_u64(key, value);
    else if (key == "components") cfg.components = parse_u64(key, value);
    else if (key == "train_size") cfg.train_size = parse_u64(key, value);
    else if (key == "test_size") cfg.test_size = parse_u64(key, value);
    else if (key == "reservoir_capacity") cfg.reservoir_capacity = parse_u64(key, value);
    else if (key == "lloyd_iters") cfg.lloyd_iters = parse_u64(key, value);
    else throw config_error("unknown config key '" + key + "'");
}

void apply_config_file(const std::string& path, ExperimentConfig& cfg) {
    std::ifstream in(path);
    if (!in.good()) throw config_error("cannot open config file '" + path + "'");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error("expected key=value at " + path + ":" + std::to_string(lineno));
        apply_config_line(trim(line.substr(0, eq)), trim(line.substr(eq + 1)), cfg);
    }
}

namespace {

SyntheticConfig synthetic_config(const ExperimentConfig& cfg) {
    SyntheticConfig sc;
    sc.components = cfg.components;
    sc.dims = cfg.input_dim;
    sc.levels = cfg.levels;
    sc.train_size = cfg.train_size;
    sc.test_size = cfg.test_size;
    return sc;
}

Batch sample_batch(const Dataset& ds, std::size_t batch_size, Rng& rng) {
    std::vector<std::size_t> indices(batch_size);
    for (auto& idx : indices)
        idx = static_cast<std::size_t>(rng.uniform_index(ds.train_x.rows()));
    return ds.train_batch(indices);
}

MetricsRow make_row(const TrainerState& st, const ExperimentConfig& cfg, const Batch& test) {
    const EvalResult ev = evaluate(st, test, cfg.polyak && !cfg.eval_raw);
    MetricsRow row;
    row.iteration = st.iteration;
    row.task_loss = ev.task_loss;
    const std::size_t bpd_dims = cfg.task == Task::Autoencode ? cfg.input_dim : 1;
    row.bpd = bits_per_dim(ev.task_loss, bpd_dims);
    if (ev.quantized) {
        row.perplexity = perplexity(ev.usage);
        row.used_tokens = used_tokens(ev.usage);
        // Each head transmits its own index, so a latent's bit cost is
        // amortized over dims_per_latent / num_heads dimensions per head.
        const double dpl = cfg.dims_per_latent / static_cast<double>(cfg.num_heads);
        row.nelbo_uniform = nelbo_uniform(row.bpd, cfg.codebook_size, dpl);
        row.nelbo_unigram = nelbo_unigram(row.bpd, *row.perplexity, dpl);
    }
    return row;
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out.good()) throw config_error("cannot open '" + path + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out.good()) throw config_error("write failed for '" + path + "'");
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
    if (cfg.iterations == 0) throw config_error("iterations must be positive");
    if (cfg.eval_every == 0) throw config_error("eval_every must be positive");
    if (cfg.batch_size < 2) throw config_error("batch_size must be at least 2");

    const Dataset ds = make_synthetic(cfg.task, cfg.seed, synthetic_config(cfg));
    const Batch test = ds.test_batch();

    TrainerState st = make_trainer(to_trainer_config(cfg));
    if (!opts.resume_from.empty()) load_checkpoint(opts.resume_from, st);

    RunResult result;
    result.csv = std::string(kMetricsCsvHeader) + "\n";

    for (std::size_t it = st.iteration; it < cfg.iterations; ++it) {
        if (!opts.checkpoint_save.empty() && opts.checkpoint_at == it &&
            opts.checkpoint_at > 0)
            save_checkpoint(opts.checkpoint_save, st);

        const Batch batch = sample_batch(ds, cfg.batch_size, st.train_rng);
        train_step(st, batch);

        const std::size_t done = it + 1;
        if (done % cfg.eval_every == 0 || done == cfg.iterations) {
            const MetricsRow row = make_row(st, cfg, test);
            result.rows.push_back(row);
            result.csv += to_csv_row(row);
            result.csv += '\n';
        }
    }

    if (!opts.csv_path.empty()) write_file(opts.csv_path, result.csv);
    if (!opts.final_codebook_path.empty())
        save_codebooks(opts.final_codebook_path, st.codebooks);
    return result;
}

SweepResult scaling_sweep(const std::vector<double>& scales, ExperimentConfig cfg,
                          const std::string& csv_path) {
    if (scales.empty()) throw config_error("scaling sweep needs at least one scale");
    for (double s : scales)
        if (!(s > 0.0)) throw config_error("scales must be positive");
    if (cfg.m_init < 1)
        throw config_error("scaling sweep needs a warm-up window to measure the latent scale");
    if (cfg.iterations <= cfg.m_init)
        throw config_error("scaling sweep needs iterations > m_init");

    // Batch normalization pins the latent RMS near 1, leaving the
    // codeword/latent magnitude ratio as the only variable in the sweep.
    cfg.method = Method::Bn;

    SweepResult result;
    result.csv = std::string(kSweepCsvHeader) + "\n";
    for (const double scale : scales) {
        const Dataset ds = make_synthetic(cfg.task, cfg.seed, synthetic_config(cfg));
        const Batch test = ds.test_batch();

        TrainerConfig tc = to_trainer_config(cfg);
        tc.schedule = TrainSchedule{cfg.m_init, 0, std::max<std::size_t>(cfg.r_reestim, 1)};
        TrainerState st = make_trainer(tc);

        while (st.iteration < cfg.m_init)
            train_step(st, sample_batch(ds, cfg.batch_size, st.train_rng));

        const Matrix warm = st.reservoir.contents();
        VQB_REQUIRE(warm.size() > 0, "empty reservoir after warm-up");
        const double rms = std::sqrt(frobenius_sq(warm) / static_cast<double>(warm.size()));

        const std::size_t heads = tc.quant.num_heads;
        for (std::size_t h = 0; h < heads; ++h)
            st.codebooks[h] = init_codebook(tc.codebook_size,
                                            tc.model.latent_dim / heads,
                                            scale * rms, st.reest_rng);
        st.avg.codebooks = st.codebooks;

        while (st.iteration < cfg.iterations)
            train_step(st, sample_batch(ds, cfg.batch_size, st.train_rng));

        const EvalResult ev = evaluate(st, test, cfg.polyak && !cfg.eval_raw);
        SweepRow row;
        row.scale = scale;
        row.used_tokens = ev.quantized ? used_tokens(ev.usage) : 0;
        row.task_loss = ev.task_loss;
        result.rows.push_back(row);
        result.csv += format_double(row.scale);
        result.csv += ',';
        result.csv += std::to_string(row.used_tokens);
        result.csv += ',';
        result.csv += format_double(row.task_loss);
        result.csv += '\n';
    }

    if (!csv_path.empty()) write_file(csv_path, result.csv);
    return result;
}

}  // namespace vqb
