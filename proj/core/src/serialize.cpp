#include "vqb/serialize.hpp"

#include <cstring>
#include <fstream>

#include "vqb/check.hpp"

namespace vqb {

namespace {

constexpr char kMagic[4] = {'V', 'Q', 'B', 'C'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("truncated array container");
    return v;
}

}  // namespace

void ArrayContainer::add(const std::string& name, const Matrix& m) {
    Entry e;
    e.dtype = 0;
    e.rows = m.rows();
    e.cols = m.cols();
    e.f64.assign(m.data(), m.data() + m.size());
    entries_[name] = std::move(e);
}

void ArrayContainer::add(const std::string& name, std::span<const double> v) {
    Entry e;
    e.dtype = 0;
    e.rows = 1;
    e.cols = v.size();
    e.f64.assign(v.begin(), v.end());
    entries_[name] = std::move(e);
}

void ArrayContainer::add_u64(const std::string& name, std::span<const std::uint64_t> v) {
    Entry e;
    e.dtype = 1;
    e.rows = 1;
    e.cols = v.size();
    e.u64.assign(v.begin(), v.end());
    entries_[name] = std::move(e);
}

bool ArrayContainer::has(const std::string& name) const { return entries_.count(name) > 0; }

const ArrayContainer::Entry& ArrayContainer::get(const std::string& name,
                                                 std::uint8_t dtype) const {
    auto it = entries_.find(name);
    if (it == entries_.end())
        throw std::runtime_error("array container has no entry named '" + name + "'");
    if (it->second.dtype != dtype)
        throw std::runtime_error("array container entry '" + name + "' has wrong dtype");
    return it->second;
}

Matrix ArrayContainer::matrix(const std::string& name) const {
    const Entry& e = get(name, 0);
    Matrix m(e.rows, e.cols);
    std::memcpy(m.data(), e.f64.data(), e.f64.size() * sizeof(double));
    return m;
}

std::vector<double> ArrayContainer::vec(const std::string& name) const {
    return get(name, 0).f64;
}

std::vector<std::uint64_t> ArrayContainer::u64(const std::string& name) const {
    return get(name, 1).u64;
}

void ArrayContainer::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    VQB_REQUIRE(out.good(), "cannot open '" + path + "' for writing");
    out.write(kMagic, sizeof(kMagic));
    write_pod(out, kVersion);
    write_pod(out, static_cast<std::uint32_t>(entries_.size()));
    for (const auto& [name, e] : entries_) {
        write_pod(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod(out, e.dtype);
        write_pod(out, e.rows);
        write_pod(out, e.cols);
        if (e.dtype == 0)
            out.write(reinterpret_cast<const char*>(e.f64.data()),
                      static_cast<std::streamsize>(e.f64.size() * sizeof(double)));
        else
            out.write(reinterpret_cast<const char*>(e.u64.data()),
                      static_cast<std::streamsize>(e.u64.size() * sizeof(std::uint64_t)));
    }
    VQB_REQUIRE(out.good(), "write failed for '" + path + "'");
}

ArrayContainer ArrayContainer::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) throw std::runtime_error("cannot open '" + path + "'");
    char magic[4];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("'" + path + "' is not an array container");
    const auto version = read_pod<std::uint32_t>(in);
    if (version != kVersion) throw std::runtime_error("unsupported container version");
    const auto count = read_pod<std::uint32_t>(in);

    ArrayContainer c;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = read_pod<std::uint32_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        Entry e;
        e.dtype = read_pod<std::uint8_t>(in);
        e.rows = read_pod<std::uint64_t>(in);
        e.cols = read_pod<std::uint64_t>(in);
        const std::uint64_t n = e.rows * e.cols;
        if (e.dtype == 0) {
            e.f64.resize(n);
            in.read(reinterpret_cast<char*>(e.f64.data()),
                    static_cast<std::streamsize>(n * sizeof(double)));
        } else if (e.dtype == 1) {
            e.u64.resize(n);
            in.read(reinterpret_cast<char*>(e.u64.data()),
                    static_cast<std::streamsize>(n * sizeof(std::uint64_t)));
        } else {
            throw std::runtime_error("unknown dtype in array container");
        }
        if (!in) throw std::runtime_error("truncated array container");
        c.entries_[name] = std::move(e);
    }
    return c;
}

void save_codebooks(const std::string& path, const std::vector<Codebook>& codebooks) {
    VQB_REQUIRE(!codebooks.empty(), "no codebooks to save");
    const std::uint64_t k = codebooks.front().size();
    const std::uint64_t d = codebooks.front().dim();
    for (const Codebook& cb : codebooks)
        VQB_REQUIRE(cb.size() == k && cb.dim() == d, "heads disagree on codebook shape");

    std::ofstream out(path, std::ios::binary);
    VQB_REQUIRE(out.good(), "cannot open '" + path + "' for writing");
    write_pod(out, k);
    write_pod(out, d);
    write_pod(out, static_cast<std::uint64_t>(codebooks.size()));
    for (const Codebook& cb : codebooks)
        out.write(reinterpret_cast<const char*>(cb.words.data()),
                  static_cast<std::streamsize>(cb.words.size() * sizeof(double)));
    VQB_REQUIRE(out.good(), "write failed for '" + path + "'");
}

std::vector<Codebook> load_codebooks(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) throw std::runtime_error("cannot open '" + path + "'");
    const auto k = read_pod<std::uint64_t>(in);
    const auto d = read_pod<std::uint64_t>(in);
    const auto heads = read_pod<std::uint64_t>(in);
    if (k == 0 || d == 0 || heads == 0)
        throw std::runtime_error("degenerate codebook header in '" + path + "'");

    std::vector<Codebook> out;
    for (std::uint64_t h = 0; h < heads; ++h) {
        Codebook cb{Matrix(k, d)};
        in.read(reinterpret_cast<char*>(cb.words.data()),
                static_cast<std::streamsize>(k * d * sizeof(double)));
        if (!in) throw std::runtime_error("truncated codebook file '" + path + "'");
        out.push_back(std::move(cb));
    }
    return out;
}

void save_reservoir_snapshot(const std::string& path, const Reservoir& res) {
    VQB_REQUIRE(res.size() > 0, "empty reservoir snapshot");
    save_codebooks(path, {Codebook{res.contents()}});
}

namespace {

void add_stack(ArrayContainer& c, const std::string& prefix, const MlpStack& stack) {
    for (std::size_t l = 0; l < stack.layers.size(); ++l) {
        c.add(prefix + ".w" + std::to_string(l), stack.layers[l].weight);
        c.add(prefix + ".b" + std::to_string(l), stack.layers[l].bias);
    }
}

void read_stack(const ArrayContainer& c, const std::string& prefix, MlpStack& stack) {
    for (std::size_t l = 0; l < stack.layers.size(); ++l) {
        Matrix w = c.matrix(prefix + ".w" + std::to_string(l));
        if (!w.same_shape(stack.layers[l].weight))
            throw config_error("checkpoint does not match configuration: " + prefix);
        stack.layers[l].weight = std::move(w);
        stack.layers[l].bias = c.vec(prefix + ".b" + std::to_string(l));
    }
}

void add_rng(ArrayContainer& c, const std::string& name, const Rng& rng) {
    const auto s = rng.state();
    c.add_u64(name, std::span<const std::uint64_t>(s.data(), s.size()));
}

void read_rng(const ArrayContainer& c, const std::string& name, Rng& rng) {
    const auto v = c.u64(name);
    if (v.size() != 4) throw config_error("bad RNG state in checkpoint");
    rng.set_state({v[0], v[1], v[2], v[3]});
}

}  // namespace

void save_checkpoint(const std::string& path, const TrainerState& st) {
    ArrayContainer c;
    const std::uint64_t it = st.iteration;
    c.add_u64("iteration", std::span<const std::uint64_t>(&it, 1));
    add_rng(c, "rng.train", st.train_rng);
    add_rng(c, "rng.sample", st.sample_rng);
    add_rng(c, "rng.reest", st.reest_rng);

    add_stack(c, "encoder", st.encoder);
    add_stack(c, "decoder", st.decoder);
    c.add("bn.gain", st.bn.gain);
    c.add("bn.bias", st.bn.bias);
    c.add("bn.running_mean", st.bn.running_mean);
    c.add("bn.running_var", st.bn.running_var);

    for (std::size_t h = 0; h < st.codebooks.size(); ++h)
        c.add("codebook." + std::to_string(h), st.codebooks[h].words);
    for (std::size_t h = 0; h < st.ema.size(); ++h) {
        c.add("ema." + std::to_string(h) + ".counts", st.ema[h].counts);
        c.add("ema." + std::to_string(h) + ".means", st.ema[h].means);
    }

    c.add("reservoir.items", st.reservoir.items);
    const std::uint64_t seen = st.reservoir.seen;
    c.add_u64("reservoir.seen", std::span<const std::uint64_t>(&seen, 1));

    add_stack(c, "avg.encoder", st.avg.encoder);
    add_stack(c, "avg.decoder", st.avg.decoder);
    c.add("avg.bn_gain", st.avg.bn_gain);
    c.add("avg.bn_bias", st.avg.bn_bias);
    for (std::size_t h = 0; h < st.avg.codebooks.size(); ++h)
        c.add("avg.codebook." + std::to_string(h), st.avg.codebooks[h].words);

    c.save(path);
}

void load_checkpoint(const std::string& path, TrainerState& st) {
    const ArrayContainer c = ArrayContainer::load(path);
    st.iteration = static_cast<std::size_t>(c.u64("iteration").at(0));
    read_rng(c, "rng.train", st.train_rng);
    read_rng(c, "rng.sample", st.sample_rng);
    read_rng(c, "rng.reest", st.reest_rng);

    read_stack(c, "encoder", st.encoder);
    read_stack(c, "decoder", st.decoder);
    st.bn.gain = c.vec("bn.gain");
    st.bn.bias = c.vec("bn.bias");
    st.bn.running_mean = c.vec("bn.running_mean");
    st.bn.running_var = c.vec("bn.running_var");

    for (std::size_t h = 0; h < st.codebooks.size(); ++h) {
        Matrix words = c.matrix("codebook." + std::to_string(h));
        if (!words.same_shape(st.codebooks[h].words))
            throw config_error("checkpoint does not match configuration: codebook");
        st.codebooks[h].words = std::move(words);
    }
    for (std::size_t h = 0; h < st.ema.size(); ++h) {
        st.ema[h].counts = c.vec("ema." + std::to_string(h) + ".counts");
        st.ema[h].means = c.matrix("ema." + std::to_string(h) + ".means");
    }

    Matrix items = c.matrix("reservoir.items");
    if (!items.same_shape(st.reservoir.items))
        throw config_error("checkpoint does not match configuration: reservoir");
    st.reservoir.items = std::move(items);
    st.reservoir.seen = static_cast<std::size_t>(c.u64("reservoir.seen").at(0));

    read_stack(c, "avg.encoder", st.avg.encoder);
    read_stack(c, "avg.decoder", st.avg.decoder);
    st.avg.bn_gain = c.vec("avg.bn_gain");
    st.avg.bn_bias = c.vec("avg.bn_bias");
    for (std::size_t h = 0; h < st.avg.codebooks.size(); ++h)
        st.avg.codebooks[h].words = c.matrix("avg.codebook." + std::to_string(h));
}

}  // namespace vqb
