#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "vqb/matrix.hpp"
#include "vqb/quantizer.hpp"
#include "vqb/trainer.hpp"

namespace vqb {

// Named-array container, the project's on-disk format for checkpoints and
// debug snapshots. Little-endian layout:
//   magic "VQBC", u32 version, u32 entry count, then per entry:
//   u32 name length, name bytes, u8 dtype (0 = f64, 1 = u64),
//   u64 rows, u64 cols, rows*cols values of 8 bytes each.
class ArrayContainer {
public:
    void add(const std::string& name, const Matrix& m);
    void add(const std::string& name, std::span<const double> v);
    void add_u64(const std::string& name, std::span<const std::uint64_t> v);

    bool has(const std::string& name) const;
    Matrix matrix(const std::string& name) const;
    std::vector<double> vec(const std::string& name) const;
    std::vector<std::uint64_t> u64(const std::string& name) const;

    void save(const std::string& path) const;
    static ArrayContainer load(const std::string& path);

private:
    struct Entry {
        std::uint8_t dtype = 0;
        std::uint64_t rows = 0;
        std::uint64_t cols = 0;
        std::vector<double> f64;
        std::vector<std::uint64_t> u64;
    };
    const Entry& get(const std::string& name, std::uint8_t dtype) const;
    std::map<std::string, Entry> entries_;
};

// Codebook file: a 3-field u64 header (K, d, num_heads) followed by
// num_heads * K * d little-endian f64 codeword entries, head-major.
void save_codebooks(const std::string& path, const std::vector<Codebook>& codebooks);
std::vector<Codebook> load_codebooks(const std::string& path);

// Debug snapshot of the reservoir's valid rows in the codebook array format
// (header rows, d, 1).
void save_reservoir_snapshot(const std::string& path, const Reservoir& res);

// Full training state: parameters, Polyak averages, batch-norm and EMA
// state, reservoir, RNG streams and the iteration counter. Loading into a
// trainer built from the same configuration reproduces the uninterrupted
// run bit for bit.
void save_checkpoint(const std::string& path, const TrainerState& st);
void load_checkpoint(const std::string& path, TrainerState& st);

}  // namespace vqb
