#pragma once
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace krflow {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// fixed run.csv schema; one row per cadence step, 17 significant digits
extern const char kCsvHeader[];
constexpr int kCsvCols = 17;

struct CsvRow {
    double col[kCsvCols] = {};
};

std::string format_csv_row(const CsvRow& r);

// flat binary field: n, N as little-endian 64-bit integers, L as a
// little-endian 64-bit float, then row-major 64-bit floats
struct FieldBlob {
    std::int64_t n = 0;
    std::int64_t N = 0;
    double L = 0.0;
    std::vector<double> values;
};

void write_field(const std::string& path, const FieldBlob& blob);
FieldBlob read_field(const std::string& path);

// checkpoint = field blob + JSON sidecar keyed to the owning config
struct CheckpointMeta {
    double t = 0.0;
    double c0 = 0.0;
    std::uint64_t config_hash = 0;
};

// writes stem.bin and stem.json
void write_checkpoint(const std::string& stem, const FieldBlob& blob,
                      const CheckpointMeta& meta);
CheckpointMeta read_checkpoint_meta(const std::string& stem);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace krflow
