#include "krflow/io.h"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace krflow {

const char kCsvHeader[] =
    "t,sup_phi,inf_phi,osc,I,J,F0,F,nu,int_phi_ref,int_negphi_ev,"
    "sup_phidot,sup_R,sup_h,sup_gradh,cp_proxy,vol_err";

std::string format_csv_row(const CsvRow& r) {
    char buf[40];
    std::string out;
    out.reserve(kCsvCols * 26);
    for (int i = 0; i < kCsvCols; ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", r.col[i]);
        if (i) out += ',';
        out += buf;
    }
    out += '\n';
    return out;
}

// explicit little-endian packing so the files are portable, not just
// whatever the host writes
static void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out += (char)((v >> (8 * i)) & 0xff);
}

static std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= (std::uint64_t)p[i] << (8 * i);
    return v;
}

void write_field(const std::string& path, const FieldBlob& blob) {
    std::string out;
    out.reserve(24 + 8 * blob.values.size());
    put_u64(out, (std::uint64_t)blob.n);
    put_u64(out, (std::uint64_t)blob.N);
    put_u64(out, std::bit_cast<std::uint64_t>(blob.L));
    for (double v : blob.values) put_u64(out, std::bit_cast<std::uint64_t>(v));
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write(out.data(), (std::streamsize)out.size());
    if (!f) throw IoError("short write: " + path);
}

FieldBlob read_field(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    std::string raw((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
    if (raw.size() < 24 || (raw.size() - 24) % 8 != 0)
        throw IoError("malformed field file: " + path);
    const unsigned char* p = (const unsigned char*)raw.data();
    FieldBlob blob;
    blob.n = (std::int64_t)get_u64(p);
    blob.N = (std::int64_t)get_u64(p + 8);
    blob.L = std::bit_cast<double>(get_u64(p + 16));
    std::size_t m = (raw.size() - 24) / 8;
    std::size_t expect =
        blob.n == 1 ? (std::size_t)blob.N : (std::size_t)blob.N * blob.N;
    if (blob.n < 1 || blob.n > 2 || blob.N < 2 || m != expect)
        throw IoError("field header disagrees with payload: " + path);
    blob.values.resize(m);
    for (std::size_t i = 0; i < m; ++i)
        blob.values[i] = std::bit_cast<double>(get_u64(p + 24 + 8 * i));
    return blob;
}

void write_checkpoint(const std::string& stem, const FieldBlob& blob,
                      const CheckpointMeta& meta) {
    write_field(stem + ".bin", blob);
    nlohmann::json j;
    j["t"] = meta.t;
    j["c0"] = meta.c0;
    j["config_hash"] = meta.config_hash;
    write_text_file(stem + ".json", j.dump(2) + "\n");
}

CheckpointMeta read_checkpoint_meta(const std::string& stem) {
    nlohmann::json j = nlohmann::json::parse(read_text_file(stem + ".json"));
    CheckpointMeta m;
    m.t = j.at("t").get<double>();
    m.c0 = j.at("c0").get<double>();
    m.config_hash = j.at("config_hash").get<std::uint64_t>();
    return m;
}

std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write(text.data(), (std::streamsize)text.size());
    if (!f) throw IoError("short write: " + path);
}

}  // namespace krflow
