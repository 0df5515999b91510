#include <cstdint>
#include <cstring>
#include <fstream>

#include "rastervec/training.hpp"

// Checkpoint file: magic, schema version, config JSON echo, step
// counters, then every parameter (values + AdamW moments) keyed by name.
// All numbers little-endian, doubles raw IEEE-754.

namespace rastervec::train {

namespace {

constexpr char kMagic[8] = {'R', 'V', 'C', 'K', 'P', 'T', '0', '\n'};

void write_i64(std::ostream& os, std::int64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::int64_t read_i64(std::istream& is) {
    std::int64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}

void write_str(std::ostream& os, const std::string& s) {
    write_i64(os, static_cast<std::int64_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_str(std::istream& is) {
    const auto n = read_i64(is);
    if (n < 0 || n > (1 << 28)) throw SchemaMismatch("checkpoint: corrupt string length");
    std::string s(static_cast<size_t>(n), '\0');
    is.read(s.data(), n);
    return s;
}

void write_mat(std::ostream& os, const Eigen::MatrixXd& m) {
    write_i64(os, m.rows());
    write_i64(os, m.cols());
    os.write(reinterpret_cast<const char*>(m.data()),
             static_cast<std::streamsize>(sizeof(double) * m.size()));
}

Eigen::MatrixXd read_mat(std::istream& is) {
    const auto r = read_i64(is), c = read_i64(is);
    if (r < 0 || c < 0 || r * c > (1LL << 30)) throw SchemaMismatch("checkpoint: corrupt matrix");
    Eigen::MatrixXd m(r, c);
    is.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
    return m;
}

void check_header(std::istream& is, const std::string& path) {
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw SchemaMismatch("not a checkpoint file: " + path);
    const auto schema = read_i64(is);
    if (schema != kCheckpointSchema)
        throw SchemaMismatch("checkpoint schema " + std::to_string(schema) + " != " +
                             std::to_string(kCheckpointSchema) + ": " + path);
}

}  // namespace

void save_checkpoint(const std::string& path, const nn::ParamStore& store, const nn::AdamW& opt,
                     long epoch, long step, const std::string& config_json) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
    os.write(kMagic, 8);
    write_i64(os, kCheckpointSchema);
    write_str(os, config_json);
    write_i64(os, epoch);
    write_i64(os, step);
    write_i64(os, opt.step);
    auto& params = const_cast<nn::ParamStore&>(store).all();
    write_i64(os, static_cast<std::int64_t>(params.size()));
    for (const nn::Param* p : params) {
        write_str(os, p->name);
        write_i64(os, p->backbone ? 1 : 0);
        write_mat(os, p->v);
        write_mat(os, p->m1.size() ? p->m1 : Eigen::MatrixXd::Zero(p->v.rows(), p->v.cols()));
        write_mat(os, p->m2.size() ? p->m2 : Eigen::MatrixXd::Zero(p->v.rows(), p->v.cols()));
    }
    if (!os) throw std::runtime_error("short write on checkpoint: " + path);
}

CheckpointMeta load_checkpoint(const std::string& path, nn::ParamStore& store, nn::AdamW& opt) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read checkpoint: " + path);
    check_header(is, path);
    CheckpointMeta meta;
    meta.config_json = read_str(is);
    meta.epoch = static_cast<long>(read_i64(is));
    meta.step = static_cast<long>(read_i64(is));
    opt.step = static_cast<long>(read_i64(is));
    const auto n = read_i64(is);
    if (n != static_cast<std::int64_t>(store.all().size()))
        throw SchemaMismatch("checkpoint holds " + std::to_string(n) + " params, model has " +
                             std::to_string(store.all().size()));
    for (std::int64_t i = 0; i < n; ++i) {
        const std::string name = read_str(is);
        nn::Param* p = store.find(name);
        if (!p) throw SchemaMismatch("checkpoint param not in model: " + name);
        read_i64(is);  // backbone flag, informational
        const Eigen::MatrixXd v = read_mat(is);
        if (v.rows() != p->v.rows() || v.cols() != p->v.cols())
            throw SchemaMismatch("shape mismatch for param: " + name);
        p->v = v;
        p->m1 = read_mat(is);
        p->m2 = read_mat(is);
    }
    if (!is) throw SchemaMismatch("truncated checkpoint: " + path);
    return meta;
}

CheckpointMeta peek_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read checkpoint: " + path);
    check_header(is, path);
    CheckpointMeta meta;
    meta.config_json = read_str(is);
    meta.epoch = static_cast<long>(read_i64(is));
    meta.step = static_cast<long>(read_i64(is));
    return meta;
}

}  // namespace rastervec::train
