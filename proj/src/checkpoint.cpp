#include "asmrh/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "asmrh/errors.hpp"

namespace asmrh {

namespace {

// Writers emit little-endian explicitly so files are portable even though
// every supported build target is little-endian anyway.
template <typename U>
void put(std::string& out, U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i)
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
public:
    Reader(const std::string& buf, const std::string& path) : buf_(buf), path_(path) {}

    template <typename U>
    U get() {
        if (pos_ + sizeof(U) > buf_.size())
            throw FormatError(msg("checkpoint '", path_, "': truncated at byte ", pos_));
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i)
            v |= static_cast<U>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
        pos_ += sizeof(U);
        return v;
    }

    std::string get_bytes(std::size_t n) {
        if (pos_ + n > buf_.size())
            throw FormatError(msg("checkpoint '", path_, "': truncated at byte ", pos_));
        std::string s = buf_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    bool done() const { return pos_ == buf_.size(); }

private:
    const std::string& buf_;
    std::string path_;
    std::size_t pos_ = 0;
};

}  // namespace

std::size_t CheckpointRecord::numel() const {
    std::size_t n = 1;
    for (std::uint64_t e : extents) n *= static_cast<std::size_t>(e);
    return n;
}

std::vector<double> CheckpointRecord::as_f64() const {
    const std::size_t n = numel();
    std::vector<double> out(n);
    if (dtype == 1) {
        std::memcpy(out.data(), bytes.data(), n * sizeof(double));
    } else if (dtype == 0) {
        for (std::size_t i = 0; i < n; ++i) {
            float f;
            std::memcpy(&f, bytes.data() + i * sizeof(float), sizeof(float));
            out[i] = static_cast<double>(f);
        }
    } else {
        throw FormatError(msg("checkpoint record '", name, "': unknown dtype tag ",
                              static_cast<int>(dtype)));
    }
    return out;
}

const CheckpointRecord* Checkpoint::find(const std::string& name) const {
    for (const CheckpointRecord& r : records)
        if (r.name == name) return &r;
    return nullptr;
}

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

CheckpointRecord make_record_f64(const std::string& name,
                                 const std::vector<std::uint64_t>& extents,
                                 const double* values) {
    CheckpointRecord r;
    r.name = name;
    r.dtype = 1;
    r.extents = extents;
    r.bytes.resize(r.numel() * sizeof(double));
    std::memcpy(r.bytes.data(), values, r.bytes.size());
    return r;
}

void checkpoint_save(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::string out;
    out += "ASRH";
    put<std::uint32_t>(out, ckpt.version);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.config_blob.size()));
    out += ckpt.config_blob;
    put<std::uint64_t>(out, fnv1a(ckpt.config_blob));
    for (const CheckpointRecord& r : ckpt.records) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(r.name.size()));
        out += r.name;
        out.push_back(static_cast<char>(r.dtype));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(r.extents.size()));
        for (std::uint64_t e : r.extents) put<std::uint64_t>(out, e);
        const std::size_t elem = r.dtype == 0 ? sizeof(float) : sizeof(double);
        if (r.bytes.size() != r.numel() * elem)
            throw Error(msg("checkpoint_save: record '", r.name, "' has ", r.bytes.size(),
                            " payload bytes, expected ", r.numel() * elem));
        out.append(r.bytes.data(), r.bytes.size());
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError(msg("checkpoint_save: cannot open '", path.string(), "'"));
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw DataError(msg("checkpoint_save: write failed for '", path.string(), "'"));
}

Checkpoint checkpoint_load(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError(msg("checkpoint_load: cannot open '", path.string(), "'"));
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    Reader in(buf, path.string());
    if (in.get_bytes(4) != "ASRH")
        throw FormatError(msg("checkpoint '", path.string(), "': bad magic"));
    Checkpoint ckpt;
    ckpt.version = in.get<std::uint32_t>();
    if (ckpt.version != 1)
        throw FormatError(msg("checkpoint '", path.string(), "': unsupported version ",
                              ckpt.version));
    const std::uint32_t blob_len = in.get<std::uint32_t>();
    ckpt.config_blob = in.get_bytes(blob_len);
    const std::uint64_t stored_hash = in.get<std::uint64_t>();
    if (stored_hash != fnv1a(ckpt.config_blob))
        throw FormatError(msg("checkpoint '", path.string(), "': config hash mismatch"));

    while (!in.done()) {
        CheckpointRecord r;
        const std::uint32_t name_len = in.get<std::uint32_t>();
        r.name = in.get_bytes(name_len);
        r.dtype = in.get<std::uint8_t>();
        if (r.dtype > 1)
            throw FormatError(msg("checkpoint '", path.string(), "': record '", r.name,
                                  "' has unknown dtype tag ", static_cast<int>(r.dtype)));
        const std::uint32_t rank = in.get<std::uint32_t>();
        r.extents.resize(rank);
        for (std::uint32_t i = 0; i < rank; ++i) r.extents[i] = in.get<std::uint64_t>();
        const std::size_t elem = r.dtype == 0 ? sizeof(float) : sizeof(double);
        const std::string payload = in.get_bytes(r.numel() * elem);
        r.bytes.assign(payload.begin(), payload.end());
        ckpt.records.push_back(std::move(r));
    }
    return ckpt;
}

}  // namespace asmrh
