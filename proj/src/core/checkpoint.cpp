#include "checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace unist {

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'U', 'D', 'I', 'T'};

void write_u32(std::ofstream& os, uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint32_t read_u32(std::ifstream& is, const std::string& path) {
    uint32_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(v))) {
        throw IoError("checkpoint truncated: " + path);
    }
    return v;
}

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
    for (const auto& [n, t] : tensors) {
        if (n == name) return &t;
    }
    return nullptr;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open checkpoint for writing: " + path);
    os.write(kMagic, 4);
    write_u32(os, ckpt.version);
    write_u32(os, static_cast<uint32_t>(ckpt.config.size()));
    for (uint32_t c : ckpt.config) write_u32(os, c);
    for (const auto& [name, t] : ckpt.tensors) {
        write_u32(os, static_cast<uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(os, static_cast<uint32_t>(t.rank()));
        for (int i = 0; i < t.rank(); ++i) write_u32(os, static_cast<uint32_t>(t.dim(i)));
        os.write(reinterpret_cast<const char*>(t.data().data()),
                 static_cast<std::streamsize>(t.data().size() * sizeof(double)));
    }
    if (!os) throw IoError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path);
    char magic[4] = {};
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw IoError("not a checkpoint file (bad magic): " + path);
    }
    Checkpoint ckpt;
    ckpt.version = read_u32(is, path);
    if (ckpt.version != kCheckpointVersion) {
        throw IoError("unsupported checkpoint version " + std::to_string(ckpt.version));
    }
    const uint32_t ncfg = read_u32(is, path);
    ckpt.config.resize(ncfg);
    for (uint32_t i = 0; i < ncfg; ++i) ckpt.config[i] = read_u32(is, path);
    while (true) {
        uint32_t name_len = 0;
        if (!is.read(reinterpret_cast<char*>(&name_len), sizeof(name_len))) break;  // EOF
        std::string name(name_len, '\0');
        if (!is.read(name.data(), name_len)) throw IoError("checkpoint truncated: " + path);
        const uint32_t rank = read_u32(is, path);
        std::vector<int> shape(rank);
        for (uint32_t i = 0; i < rank; ++i) shape[i] = static_cast<int>(read_u32(is, path));
        std::vector<double> data(static_cast<size_t>(shape_numel(shape)));
        if (!is.read(reinterpret_cast<char*>(data.data()),
                     static_cast<std::streamsize>(data.size() * sizeof(double)))) {
            throw IoError("checkpoint truncated in tensor '" + name + "': " + path);
        }
        ckpt.tensors.emplace_back(name, Tensor::from_data(shape, std::move(data)));
    }
    return ckpt;
}

}  // namespace unist
