#include "setswav/pretrain/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "setswav/core/errors.hpp"
#include "setswav/core/rng.hpp"

namespace setswav::pretrain {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'S', 'S', 'W', 'C', 'K', '0', '0', '1'};

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t get_u32(const std::string& buf, size_t at) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(buf[at + i])) << (8 * i);
    return v;
}

uint64_t get_u64(const std::string& buf, size_t at) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<unsigned char>(buf[at + i])) << (8 * i);
    return v;
}

}  // namespace

const CheckpointArray* Checkpoint::find(const std::string& name) const {
    for (const CheckpointArray& a : arrays)
        if (a.name == name) return &a;
    return nullptr;
}

void Checkpoint::add(const model::ParamTensor& p) {
    arrays.push_back({p.name, p.shape, p.w});
}

void Checkpoint::restore(model::ParamTensor& p, bool required) const {
    const CheckpointArray* a = find(p.name);
    if (!a) {
        if (required) throw DataError("checkpoint is missing array " + p.name);
        return;
    }
    if (a->shape != p.shape || a->data.size() != p.w.size())
        throw CorruptCheckpoint("array " + p.name + " has an unexpected shape");
    p.w = a->data;
    std::fill(p.g.begin(), p.g.end(), 0.0f);
    std::fill(p.m.begin(), p.m.end(), 0.0f);
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    json meta;
    try {
        meta = json::parse(ck.meta_json);
    } catch (const json::exception& e) {
        throw DataError(std::string("checkpoint metadata is not valid JSON: ") + e.what());
    }
    json arrays = json::array();
    for (const CheckpointArray& a : ck.arrays) {
        size_t expect = 1;
        for (int d : a.shape) expect *= static_cast<size_t>(d);
        if (expect != a.data.size()) throw DataError("array " + a.name + " shape does not match data");
        arrays.push_back({{"name", a.name}, {"shape", a.shape}});
    }
    meta["arrays"] = arrays;
    const std::string meta_text = meta.dump();

    std::string buf;
    buf.append(kMagic, sizeof(kMagic));
    put_u32(buf, static_cast<uint32_t>(meta_text.size()));
    buf += meta_text;
    for (const CheckpointArray& a : ck.arrays) {
        const size_t at = buf.size();
        buf.resize(at + a.data.size() * 4);
        std::memcpy(buf.data() + at, a.data.data(), a.data.size() * 4);
    }
    put_u64(buf, fnv1a(buf.data(), buf.size()));

    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write checkpoint: " + path);
    f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!f) throw DataError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint: " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    if (buf.size() < sizeof(kMagic) + 4 + 8) throw CorruptCheckpoint("checkpoint file is truncated");
    if (std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
        throw VersionMismatch("not a recognized checkpoint (bad magic)");
    const uint64_t stored = get_u64(buf, buf.size() - 8);
    const uint64_t actual = fnv1a(buf.data(), buf.size() - 8);
    if (stored != actual) throw CorruptCheckpoint("checkpoint checksum mismatch");

    const uint32_t meta_len = get_u32(buf, sizeof(kMagic));
    size_t at = sizeof(kMagic) + 4;
    if (at + meta_len + 8 > buf.size()) throw CorruptCheckpoint("checkpoint metadata overruns the file");
    const std::string meta_text = buf.substr(at, meta_len);
    at += meta_len;

    json meta;
    try {
        meta = json::parse(meta_text);
    } catch (const json::exception&) {
        throw CorruptCheckpoint("checkpoint metadata is not valid JSON");
    }

    Checkpoint ck;
    ck.meta_json = meta_text;
    for (const auto& desc : meta.value("arrays", json::array())) {
        CheckpointArray a;
        a.name = desc.at("name").get<std::string>();
        a.shape = desc.at("shape").get<std::vector<int>>();
        size_t count = 1;
        for (int d : a.shape) {
            if (d < 0) throw CorruptCheckpoint("negative dimension in array " + a.name);
            count *= static_cast<size_t>(d);
        }
        if (at + count * 4 > buf.size() - 8) throw CorruptCheckpoint("array data overruns the file");
        a.data.resize(count);
        std::memcpy(a.data.data(), buf.data() + at, count * 4);
        at += count * 4;
        ck.arrays.push_back(std::move(a));
    }
    if (at != buf.size() - 8) throw CorruptCheckpoint("trailing bytes after checkpoint arrays");
    return ck;
}

std::string content_hash(const std::string& text) {
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx",
                  static_cast<unsigned long long>(fnv1a(text.data(), text.size())));
    return out;
}

}  // namespace setswav::pretrain
