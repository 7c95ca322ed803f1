#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rtar/tensor.hpp"

namespace rtar {

/// Named tensor container. Preserves insertion order so serialization is
/// deterministic.
class WeightStore {
public:
    void put(const std::string& name, Tensor t) {
        if (index_.count(name)) throw DuplicateName(name);
        index_[name] = entries_.size();
        entries_.emplace_back(name, std::move(t));
    }

    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    const Tensor& get(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw MissingWeights(name);
        return entries_[it->second].second;
    }

    std::size_t size() const { return entries_.size(); }
    const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }

private:
    std::vector<std::pair<std::string, Tensor>> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

namespace detail {

inline void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}
inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
    const unsigned char* p;
    std::size_t len;
    std::size_t pos = 0;

    void need(std::size_t n, const char* what) const {
        if (pos + n > len)
            throw FormatError(std::string("truncated while reading ") + what +
                              " at byte offset " + std::to_string(pos));
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return p[pos++];
    }
    std::uint16_t u16(const char* what) {
        need(2, what);
        std::uint16_t v = static_cast<std::uint16_t>(p[pos] | (p[pos + 1] << 8));
        pos += 2;
        return v;
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
};

}  // namespace detail

/// Serializes a WeightStore to the RTAW v1 byte layout: magic "RTAW", version
/// 0x01, u32 tensor count, then per tensor u16 name length + name + u8 rank +
/// u32 extents + little-endian f32 payload. No padding.
inline std::string serialize_weights(const WeightStore& store) {
    std::string out = "RTAW";
    out.push_back('\x01');
    detail::put_u32(out, static_cast<std::uint32_t>(store.size()));
    for (const auto& [name, t] : store.entries()) {
        detail::put_u16(out, static_cast<std::uint16_t>(name.size()));
        out += name;
        out.push_back(static_cast<char>(t.rank()));
        for (auto e : t.shape()) detail::put_u32(out, static_cast<std::uint32_t>(e));
        const std::size_t bytes = static_cast<std::size_t>(t.numel()) * 4;
        const std::size_t base = out.size();
        out.resize(base + bytes);
        std::memcpy(out.data() + base, t.data(), bytes);  // little-endian host
    }
    return out;
}

inline WeightStore deserialize_weights(const std::string& bytes) {
    detail::Reader r{reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()};
    r.need(5, "header");
    if (std::memcmp(bytes.data(), "RTAW", 4) != 0) throw FormatError("bad magic");
    r.pos = 4;
    const std::uint8_t version = r.u8("version");
    if (version != 0x01) throw FormatError("unsupported version " + std::to_string(version));
    const std::uint32_t count = r.u32("tensor count");
    WeightStore store;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint16_t name_len = r.u16("name length");
        r.need(name_len, "name");
        std::string name(bytes.data() + r.pos, name_len);
        r.pos += name_len;
        const std::uint8_t rank = r.u8("rank");
        if (rank < 1 || rank > 4)
            throw FormatError("rank " + std::to_string(rank) + " out of range for tensor '" +
                              name + "'");
        std::vector<std::int64_t> shape;
        std::int64_t numel = 1;
        for (std::uint8_t d = 0; d < rank; ++d) {
            const std::uint32_t e = r.u32("extent");
            if (e == 0) throw FormatError("zero extent in tensor '" + name + "'");
            shape.push_back(e);
            numel *= e;
        }
        r.need(static_cast<std::size_t>(numel) * 4, ("payload of '" + name + "'").c_str());
        std::vector<float> data(static_cast<std::size_t>(numel));
        std::memcpy(data.data(), bytes.data() + r.pos, data.size() * 4);
        r.pos += data.size() * 4;
        store.put(name, Tensor(std::move(shape), std::move(data)));
    }
    if (r.pos != bytes.size())
        throw FormatError("trailing bytes after last tensor at offset " + std::to_string(r.pos));
    return store;
}

inline void save_weights(const WeightStore& store, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    const std::string bytes = serialize_weights(store);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: " + path);
}

inline WeightStore load_weights(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for reading: " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return deserialize_weights(bytes);
}

}  // namespace rtar
