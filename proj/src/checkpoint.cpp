#include "lk/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace lk {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'L', 'K', 'C', 'P'};
constexpr uint32_t kVersion = 1;

// all multi-byte fields are composed byte-by-byte so the file is
// little-endian regardless of the host
void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) {
    uint64_t v;
    std::memcpy(&v, &d, 8);
    put_u64(out, v);
}

struct Cursor {
    const std::string& buf;
    size_t pos = 0;

    void need(uint64_t n) const {
        if (n > buf.size() - pos) throw std::invalid_argument("checkpoint: truncated file");
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(buf[pos + size_t(i)])) << (8 * i);
        pos += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= uint64_t(uint8_t(buf[pos + size_t(i)])) << (8 * i);
        pos += 8;
        return v;
    }
    double f64() {
        uint64_t v = u64();
        double d;
        std::memcpy(&d, &v, 8);
        return d;
    }
    std::string bytes(uint64_t n) {
        need(n);
        std::string s = buf.substr(pos, size_t(n));
        pos += size_t(n);
        return s;
    }
};

void put_record(std::string& out, const std::string& name, const std::vector<int>& shape,
                const std::vector<double>& data) {
    int64_t numel = 1;
    for (int d : shape) numel *= d;
    if (numel != int64_t(data.size()))
        throw std::invalid_argument("checkpoint: record '" + name + "' data length " +
                                    std::to_string(data.size()) + " does not match its shape");
    put_u64(out, name.size());
    out.append(name);
    put_u64(out, shape.size());
    for (int d : shape) put_u64(out, uint64_t(int64_t(d)));
    for (double x : data) put_f64(out, x);
}

struct Record {
    std::vector<int> shape;
    std::vector<double> values;
};

Record read_record(Cursor& c, std::string& name) {
    name = c.bytes(c.u64());
    uint64_t ndim = c.u64();
    if (ndim > 8) throw std::invalid_argument("checkpoint: record '" + name + "' has implausible rank");
    Record r;
    int64_t numel = 1;
    for (uint64_t i = 0; i < ndim; ++i) {
        uint64_t d = c.u64();
        if (d == 0 || d > (uint64_t(1) << 32))
            throw std::invalid_argument("checkpoint: record '" + name + "' has a bad dimension");
        r.shape.push_back(int(d));
        numel *= int64_t(d);
    }
    c.need(uint64_t(numel) * 8);
    r.values.resize(size_t(numel));
    for (double& x : r.values) x = c.f64();
    return r;
}

}  // namespace

std::string serialize_checkpoint(const Model& model, const CheckpointMeta& meta,
                                 const AdamState* adam) {
    if (adam && (adam->m.size() != model.params.size() || adam->v.size() != model.params.size()))
        throw std::invalid_argument("checkpoint: optimizer state does not match the parameter count");

    json h;
    h["arch"] = meta.arch;
    h["config"] = json::parse(meta.config_json);
    h["epoch"] = meta.epoch;
    h["metric"] = meta.metric;
    if (adam)
        h["adam"] = {{"lr", adam->lr},
                     {"beta1", adam->beta1},
                     {"beta2", adam->beta2},
                     {"eps", adam->eps},
                     {"t", adam->t}};
    std::string header = h.dump();

    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    put_u64(out, header.size());
    out.append(header);
    put_u64(out, uint64_t(model.params.size()) * (adam ? 3 : 1));
    for (const Param& p : model.params)
        put_record(out, "param/" + p.name, p.tensor.shape(), p.tensor.values());
    if (adam) {
        for (size_t i = 0; i < model.params.size(); ++i)
            put_record(out, "adam_m/" + model.params[i].name, model.params[i].tensor.shape(),
                       adam->m[i]);
        for (size_t i = 0; i < model.params.size(); ++i)
            put_record(out, "adam_v/" + model.params[i].name, model.params[i].tensor.shape(),
                       adam->v[i]);
    }
    return out;
}

LoadedCheckpoint parse_checkpoint(const std::string& bytes) {
    Cursor c{bytes};
    if (c.bytes(4) != std::string(kMagic, 4))
        throw std::invalid_argument("checkpoint: bad magic, not a checkpoint file");
    uint32_t version = c.u32();
    if (version != kVersion)
        throw std::invalid_argument("checkpoint: unsupported format version " +
                                    std::to_string(version));
    std::string header = c.bytes(c.u64());

    LoadedCheckpoint lc;
    bool header_has_adam = false;
    try {
        json h = json::parse(header);
        lc.meta.arch = h.at("arch").get<std::string>();
        lc.meta.config_json = h.at("config").dump();
        lc.meta.epoch = h.at("epoch").get<int>();
        lc.meta.metric = h.at("metric").get<double>();
        if (h.contains("adam")) {
            header_has_adam = true;
            lc.adam.lr = h["adam"].at("lr").get<double>();
            lc.adam.beta1 = h["adam"].at("beta1").get<double>();
            lc.adam.beta2 = h["adam"].at("beta2").get<double>();
            lc.adam.eps = h["adam"].at("eps").get<double>();
            lc.adam.t = h["adam"].at("t").get<int64_t>();
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("checkpoint: bad header: ") + e.what());
    }

    Rng scratch(0);  // build-time init is overwritten by the stored values
    lc.model = build_model(lc.meta.arch, lc.meta.config_json, scratch);

    uint64_t n_records = c.u64();
    std::map<std::string, Record> records;
    for (uint64_t i = 0; i < n_records; ++i) {
        std::string name;
        Record r = read_record(c, name);
        if (!records.emplace(name, std::move(r)).second)
            throw std::invalid_argument("checkpoint: duplicate record '" + name + "'");
    }
    if (c.pos != bytes.size())
        throw std::invalid_argument("checkpoint: trailing bytes after the last record");

    std::set<std::string> consumed;
    auto take = [&](const std::string& name, const std::vector<int>& want) -> Record& {
        auto it = records.find(name);
        if (it == records.end())
            throw std::invalid_argument("checkpoint: record '" + name + "' missing from file");
        if (it->second.shape != want)
            throw std::invalid_argument("checkpoint: record '" + name +
                                        "' shape does not match the architecture");
        consumed.insert(name);
        return it->second;
    };

    for (Param& p : lc.model.params)
        p.tensor.values() = std::move(take("param/" + p.name, p.tensor.shape()).values);

    if (header_has_adam) {
        lc.has_adam = true;
        for (const Param& p : lc.model.params)
            lc.adam.m.push_back(std::move(take("adam_m/" + p.name, p.tensor.shape()).values));
        for (const Param& p : lc.model.params)
            lc.adam.v.push_back(std::move(take("adam_v/" + p.name, p.tensor.shape()).values));
    }
    for (const auto& [name, r] : records)
        if (!consumed.count(name))
            throw std::invalid_argument("checkpoint: unexpected record '" + name + "'");
    return lc;
}

void save_checkpoint(const std::string& path, const Model& model, const CheckpointMeta& meta,
                     const AdamState* adam) {
    std::string bytes = serialize_checkpoint(model, meta, adam);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::invalid_argument("checkpoint: cannot write '" + path + "'");
    f.write(bytes.data(), std::streamsize(bytes.size()));
    if (!f) throw std::invalid_argument("checkpoint: write failed for '" + path + "'");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::invalid_argument("checkpoint: cannot read '" + path + "'");
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_checkpoint(bytes);
}

}  // namespace lk
