// SPDX-License-Identifier: Apache-2.0
#include "dsan/checkpoint.hpp"

#include "dsan/error.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace dsan {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

using KeyValues = std::map<std::string, std::string>;

class Writer {
public:
    void bytes(const void* p, std::size_t n)
    {
        const auto* b = static_cast<const char*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    void u32(std::uint32_t v) { bytes(&v, sizeof v); }
    void u64(std::uint64_t v) { bytes(&v, sizeof v); }
    void str(const std::string& s)
    {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    void config(const KeyValues& kv)
    {
        std::string text;
        for (const auto& [k, v] : kv)
            text += k + "=" + v + "\n";
        str(text);
    }
    std::vector<char>& buffer() { return buf_; }

private:
    std::vector<char> buf_;
};

class Reader {
public:
    Reader(const char* data, std::size_t size) : data_(data), size_(size) {}

    void bytes(void* out, std::size_t n)
    {
        if (n > size_ - pos_)
            throw IoError("checkpoint is truncated");
        std::memcpy(out, data_ + pos_, n);
        pos_ += n;
    }
    std::uint32_t u32()
    {
        std::uint32_t v;
        bytes(&v, sizeof v);
        return v;
    }
    std::uint64_t u64()
    {
        std::uint64_t v;
        bytes(&v, sizeof v);
        return v;
    }
    std::string str()
    {
        const std::uint32_t n = u32();
        if (n > size_ - pos_)
            throw IoError("checkpoint is truncated");
        std::string s(data_ + pos_, n);
        pos_ += n;
        return s;
    }
    KeyValues config()
    {
        KeyValues kv;
        std::istringstream in(str());
        for (std::string line; std::getline(in, line);) {
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw IoError("malformed checkpoint config line: " + line);
            kv[line.substr(0, eq)] = line.substr(eq + 1);
        }
        return kv;
    }
    bool at_end() const { return pos_ == size_; }
    bool peek_tag(const char* tag) const
    {
        return size_ - pos_ >= 4 && std::memcmp(data_ + pos_, tag, 4) == 0;
    }

private:
    const char* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

template <typename T>
constexpr const char* dtype_name()
{
    return sizeof(T) == 4 ? "f32" : "f64";
}

template <typename T>
void write_record(Writer& w, const std::string& name, const Shape& shape, std::span<const T> values)
{
    w.str(name);
    w.u32(static_cast<std::uint32_t>(shape.size()));
    for (auto d : shape)
        w.u64(d);
    w.bytes(values.data(), values.size() * sizeof(T));
}

struct Record {
    std::string name;
    Shape shape;
    std::vector<double> values;
};

Record read_record(Reader& r, bool f32)
{
    Record rec;
    rec.name = r.str();
    const std::uint32_t rank = r.u32();
    if (rank > 8)
        throw IoError("checkpoint record '" + rec.name + "' has implausible rank");
    for (std::uint32_t i = 0; i < rank; ++i)
        rec.shape.push_back(static_cast<std::size_t>(r.u64()));
    const std::size_t n = shape_numel(rec.shape);
    rec.values.resize(n);
    if (f32) {
        std::vector<float> tmp(n);
        r.bytes(tmp.data(), n * sizeof(float));
        std::copy(tmp.begin(), tmp.end(), rec.values.begin());
    } else {
        r.bytes(rec.values.data(), n * sizeof(double));
    }
    return rec;
}

// Fast path keeps same-precision loads bitwise exact.
template <typename T>
void assign(std::span<T> dst, const Record& rec)
{
    for (std::size_t i = 0; i < dst.size(); ++i)
        dst[i] = static_cast<T>(rec.values[i]);
}

double parse_double(const KeyValues& kv, const std::string& key)
{
    auto it = kv.find(key);
    if (it == kv.end())
        throw IoError("checkpoint optimizer block is missing '" + key + "'");
    try {
        return std::stod(it->second);
    } catch (const std::exception&) {
        throw IoError("checkpoint optimizer block has a bad '" + key + "'");
    }
}

std::string exact(double v)
{
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

} // namespace

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const DsanModel<T>& model,
                     const AdamState<T>* adam)
{
    Writer w;
    w.bytes("DSAN", 4);
    w.u32(kCheckpointVersion);
    auto kv = model.config().to_map();
    kv["dtype"] = dtype_name<T>();
    w.config(kv);

    const auto params = model.parameters();
    w.u32(static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params)
        write_record<T>(w, p.name, p.tensor.shape(), p.tensor.data());

    if (adam) {
        if (adam->m.size() != params.size() || adam->v.size() != params.size())
            throw GraphError("optimizer state does not match the model parameters");
        w.bytes("ADAM", 4);
        const auto& o = adam->options;
        w.config({{"step", std::to_string(adam->step)},
                  {"lr0", exact(o.lr0)},
                  {"lr_min", exact(o.lr_min)},
                  {"beta1", exact(o.beta1)},
                  {"beta2", exact(o.beta2)},
                  {"eps", exact(o.eps)},
                  {"total_steps", std::to_string(o.total_steps)}});
        w.u32(static_cast<std::uint32_t>(2 * params.size()));
        for (std::size_t i = 0; i < params.size(); ++i) {
            write_record<T>(w, "m/" + params[i].name, params[i].tensor.shape(), adam->m[i]);
            write_record<T>(w, "v/" + params[i].name, params[i].tensor.shape(), adam->v[i]);
        }
    }

    auto& buf = w.buffer();
    const auto crc = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size())));
    w.u32(crc);

    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw IoError("cannot open checkpoint for writing: " + tmp.string());
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (!out)
            throw IoError("failed writing checkpoint: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec)
        throw IoError("cannot move checkpoint into place: " + path.string() + ": " + ec.message());
}

template <typename T>
LoadedCheckpoint<T> load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in || std::filesystem::is_directory(path))
        throw IoError("cannot open checkpoint: " + path.string());
    std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 12)
        throw IoError("checkpoint is truncated: " + path.string());
    if (std::memcmp(buf.data(), "DSAN", 4) != 0)
        throw IoError("not a checkpoint (bad magic): " + path.string());

    const std::size_t body = buf.size() - 4;
    std::uint32_t stored_crc;
    std::memcpy(&stored_crc, buf.data() + body, 4);
    const auto crc = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(body)));

    Reader r(buf.data() + 4, body - 4);
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw IoError("unsupported checkpoint version " + std::to_string(version));
    if (crc != stored_crc)
        throw IoError("checkpoint checksum mismatch: " + path.string());

    auto kv = r.config();
    const auto dtype = kv["dtype"];
    if (dtype != "f32" && dtype != "f64")
        throw IoError("checkpoint has unknown dtype '" + dtype + "'");
    const bool f32 = dtype == "f32";
    kv.erase("dtype");
    ModelConfig cfg;
    try {
        cfg = ModelConfig::from_map(kv);
    } catch (const ConfigError& e) {
        throw IoError(std::string("checkpoint config is invalid: ") + e.what());
    }

    LoadedCheckpoint<T> out{DsanModel<T>(cfg), std::nullopt};
    auto params = out.model.parameters();
    const std::uint32_t count = r.u32();
    if (count != params.size())
        throw IoError("checkpoint holds " + std::to_string(count) + " parameters, model expects " +
                      std::to_string(params.size()));
    for (auto& p : params) {
        const Record rec = read_record(r, f32);
        if (rec.name != p.name || rec.shape != p.tensor.shape())
            throw IoError("checkpoint record '" + rec.name + "' " + shape_str(rec.shape) +
                          " does not match parameter '" + p.name + "' " +
                          shape_str(p.tensor.shape()));
        assign<T>(p.tensor.mutable_data(), rec);
    }

    if (r.peek_tag("ADAM")) {
        char tag[4];
        r.bytes(tag, 4);
        const auto akv = r.config();
        AdamOptions o;
        o.lr0 = parse_double(akv, "lr0");
        o.lr_min = parse_double(akv, "lr_min");
        o.beta1 = parse_double(akv, "beta1");
        o.beta2 = parse_double(akv, "beta2");
        o.eps = parse_double(akv, "eps");
        o.total_steps = static_cast<std::size_t>(parse_double(akv, "total_steps"));
        auto state = AdamState<T>::fresh(params, o);
        state.step = static_cast<std::size_t>(parse_double(akv, "step"));
        if (r.u32() != 2 * params.size())
            throw IoError("checkpoint optimizer block has the wrong record count");
        for (std::size_t i = 0; i < params.size(); ++i) {
            for (auto* moments : {&state.m, &state.v}) {
                const Record rec = read_record(r, f32);
                const std::string want = (moments == &state.m ? "m/" : "v/") + params[i].name;
                if (rec.name != want || rec.shape != params[i].tensor.shape())
                    throw IoError("checkpoint optimizer record '" + rec.name + "' is unexpected");
                assign<T>(std::span<T>((*moments)[i]), rec);
            }
        }
        out.adam = std::move(state);
    }
    if (!r.at_end())
        throw IoError("checkpoint has trailing bytes: " + path.string());
    return out;
}

template void save_checkpoint(const std::filesystem::path&, const DsanModel<float>&,
                              const AdamState<float>*);
template void save_checkpoint(const std::filesystem::path&, const DsanModel<double>&,
                              const AdamState<double>*);
template LoadedCheckpoint<float> load_checkpoint(const std::filesystem::path&);
template LoadedCheckpoint<double> load_checkpoint(const std::filesystem::path&);

} // namespace dsan
