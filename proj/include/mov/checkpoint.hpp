#pragma once

// MOV1 checkpoint format. Everything is little-endian; integers are u32
// unless noted, reals are IEEE-754 binary64.
//
//   "MOV1"                      4-byte magic / version tag
//   kind                        0 = mov, 1 = single view, 2 = avg, 3 = concat
//   view_index                  single-view model's view (else 0)
//   avg_independent             0/1
//   m, k                        view and class counts
//   lambda (f64), seed (u64)
//   schema                      m view names, m view dims, k class names
//                               (strings: u32 byte length + UTF-8 bytes)
//   has_standardization         0/1, then per view per feature mean (f64)
//                               followed by per view per feature std (f64)
//   network_count
//   per network                 u32 n_sizes, n_sizes x u32 layer sizes, then
//                               per layer the row-major weights and biases (f64)
//
// Network order: mov = gate, expert 0..m-1; avg = experts; single/concat = one.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mov/baselines.hpp"
#include "mov/data.hpp"
#include "mov/dataset.hpp"
#include "mov/error.hpp"
#include "mov/model.hpp"
#include "mov/nn.hpp"

namespace mov {

inline constexpr char kCheckpointMagic[4] = {'M', 'O', 'V', '1'};

struct Checkpoint {
    Classifier model;
    ViewSchema schema;
    double lambda = 1.0;
    std::uint64_t seed = 0;
    std::optional<data::StandardizationStats> standardization;
};

namespace detail {

class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}

    void u32(std::uint32_t v)
    {
        unsigned char b[4];
        for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
        out_.write(reinterpret_cast<const char*>(b), 4);
    }
    void u64(std::uint64_t v)
    {
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
        out_.write(reinterpret_cast<const char*>(b), 8);
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void size(std::size_t v)
    {
        if (v > 0xFFFFFFFFu) throw FormatError("value too large for checkpoint field");
        u32(static_cast<std::uint32_t>(v));
    }
    void str(const std::string& s)
    {
        size(s.size());
        out_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }
    void network(const nn::MLPParams& net)
    {
        size(net.layer_sizes.size());
        for (auto s : net.layer_sizes) size(s);
        for (const auto& layer : net.layers) {
            for (double w : layer.weights) f64(w);
            for (double b : layer.biases) f64(b);
        }
    }

private:
    std::ostream& out_;
};

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    std::uint32_t u32()
    {
        unsigned char b[4];
        read(b, 4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
        return v;
    }
    std::uint64_t u64()
    {
        unsigned char b[8];
        read(b, 8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::size_t bounded(std::size_t limit, const char* what)
    {
        const auto v = u32();
        if (v > limit) throw FormatError(std::string("checkpoint field '") + what + "' is implausibly large");
        return v;
    }
    std::string str()
    {
        const auto n = bounded(1u << 20, "string length");
        std::string s(n, '\0');
        read(reinterpret_cast<unsigned char*>(s.data()), n);
        return s;
    }
    nn::MLPParams network()
    {
        const auto n_sizes = bounded(64, "layer count");
        std::vector<std::size_t> sizes(n_sizes);
        for (auto& s : sizes) s = bounded(1u << 20, "layer size");
        nn::MLPParams net;
        try {
            net = nn::zero_mlp(sizes);
        } catch (const ConfigError& e) {
            throw FormatError(std::string("checkpoint holds an invalid network: ") + e.what());
        }
        for (auto& layer : net.layers) {
            for (auto& w : layer.weights) w = f64();
            for (auto& b : layer.biases) b = f64();
        }
        return net;
    }

private:
    void read(unsigned char* dst, std::size_t n)
    {
        in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) throw FormatError("checkpoint is truncated");
    }

    std::istream& in_;
};

} // namespace detail

inline void write_checkpoint(std::ostream& out, const Checkpoint& ckpt)
{
    ckpt.schema.validate();
    detail::Writer w(out);
    out.write(kCheckpointMagic, 4);
    const auto spec = spec_of(ckpt.model);
    w.u32(static_cast<std::uint32_t>(spec.kind));
    w.size(spec.view);
    const auto* avg = std::get_if<AvgFusionModel>(&ckpt.model);
    w.u32(avg && avg->independent() ? 1 : 0);
    w.size(ckpt.schema.views());
    w.size(ckpt.schema.classes());
    w.f64(ckpt.lambda);
    w.u64(ckpt.seed);
    for (const auto& n : ckpt.schema.view_names) w.str(n);
    for (auto d : ckpt.schema.view_dims) w.size(d);
    for (const auto& c : ckpt.schema.class_names) w.str(c);

    w.u32(ckpt.standardization ? 1 : 0);
    if (ckpt.standardization) {
        const auto& st = *ckpt.standardization;
        if (st.mean.size() != ckpt.schema.views()) throw ShapeError("standardization does not match the schema");
        for (std::size_t v = 0; v < st.mean.size(); ++v) {
            if (st.mean[v].size() != ckpt.schema.view_dims[v]) throw ShapeError("standardization does not match the schema");
            for (double x : st.mean[v]) w.f64(x);
        }
        for (const auto& sd : st.stddev)
            for (double x : sd) w.f64(x);
    }

    std::visit(
        [&](const auto& m) {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, MoVModel>) {
                const auto& p = m.parameters();
                w.size(1 + p.experts.size());
                w.network(p.gate);
                for (const auto& e : p.experts) w.network(e);
            } else if constexpr (std::is_same_v<M, AvgFusionModel>) {
                const auto& experts = m.parameters().experts;
                w.size(experts.size());
                for (const auto& e : experts) w.network(e);
            } else {
                w.size(1);
                w.network(m.parameters());
            }
        },
        ckpt.model);
    if (!out) throw FormatError("failed to write checkpoint");
}

[[nodiscard]] inline Checkpoint read_checkpoint(std::istream& in)
{
    char magic[4] = {};
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, kCheckpointMagic, 4) != 0)
        throw FormatError("not a MOV1 checkpoint (bad header)");
    detail::Reader r(in);
    Checkpoint ckpt;
    const auto kind = r.u32();
    if (kind > 3) throw FormatError("unknown model kind " + std::to_string(kind));
    ModelSpec spec{static_cast<ModelKind>(kind), r.u32()};
    const bool independent = r.u32() != 0;
    const auto m = r.bounded(1024, "view count");
    const auto k = r.bounded(1 << 16, "class count");
    ckpt.lambda = r.f64();
    ckpt.seed = r.u64();
    for (std::size_t v = 0; v < m; ++v) ckpt.schema.view_names.push_back(r.str());
    for (std::size_t v = 0; v < m; ++v) ckpt.schema.view_dims.push_back(r.bounded(1u << 20, "view dim"));
    for (std::size_t c = 0; c < k; ++c) ckpt.schema.class_names.push_back(r.str());
    try {
        ckpt.schema.validate();
    } catch (const ConfigError& e) {
        throw FormatError(std::string("checkpoint schema is invalid: ") + e.what());
    }

    if (r.u32() != 0) {
        data::StandardizationStats st;
        for (auto d : ckpt.schema.view_dims) {
            std::vector<double> mean(d);
            for (auto& x : mean) x = r.f64();
            st.mean.push_back(std::move(mean));
        }
        for (auto d : ckpt.schema.view_dims) {
            std::vector<double> sd(d);
            for (auto& x : sd) x = r.f64();
            st.stddev.push_back(std::move(sd));
        }
        ckpt.standardization = std::move(st);
    }

    const auto n_networks = r.bounded(1025, "network count");
    std::vector<nn::MLPParams> nets;
    for (std::size_t i = 0; i < n_networks; ++i) nets.push_back(r.network());

    auto expect_networks = [&](std::size_t n) {
        if (nets.size() != n)
            throw FormatError("checkpoint holds " + std::to_string(nets.size()) + " networks, expected " +
                              std::to_string(n));
    };
    try {
        switch (spec.kind) {
        case ModelKind::mov: {
            expect_networks(1 + m);
            MoVParams p;
            p.gate = std::move(nets[0]);
            p.experts.assign(std::make_move_iterator(nets.begin() + 1), std::make_move_iterator(nets.end()));
            if (p.view_dims() != ckpt.schema.view_dims) throw FormatError("expert inputs do not match the schema");
            ckpt.model = MoVModel(std::move(p));
            break;
        }
        case ModelKind::avg_fusion: {
            expect_networks(m);
            for (std::size_t i = 0; i < m; ++i)
                if (nets[i].input_size() != ckpt.schema.view_dims[i] || nets[i].output_size() != k)
                    throw FormatError("Avg expert does not match the schema");
            ckpt.model = AvgFusionModel(std::move(nets), independent);
            break;
        }
        case ModelKind::single_view:
            expect_networks(1);
            if (spec.view >= m || nets[0].input_size() != ckpt.schema.view_dims[spec.view] || nets[0].output_size() != k)
                throw FormatError("single-view network does not match the schema");
            ckpt.model = SingleViewModel(spec.view, std::move(nets[0]));
            break;
        case ModelKind::concat_fusion:
            expect_networks(1);
            if (nets[0].input_size() != ckpt.schema.total_dim() || nets[0].output_size() != k)
                throw FormatError("Concat network does not match the schema");
            ckpt.model = ConcatFusionModel(std::move(nets[0]));
            break;
        }
    } catch (const ShapeError& e) {
        throw FormatError(std::string("checkpoint networks are inconsistent: ") + e.what());
    }
    return ckpt;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write '" + path + "'");
    write_checkpoint(out, ckpt);
}

[[nodiscard]] inline Checkpoint load_checkpoint(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path + "'");
    return read_checkpoint(in);
}

/// Rejects a dataset whose view layout or class names differ from the checkpoint's.
inline void require_compatible(const Checkpoint& ckpt, const ViewSchema& schema)
{
    if (ckpt.schema != schema)
        throw FormatError("dataset schema does not match the MOV1 checkpoint (views, dimensions or class names differ)");
}

} // namespace mov
