#pragma once

// Checkpoint layout:
//
//   ncc-checkpoint 1
//   module <name>
//   seed <u64>
//   step <u64>
//   tensors <count>
//   <name> <rank> <dim>...      (one line per tensor)
//   data
//   <raw little-endian doubles, tensors in header order>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ncc/nn.hpp"

namespace ncc::harness {

inline constexpr int kCheckpointVersion = 1;

struct CheckpointHeader {
    std::string module;
    std::uint64_t seed = 0;
    std::uint64_t step = 0;
};

inline void save_checkpoint(const std::string& path, const CheckpointHeader& header,
                            const std::vector<NamedTensor>& tensors) {
    static_assert(std::endian::native == std::endian::little, "checkpoint writer assumes little-endian doubles");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write checkpoint " + path);
    out << "ncc-checkpoint " << kCheckpointVersion << "\n"
        << "module " << header.module << "\n"
        << "seed " << header.seed << "\n"
        << "step " << header.step << "\n"
        << "tensors " << tensors.size() << "\n";
    for (const auto& t : tensors) {
        out << t.name << " " << t.tensor.rank();
        for (auto d : t.tensor.shape()) out << " " << d;
        out << "\n";
    }
    out << "data\n";
    for (const auto& t : tensors)
        out.write(reinterpret_cast<const char*>(t.tensor.data().data()),
                  static_cast<std::streamsize>(t.tensor.size() * sizeof(double)));
    if (!out) throw Error(ErrorKind::io, "failed writing checkpoint " + path);
}

struct CheckpointFile {
    CheckpointHeader header;
    std::vector<std::string> names;
    std::vector<ad::Shape> shapes;
    std::vector<std::vector<double>> values;
};

inline CheckpointFile read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open checkpoint " + path);
    auto fail = [&](const std::string& msg) -> void { throw Error(ErrorKind::io, path + ": " + msg); };
    auto expect_key = [&](const std::string& key) {
        std::string k;
        if (!(in >> k) || k != key) fail("expected '" + key + "' in header");
    };
    CheckpointFile f;
    int version = 0;
    expect_key("ncc-checkpoint");
    if (!(in >> version)) fail("unreadable version");
    if (version != kCheckpointVersion) fail("unsupported checkpoint version " + std::to_string(version));
    expect_key("module");
    in >> f.header.module;
    expect_key("seed");
    in >> f.header.seed;
    expect_key("step");
    in >> f.header.step;
    std::size_t count = 0;
    expect_key("tensors");
    if (!(in >> count)) fail("unreadable tensor count");
    for (std::size_t t = 0; t < count; ++t) {
        std::string name;
        std::size_t rank = 0;
        if (!(in >> name >> rank)) fail("truncated tensor table");
        ad::Shape shape(rank);
        for (auto& d : shape)
            if (!(in >> d)) fail("truncated shape for " + name);
        f.names.push_back(name);
        f.shapes.push_back(shape);
    }
    expect_key("data");
    in.get();  // newline before the payload
    for (const auto& shape : f.shapes) {
        std::vector<double> v(ad::numel(shape));
        in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
        if (!in) fail("payload shorter than the tensor table");
        f.values.push_back(std::move(v));
    }
    if (in.peek() != std::char_traits<char>::eof()) fail("trailing bytes after payload");
    return f;
}

/// Copies checkpoint values into `tensors`, which must match by name, order and shape.
inline CheckpointHeader load_checkpoint(const std::string& path, const std::string& module,
                                        std::vector<NamedTensor>& tensors) {
    auto f = read_checkpoint(path);
    if (f.header.module != module)
        throw Error(ErrorKind::shape_mismatch, path + ": checkpoint holds module " + f.header.module +
                                                   ", configuration builds " + module);
    for (std::size_t t = 0; t < std::max(f.names.size(), tensors.size()); ++t) {
        if (t >= f.names.size())
            throw Error(ErrorKind::shape_mismatch, path + ": tensor " + tensors[t].name + " missing from checkpoint");
        if (t >= tensors.size())
            throw Error(ErrorKind::shape_mismatch, path + ": unexpected tensor " + f.names[t] + " in checkpoint");
        if (f.names[t] != tensors[t].name)
            throw Error(ErrorKind::shape_mismatch, path + ": tensor " + std::to_string(t) + " is " + f.names[t] +
                                                       ", model expects " + tensors[t].name);
        if (f.shapes[t] != tensors[t].tensor.shape())
            throw Error(ErrorKind::shape_mismatch, path + ": tensor " + f.names[t] + " has shape " +
                                                       shape_string(f.shapes[t]) + ", model expects " +
                                                       shape_string(tensors[t].tensor.shape()));
    }
    for (std::size_t t = 0; t < tensors.size(); ++t)
        std::copy(f.values[t].begin(), f.values[t].end(), tensors[t].tensor.data_mut().begin());
    return f.header;
}

} // namespace ncc::harness
