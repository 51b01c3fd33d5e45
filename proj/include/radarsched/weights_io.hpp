#pragma once

// Portable weight container:
//
//   8 bytes   magic "RSCHPN" followed by a two-digit format version
//   8 bytes   header length L, little-endian
//   L bytes   JSON header {"version","dtype","n_p","k","norm_const","tensors":[{"name","shape"}]}
//   ...       float32 little-endian row-major data, tensors in header order

#include <array>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "policy.hpp"

namespace radarsched::policy {

inline constexpr int kContainerVersion = 1;
inline constexpr std::array<char, 6> kMagicPrefix{'R', 'S', 'C', 'H', 'P', 'N'};

class WeightsFormatError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline std::uint32_t to_le(std::uint32_t v)
{
    if constexpr (std::endian::native == std::endian::big)
        v = ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
    return v;
}

inline void put_u64(std::string& out, std::uint64_t v)
{
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_u64(const std::string& in, std::size_t pos)
{
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + static_cast<std::size_t>(i)])) << (8 * i);
    return v;
}

}  // namespace detail

inline std::string serialize_weights(const PolicyWeights& w)
{
    check_shapes(w);
    auto layout = expected_layout(w.n_p, w.K);
    nlohmann::json header;
    header["version"] = kContainerVersion;
    header["dtype"] = "float32";
    header["n_p"] = w.n_p;
    header["k"] = w.K;
    header["norm_const"] = w.norm_const;
    header["tensors"] = nlohmann::json::array();
    for (const auto& [name, shape] : layout) header["tensors"].push_back({{"name", name}, {"shape", shape}});
    const std::string text = header.dump();

    std::string out(kMagicPrefix.begin(), kMagicPrefix.end());
    out += static_cast<char>('0' + kContainerVersion / 10 % 10);
    out += static_cast<char>('0' + kContainerVersion % 10);
    detail::put_u64(out, text.size());
    out += text;
    for (const auto& entry : layout) {
        for (float f : w.get(entry.first).data) {
            std::uint32_t bits = detail::to_le(std::bit_cast<std::uint32_t>(f));
            char buf[4];
            std::memcpy(buf, &bits, 4);
            out.append(buf, 4);
        }
    }
    return out;
}

inline PolicyWeights deserialize_weights(const std::string& bytes, const std::string& source = "weights")
{
    if (bytes.size() < 16 || !std::equal(kMagicPrefix.begin(), kMagicPrefix.end(), bytes.begin()))
        throw WeightsFormatError(source + ": bad magic bytes, not a policy weight container");
    const std::string version_tag = bytes.substr(6, 2);
    if (version_tag != std::string{char('0' + kContainerVersion / 10 % 10), char('0' + kContainerVersion % 10)})
        throw WeightsFormatError(source + ": container version " + version_tag + " is not supported");
    const std::uint64_t len = detail::get_u64(bytes, 8);
    if (len > bytes.size() - 16) throw WeightsFormatError(source + ": truncated header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.substr(16, len));
    } catch (const nlohmann::json::exception& e) {
        throw WeightsFormatError(source + ": unreadable header: " + e.what());
    }
    PolicyWeights w;
    std::vector<std::pair<std::string, std::vector<std::size_t>>> listed;
    try {
        if (header.at("version").get<int>() != kContainerVersion)
            throw WeightsFormatError(source + ": header version mismatch");
        if (header.at("dtype").get<std::string>() != "float32")
            throw WeightsFormatError(source + ": only float32 tensors are supported");
        w.n_p = header.at("n_p").get<int>();
        w.K = header.at("k").get<int>();
        w.norm_const = header.at("norm_const").get<double>();
        for (const auto& t : header.at("tensors"))
            listed.emplace_back(t.at("name").get<std::string>(), t.at("shape").get<std::vector<std::size_t>>());
    } catch (const nlohmann::json::exception& e) {
        throw WeightsFormatError(source + ": malformed header: " + e.what());
    }

    std::size_t pos = 16 + len;
    for (auto& [name, shape] : listed) {
        Tensor t{shape, {}};
        const std::size_t n = t.numel();
        if (bytes.size() - pos < 4 * n) throw WeightsFormatError(source + ": truncated data for tensor '" + name + "'");
        t.data.resize(n);
        for (std::size_t i = 0; i < n; ++i, pos += 4) {
            std::uint32_t bits;
            std::memcpy(&bits, bytes.data() + pos, 4);
            t.data[i] = std::bit_cast<float>(detail::to_le(bits));
        }
        if (!w.tensors.emplace(name, std::move(t)).second)
            throw WeightsFormatError(source + ": duplicate tensor '" + name + "'");
    }
    if (pos != bytes.size()) throw WeightsFormatError(source + ": trailing bytes after tensor data");
    check_shapes(w);
    return w;
}

inline void save_weights(const PolicyWeights& w, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(path.string() + ": cannot open for writing");
    const std::string bytes = serialize_weights(w);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline PolicyWeights load_weights(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw WeightsFormatError(path.string() + ": cannot open");
    std::stringstream buf;
    buf << in.rdbuf();
    return deserialize_weights(buf.str(), path.string());
}

}  // namespace radarsched::policy
