#pragma once

#include <zlib.h>

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"

#include "wadkit/features.hpp"
#include "wadkit/models/spec.hpp"

namespace wadkit {

// Model file: "WADM" | u32 version | u32 CRC32(payload) | payload, where
// payload = u64 header length | UTF-8 JSON header | little-endian f32 weights
// in the order listed under "layout".
inline constexpr std::uint32_t kModelFileVersion = 1;

inline std::uint32_t crc32_of(std::string_view bytes) {
    uLong c = ::crc32(0L, Z_NULL, 0);
    std::size_t off = 0;
    while (off < bytes.size()) {
        const auto n = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
        c = ::crc32(c, reinterpret_cast<const Bytef*>(bytes.data() + off), n);
        off += n;
    }
    return static_cast<std::uint32_t>(c);
}

inline std::string encode_model(const Model& m) {
    m.validate();
    nlohmann::json layout = nlohmann::json::array();
    for (const auto& b : weight_layout(m.spec)) layout.push_back({{"name", b.name}, {"rows", b.rows}, {"cols", b.cols}});
    const nlohmann::json header{{"spec", m.spec},
                                {"weight_count", m.weights.size()},
                                {"threshold", m.threshold},
                                {"norm_mean", m.norm_mean},
                                {"norm_std", m.norm_std},
                                {"layout", layout}};
    const std::string text = header.dump();
    std::string payload;
    detail::put_le<std::uint64_t>(payload, text.size());
    payload += text;
    for (float w : m.weights) detail::put_le<float>(payload, w);

    std::string out = "WADM";
    detail::put_le<std::uint32_t>(out, kModelFileVersion);
    detail::put_le<std::uint32_t>(out, crc32_of(payload));
    out += payload;
    return out;
}

inline Model decode_model(const std::string& bytes, const std::string& name = "model") {
    if (bytes.size() < 4 || bytes.compare(0, 4, "WADM") != 0)
        throw FormatError(name + ": not a model file (bad magic)");
    std::size_t pos = 4;
    if (bytes.size() < 12) throw FormatError(name + ": truncated model file");
    const auto version = detail::get_le<std::uint32_t>(bytes, pos);
    if (version != kModelFileVersion)
        throw FormatError(name + ": unsupported model file version " + std::to_string(version));
    const auto crc = detail::get_le<std::uint32_t>(bytes, pos);
    const std::string_view payload(bytes.data() + pos, bytes.size() - pos);

    std::size_t p = pos;
    if (bytes.size() - p < 8) throw FormatError(name + ": truncated model file");
    const auto hlen = detail::get_le<std::uint64_t>(bytes, p);
    if (hlen > bytes.size() - p) throw FormatError(name + ": truncated model file");
    const bool crc_ok = crc32_of(payload) == crc;

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.substr(p, hlen));
    } catch (const nlohmann::json::exception& e) {
        if (!crc_ok) throw FormatError(name + ": checksum mismatch");
        throw FormatError(name + ": malformed header: " + e.what());
    }
    p += hlen;

    Model m;
    try {
        m.spec = header.at("spec").get<ModelSpec>();
        m.threshold = header.at("threshold").get<double>();
        m.norm_mean = header.at("norm_mean").get<std::vector<double>>();
        m.norm_std = header.at("norm_std").get<std::vector<double>>();
        const auto declared = header.at("weight_count").get<std::size_t>();
        if (declared != weight_count(m.spec))
            throw FormatError(name + ": declared weight count " + std::to_string(declared) + " does not match spec (" +
                              std::to_string(weight_count(m.spec)) + ")");
        const auto layout = weight_layout(m.spec);
        const auto& listed = header.at("layout");
        if (listed.size() != layout.size()) throw FormatError(name + ": weight layout does not match spec");
        for (std::size_t i = 0; i < layout.size(); ++i)
            if (listed[i].at("name").get<std::string>() != layout[i].name ||
                listed[i].at("rows").get<std::size_t>() != layout[i].rows ||
                listed[i].at("cols").get<std::size_t>() != layout[i].cols)
                throw FormatError(name + ": weight layout does not match spec at block " + layout[i].name);
    } catch (const nlohmann::json::exception& e) {
        if (!crc_ok) throw FormatError(name + ": checksum mismatch");
        throw FormatError(name + ": malformed header: " + e.what());
    } catch (const UsageError& e) {
        if (!crc_ok) throw FormatError(name + ": checksum mismatch");
        throw FormatError(name + ": " + e.what());
    }
    const std::size_t n = weight_count(m.spec);
    if (bytes.size() - p < n * sizeof(float)) throw FormatError(name + ": truncated weight payload");
    if (!crc_ok) throw FormatError(name + ": checksum mismatch");
    if (bytes.size() - p != n * sizeof(float))
        throw FormatError(name + ": weight blob holds " + std::to_string((bytes.size() - p) / sizeof(float)) +
                          " values, expected " + std::to_string(n));
    m.weights.resize(n);
    for (auto& w : m.weights) w = detail::get_le<float>(bytes, p);
    m.validate();
    return m;
}

inline void save_model(const Model& m, const std::filesystem::path& path) { detail::spit(path, encode_model(m)); }

inline Model load_model(const std::filesystem::path& path) { return decode_model(detail::slurp(path), path.string()); }

}  // namespace wadkit
