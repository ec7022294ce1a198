#pragma once

#include <algorithm>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "wadkit/datasets.hpp"

namespace fixtures {

using namespace wadkit;

inline AudioBuffer gaussian(std::size_t n, double sd, std::uint64_t seed, int rate = 16000) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, sd);
    AudioBuffer b{std::vector<float>(n), rate};
    for (auto& s : b.samples) s = static_cast<float>(std::clamp(nd(rng), -1.0, 1.0));
    return b;
}

inline std::vector<Speaker> chains_table() {
    std::vector<Speaker> t;
    for (int i = 0; i < 20; ++i) t.push_back({"m" + std::to_string(i), 'M'});
    for (int i = 0; i < 16; ++i) t.push_back({"f" + std::to_string(i), 'F'});
    return t;
}

// Tiny CHAINS/QUT-shaped input tree: 36 speakers x 2 utterances at 48 kHz,
// 5 noise types at 16 kHz (one recording deliberately short).
inline void make_inputs(const fs::path& root) {
    fs::create_directories(root / "clean");
    fs::create_directories(root / "noise");
    std::string idx = "path,speaker,sex\n";
    std::uint64_t seed = 100;
    for (const auto& s : chains_table())
        for (int u = 0; u < 2; ++u) {
            const std::string name = s.id + "_u" + std::to_string(u) + ".wav";
            write_wav(gaussian(12000 + 480 * u, 0.1, seed++, 48000), root / "clean" / name);
            idx += name + "," + s.id + "," + s.sex + "\n";
        }
    detail::spit(root / "clean" / "index.csv", idx);
    std::string nidx = "path,noise_type\n";
    for (const std::string type : {"cafe", "car", "home", "reverb", "street"}) {
        const std::size_t len = type == "car" ? 4000 : 40000;
        write_wav(gaussian(len, 0.2, seed++), root / "noise" / (type + ".wav"));
        nidx += type + ".wav," + type + "\n";
    }
    detail::spit(root / "noise" / "index.csv", nidx);
}

}  // namespace fixtures
