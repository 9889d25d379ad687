#pragma once

// Run manifests: what was run, with which resolved configuration, and the
// SHA-256 digests of its inputs and outputs. Paths are stored as file names
// so that a manifest does not depend on where the run lives.

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "counterpart/errors.hpp"

namespace counterpart::cli {

inline constexpr const char* kToolName = "counterpart";
inline constexpr const char* kToolVersion = "0.1.0";

inline std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("sha256: init failed");
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), buf.size());
        if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
    std::string hex;
    char two[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(two, sizeof two, "%02x", md[i]);
        hex += two;
    }
    return hex;
}

struct RunManifest {
    std::string command;
    nlohmann::json config;
    std::uint64_t master_seed = 0;
    std::map<std::string, std::string> inputs;   // file name -> digest
    std::map<std::string, std::string> outputs;  // file name -> digest

    void add_input(const std::filesystem::path& p) { inputs[p.filename().string()] = sha256_file(p); }
    void add_output(const std::filesystem::path& p) { outputs[p.filename().string()] = sha256_file(p); }

    nlohmann::json to_json() const {
        return {{"tool", kToolName}, {"version", kToolVersion}, {"command", command}, {"config", config},
                {"master_seed", master_seed}, {"inputs", inputs}, {"outputs", outputs}};
    }
};

inline constexpr const char* kManifestName = "manifest.json";

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("write failed for " + path.string());
}

inline void write_manifest(const std::filesystem::path& dir, const RunManifest& m) {
    write_text(dir / kManifestName, m.to_json().dump(2) + "\n");
}

/// Recomputes output digests; returns one message per problem.
inline std::vector<std::string> verify_manifest(const std::filesystem::path& dir) {
    std::vector<std::string> problems;
    std::ifstream in(dir / kManifestName);
    if (!in) return {"no " + std::string(kManifestName) + " in " + dir.string()};
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        return {std::string("manifest does not parse: ") + e.what()};
    }
    if (!j.contains("outputs") || !j["outputs"].is_object()) return {"manifest has no outputs"};
    for (const auto& [name, digest] : j["outputs"].items()) {
        const auto p = dir / name;
        if (!std::filesystem::exists(p)) {
            problems.push_back(name + ": missing");
            continue;
        }
        if (sha256_file(p) != digest.get<std::string>()) problems.push_back(name + ": digest mismatch");
    }
    return problems;
}

}  // namespace counterpart::cli
