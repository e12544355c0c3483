#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "vastvocab/io.hpp"
#include "vastvocab/version.hpp"

namespace vastvocab {

// Every command writes a manifest next to its outputs: the command name, the
// fully resolved configuration, the seed, and the produced files. Re-running
// from the manifest reproduces the outputs byte for byte, so there are no
// volatile fields (no timestamps, no hostnames).
struct RunManifest {
    std::string command;
    std::uint64_t seed = 0;
    nlohmann::ordered_json config;
    std::vector<std::string> outputs;

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["tool"] = "vastvocab";
        j["version"] = kVersion;
        j["command"] = command;
        j["seed"] = seed;
        j["config"] = config;
        j["outputs"] = outputs;
        return j;
    }

    std::string dump() const { return to_json().dump(2) + "\n"; }

    static RunManifest parse(const std::string& text) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw std::invalid_argument(std::string("manifest: not valid JSON: ") +
                                        e.what());
        }
        require(j.value("tool", "") == "vastvocab",
                "manifest: missing tool marker");
        RunManifest m;
        m.command = j.at("command").get<std::string>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.config = j.at("config");
        if (j.contains("outputs"))
            m.outputs = j.at("outputs").get<std::vector<std::string>>();
        return m;
    }
};

}  // namespace vastvocab
