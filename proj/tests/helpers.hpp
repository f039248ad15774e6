#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "sigma/backends.hpp"
#include "sigma/types.hpp"

namespace sigma::test {

inline std::string fixture_path(const std::string& name) {
    return std::string(SIGMA_FIXTURE_DIR) + "/" + name;
}

inline std::vector<AgentInstruction> four_instructions() {
    return {
        {AgentRole::Factual, "You verify facts and definitions."},
        {AgentRole::Logical, "You check the logical structure of the argument."},
        {AgentRole::Computational, "You carry out the calculations."},
        {AgentRole::Completeness, "You look for missed cases and cross-checks."},
    };
}

inline RunConfig base_config() {
    RunConfig cfg;
    cfg.instructions = four_instructions();
    cfg.normalized_trace = true;
    return cfg;
}

inline backends::BackendSet
make_scripted(backends::ScriptedPlaybook playbook, std::vector<Chunk> docs,
              int dim = 256) {
    backends::BackendSet b;
    b.model = std::make_shared<backends::ScriptedModelBackend>(std::move(playbook));
    b.embedder = std::make_shared<backends::CachingEmbedder>(
        std::make_shared<backends::HashEmbeddingBackend>(dim));
    b.search = std::make_shared<backends::LocalCorpusSearchBackend>(std::move(docs));
    return b;
}

inline std::filesystem::path make_temp_dir(const std::string& tag) {
    static std::atomic<unsigned> counter{0};
    const auto dir = std::filesystem::temp_directory_path() /
                     ("sigma_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                      std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in),
                       std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << body;
}

} // namespace sigma::test
