// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gar/backend.hpp"
#include "gar/controller.hpp"
#include "gar/game24.hpp"

namespace gar::test {

inline std::filesystem::path source_dir() { return GAR_SOURCE_DIR; }

class TempDir {
public:
    TempDir() {
        std::string tmpl = (std::filesystem::temp_directory_path() / "gar-test-XXXXXX").string();
        if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
        path_ = tmpl;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream(path, std::ios::binary) << text;
}

inline std::vector<double> flat_probs(std::size_t n, double p) { return std::vector<double>(n, p); }

inline ScriptRule ends_with_rule(std::string suffix, std::string reply, std::vector<double> probs = {},
                                 std::vector<std::string> contains = {}) {
    ScriptRule r;
    r.ends_with = std::move(suffix);
    r.reply = std::move(reply);
    r.probs = std::move(probs);
    r.contains = std::move(contains);
    return r;
}

inline ScriptRule contains_rule(std::vector<std::string> contains, std::string reply, std::vector<double> probs = {}) {
    ScriptRule r;
    r.contains = std::move(contains);
    r.reply = std::move(reply);
    r.probs = std::move(probs);
    return r;
}

/// Assistant review text in the conclusion format the built-in prompts ask for.
inline std::string review(const std::string& location, const std::string& explanation) {
    return "Let's check the trajectory.\n\n### Conclusion\n** Error Location **: " + location +
           "\n** Explanation **: " + explanation;
}

inline TaskInstance game24_task(const std::string& id, std::array<int, 4> numbers) {
    return TaskInstance{id, game24::task_description(), "game24", json{{"numbers", numbers}}};
}

/// Highest "Action N:" index inside the trajectory section of an assistant prompt
/// (everything after the last "# Here is the task:").
inline std::size_t reviewed_length(const std::string& prompt) {
    auto pos = prompt.rfind("# Here is the task:");
    if (pos == std::string::npos) return 0;
    std::istringstream in(prompt.substr(pos));
    std::string line;
    std::size_t best = 0;
    while (std::getline(in, line)) {
        if (line.rfind("Action ", 0) != 0) continue;
        auto colon = line.find(':');
        if (colon == std::string::npos) continue;
        best = std::max<std::size_t>(best, std::stoul(line.substr(7, colon - 7)));
    }
    return best;
}

}  // namespace gar::test
