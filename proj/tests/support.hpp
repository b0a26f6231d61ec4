#pragma once

#include <algorithm>
#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "toolrobust/catalog.hpp"

namespace testsupport {

using namespace toolrobust;

inline std::string data_path(const std::string& rel) { return std::string(TOOLROBUST_DATA_DIR) + "/" + rel; }
inline std::string test_data_path(const std::string& rel) { return std::string(TOOLROBUST_TEST_DATA_DIR) + "/" + rel; }

// Fresh, empty scratch directory under the system temp dir.
inline std::string scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("toolrobust_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir.string();
}

inline std::size_t levenshtein(const std::string& a, const std::string& b) {
    std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
    for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
    for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i)
        for (std::size_t j = 1; j <= b.size(); ++j)
            d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    return d[a.size()][b.size()];
}

inline bool is_palindrome(const std::string& s) { return std::equal(s.begin(), s.end(), s.rbegin()); }

class CaseGen {
public:
    explicit CaseGen(std::uint64_t seed) : rng_(seed) {}

    std::size_t uniform(std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_); }
    bool flip() { return uniform(0, 1) == 1; }

    std::string word(std::size_t lo, std::size_t hi, const std::string& alphabet = "abcdefghijklmnopqrstuvwxyz_") {
        std::string out;
        const std::size_t n = uniform(lo, hi);
        for (std::size_t i = 0; i < n; ++i) out.push_back(alphabet[uniform(0, alphabet.size() - 1)]);
        return out;
    }

    std::string unique_word(std::set<std::string>& taken, std::size_t lo, std::size_t hi) {
        for (;;) {
            std::string w = word(lo, hi, "abcdefghijklmnopqrstuvwxyz");
            if (w == "finish" || w == "ask_to_user") continue;
            if (taken.insert(w).second) return w;
        }
    }

    // A case that passes validate_case. Names are drawn short so collisions,
    // palindromes and one-letter names all occur.
    TestCase make_case(const std::string& id, std::size_t min_tools = 1, std::size_t max_tools = 5) {
        TestCase c;
        c.id = id;
        c.scenario = flip() ? "alpha" : "beta";
        c.query = "query " + word(3, 12);
        std::set<std::string> tool_names;
        const std::size_t tools = uniform(min_tools, max_tools);
        for (std::size_t t = 0; t < tools; ++t) {
            Tool tool;
            tool.name = unique_word(tool_names, 1, 12);
            tool.description = "Does " + word(3, 20) + ".";
            std::set<std::string> param_names;
            const std::size_t params = uniform(0, 4);
            for (std::size_t p = 0; p < params; ++p) {
                Parameter param;
                param.name = unique_word(param_names, 1, 9);
                param.description = "Value of " + word(2, 10);
                param.required = flip();
                if (uniform(0, 4) == 0) {
                    param.value_type = ValueType::Enum;
                    param.enum_values = std::vector<std::string>{"x", "y"};
                } else if (uniform(0, 3) == 0) {
                    param.value_type = ValueType::Integer;
                }
                tool.parameters.push_back(std::move(param));
            }
            c.tools.push_back(std::move(tool));
        }
        const Tool& gold_tool = c.tools[uniform(0, c.tools.size() - 1)];
        c.gold.tool_name = gold_tool.name;
        for (const auto& p : gold_tool.parameters) {
            if (p.required || flip()) {
                c.gold.parameters.insert(p.name);
                c.gold.contents[p.name] = word(1, 8, "abc123 ");
            }
        }
        return c;
    }

private:
    std::mt19937_64 rng_;
};

}  // namespace testsupport
