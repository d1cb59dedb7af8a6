#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "swed/matrix.hpp"
#include "swed/rng.hpp"

namespace swed_test {

// Path of the swed CLI binary, filled in by main (flag, env, or build-tree
// guess). Empty if unresolved.
extern std::filesystem::path g_cli_path;

inline double max_abs_diff(const swed::Matrix& a, const swed::Matrix& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::fabs(a.data()[i] - b.data()[i]));
    return worst;
}

inline double rel_frob_error(const swed::Matrix& got, const swed::Matrix& want) {
    const double denom = swed::frobenius_norm(want);
    const double err = swed::frobenius_norm(swed::subtract(got, want));
    return denom > 0.0 ? err / denom : err;
}

// Scratch directory unique to the current test run.
inline std::filesystem::path make_temp_dir(const std::string& tag) {
    namespace fs = std::filesystem;
    static std::uint64_t counter = 0;
    const fs::path dir = fs::temp_directory_path() /
                         ("swed_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                          std::to_string(counter++));
    fs::create_directories(dir);
    return dir;
}

} // namespace swed_test
