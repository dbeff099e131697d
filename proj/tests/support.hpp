#pragma once

#include "lcsdive/data.hpp"

#include <unistd.h>

#include <filesystem>
#include <limits>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace testing {

/// Fresh directory under the system temp path, removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag)
    {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("lcsdive_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& p)
{
    std::ifstream in(p);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) rows.push_back(lcsdive::split_csv_line(line));
    return rows;
}

/// Column `name` of a CSV with a header row.
inline std::vector<std::string> csv_column(const std::filesystem::path& p, const std::string& name)
{
    const auto rows = read_csv(p);
    std::size_t col = 0;
    while (col < rows.front().size() && rows.front()[col] != name) ++col;
    std::vector<std::string> out;
    for (std::size_t r = 1; r < rows.size(); ++r) out.push_back(rows[r].at(col));
    return out;
}

/// Random table: `discrete` ternary columns then continuous ones, `classes` labels, optional missing cells.
inline lcsdive::Dataset random_dataset(lcsdive::Index m, int discrete, int continuous, int classes, double missing,
                                       std::uint64_t seed)
{
    lcsdive::Rng rng(seed);
    const int p = discrete + continuous;
    lcsdive::RowMatrixXd values(m, p);
    for (lcsdive::Index i = 0; i < m; ++i)
        for (int f = 0; f < p; ++f) {
            if (lcsdive::uniform01(rng) < missing) {
                values(i, f) = std::numeric_limits<double>::quiet_NaN();
                continue;
            }
            values(i, f) = f < discrete ? static_cast<double>(lcsdive::uniform_int(rng, 0, 2))
                                        : lcsdive::uniform(rng, -3.0, 5.0);
        }
    std::vector<std::string> names;
    for (int f = 0; f < p; ++f) names.push_back("F" + std::to_string(f));
    lcsdive::Dataset ds;
    ds.features = lcsdive::describe_features(values, names, 10);
    ds.values = values;
    for (int c = 0; c < classes; ++c) ds.class_names.push_back("c" + std::to_string(c));
    for (lcsdive::Index i = 0; i < m; ++i) {
        ds.classes.push_back(static_cast<int>(i % classes));
        ds.ids.push_back("i" + std::to_string(i));
    }
    lcsdive::shuffle(ds.classes, rng);
    return ds;
}

} // namespace testing
