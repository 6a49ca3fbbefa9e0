#pragma once

#include "mdmt/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

namespace testing {

class TempDir {
public:
    explicit TempDir(const std::string& tag)
    {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("mdmt_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
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

inline void write_file(const std::filesystem::path& p, const std::string& text)
{
    std::ofstream out(p, std::ios::binary);
    out << text;
}

inline std::string read_file(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Small standardised two-domain pair with a few planted shared features.
inline mdmt::PairedDomainData small_pair(std::size_t d = 12, std::size_t n = 24, std::uint64_t seed = 5)
{
    mdmt::SyntheticSpec spec;
    spec.d = d;
    spec.n_a = n;
    spec.n_b = n;
    spec.planted_shared = {0, 1};
    spec.noise_seed = seed;
    return mdmt::zscore_per_domain(mdmt::generate_synthetic(spec));
}

} // namespace testing
