#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace sisurr {

using Rng = std::mt19937_64;

/// Derives an independent stream seed from a parent seed and a tag. Used to fan
/// a single experiment seed out to every randomized stage.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);

/// 64-bit FNV-1a over raw bytes, hex encoded.
std::string fnv1a_hex(std::string_view bytes);
std::uint64_t fnv1a(std::string_view bytes);

/// Shortest text that parses back to the identical double.
std::string format_double(double v);

/// Runs body(i) for i in [0, n) on up to `workers` threads. Each index is run
/// exactly once; callers write results into pre-sized slots so ordering never
/// depends on scheduling.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& body);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view content);

/// Rows with a header line; values written with format_double.
struct CsvTable {
    std::vector<std::string> header;
    Eigen::MatrixXd values;
};

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Eigen::MatrixXd& values);
CsvTable read_csv(const std::string& path);

double wall_seconds();

}  // namespace sisurr
