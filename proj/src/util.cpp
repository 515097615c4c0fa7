#include "sisurr/util.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "sisurr/error.hpp"

namespace sisurr {

std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::invalid_space: return "invalid_space";
    case ErrorCode::degenerate_feature: return "degenerate_feature";
    case ErrorCode::missing_context: return "missing_context";
    case ErrorCode::invalid_geometry: return "invalid_geometry";
    case ErrorCode::unbound_parameter: return "unbound_parameter";
    case ErrorCode::non_solvable_netlist: return "non_solvable_netlist";
    case ErrorCode::timestep_too_coarse: return "timestep_too_coarse";
    case ErrorCode::insufficient_data: return "insufficient_data";
    case ErrorCode::invalid_kernel: return "invalid_kernel";
    case ErrorCode::ill_conditioned: return "ill_conditioned";
    case ErrorCode::invalid_hyper: return "invalid_hyper";
    case ErrorCode::training_diverged: return "training_diverged";
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::out_of_domain: return "out_of_domain";
    case ErrorCode::out_of_bounds: return "out_of_bounds";
    case ErrorCode::too_large_request: return "too_large_request";
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::io_error: return "io_error";
    case ErrorCode::parse_error: return "parse_error";
    }
    return "unknown";
}

void fail(ErrorCode code, const std::string& message)
{
    throw Error(code, message);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag)
{
    // splitmix64 finalizer over the combined state
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (tag + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag)
{
    return derive_seed(seed, fnv1a(tag));
}

std::uint64_t fnv1a(std::string_view bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string fnv1a_hex(std::string_view bytes)
{
    static const char* digits = "0123456789abcdef";
    std::uint64_t h = fnv1a(bytes);
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[h & 0xF];
        h >>= 4;
    }
    return out;
}

std::string format_double(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& body)
{
    if (n == 0) return;
    std::size_t threads = workers <= 1 ? 1 : std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

std::string read_text_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io_error, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, std::string_view content)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io_error, "cannot write " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Eigen::MatrixXd& values)
{
    if (!header.empty() && static_cast<Eigen::Index>(header.size()) != values.cols())
        fail(ErrorCode::dimension_mismatch, "csv header width does not match matrix for " + path);
    std::string text;
    text.reserve(static_cast<std::size_t>(values.size()) * 20 + 256);
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (j) text += ',';
        text += header[j];
    }
    text += '\n';
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        for (Eigen::Index j = 0; j < values.cols(); ++j) {
            if (j) text += ',';
            text += format_double(values(i, j));
        }
        text += '\n';
    }
    write_text_file(path, text);
}

namespace {

double parse_double(std::string_view s, const std::string& path)
{
    if (s == "nan") return std::nan("");
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    double v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        fail(ErrorCode::parse_error, "bad number '" + std::string(s) + "' in " + path);
    return v;
}

std::vector<std::string_view> split_line(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

}  // namespace

CsvTable read_csv(const std::string& path)
{
    std::string text = read_text_file(path);
    std::string_view view(text);
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < view.size()) {
        auto pos = view.find('\n', start);
        if (pos == std::string_view::npos) pos = view.size();
        auto line = view.substr(start, pos - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty()) lines.push_back(line);
        start = pos + 1;
    }
    CsvTable table;
    if (lines.empty()) return table;
    for (auto h : split_line(lines[0])) table.header.emplace_back(h);
    const auto cols = static_cast<Eigen::Index>(table.header.size());
    table.values.resize(static_cast<Eigen::Index>(lines.size() - 1), cols);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        auto fields = split_line(lines[i]);
        if (static_cast<Eigen::Index>(fields.size()) != cols)
            fail(ErrorCode::parse_error, "ragged row " + std::to_string(i) + " in " + path);
        for (Eigen::Index j = 0; j < cols; ++j)
            table.values(static_cast<Eigen::Index>(i - 1), j) = parse_double(fields[static_cast<std::size_t>(j)], path);
    }
    return table;
}

double wall_seconds()
{
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

}  // namespace sisurr
