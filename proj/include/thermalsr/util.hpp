#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>

#include <json.hpp>

namespace thermalsr {

/// Pairwise (cascade) summation; error grows as O(log n).
double pairwise_sum(std::span<const double> values) noexcept;

inline double pairwise_mean(std::span<const double> values) noexcept {
    return values.empty() ? 0.0 : pairwise_sum(values) / static_cast<double>(values.size());
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers. The first exception
/// thrown by any task is rethrown after all workers have joined.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

unsigned default_thread_count() noexcept;

/// Writes text via a temporary sibling file and rename.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

/// '/'-separated path of `p` relative to `root`, extension removed.
std::string relative_id(const std::filesystem::path& p, const std::filesystem::path& root);

std::string tool_version();

} // namespace thermalsr
