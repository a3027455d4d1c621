#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace thermalsr {

enum class SourceClass { aerial, ground, unspecified };
enum class Split { train, val, test, unassigned };

std::string_view to_string(SourceClass c) noexcept;
std::string_view to_string(Split s) noexcept;
SourceClass parse_source_class(std::string_view name);
Split parse_split(std::string_view name);

struct ManifestEntry {
    /// Path relative to the scan root, '/'-separated, without extension.
    std::string id;
    std::string path;
    SourceClass source_class = SourceClass::unspecified;
    int width = 0;
    int height = 0;
    int channels = 0;
    int bit_depth = 0;
    Split split = Split::unassigned;
};

/// Per-class draw counts for the train and val splits, and either an
/// unstratified test total (default) or explicit per-class test counts.
struct SplitSpec {
    std::map<SourceClass, int> train{{SourceClass::aerial, 150}, {SourceClass::ground, 50}};
    std::map<SourceClass, int> val{{SourceClass::aerial, 30}, {SourceClass::ground, 20}};
    int test_total = 50;
    std::optional<std::map<SourceClass, int>> test_per_class;
    std::uint64_t seed = 0;
};

nlohmann::json to_json(const SplitSpec& s);
SplitSpec split_spec_from_json(const nlohmann::json& j);

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    std::optional<SplitSpec> spec;
    /// Files found during the scan that could not be used, with the reason.
    std::vector<std::pair<std::string, std::string>> skipped;

    std::vector<ManifestEntry> in_split(Split s) const;
    const ManifestEntry* find(std::string_view id) const;
};

nlohmann::json to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j);
void save_manifest(const DatasetManifest& m, const std::filesystem::path& path, const nlohmann::json& provenance = {});
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Maps the first path component under the scan root to a class.
using ClassRule = std::map<std::string, SourceClass>;
ClassRule default_class_rule();

/// Recursive scan for supported images. With a rule, files outside any mapped
/// subdirectory are skipped; with `std::nullopt`, every image is taken with
/// class `unspecified`. Entries are sorted by id. Unreadable files are listed
/// in `skipped`; throws DataError if no usable image is found.
DatasetManifest scan_dataset(const std::filesystem::path& root, const std::optional<ClassRule>& rule);

/// Seeded, stratified assignment: within each class (entries sorted by id)
/// a shuffle picks train then val; test is drawn from the pooled remainder.
/// Throws DataError naming the class and shortfall when counts are unmet.
DatasetManifest split_dataset(const DatasetManifest& manifest, const SplitSpec& spec);

} // namespace thermalsr
