#include "thermalsr/manifest.hpp"

#include <algorithm>
#include <numeric>

#include "thermalsr/error.hpp"
#include "thermalsr/image_io.hpp"
#include "thermalsr/rng.hpp"
#include "thermalsr/util.hpp"

namespace thermalsr {

namespace fs = std::filesystem;

std::string_view to_string(SourceClass c) noexcept {
    switch (c) {
    case SourceClass::aerial: return "aerial";
    case SourceClass::ground: return "ground";
    case SourceClass::unspecified: return "unspecified";
    }
    return "unspecified";
}

std::string_view to_string(Split s) noexcept {
    switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    case Split::unassigned: return "unassigned";
    }
    return "unassigned";
}

SourceClass parse_source_class(std::string_view name) {
    if (name == "aerial")
        return SourceClass::aerial;
    if (name == "ground")
        return SourceClass::ground;
    if (name == "unspecified")
        return SourceClass::unspecified;
    throw ConfigError("unknown source class '" + std::string(name) + "'");
}

Split parse_split(std::string_view name) {
    if (name == "train")
        return Split::train;
    if (name == "val")
        return Split::val;
    if (name == "test")
        return Split::test;
    if (name == "unassigned")
        return Split::unassigned;
    throw ConfigError("unknown split '" + std::string(name) + "'");
}

namespace {

nlohmann::json class_counts_json(const std::map<SourceClass, int>& m) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [c, n] : m)
        j[std::string(to_string(c))] = n;
    return j;
}

std::map<SourceClass, int> class_counts_from_json(const nlohmann::json& j) {
    std::map<SourceClass, int> m;
    for (const auto& [k, v] : j.items()) {
        const int n = v.get<int>();
        if (n < 0)
            throw ConfigError("split counts must be non-negative");
        m[parse_source_class(k)] = n;
    }
    return m;
}

int count_of(const std::map<SourceClass, int>& m, SourceClass c) {
    const auto it = m.find(c);
    return it == m.end() ? 0 : it->second;
}

template <typename T>
void seeded_shuffle(std::vector<T>& v, RngStream rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(0, i - 1));
        std::swap(v[i - 1], v[j]);
    }
}

} // namespace

nlohmann::json to_json(const SplitSpec& s) {
    nlohmann::json test{{"total", s.test_total}};
    if (s.test_per_class)
        test = class_counts_json(*s.test_per_class);
    return {{"train", class_counts_json(s.train)}, {"val", class_counts_json(s.val)}, {"test", test}, {"seed", s.seed}};
}

SplitSpec split_spec_from_json(const nlohmann::json& j) {
    SplitSpec s;
    try {
        if (j.contains("train"))
            s.train = class_counts_from_json(j.at("train"));
        if (j.contains("val"))
            s.val = class_counts_from_json(j.at("val"));
        if (j.contains("test")) {
            const auto& t = j.at("test");
            if (t.contains("total")) {
                s.test_total = t.at("total").get<int>();
                if (s.test_total < 0)
                    throw ConfigError("test total must be non-negative");
            } else {
                s.test_per_class = class_counts_from_json(t);
            }
        }
        if (j.contains("seed"))
            s.seed = j.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("split spec: ") + e.what());
    }
    return s;
}

std::vector<ManifestEntry> DatasetManifest::in_split(Split s) const {
    std::vector<ManifestEntry> out;
    std::copy_if(entries.begin(), entries.end(), std::back_inserter(out),
                 [s](const ManifestEntry& e) { return e.split == s; });
    return out;
}

const ManifestEntry* DatasetManifest::find(std::string_view id) const {
    const auto it = std::find_if(entries.begin(), entries.end(), [id](const ManifestEntry& e) { return e.id == id; });
    return it == entries.end() ? nullptr : &*it;
}

nlohmann::json to_json(const DatasetManifest& m) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : m.entries)
        entries.push_back({{"id", e.id},
                           {"path", e.path},
                           {"class", std::string(to_string(e.source_class))},
                           {"width", e.width},
                           {"height", e.height},
                           {"channels", e.channels},
                           {"bit_depth", e.bit_depth},
                           {"split", std::string(to_string(e.split))}});
    nlohmann::json j{{"entries", entries}};
    if (m.spec) {
        j["spec"] = to_json(*m.spec);
        j["seed"] = m.spec->seed;
    } else {
        j["spec"] = nullptr;
        j["seed"] = nullptr;
    }
    if (!m.skipped.empty()) {
        nlohmann::json sk = nlohmann::json::array();
        for (const auto& [path, why] : m.skipped)
            sk.push_back({{"path", path}, {"reason", why}});
        j["skipped"] = sk;
    }
    return j;
}

DatasetManifest manifest_from_json(const nlohmann::json& j) {
    DatasetManifest m;
    try {
        for (const auto& e : j.at("entries")) {
            ManifestEntry me;
            me.id = e.at("id").get<std::string>();
            me.path = e.at("path").get<std::string>();
            me.source_class = parse_source_class(e.value("class", std::string("unspecified")));
            me.width = e.value("width", 0);
            me.height = e.value("height", 0);
            me.channels = e.value("channels", 0);
            me.bit_depth = e.value("bit_depth", 0);
            me.split = parse_split(e.value("split", std::string("unassigned")));
            if (m.find(me.id))
                throw DataError("duplicate manifest id '" + me.id + "'");
            m.entries.push_back(std::move(me));
        }
        if (j.contains("spec") && !j.at("spec").is_null())
            m.spec = split_spec_from_json(j.at("spec"));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("manifest: ") + e.what());
    }
    return m;
}

void save_manifest(const DatasetManifest& m, const fs::path& path, const nlohmann::json& provenance) {
    nlohmann::json j = to_json(m);
    if (!provenance.is_null())
        j["provenance"] = provenance;
    write_json_file(path, j);
}

DatasetManifest load_manifest(const fs::path& path) {
    return manifest_from_json(read_json_file(path));
}

ClassRule default_class_rule() {
    return {{"aerial", SourceClass::aerial}, {"ground", SourceClass::ground}};
}

DatasetManifest scan_dataset(const fs::path& root, const std::optional<ClassRule>& rule) {
    if (!fs::is_directory(root))
        throw IoError("not a directory: " + root.string());
    std::vector<fs::path> files;
    for (const auto& de : fs::recursive_directory_iterator(root, fs::directory_options::follow_directory_symlink))
        if (de.is_regular_file() && is_supported_image(de.path()))
            files.push_back(de.path());
    std::sort(files.begin(), files.end());

    DatasetManifest m;
    for (const auto& f : files) {
        const fs::path rel = f.lexically_relative(root);
        SourceClass cls = SourceClass::unspecified;
        if (rule) {
            const auto first = rel.begin()->string();
            const auto it = rule->find(first);
            if (std::distance(rel.begin(), rel.end()) < 2 || it == rule->end()) {
                m.skipped.emplace_back(f.string(), "not under a classified subdirectory");
                continue;
            }
            cls = it->second;
        }
        ManifestEntry e;
        e.id = relative_id(f, root);
        e.path = f.string();
        e.source_class = cls;
        try {
            const ImageHeader h = read_image_header(f);
            e.width = h.width;
            e.height = h.height;
            e.channels = h.channels;
            e.bit_depth = h.bit_depth;
        } catch (const Error& err) {
            m.skipped.emplace_back(f.string(), err.what());
            continue;
        }
        if (m.find(e.id)) {
            m.skipped.emplace_back(f.string(), "duplicate id '" + e.id + "'");
            continue;
        }
        m.entries.push_back(std::move(e));
    }
    if (m.entries.empty())
        throw DataError("no images found under " + root.string());
    std::sort(m.entries.begin(), m.entries.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    return m;
}

DatasetManifest split_dataset(const DatasetManifest& manifest, const SplitSpec& spec) {
    DatasetManifest out = manifest;
    out.spec = spec;
    std::sort(out.entries.begin(), out.entries.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    for (auto& e : out.entries)
        e.split = Split::unassigned;

    const RngStream root(spec.seed);
    std::vector<std::string> shortfalls;
    std::vector<std::size_t> pool;
    std::map<SourceClass, std::vector<std::size_t>> leftovers;
    for (SourceClass cls : {SourceClass::aerial, SourceClass::ground, SourceClass::unspecified}) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < out.entries.size(); ++i)
            if (out.entries[i].source_class == cls)
                idx.push_back(i);
        seeded_shuffle(idx, root.derive(static_cast<std::uint64_t>(cls)));
        const auto name = std::string(to_string(cls));
        const std::size_t n_train = static_cast<std::size_t>(count_of(spec.train, cls));
        const std::size_t n_val = static_cast<std::size_t>(count_of(spec.val, cls));
        if (idx.size() < n_train) {
            shortfalls.push_back(name + " shortfall " + std::to_string(n_train - idx.size()) + " for train");
            continue;
        }
        if (idx.size() - n_train < n_val) {
            shortfalls.push_back(name + " shortfall " + std::to_string(n_val - (idx.size() - n_train)) + " for val");
            continue;
        }
        std::size_t k = 0;
        for (; k < n_train; ++k)
            out.entries[idx[k]].split = Split::train;
        for (; k < n_train + n_val; ++k)
            out.entries[idx[k]].split = Split::val;
        for (; k < idx.size(); ++k) {
            pool.push_back(idx[k]);
            leftovers[cls].push_back(idx[k]);
        }
    }
    if (shortfalls.empty()) {
        if (spec.test_per_class) {
            for (const auto& [cls, n] : *spec.test_per_class) {
                auto& rest = leftovers[cls];
                if (rest.size() < static_cast<std::size_t>(n)) {
                    shortfalls.push_back(std::string(to_string(cls)) + " shortfall " +
                                         std::to_string(n - rest.size()) + " for test");
                    continue;
                }
                for (int k = 0; k < n; ++k)
                    out.entries[rest[k]].split = Split::test;
            }
        } else {
            std::sort(pool.begin(), pool.end());
            seeded_shuffle(pool, root.derive(0x7E57ull));
            const auto n = static_cast<std::size_t>(spec.test_total);
            if (pool.size() < n) {
                shortfalls.push_back("pool shortfall " + std::to_string(n - pool.size()) + " for test");
            } else {
                for (std::size_t k = 0; k < n; ++k)
                    out.entries[pool[k]].split = Split::test;
            }
        }
    }
    if (!shortfalls.empty()) {
        std::string msg = "insufficient images: ";
        for (std::size_t i = 0; i < shortfalls.size(); ++i)
            msg += (i ? "; " : "") + shortfalls[i];
        throw DataError(msg);
    }
    return out;
}

} // namespace thermalsr
