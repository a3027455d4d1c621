#include <fstream>
#include <set>

#include "test_support.hpp"
#include "thermalsr/benchmark.hpp"
#include "thermalsr/error.hpp"
#include "thermalsr/image_io.hpp"

using namespace thermalsr;
namespace fs = std::filesystem;

namespace {

DatasetManifest synthetic_manifest(int aerial, int ground) {
    DatasetManifest m;
    for (int i = 0; i < aerial; ++i)
        m.entries.push_back({"aerial/a" + std::to_string(1000 + i), "", SourceClass::aerial, 8, 8, 1, 8});
    for (int i = 0; i < ground; ++i)
        m.entries.push_back({"ground/g" + std::to_string(1000 + i), "", SourceClass::ground, 8, 8, 1, 8});
    return m;
}

std::map<std::string, Split> assignment(const DatasetManifest& m) {
    std::map<std::string, Split> out;
    for (const auto& e : m.entries)
        out[e.id] = e.split;
    return out;
}

std::string error_of(const DatasetManifest& m, const SplitSpec& s) {
    try {
        split_dataset(m, s);
    } catch (const DataError& e) {
        return e.what();
    }
    return "";
}

/// Big-endian width/height from the IHDR chunk, read without libpng.
std::pair<int, int> png_header_size(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    unsigned char b[24];
    in.read(reinterpret_cast<char*>(b), 24);
    auto be = [&](int o) { return (b[o] << 24) | (b[o + 1] << 16) | (b[o + 2] << 8) | b[o + 3]; };
    return {be(16), be(20)};
}

ImageBuffer add_noise(const ImageBuffer& img, std::mt19937_64& gen, double sd) {
    std::normal_distribution<double> n(0.0, sd);
    std::vector<Sample> s(img.samples().begin(), img.samples().end());
    for (auto& v : s)
        v = static_cast<Sample>(std::clamp(std::lround(v + n(gen)), 0L, static_cast<long>(img.max_value())));
    return ImageBuffer(img.width(), img.height(), img.channels(), img.bit_depth(), std::move(s));
}

BenchmarkResult fake_result(std::string method, double psnr, double ssim, double fsim, double ms) {
    BenchmarkResult r;
    r.method = std::move(method);
    r.scale = 4;
    r.means.count = 1;
    r.means.psnr_db = psnr;
    r.means.ssim = ssim;
    r.means.fsim = fsim;
    r.means.ms_ssim = ms;
    return r;
}

std::vector<std::string> table_rows(const std::string& md) {
    std::vector<std::string> rows;
    std::istringstream in(md);
    std::string line;
    int n = 0;
    while (std::getline(in, line))
        if (!line.empty() && line[0] == '|' && ++n > 2)
            rows.push_back(line);
    return rows;
}

std::vector<std::string> cells(const std::string& row) {
    std::vector<std::string> out;
    std::size_t pos = 1;
    while (true) {
        const std::size_t next = row.find('|', pos);
        if (next == std::string::npos)
            break;
        std::string c = row.substr(pos, next - pos);
        c.erase(0, c.find_first_not_of(' '));
        c.erase(c.find_last_not_of(' ') + 1);
        out.push_back(c);
        pos = next + 1;
    }
    return out;
}

} // namespace

TEST_CASE("dataset scan") {
    testing::TempDir dir("scan");
    std::mt19937_64 gen(1);
    fs::create_directories(dir / "aerial/sub");
    fs::create_directories(dir / "ground");
    fs::create_directories(dir / "other");
    const int sizes[][2] = {{10, 7}, {12, 9}, {5, 5}, {33, 17}, {8, 21}};
    const char* names[] = {"aerial/x.png", "aerial/sub/y.png", "aerial/z.pgm", "ground/p.png", "ground/q.png"};
    for (int i = 0; i < 5; ++i)
        save_image(testing::random_image(gen, sizes[i][0], sizes[i][1], 1, i == 3 ? 16 : 8), dir / names[i]);
    save_image(testing::random_image(gen, 4, 4, 1, 8), dir / "other/ignored.png");
    std::ofstream(dir / "ground/broken.png") << "not a png";

    const DatasetManifest m = scan_dataset(dir.path(), default_class_rule());
    REQUIRE(m.entries.size() == 5);
    int aerial = 0, ground = 0;
    for (const auto& e : m.entries) {
        aerial += e.source_class == SourceClass::aerial;
        ground += e.source_class == SourceClass::ground;
        CHECK(e.split == Split::unassigned);
    }
    CHECK(aerial == 3);
    CHECK(ground == 2);
    CHECK(m.entries[0].id == "aerial/sub/y");
    REQUIRE(m.skipped.size() == 2);
    CHECK(std::any_of(m.skipped.begin(), m.skipped.end(),
                      [](const auto& s) { return s.first.find("broken") != std::string::npos; }));

    for (const auto& e : m.entries) {
        const fs::path p = dir.path() / e.path;
        if (p.extension() != ".png")
            continue;
        const auto [w, h] = png_header_size(p);
        CHECK(e.width == w);
        CHECK(e.height == h);
    }
    CHECK(m.find("ground/p")->bit_depth == 16);

    const DatasetManifest all = scan_dataset(dir.path(), std::nullopt);
    CHECK(all.entries.size() == 6);

    testing::TempDir empty("empty");
    CHECK_THROWS_AS(scan_dataset(empty.path(), default_class_rule()), DataError);

    const DatasetManifest back = manifest_from_json(to_json(m));
    CHECK(back.entries.size() == 5);
    CHECK(back.entries[3].id == m.entries[3].id);
}

TEST_CASE("split with the default counts") {
    const DatasetManifest m = synthetic_manifest(205, 95);
    SplitSpec spec;
    spec.seed = 42;
    const DatasetManifest s = split_dataset(m, spec);
    std::map<std::pair<Split, SourceClass>, int> counts;
    for (const auto& e : s.entries) {
        CHECK(e.split != Split::unassigned);
        ++counts[{e.split, e.source_class}];
    }
    CHECK(counts[{Split::train, SourceClass::aerial}] == 150);
    CHECK(counts[{Split::train, SourceClass::ground}] == 50);
    CHECK(counts[{Split::val, SourceClass::aerial}] == 30);
    CHECK(counts[{Split::val, SourceClass::ground}] == 20);
    CHECK(s.in_split(Split::test).size() == 50);
    CHECK(s.in_split(Split::unassigned).size() == 0);
    std::set<std::string> ids;
    for (const auto& e : s.entries)
        ids.insert(e.id);
    CHECK(ids.size() == 300);

    CHECK(assignment(split_dataset(m, spec)) == assignment(s));
    DatasetManifest shuffled = m;
    std::mt19937_64 gen(9);
    std::shuffle(shuffled.entries.begin(), shuffled.entries.end(), gen);
    CHECK(assignment(split_dataset(shuffled, spec)) == assignment(s));
    spec.seed = 43;
    CHECK(assignment(split_dataset(m, spec)) != assignment(s));
}

TEST_CASE("split shortfalls") {
    SplitSpec spec;
    CHECK(error_of(synthetic_manifest(149, 70), spec).find("aerial shortfall 1 for train") != std::string::npos);
    CHECK(error_of(synthetic_manifest(170, 70), spec).find("aerial shortfall 10 for val") != std::string::npos);
    // 180 + 70 covers train and val exactly, leaving nothing for the 50 test images.
    CHECK(error_of(synthetic_manifest(180, 70), spec).find("pool shortfall 50 for test") != std::string::npos);
    CHECK(error_of(synthetic_manifest(200, 99), spec).find("pool shortfall 1 for test") != std::string::npos);
    CHECK(error_of(synthetic_manifest(200, 100), spec) == "");
    SplitSpec strat = spec;
    strat.test_per_class = std::map<SourceClass, int>{{SourceClass::aerial, 25}, {SourceClass::ground, 25}};
    CHECK(error_of(synthetic_manifest(205, 90), strat) != "");
    const DatasetManifest s = split_dataset(synthetic_manifest(205, 95), strat);
    int test_ground = 0;
    for (const auto& e : s.in_split(Split::test))
        test_ground += e.source_class == SourceClass::ground;
    CHECK(test_ground == 25);
    const SplitSpec back = split_spec_from_json(to_json(strat));
    CHECK(back.test_per_class == strat.test_per_class);
    CHECK(back.train == strat.train);
}

TEST_CASE("aggregate means") {
    std::mt19937_64 gen(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<MetricReport> reps;
    for (int i = 0; i < 37; ++i) {
        MetricReport r;
        r.psnr = PsnrValue{20 + 20 * u(gen), i % 7 == 0};
        r.ssim = u(gen);
        r.fsim = u(gen);
        reps.push_back(r);
    }
    const MetricMeans m = aggregate(reps);
    double ps = 0, ss = 0, fs = 0;
    int finite = 0;
    for (const auto& r : reps) {
        if (!r.psnr->infinite) {
            ps += r.psnr->db;
            ++finite;
        }
        ss += *r.ssim;
        fs += *r.fsim;
    }
    CHECK(m.count == 37);
    CHECK(m.psnr_infinite == 6);
    CHECK(std::abs(*m.psnr_db - ps / finite) < 1e-12);
    CHECK(std::abs(*m.ssim - ss / 37) < 1e-12);
    CHECK(std::abs(*m.fsim - fs / 37) < 1e-12);
    CHECK(!m.ms_ssim);
}

TEST_CASE("benchmark execution") {
    testing::TempDir dir("bench");
    std::mt19937_64 gen(3);
    const char* ids[] = {"aerial/a", "aerial/b", "ground/c"};
    for (const char* id : ids) {
        const ImageBuffer gt = testing::scene_image(gen, 181, 178);
        fs::create_directories((dir / "gt" / id).parent_path());
        save_image(gt, dir / "gt" / (std::string(id) + ".png"));
        for (const char* m : {"same", "mild", "harsh", "partial"}) {
            if (std::string(m) == "partial" && std::string(id) == "ground/c")
                continue;
            ImageBuffer pred = gt;
            if (std::string(m) == "mild" || std::string(m) == "partial")
                pred = add_noise(gt, gen, 3.0);
            if (std::string(m) == "harsh")
                pred = add_noise(gt, gen, 9.0);
            fs::create_directories((dir / m / id).parent_path());
            save_image(pred, dir / m / (std::string(id) + ".png"));
        }
    }
    const DatasetManifest man = scan_dataset(dir / "gt", default_class_rule());
    const std::map<std::string, fs::path> preds{
        {"same", dir / "same"}, {"mild", dir / "mild"}, {"harsh", dir / "harsh"}, {"partial", dir / "partial"}};
    BenchmarkOptions opt;
    opt.threads = 2;
    const auto res = run_benchmark(man, dir / "gt", preds, 4, opt);
    REQUIRE(res.size() == 4);
    std::map<std::string, const BenchmarkResult*> by;
    for (const auto& r : res)
        by[r.method] = &r;

    const BenchmarkResult& same = *by["same"];
    CHECK(same.complete());
    CHECK(same.means.count == 3);
    CHECK(same.means.psnr_infinite == 3);
    CHECK(!same.means.psnr_db);
    CHECK(*same.means.ssim == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(*same.means.ms_ssim == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(*same.means.fsim == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(same.scale == 4);
    for (const auto& r : same.per_image)
        CHECK(r.pair_id.size() > 0);

    CHECK(*by["mild"]->means.psnr_db > *by["harsh"]->means.psnr_db);
    CHECK(*by["mild"]->means.ssim > *by["harsh"]->means.ssim);
    CHECK(by["mild"]->complete());
    CHECK(!by["partial"]->complete());
    CHECK(by["partial"]->missing == std::vector<std::string>{"ground/c"});
    CHECK(by["partial"]->means.count == 2);

    const auto again = run_benchmark(man, dir / "gt", preds, 4);
    for (std::size_t i = 0; i < res.size(); ++i)
        CHECK(to_json(again[i]) == to_json(res[i]));

    const BenchmarkResult back = benchmark_result_from_json(to_json(*by["mild"]));
    CHECK(back.means.psnr_db == by["mild"]->means.psnr_db);
    CHECK(back.per_image.size() == 3);

    const std::string md = render_report(res, ReportFormat::markdown);
    CHECK(md.find("partial (incomplete)") != std::string::npos);
    CHECK(md.find("LPIPS") == std::string::npos);
    const nlohmann::json j = nlohmann::json::parse(render_report(res, ReportFormat::json));
    for (const auto& row : j["results"])
        if (row["method"] == "partial")
            CHECK(row["rank"]["ssim"].is_null());
    const std::string pairs = render_pairs_csv(*by["mild"]);
    CHECK(std::count(pairs.begin(), pairs.end(), '\n') == 5);
    CHECK(pairs.find("\nmean,") != std::string::npos);
}

TEST_CASE("report rendering") {
    const BenchmarkResult one[] = {fake_result("solo", 30.0, 0.9, 0.95, 0.97)};
    const std::string md = render_report(one, ReportFormat::markdown);
    const auto rows = table_rows(md);
    REQUIRE(rows.size() == 1);
    for (const auto& c : cells(rows[0]))
        CHECK((c.empty() || c[0] != '*' || c.rfind("**", 0) == 0));
    CHECK(md.find("PSNR↑ | SSIM↑ | FSIM↑ | MS-SSIM↑") != std::string::npos);
    CHECK_THROWS_AS(render_report(std::span<const BenchmarkResult>(), ReportFormat::markdown), ConfigError);

    const BenchmarkResult tie[] = {fake_result("a", 30.0, 0.9, 0.95, 0.97), fake_result("b", 31.0, 0.9, 0.94, 0.96)};
    const auto tie_rows = table_rows(render_report(tie, ReportFormat::markdown));
    CHECK(cells(tie_rows[0])[3] == "**0.9000**");
    CHECK(cells(tie_rows[1])[3] == "**0.9000**");
    CHECK(cells(tie_rows[1])[2] == "**31.00**");
    CHECK(cells(tie_rows[0])[2] == "*30.00*");

    // Brute-force oracle: rank = 1 + number of distinct better values.
    std::mt19937_64 gen(5);
    for (int trial = 0; trial < 50; ++trial) {
        std::uniform_int_distribution<int> d(0, 3);
        std::vector<BenchmarkResult> rs;
        for (int i = 0; i < 3; ++i)
            rs.push_back(fake_result("m" + std::to_string(i), 28.0 + d(gen), 0.8 + 0.05 * d(gen), 0.9, 0.7 + 0.1 * d(gen)));
        if (trial % 5 == 0) {
            rs[0].means.lpips = 0.1 * d(gen);
            rs[1].means.lpips = 0.1 * d(gen);
            rs[2].means.lpips = 0.2;
        }
        const nlohmann::json j = nlohmann::json::parse(render_report(rs, ReportFormat::json));
        const auto mdrows = table_rows(render_report(rs, ReportFormat::markdown));
        const char* keys[] = {"psnr", "ssim", "fsim", "ms_ssim", "lpips"};
        for (int k = 0; k < (trial % 5 == 0 ? 5 : 4); ++k) {
            for (int i = 0; i < 3; ++i) {
                auto val = [&](int m) -> double {
                    const auto& mm = rs[m].means;
                    return k == 0 ? *mm.psnr_db : k == 1 ? *mm.ssim : k == 2 ? *mm.fsim : k == 3 ? *mm.ms_ssim : -*mm.lpips;
                };
                std::set<double> better;
                for (int m = 0; m < 3; ++m)
                    if (val(m) > val(i))
                        better.insert(val(m));
                const int want = 1 + static_cast<int>(better.size());
                CHECK(j["results"][i]["rank"][keys[k]] == want);
                const std::string cell = cells(mdrows[i])[2 + k];
                const bool bold = cell.rfind("**", 0) == 0;
                const bool ital = !bold && cell.rfind("*", 0) == 0;
                CHECK(bold == (want == 1));
                CHECK(ital == (want == 2));
            }
        }
    }
    const std::string csv = render_report(tie, ReportFormat::csv);
    CHECK(csv.rfind("method,scale,count,complete,psnr_infinite,psnr,ssim,fsim,ms_ssim,rank_psnr", 0) == 0);
    CHECK(parse_report_format("md") == ReportFormat::markdown);
    CHECK_THROWS_AS(parse_report_format("xml"), ConfigError);
}

TEST_CASE("dense ranks") {
    const std::optional<double> v[] = {3.0, std::nullopt, 5.0, 3.0, 1.0};
    CHECK(dense_ranks(v, true) == std::vector<int>{2, 0, 1, 2, 3});
    CHECK(dense_ranks(v, false) == std::vector<int>{2, 0, 3, 2, 1});
    const bool ex[] = {false, false, true, false, false};
    CHECK(dense_ranks(v, true, ex) == std::vector<int>{1, 0, 0, 1, 2});
}
