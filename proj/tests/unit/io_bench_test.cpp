#include "prf/bench.hpp"
#include "prf/config.hpp"
#include "prf/error.hpp"
#include "prf/image_io.hpp"
#include "prf/metrics.hpp"
#include "prf/synthetic.hpp"

#include "../support/temp_dir.hpp"

#include "../support/throws.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <sstream>

using namespace prf;
using testing::thrown_kind;
using testing::slurp;
using testing::spit;
using testing::TempDir;

namespace {

Image ramp(int w, int h) {
    Image img(w, h);
    for (std::size_t i = 0; i < img.size(); ++i) img.data[i] = static_cast<double>(i % 256) / 255.0;
    return img;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

} // namespace

TEST_CASE("8-bit quantisation") {
    CHECK(to_byte(0.0) == 0);
    CHECK(to_byte(1.0) == 255);
    CHECK(to_byte(-0.5) == 0);
    CHECK(to_byte(7.0) == 255);
    CHECK(to_byte(0.5) == 128);
    CHECK(to_byte(100.0 / 255.0) == 100);
    CHECK(rec601_luma(1.0, 1.0, 1.0) == doctest::Approx(1.0));
    CHECK(rec601_luma(0.0, 1.0, 0.0) == doctest::Approx(0.587));
}

TEST_CASE("image round trips") {
    TempDir dir;
    const Image img = ramp(17, 9);
    SUBCASE("pgm") {
        write_image(img, dir / "a.pgm");
        ImageInfo info;
        const Image back = read_image(dir / "a.pgm", &info);
        CHECK(info.format == ImageFormat::pgm);
        CHECK(info.bit_depth == 8);
        CHECK_FALSE(info.converted_from_color);
        CHECK(back == img);
    }
    SUBCASE("png") {
        write_image(img, dir / "a.png");
        ImageInfo info;
        const Image back = read_image(dir / "a.png", &info);
        CHECK(info.format == ImageFormat::png);
        CHECK(back == img);
    }
    SUBCASE("sidecar keeps float values") {
        Image f(5, 4);
        for (std::size_t i = 0; i < f.size(); ++i) f.data[i] = static_cast<float>(0.013 * static_cast<double>(i));
        write_image(f, dir / "a.prf");
        const std::string bytes = slurp(dir / "a.prf");
        REQUIRE(bytes.size() == 16 + 4 * 20);
        CHECK(bytes.substr(0, 4) == "PRF1");
        std::uint32_t hdr[3];
        std::memcpy(hdr, bytes.data() + 4, 12);
        CHECK(hdr[0] == 5);
        CHECK(hdr[1] == 4);
        CHECK(hdr[2] == 0);
        ImageInfo info;
        CHECK(read_image(dir / "a.prf", &info) == f);
        CHECK(info.format == ImageFormat::sidecar);
        // extension does not matter when reading
        std::filesystem::copy_file(dir / "a.prf", dir / "renamed.pgm");
        CHECK(read_image(dir / "renamed.pgm") == f);
        write_image(f, dir / "b.f32");
        CHECK(slurp(dir / "b.f32") == bytes);
    }
    SUBCASE("writers quantise") {
        Image odd(2, 1, std::vector<double>{0.3, 0.7});
        write_pgm(odd, dir / "q.pgm");
        const Image back = read_image(dir / "q.pgm");
        CHECK(back.data[0] == doctest::Approx(to_byte(0.3) / 255.0));
        CHECK(back.data[1] == doctest::Approx(to_byte(0.7) / 255.0));
    }
}

TEST_CASE("netpbm variants") {
    TempDir dir;
    SUBCASE("ascii pgm with comments") {
        spit(dir / "a.pgm", "P2\n# comment\n3 1\n# another\n10\n0 5\n10\n");
        const Image img = read_image(dir / "a.pgm");
        CHECK(img.width == 3);
        CHECK(img.data == std::vector<double>{0.0, 0.5, 1.0});
    }
    SUBCASE("16-bit binary pgm") {
        std::string raw = "P5\n2 1\n65535\n";
        raw += std::string("\x00\x00\xff\xff", 4);
        spit(dir / "b.pgm", raw);
        ImageInfo info;
        const Image img = read_image(dir / "b.pgm", &info);
        CHECK(info.bit_depth == 16);
        CHECK(img.data == std::vector<double>{0.0, 1.0});
    }
    SUBCASE("colour ppm goes through luma") {
        std::string raw = "P6\n2 1\n255\n";
        raw += std::string("\xff\x00\x00\x00\x00\xff", 6);
        spit(dir / "c.ppm", raw);
        ImageInfo info;
        const Image img = read_image(dir / "c.ppm", &info);
        CHECK(info.converted_from_color);
        CHECK(img.data[0] == doctest::Approx(0.299));
        CHECK(img.data[1] == doctest::Approx(0.114));
    }
}

TEST_CASE("image io errors") {
    TempDir dir;
    try {
        read_image(dir / "missing.pgm");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::io);
        CHECK(std::string(e.what()).find("missing.pgm") != std::string::npos);
    }
    spit(dir / "x.bmp", "BM not really");
    CHECK(thrown_kind([&] { read_image(dir / "x.bmp"); }) == ErrorKind::format);
    spit(dir / "t.pgm", "P5\n4 4\n255\nab");
    CHECK(thrown_kind([&] { read_image(dir / "t.pgm"); }) == ErrorKind::format);
    spit(dir / "m.pgm", "P2\n2 1\n10\n3 11\n");
    CHECK(thrown_kind([&] { read_image(dir / "m.pgm"); }) == ErrorKind::format);
    spit(dir / "s.prf", std::string("PRF1\x02\x00\x00\x00\x02\x00\x00\x00\x00\x00\x00\x00", 16));
    CHECK(thrown_kind([&] { read_image(dir / "s.prf"); }) == ErrorKind::format);
    CHECK(thrown_kind([&] { write_image(Image(2, 2, 0.5), dir / "out.bmp"); }) == ErrorKind::format);
    CHECK(thrown_kind([&] { write_image(Image(2, 2, 0.5), dir / "no_such_dir" / "out.pgm"); }) == ErrorKind::io);
}

TEST_CASE("key=value config") {
    auto kv = KeyValueConfig::parse("# header\n a = 1 \n\nb=x;y; ;z # trailing\nflag=true\na=2\nbig=18446744073709551615\n");
    CHECK(kv.get_int("a", 0) == 2);
    CHECK(kv.get_list("b", {}) == std::vector<std::string>{"x", "y", "z"});
    CHECK(kv.get_bool("flag", false));
    CHECK(kv.get_u64("big", 0) == 18446744073709551615ull);
    CHECK(kv.get_double("missing", 1.5) == 1.5);
    kv.reject_unused();

    kv.set("typo", "3");
    CHECK(thrown_kind([&] { kv.reject_unused(); }) == ErrorKind::config);
    CHECK(thrown_kind([&] { KeyValueConfig::parse("novalue\n"); }) == ErrorKind::config);
    CHECK(thrown_kind([&] { KeyValueConfig::parse("=3\n"); }) == ErrorKind::config);
    const auto bad = KeyValueConfig::parse("n=abc\nf=maybe\ni=2.5\n");
    CHECK(thrown_kind([&] { bad.get_double("n", 0.0); }) == ErrorKind::config);
    CHECK(thrown_kind([&] { bad.get_bool("f", false); }) == ErrorKind::config);
    CHECK(thrown_kind([&] { bad.get_int("i", 0); }) == ErrorKind::config);
    CHECK(thrown_kind([&] { KeyValueConfig::load("/nonexistent/prf.cfg"); }) == ErrorKind::io);
    CHECK(trim("  a b \t") == "a b");
}

TEST_CASE("csv helpers") {
    CHECK(csv_escape("plain") == "plain");
    CHECK(csv_escape("a,b") == "\"a,b\"");
    CHECK(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
    for (const std::string s : {"x", "a,b", "q\"q", ""}) {
        const auto parts = csv_split(csv_escape(s) + "," + csv_escape("tail"));
        REQUIRE(parts.size() == 2);
        CHECK(parts[0] == s);
        CHECK(parts[1] == "tail");
    }
}

TEST_CASE("benchmark configuration") {
    const auto d = BenchConfig::defaults();
    CHECK(d.noises.size() == 3);
    CHECK(d.filters.front().kind == BenchFilter::Kind::noisy);
    d.validate();

    const auto kv = KeyValueConfig::parse(
        "synthetic_count=2\nsynthetic_size=32\nnoise=gaussian:sigma=0.1;laplacian:b=0.05\n"
        "filters=noisy;pr:5;median:3\nseed=9\nmetric_mode=float\ng_gap=3\n");
    const auto cfg = BenchConfig::from(kv);
    CHECK(cfg.noises.size() == 2);
    REQUIRE(cfg.filters.size() == 3);
    CHECK(cfg.filters[1].g_gap == 5.0);
    CHECK(cfg.filters[2].label() == "median:3");
    CHECK(cfg.metrics == BenchMetrics::float_values);
    const auto again = BenchConfig::from(KeyValueConfig::parse(cfg.to_text()));
    CHECK(again.to_text() == cfg.to_text());

    CHECK(thrown_kind([&] { BenchConfig::from(KeyValueConfig::parse("metric_mode=16bit\n")); }) == ErrorKind::config);
    CHECK(thrown_kind([&] { BenchConfig::from(KeyValueConfig::parse("filters=\n")); }) == ErrorKind::config);
    CHECK(thrown_kind([&] { BenchConfig::from(KeyValueConfig::parse("filtres=noisy\n")); }) == ErrorKind::config);
    CHECK(thrown_kind([&] { parse_bench_filter("pr:abc"); }) == ErrorKind::config);
    CHECK(thrown_kind([&] { parse_bench_filter("pr:-1"); }) == ErrorKind::config);
    CHECK(parse_bench_filter("pr").g_gap == 10.0);
}

TEST_CASE("corpus loading") {
    TempDir dir;
    write_image(ramp(8, 8), dir / "b.pgm");
    write_image(ramp(6, 6), dir / "a.png");
    spit(dir / "notes.txt", "not an image");
    const auto c = load_corpus(dir.path());
    REQUIRE(c.images.size() == 2);
    CHECK(c.ids == std::vector<std::string>{"a.png", "b.pgm"});
    CHECK(thrown_kind([&] { load_corpus(dir / "nope"); }) == ErrorKind::io);
    TempDir empty;
    CHECK(thrown_kind([&] { load_corpus(empty.path()); }) == ErrorKind::io);
}

TEST_CASE("benchmark run") {
    TempDir dir;
    BenchConfig cfg = BenchConfig::defaults();
    cfg.synthetic_count = 3;
    cfg.synthetic_size = 32;
    cfg.out = dir / "run";
    const Corpus corpus = corpus_for(cfg);

    SUBCASE("noisy column equals a direct metric call") {
        cfg.synthetic_count = 1;
        cfg.noises.resize(1);
        cfg.filters = {parse_bench_filter("noisy")};
        const Corpus one = corpus_for(cfg);
        const auto rep = run_benchmark(cfg, one);
        REQUIRE(rep.cells.size() == 1);
        const auto& row = rep.cells[0].rows.at(0);
        const Image noisy = add_noise(one.images[0], cfg.noises[0], RngSeed{row.noise_seed});
        CHECK(*row.psnr[0] == psnr(one.images[0], noisy));
        CHECK(*row.ssim[0] == ssim(one.images[0], noisy));
        CHECK(row.psnr[1].has_value());
        CHECK(row.error.empty());
    }
    SUBCASE("row count is images x noises x filters") {
        cfg.filters.erase(cfg.filters.begin());  // the eight real filters
        REQUIRE(cfg.filters.size() == 8);
        cfg.synthetic_count = 10;
        const auto rep = run_benchmark(cfg, corpus_for(cfg));
        CHECK(rep.cells.size() == 24);
        const auto report = lines_of(slurp(cfg.out / "report.csv"));
        CHECK(report.size() == 1 + 240);
        CHECK(report[0] == "noise,filter,image,noise_seed,psnr_float,ssim_float,psnr_8bit,ssim_8bit,error");
        CHECK(lines_of(slurp(cfg.out / "summary.csv")).size() == 1 + 24);
        for (const auto& cell : rep.cells) CHECK(cell.rows.size() == 10);
    }
    SUBCASE("determinism and resume") {
        run_benchmark(cfg, corpus);
        const std::string first = slurp(cfg.out / "report.csv");
        const std::string first_summary = slurp(cfg.out / "summary.csv");

        BenchConfig other = cfg;
        other.out = dir / "again";
        run_benchmark(other, corpus);
        CHECK(slurp(other.out / "report.csv") == first);
        CHECK(slurp(other.out / "summary.csv") == first_summary);

        // drop half the cells, as if the run had been killed
        std::vector<std::filesystem::path> cells;
        for (const auto& e : std::filesystem::directory_iterator(cfg.out / "cells")) cells.push_back(e.path());
        std::sort(cells.begin(), cells.end());
        REQUIRE(cells.size() == 27);
        for (std::size_t i = 0; i < cells.size(); i += 2) std::filesystem::remove(cells[i]);
        std::filesystem::remove(cfg.out / "report.csv");
        const auto resumed = run_benchmark(cfg, corpus);
        std::size_t skipped = 0;
        for (const auto& cell : resumed.cells) skipped += cell.resumed ? 1 : 0;
        CHECK(skipped == 13);
        CHECK(slurp(cfg.out / "report.csv") == first);

        // a different seed must not reuse cached cells
        BenchConfig reseeded = cfg;
        reseeded.seed = cfg.seed + 1;
        const auto fresh = run_benchmark(reseeded, corpus);
        for (const auto& cell : fresh.cells) CHECK_FALSE(cell.resumed);
        CHECK(slurp(cfg.out / "report.csv") != first);
    }
    SUBCASE("metric modes stay in their own columns") {
        cfg.metrics = BenchMetrics::quantized_8bit;
        cfg.noises.resize(1);
        const auto rep = run_benchmark(cfg, corpus);
        for (const auto& cell : rep.cells) {
            for (const auto& r : cell.rows) {
                CHECK_FALSE(r.psnr[0].has_value());
                CHECK(r.psnr[1].has_value());
            }
            CHECK(std::isnan(cell.mean_psnr(0)));
        }
    }
}
