#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "test_support.hpp"
#include "wskp/errors.hpp"
#include "wskp/image_io.hpp"
#include "wskp/tensor.hpp"

using namespace wskp;
using wskp::testing::Random;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / "wskp_unit";
    fs::create_directories(dir);
    return dir / name;
}

void write_bytes(const fs::path& p, const std::string& header, const void* payload, std::size_t n)
{
    std::ofstream out(p, std::ios::binary);
    out << header;
    out.write(static_cast<const char*>(payload), static_cast<std::streamsize>(n));
}

} // namespace

TEST_CASE("tensor layout and helpers")
{
    Tensor t(2, 3, 2);
    CHECK(t.size() == 12);
    t.at(1, 2, 1) = 5.0f;
    CHECK(t.raw()[(1 * 3 + 2) * 2 + 1] == 5.0f);
    const Tensor s = t.channel_slice(1, 1);
    CHECK(s.channels() == 1);
    CHECK(s.at(1, 2, 0) == 5.0f);
    const Tensor c = t.crop(1, 1, 1, 2);
    CHECK(c.at(0, 1, 1) == 5.0f);
    const Tensor parts[] = {s, s};
    const Tensor cat = concat_channels(parts);
    CHECK(cat.channels() == 2);
    CHECK(cat.at(1, 2, 1) == 5.0f);
}

TEST_CASE("read_pfm flips rows of a little-endian gray file")
{
    const float payload[4] = {1, 2, 3, 4};
    const fs::path p = temp_path("gray.pfm");
    write_bytes(p, "Pf\n2 2\n-1.0\n", payload, sizeof(payload));
    const Tensor t = read_pfm(p);
    REQUIRE(t.channels() == 1);
    CHECK(t.at(0, 0, 0) == 3.0f);
    CHECK(t.at(0, 1, 0) == 4.0f);
    CHECK(t.at(1, 0, 0) == 1.0f);
}

TEST_CASE("read_pfm honours big-endian scale")
{
    const float values[2] = {1.5f, -2.25f};
    unsigned char payload[8];
    for (int i = 0; i < 2; ++i) {
        unsigned char b[4];
        std::memcpy(b, &values[i], 4);
        for (int k = 0; k < 4; ++k) {
            payload[i * 4 + k] = b[3 - k];
        }
    }
    const fs::path p = temp_path("be.pfm");
    write_bytes(p, "Pf\n2 1\n1.0\n", payload, sizeof(payload));
    const Tensor t = read_pfm(p);
    CHECK(t.at(0, 0, 0) == 1.5f);
    CHECK(t.at(0, 1, 0) == -2.25f);
}

TEST_CASE("read_pfm errors")
{
    const float payload[3] = {1, 2, 3};
    const fs::path zero = temp_path("zero.pfm");
    write_bytes(zero, "PF\n0 4\n-1.0\n", payload, 0);
    CHECK_THROWS_AS(read_pfm(zero), ParseError);
    const fs::path bad = temp_path("bad.pfm");
    write_bytes(bad, "P6\n1 1\n-1.0\n", payload, sizeof(payload));
    CHECK_THROWS_AS(read_pfm(bad), ParseError);
    const fs::path trunc = temp_path("trunc.pfm");
    write_bytes(trunc, "PF\n2 2\n-1.0\n", payload, sizeof(payload));
    CHECK_THROWS_AS(read_pfm(trunc), IoError);
    CHECK_THROWS_AS(read_pfm(temp_path("missing.pfm")), IoError);
}

TEST_CASE("write_pfm payload size and channel check")
{
    Tensor t(1, 1, 3);
    t.at(0, 0, 0) = 0.5f;
    t.at(0, 0, 1) = 0.25f;
    t.at(0, 0, 2) = 1.0f;
    const fs::path p = temp_path("one.pfm");
    write_pfm(t, p);
    const std::string header = "PF\n1 1\n-1.0\n";
    CHECK(fs::file_size(p) == header.size() + 12);
    CHECK(read_pfm(p) == t);
    CHECK_THROWS_AS(write_pfm(Tensor(1, 1, 2), temp_path("two.pfm")), UnsupportedChannels);
}

TEST_CASE("pfm round trip is bit exact over 100 random tensors")
{
    Random rng(11);
    const fs::path p = temp_path("rt.pfm");
    for (int i = 0; i < 100; ++i) {
        const int c = rng.uniform() < 0.5 ? 1 : 3;
        const Tensor t = rng.tensor(rng.integer(1, 17), rng.integer(1, 17), c, -1e4f, 1e4f);
        write_pfm(t, p);
        REQUIRE(read_pfm(p) == t);
    }
}

TEST_CASE("write_png produces a file")
{
    Random rng(3);
    const fs::path p = temp_path("preview.png");
    write_png(rng.tensor(8, 9, 3, -0.5f, 1.5f), p);
    CHECK(fs::file_size(p) > 8);
    write_png(rng.tensor(4, 4, 1, 0.0f, 1.0f), p);
    CHECK(fs::file_size(p) > 8);
}

TEST_CASE("downsample and upsample")
{
    Tensor t(2, 2, 1, std::vector<float>{1, 2, 3, 4});
    CHECK(downsample_2x2(t).at(0, 0, 0) == doctest::Approx(2.5));
    CHECK_THROWS_AS(downsample_2x2(Tensor(3, 2, 1)), DimensionError);

    const Tensor seven(1, 1, 1, 7.0f);
    const Tensor up = upsample_nearest(seven);
    CHECK(up == Tensor(2, 2, 1, 7.0f));
    const Tensor constant(6, 4, 2, 0.75f);
    CHECK(upsample_nearest(downsample_2x2(constant)) == constant);

    Random rng(5);
    const Tensor r = rng.tensor(8, 8, 2);
    const Tensor d = downsample_2x2(r);
    double sum_r = 0.0;
    double sum_d = 0.0;
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 4; ++x) {
            for (int c = 0; c < 2; ++c) {
                const double mean = (static_cast<double>(r.at(2 * y, 2 * x, c)) + r.at(2 * y, 2 * x + 1, c) +
                                     r.at(2 * y + 1, 2 * x, c) + r.at(2 * y + 1, 2 * x + 1, c)) / 4.0;
                CHECK(std::abs(d.at(y, x, c) - mean) <= 1e-7);
                sum_d += d.at(y, x, c);
            }
        }
    }
    for (float v : r.values()) {
        sum_r += v;
    }
    CHECK(std::abs(sum_r / 128.0 - sum_d / 32.0) <= 1e-6 * std::max(1.0, std::abs(sum_r / 128.0)));

    const Tensor small = rng.tensor(4, 4, 1);
    const Tensor big = upsample_nearest(small);
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
            CHECK(big.at(y, x, 0) == small.at(y / 2, x / 2, 0));
        }
    }
}

TEST_CASE("resampling adjoints")
{
    Random rng(9);
    const Tensor x = rng.tensor(6, 8, 3);
    const Tensor y = rng.tensor(3, 4, 3);
    // <D x, y> = <x, D^T y> and <U y, x> = <y, U^T x>
    CHECK(testing::dot(downsample_2x2(x), y) ==
          doctest::Approx(testing::dot(x, downsample_2x2_backward(y))).epsilon(1e-6));
    CHECK(testing::dot(upsample_nearest(y), x) ==
          doctest::Approx(testing::dot(y, upsample_nearest_backward(x))).epsilon(1e-6));
}
