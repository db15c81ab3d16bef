#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "dnpr/cli.hpp"
#include "dnpr/quantizer.hpp"
#include "dnpr/rng.hpp"
#include "dnpr/stats.hpp"

using namespace dnpr;
using Catch::Approx;

TEST_CASE("bits_for_grid matches the index-count formula") {
    // floor(2 * 1 / 1e-3) + 2 = 2002 -> ceil(log2) = 11
    REQUIRE(bits_for_grid(1e-3, 1.0) == 11);
    REQUIRE(bits_for_grid(0.5, 1.0) == 3);  // floor(4)+2 = 6 -> 3 bits
    REQUIRE_THROWS_AS(bits_for_grid(0.0, 1.0), ValidationError);
    REQUIRE_THROWS_AS(bits_for_grid(1.0, -1.0), ValidationError);
}

TEST_CASE("dither is deterministic, in range, and uniform") {
    const double delta = 0.37;
    REQUIRE(dither(DitherKey{3, 4, 5}, delta) == dither(DitherKey{3, 4, 5}, delta));
    REQUIRE(dither(DitherKey{3, 4, 5}, delta) != dither(DitherKey{3, 5, 4}, delta));

    std::vector<double> us(100000);
    for (std::size_t i = 0; i < us.size(); ++i) {
        us[i] = dither(DitherKey{77, i + 1, 1}, delta);
        REQUIRE(us[i] >= 0.0);
        REQUIRE(us[i] < delta);
    }
    REQUIRE(stats::ks_test_uniform(us, 0.0, delta).p_value > 0.01);
}

TEST_CASE("dither values for distinct keys are uncorrelated") {
    const double delta = 1.0;
    std::vector<double> a(10000), b(10000);
    for (std::size_t p = 0; p < a.size(); ++p) {
        a[p] = dither(DitherKey{9, 2 * p + 1, 1}, delta);
        b[p] = dither(DitherKey{9, 2 * p + 1, 2}, delta);
    }
    REQUIRE(std::abs(stats::pearson_correlation(a, b)) < 0.02);
}

TEST_CASE("quantize hand values and grid identity") {
    // |0.23 - 0.1| = 0.13 < |0.23 - 0.6| = 0.37
    REQUIRE(quantize(0.23, 0.1, 0.5) == Approx(0.1));

    const double u = 0.0625, delta = 0.25;
    for (int i = -40; i <= 40; ++i) {
        const double g = u + i * delta;
        REQUIRE(quantize(g, u, delta) == g);
    }
}

TEST_CASE("quantize never moves a point further than delta/2") {
    const rng::Stream s(1, rng::Role::kGeneric, 3);
    const double delta = 0.013;
    for (std::uint64_t i = 0; i < 20000; ++i) {
        const double x = 4.0 * (s.uniform(2 * i) - 0.5);
        const double u = delta * s.uniform(2 * i + 1);
        REQUIRE(std::abs(quantize(x, u, delta) - x) <= delta / 2.0 * (1.0 + 1e-12));
    }
}

TEST_CASE("midpoint ties resolve to the lower grid point") {
    REQUIRE(quantize(0.25, 0.0, 0.5) == 0.0);
    REQUIRE(quantize(-0.25, 0.0, 0.5) == -0.5);
}

TEST_CASE("winsorization saturates the index") {
    const QuantizerSpec spec = make_quantizer(0.01, 1.0);
    const DitherKey key{5, 1, 1};
    REQUIRE(encode_value(10.0, key, spec) == encode_value(1.0, key, spec));
    REQUIRE(encode_value(-10.0, key, spec) == encode_value(-1.0, key, spec));
}

TEST_CASE("encode/decode round trip is bit-exact") {
    const QuantizerSpec spec = make_quantizer(0.01, 1.0);
    const rng::Stream s(17, rng::Role::kGeneric, 4);
    for (std::uint64_t i = 0; i < 100000; ++i) {
        const DitherKey key{33, i, i % 7 + 1};
        const double x = 4.0 * (s.uniform(i) - 0.5);  // spans [-2c, 2c]
        const std::uint64_t idx = encode_value(x, key, spec);
        REQUIRE(idx < (1ull << spec.bits_per_value));
        const double decoded = decode_value(idx, key, spec);
        const double expected =
            quantize(std::clamp(x, -spec.clamp, spec.clamp), dither(key, spec.delta), spec.delta);
        REQUIRE(decoded == expected);  // exact, not approximate
    }
}

TEST_CASE("decoding with the wrong key gives a different value") {
    const QuantizerSpec spec = make_quantizer(0.01, 1.0);
    const DitherKey right{1, 2, 3};
    const DitherKey wrong{1, 3, 2};
    const std::uint64_t idx = encode_value(0.4321, right, spec);
    REQUIRE(decode_value(idx, right, spec) != decode_value(idx, wrong, spec));
}

TEST_CASE("decode rejects out-of-range indices") {
    const QuantizerSpec spec = make_quantizer(0.25, 1.0);
    REQUIRE_THROWS_AS(decode_value(1ull << spec.bits_per_value, DitherKey{1, 1, 1}, spec),
                      ValidationError);
}

TEST_CASE("index 0 decodes to the smallest representable grid point") {
    const QuantizerSpec spec = make_quantizer(0.25, 1.0);
    const DitherKey key{8, 1, 1};
    const double lowest = decode_value(0, key, spec);
    REQUIRE(lowest >= -spec.clamp - spec.delta / 2.0);
    REQUIRE(lowest < -spec.clamp + spec.delta / 2.0);
}

TEST_CASE("dither error law: uniform, uncorrelated, variance delta^2/12") {
    const auto report = cli::check_dither_law(0.01, 1.0, 100000, 424242);
    INFO("ks p=" << report.ks.p_value << " corr=" << report.correlation
                 << " mean_sq=" << report.mean_sq);
    REQUIRE(report.pass_ks);
    REQUIRE(report.pass_corr);
    REQUIRE(report.pass_mean_sq);
}
