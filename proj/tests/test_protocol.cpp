#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "dnpr/model.hpp"
#include "dnpr/protocol.hpp"
#include "dnpr/stats.hpp"

using namespace dnpr;
using Catch::Approx;

namespace {

// m=4, k=2, btilde=2 allocation fixture used throughout.
ProtocolPlan small_fixture() {
    ProtocolPlan plan;
    plan.config = make_config(100, 4, 32, 1, std::numbers::pi);
    plan.quantizer = make_quantizer(0.125, 1.0);
    plan.delta = plan.quantizer.delta;
    plan.b0 = plan.quantizer.bits_per_value;
    plan.btilde = 2;
    plan.k = 2;
    plan.istar = 4;
    return plan;
}

std::vector<Message> encode_all(const ProtocolPlan& plan, const CoefficientSequence& theta,
                                std::uint64_t seed) {
    std::vector<Message> messages;
    for (std::uint64_t j = 1; j <= plan.config.m; ++j)
        messages.push_back(local_encode(plan, sample_observation_row(theta, plan.config.n, j, seed),
                                        seed));
    return messages;
}

}  // namespace

TEST_CASE("plan constants for the reference configuration") {
    const auto plan = make_plan(make_config(1000000, 100, 64, 1, std::numbers::pi));
    REQUIRE(plan.delta == Approx(1e-3));
    REQUIRE(plan.b0 == 11);
    REQUIRE(plan.btilde == 5);
    REQUIRE(plan.k == 22);
    REQUIRE(plan.istar == 22);
    REQUIRE(plan.btilde * static_cast<std::uint64_t>(plan.b0) <= plan.config.b);
}

TEST_CASE("replication count hits its clamps") {
    // (floor(50^{3/4} 10^{-3/2}) v 1) = 1; c_tilde shrunk so one value fits in 5 bits
    const auto insufficient = make_plan(make_config(1000000, 10, 5, 1, 1.0, 0.02));
    REQUIRE(insufficient.k == 1);
    // formula value far above m -> clamped at m
    const auto sufficient = make_plan(make_config(100, 10, 10000, 1, std::numbers::pi));
    REQUIRE(sufficient.k == 10);
}

TEST_CASE("plan rejects budgets below one value width") {
    REQUIRE_THROWS_AS(make_plan(make_config(1000000, 10, 5, 1, std::numbers::pi)), BudgetError);
}

TEST_CASE("replication branch matches the regime tag") {
    for (const auto& cfg :
         {make_config(1000000000000ull, 8, 120, 1, std::numbers::pi),     // insufficient
          make_config(10000, 8, 400, 1, std::numbers::pi),                // sufficient
          make_config(1000000, 64, 100, 1, std::numbers::pi)}) {          // intermediate
        const auto plan = make_plan(cfg);
        switch (classify_regime(cfg)) {
            case Regime::kInsufficient: REQUIRE(plan.k == 1); break;
            case Regime::kSufficient: REQUIRE(plan.k == cfg.m); break;
            case Regime::kIntermediate:
                REQUIRE(plan.k > 1);
                REQUIRE(plan.k < cfg.m);
                break;
        }
    }
}

TEST_CASE("index sets follow the interleaved allocation") {
    const auto plan = small_fixture();
    REQUIRE(index_set(plan, 1) == std::vector<std::uint64_t>{1, 3});
    REQUIRE(index_set(plan, 2) == std::vector<std::uint64_t>{1, 3});
    REQUIRE(index_set(plan, 3) == std::vector<std::uint64_t>{2, 4});
    REQUIRE(index_set(plan, 4) == std::vector<std::uint64_t>{2, 4});
    for (std::uint64_t i = 1; i <= 4; ++i) REQUIRE(coverage_count(plan, i) == 2);
    REQUIRE(coverage_count(plan, 5) == 0);
    REQUIRE_THROWS_AS(index_set(plan, 0), ValidationError);
    REQUIRE_THROWS_AS(index_set(plan, 5), ValidationError);
}

TEST_CASE("k = 1 partitions and k = m replicates") {
    ProtocolPlan partition = small_fixture();
    partition.k = 1;
    partition.btilde = 1;
    for (std::uint64_t j = 1; j <= 4; ++j)
        REQUIRE(index_set(partition, j) == std::vector<std::uint64_t>{j});

    ProtocolPlan replicated = small_fixture();
    replicated.k = 4;
    replicated.btilde = 3;
    for (std::uint64_t j = 1; j <= 4; ++j)
        REQUIRE(index_set(replicated, j) == std::vector<std::uint64_t>{1, 2, 3});
    for (std::uint64_t i = 1; i <= 3; ++i) REQUIRE(coverage_count(replicated, i) == 4);
}

TEST_CASE("coverage equals k below the truncation index even when k does not divide m") {
    ProtocolPlan plan = small_fixture();
    plan.k = 3;  // 3 does not divide 4
    plan.btilde = 2;
    const std::uint64_t full = plan.config.m * plan.btilde / plan.k;  // floor(8/3) = 2
    for (std::uint64_t i = 1; i <= full; ++i) REQUIRE(coverage_count(plan, i) == plan.k);
    // direct cross-check against the definition
    for (std::uint64_t i = 1; i <= plan_max_index(plan); ++i) {
        std::uint64_t direct = 0;
        for (std::uint64_t j = 1; j <= plan.config.m; ++j)
            for (const std::uint64_t idx : index_set(plan, j))
                if (idx == i) ++direct;
        REQUIRE(coverage_count(plan, i) == direct);
    }
}

TEST_CASE("payload is exactly btilde * b0 bits and within budget") {
    const auto plan = make_plan(make_config(1000000, 100, 64, 1, std::numbers::pi));
    const CoefficientSpec spec{PolynomialDecay{0.5, 0.5},
                               std::max<std::size_t>(64, plan_max_index(plan))};
    const auto theta = sample_coefficients(spec, 1.0, 1, 3);
    const auto row = sample_observation_row(theta, plan.config.n, 1, 9);
    const auto msg = local_encode(plan, row, 9);
    REQUIRE(msg.bit_length == 55);  // 5 values * 11 bits
    REQUIRE(msg.bit_length <= plan.config.b);
    REQUIRE(msg.payload.size() == 7);  // ceil(55 / 8)
}

TEST_CASE("encoding is deterministic and machine-dependent") {
    auto plan = small_fixture();
    plan.quantizer = make_quantizer(0.01, 1.0);
    plan.delta = plan.quantizer.delta;
    plan.b0 = plan.quantizer.bits_per_value;
    // off-grid values, so the ordinal index actually moves with the dither
    ObservationRow row1{1, {0.237, -0.352, 0.1481, 0.0123}};
    ObservationRow row2 = row1;
    row2.machine = 2;

    const auto a = local_encode(plan, row1, 7);
    const auto b = local_encode(plan, row1, 7);
    REQUIRE(a.payload == b.payload);
    // identical observations, different machine: distinct dither keys
    const auto c = local_encode(plan, row2, 7);
    REQUIRE(a.payload != c.payload);

    ObservationRow short_row{1, {0.1, 0.2}};
    REQUIRE_THROWS_AS(local_encode(plan, short_row, 7), ValidationError);
}

TEST_CASE("decoding averages exactly the machines covering each index") {
    const auto plan = small_fixture();
    const CoefficientSpec spec{PolynomialDecay{0.5, 0.9}, 4};
    const auto theta = sample_coefficients(spec, 1.0, 1, 1);
    const std::uint64_t seed = 31;
    const auto messages = encode_all(plan, theta, seed);
    const auto est = central_decode(plan, messages, seed);
    REQUIRE(est.values.size() == 4);

    // manual mirror: theta-hat_1 averages machines {1, 2}; theta-hat_2 averages {3, 4}
    const auto decoded = [&](std::uint64_t i, std::uint64_t j, std::uint64_t slot) {
        BitReader bits(messages[j - 1].payload, messages[j - 1].bit_length);
        std::uint64_t idx = 0;
        for (std::uint64_t s = 0; s <= slot; ++s) idx = bits.read(plan.b0);
        return decode_value(idx, DitherKey{seed, i, j}, plan.quantizer);
    };
    REQUIRE(est.values[0] == Approx((decoded(1, 1, 0) + decoded(1, 2, 0)) / 2.0).margin(1e-15));
    REQUIRE(est.values[1] == Approx((decoded(2, 3, 0) + decoded(2, 4, 0)) / 2.0).margin(1e-15));
    REQUIRE(est.at(5) == 0.0);
}

TEST_CASE("fine grids make the estimate match theta to quantizer resolution") {
    // near-noiseless: n = 1e12 and delta = 1e-9
    ProtocolPlan plan;
    plan.config = make_config(1000000000000ull, 2, 128, 1, std::numbers::pi);
    plan.quantizer = make_quantizer(1e-9, 1.0);
    plan.delta = plan.quantizer.delta;
    plan.b0 = plan.quantizer.bits_per_value;
    plan.btilde = 4;
    plan.k = 1;
    plan.istar = 8;
    REQUIRE(plan.btilde * static_cast<std::uint64_t>(plan.b0) <= plan.config.b);

    const CoefficientSpec spec{PolynomialDecay{0.5, 0.9}, 8};
    const auto theta = sample_coefficients(spec, 1.0, 1, 2);
    const auto messages = encode_all(plan, theta, 77);
    const auto est = central_decode(plan, messages, 77);
    for (std::uint64_t i = 1; i <= 8; ++i)
        REQUIRE(est.at(i) == Approx(theta.values[i - 1]).margin(1e-5));
}

TEST_CASE("decoder validates the message set") {
    const auto plan = small_fixture();
    const CoefficientSpec spec{PolynomialDecay{0.5, 0.9}, 4};
    const auto theta = sample_coefficients(spec, 1.0, 1, 1);
    auto messages = encode_all(plan, theta, 3);

    auto missing = messages;
    missing.pop_back();
    REQUIRE_THROWS_AS(central_decode(plan, missing, 3), ValidationError);

    auto duplicated = messages;
    duplicated[3] = duplicated[0];
    REQUIRE_THROWS_AS(central_decode(plan, duplicated, 3), ValidationError);

    auto truncated = messages;
    truncated[1].bit_length -= plan.b0;
    REQUIRE_THROWS_AS(central_decode(plan, truncated, 3), ValidationError);
}

TEST_CASE("paper-exact divisor coincides with coverage averaging below istar") {
    const auto plan = small_fixture();
    const CoefficientSpec spec{PolynomialDecay{0.5, 0.9}, 4};
    const auto theta = sample_coefficients(spec, 1.0, 1, 4);
    const auto messages = encode_all(plan, theta, 8);
    const auto by_coverage = central_decode(plan, messages, 8);
    const auto by_k = central_decode(plan, messages, 8, DecodeOptions{true});
    REQUIRE(by_coverage.values == by_k.values);
}

TEST_CASE("estimator is unbiased for interior coefficients") {
    const auto plan = small_fixture();
    const CoefficientSpec spec{PolynomialDecay{0.5, 0.25}, 4};
    const auto theta = sample_coefficients(spec, 1.0, 1, 6);

    const std::uint64_t trials = 10000;
    std::vector<std::vector<double>> errors(4, std::vector<double>(trials));
    for (std::uint64_t t = 0; t < trials; ++t) {
        const std::uint64_t seed = rng::derive(17, 0xb1a5, t);
        const auto est = central_decode(plan, encode_all(plan, theta, seed), seed);
        for (std::uint64_t i = 1; i <= 4; ++i)
            errors[i - 1][t] = est.at(i) - theta.values[i - 1];
    }
    for (std::uint64_t i = 0; i < 4; ++i) {
        const auto mv = stats::mean_var(errors[i]);
        REQUIRE(std::abs(mv.mean) <= 3.0 * mv.std_error());
    }
}

TEST_CASE("pipeline is bit-for-bit reproducible and respects the sum constraint") {
    const auto plan = make_plan(make_config(10000, 6, 40, 1, std::numbers::pi));
    const CoefficientSpec spec{PolynomialDecay{0.5, 0.5},
                               std::max<std::size_t>(8, plan_max_index(plan))};
    const auto theta = sample_coefficients(spec, 1.0, 1, 5);

    const auto m1 = encode_all(plan, theta, 13);
    const auto m2 = encode_all(plan, theta, 13);
    std::uint64_t total_bits = 0;
    for (std::size_t j = 0; j < m1.size(); ++j) {
        REQUIRE(m1[j].payload == m2[j].payload);
        total_bits += m1[j].bit_length;
    }
    REQUIRE(total_bits <= plan.config.m * plan.config.b);

    const auto e1 = central_decode(plan, m1, 13);
    const auto e2 = central_decode(plan, m2, 13);
    REQUIRE(e1.values == e2.values);
}

TEST_CASE("message files round-trip through the framed format") {
    const auto plan = small_fixture();
    const CoefficientSpec spec{PolynomialDecay{0.5, 0.9}, 4};
    const auto theta = sample_coefficients(spec, 1.0, 1, 9);
    const auto messages = encode_all(plan, theta, 21);

    std::stringstream buffer;
    write_transcript(buffer, messages);
    const auto back = read_transcript(buffer);
    REQUIRE(back.size() == messages.size());
    for (std::size_t j = 0; j < messages.size(); ++j) {
        REQUIRE(back[j].machine == messages[j].machine);
        REQUIRE(back[j].bit_length == messages[j].bit_length);
        REQUIRE(back[j].payload == messages[j].payload);
    }
    const auto est = central_decode(plan, back, 21);
    REQUIRE(est.values == central_decode(plan, messages, 21).values);

    std::stringstream bad("XXXXXXXX\x00\x00\x00\x01");
    REQUIRE_THROWS_AS(read_message(bad), ValidationError);
}
