#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "gridrelax/error.hpp"
#include "gridrelax/matpower_io.hpp"
#include "support/networks.hpp"

using namespace gridrelax;

namespace {

std::string base_text() { return std::string(fixture_text(Fixture::kCase3Base)); }

std::string replace_once(std::string text, const std::string& from, const std::string& to) {
    const auto pos = text.find(from);
    REQUIRE(pos != std::string::npos);
    return text.replace(pos, from.size(), to);
}

ErrorCode error_of(const std::string& text) {
    try {
        to_network(parse_case(text));
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error raised");
    return ErrorCode::kIo;
}

std::string message_of(const std::string& text) {
    try {
        to_network(parse_case(text));
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

constexpr const char* kOneBus = R"(mpc.baseMVA = 100;
mpc.bus = [
	1	3	50	10	0	0	1	1	0	230	1	1.1	0.9;
];
)";

}  // namespace

TEST_SUITE("matpower_io") {

TEST_CASE("fixture tables") {
    const CaseFile cf = parse_case(fixture_text(Fixture::kCase3Base));
    CHECK(cf.name == "case3_base");
    CHECK(cf.base_mva == 100.0);
    CHECK(cf.bus_table.size() == 3);
    CHECK(cf.branch_table.size() == 3);
    CHECK(cf.gen_table.size() == 3);
    CHECK(cf.gencost_table.size() == 3);
}

TEST_CASE("minimal one-bus file") {
    const CaseFile cf = parse_case(kOneBus);
    CHECK(cf.bus_table.size() == 1);
    CHECK(cf.branch_table.empty());
    const Network net = to_network(cf);
    CHECK(net.buses.size() == 1);
    CHECK(net.reference_bus == 1);
    CHECK(net.buses[0].pd == doctest::Approx(0.5));
}

TEST_CASE("per-unit mapping of the fixture") {
    const Network net = load_fixture(Fixture::kCase3Base);
    REQUIRE(net.branches.size() == 3);
    CHECK(net.buses[0].pd == doctest::Approx(1.10));
    CHECK_FALSE(net.branches[0].s_max.has_value());
    REQUIRE(net.branches[1].s_max.has_value());
    CHECK(*net.branches[1].s_max == doctest::Approx(0.5));
    CHECK_FALSE(net.branches[2].s_max.has_value());
    for (const Branch& br : net.branches) {
        CHECK(br.tap == 1.0);
        CHECK(br.angle_max == doctest::Approx(std::numbers::pi / 6));
        CHECK(br.angle_min == doctest::Approx(-std::numbers::pi / 6));
    }
    CHECK(net.reference_bus == 1);
    CHECK(net.generators[2].pmax == 0.0);
    CHECK(net.generators[0].c2 == doctest::Approx(0.11));
    CHECK(net.generators[1].c1 == doctest::Approx(1.2));

    const Network tight = load_fixture(Fixture::kCase3Tight);
    CHECK(tight.branches[0].angle_max == doctest::Approx(std::numbers::pi / 10));
}

TEST_CASE("unconstrained angle limits and linear costs") {
    std::string text = base_text();
    text = replace_once(text, "1\t-30.0\t30.0;\n\t2\t3", "1\t0\t0;\n\t2\t3");
    text = replace_once(text, "1\t-30.0\t30.0;\n\t1\t3", "1\t-360\t360;\n\t1\t3");
    text = replace_once(text, "2\t0.0\t0.0\t3\t0.110\t5.0\t0.0;", "2\t0\t0\t2\t5.0\t7.0;");
    const Network net = to_network(parse_case(text));
    CHECK(net.branches[0].angle_min == -kMaxAngleLimit);
    CHECK(net.branches[0].angle_max == kMaxAngleLimit);
    CHECK(net.branches[1].angle_max == kMaxAngleLimit);
    CHECK(net.generators[0].c2 == 0.0);
    CHECK(net.generators[0].c1 == 5.0);
    CHECK(net.generators[0].c0 == 7.0);
}

TEST_CASE("out-of-service rows are dropped") {
    std::string text = replace_once(base_text(), "0.0\t1\t-30.0\t30.0;\n\t1\t3", "0.0\t0\t-30.0\t30.0;\n\t1\t3");
    CHECK(to_network(parse_case(text)).branches.size() == 2);
}

TEST_CASE("malformed inputs map to error classes") {
    SUBCASE("missing baseMVA") {
        CHECK(error_of(replace_once(base_text(), "mpc.baseMVA = 100.0;", "")) == ErrorCode::kMissingField);
    }
    SUBCASE("missing bus table") {
        CHECK(error_of("mpc.baseMVA = 100;\n") == ErrorCode::kMissingField);
    }
    SUBCASE("branch row with 12 columns reports its line") {
        const std::string text = replace_once(base_text(), "\t1\t3\t0.065\t0.62\t0.45\t0.0", "\t1\t3\t0.065\t0.62\t0.0");
        CHECK(error_of(text) == ErrorCode::kMalformedRow);
        CHECK(message_of(text).find("line 33") != std::string::npos);
    }
    SUBCASE("non-numeric token") {
        CHECK(error_of(replace_once(base_text(), "110.0\t40.0", "abc\t40.0")) == ErrorCode::kMalformedRow);
    }
    SUBCASE("piecewise-linear cost") {
        CHECK(error_of(replace_once(base_text(), "2\t0.0\t0.0\t3\t0.110", "1\t0.0\t0.0\t3\t0.110")) ==
              ErrorCode::kUnsupportedCost);
    }
    SUBCASE("cubic cost") {
        CHECK(error_of(replace_once(base_text(), "2\t0.0\t0.0\t3\t0.110\t5.0\t0.0;",
                                    "2\t0.0\t0.0\t4\t1.0\t0.110\t5.0\t0.0;")) == ErrorCode::kUnsupportedCost);
    }
    SUBCASE("no reference bus") {
        CHECK(error_of(replace_once(base_text(), "1\t3\t110.0", "1\t1\t110.0")) == ErrorCode::kNoReference);
    }
    SUBCASE("duplicate bus id") {
        CHECK(error_of(replace_once(base_text(), "3\t2\t95.0", "2\t2\t95.0")) == ErrorCode::kDuplicateId);
    }
    SUBCASE("missing gencost rows") {
        CHECK(error_of(replace_once(base_text(), "\t2\t0.0\t0.0\t3\t0.0\t0.0\t0.0;\n", "")) ==
              ErrorCode::kMissingField);
    }
    SUBCASE("unreadable file") {
        CHECK_THROWS_AS(load_case("/nonexistent/case.m"), Error);
    }
}

TEST_CASE("comments and cell arrays are skipped") {
    std::string text = base_text();
    text = replace_once(text, "mpc.gencost", "mpc.bus_name = {\n\t'a';\n\t'b';\n};\nmpc.gencost");
    text = replace_once(text, "1.1\t0.9;\n\t2", "1.1\t0.9; % trailing\n\t2");
    CHECK(to_network(parse_case(text)).buses.size() == 3);
}

TEST_CASE("serialize canonical form") {
    const Network net = load_fixture(Fixture::kCase3Base);
    const std::string text = serialize(net);
    // tap 1 and shift 0 print as zero ratio/angle.
    CHECK(text.find("\t1\t2\t0.042\t0.9\t0.3\t0\t0\t0\t0\t0\t1\t-30\t30;") != std::string::npos);

    const Network back = to_network(parse_case(text));
    REQUIRE(back.branches.size() == net.branches.size());
    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        CHECK(back.branches[k].r == net.branches[k].r);
        CHECK(back.branches[k].s_max.has_value() == net.branches[k].s_max.has_value());
    }
    CHECK(back.buses[2].qd == doctest::Approx(net.buses[2].qd));
}

TEST_CASE("one-bus network serializes an empty branch table") {
    const std::string text = serialize(to_network(parse_case(kOneBus)));
    CHECK(text.find("mpc.branch = [\n];") != std::string::npos);
    CHECK(to_network(parse_case(text)).branches.empty());
}

TEST_CASE("serialize -> parse -> serialize is byte-identical") {
    for (Fixture f : {Fixture::kCase3Base, Fixture::kCase3Tight}) {
        const std::string once = serialize(load_fixture(f));
        CHECK(serialize(to_network(parse_case(once))) == once);
    }
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 100; ++i) {
        const Network net = gridrelax::testing::random_network(rng);
        REQUIRE(validate(net).empty());
        const std::string once = serialize(net);
        const std::string twice = serialize(to_network(parse_case(once)));
        CHECK_MESSAGE(twice == once, "random network #" << i);
    }
}

TEST_CASE("save and load through a file") {
    const Network net = load_fixture(Fixture::kCase3Tight);
    const auto path = std::filesystem::temp_directory_path() / "gridrelax_roundtrip.m";
    save_case(net, path);
    const Network back = load_case(path);
    CHECK(serialize(back) == serialize(net));
    std::filesystem::remove(path);
}

}
