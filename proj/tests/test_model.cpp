#include <gtest/gtest.h>

#include <algorithm>

#include "sdkit/model.hpp"
#include "test_support.hpp"

using namespace sdkit;
using namespace sdkit::expr;

namespace {

Model two_stock() {
    Model m("two", {0, 10, 1});
    m.add_parameter("k", 0.5)
        .add_stock("A", 10)
        .add_stock("B", 0)
        .add_flow("ab", "A", "B", mul(ref("k"), ref("A")))
        .add_output("Sum", add(ref("A"), ref("B")));
    return m;
}

bool has_code(const std::vector<Diagnostic>& d, DiagnosticCode code) {
    return std::ranges::any_of(d, [&](const Diagnostic& x) { return x.code == code; });
}

}  // namespace

TEST(ValidateModel, WellFormedModelHasNoDiagnostics) { EXPECT_TRUE(validate_model(two_stock()).empty()); }

TEST(ValidateModel, UnresolvedStockInFlow) {
    Model m = two_stock();
    m.add_flow("bad", "Memroy", std::nullopt, lit(1));
    const auto d = validate_model(m);
    ASSERT_EQ(d.size(), 1u);
    EXPECT_EQ(d[0].code, DiagnosticCode::UnresolvedReference);
    EXPECT_EQ(d[0].identifier, "Memroy");
    EXPECT_FALSE(d[0].message.empty());
}

TEST(ValidateModel, DuplicateParameter) {
    Model m("dup", {0, 1, 0.1});
    m.add_parameter("k", 1).add_parameter("k", 2);
    const auto d = validate_model(m);
    ASSERT_EQ(d.size(), 1u);
    EXPECT_EQ(d[0].code, DiagnosticCode::DuplicateIdentifier);
    EXPECT_EQ(d[0].identifier, "k");
}

TEST(ValidateModel, NamespaceIsSharedAcrossKinds) {
    Model m = two_stock();
    m.add_output("k", lit(1));
    EXPECT_TRUE(has_code(validate_model(m), DiagnosticCode::DuplicateIdentifier));
}

TEST(ValidateModel, FlowShape) {
    Model m = two_stock();
    m.add_flow("nowhere", std::nullopt, std::nullopt, lit(1));
    m.add_flow("loop", "A", "A", lit(1));
    const auto d = validate_model(m);
    EXPECT_EQ(std::ranges::count_if(d, [](auto& x) { return x.code == DiagnosticCode::InvalidFlow; }), 2);
}

TEST(ValidateModel, TimeSpecInvariants) {
    for (TimeSpec ts : {TimeSpec{1, 1, 0.1}, TimeSpec{0, 1, 0}, TimeSpec{0, 1, 2}, TimeSpec{2, 1, 0.1}}) {
        Model m("t", ts);
        EXPECT_TRUE(has_code(validate_model(m), DiagnosticCode::BadTimeSpec));
    }
    Model ok("t", {0, 1, 1});
    EXPECT_TRUE(validate_model(ok).empty());
}

TEST(ValidateModel, ExpressionReferences) {
    Model m = two_stock();
    m.add_output("o1", ref("missing"));
    m.add_output("o2", ref("ab"));             // flows are not values
    m.add_output("o3", lookup("k", time()));   // k is not a lookup
    const auto d = validate_model(m);
    EXPECT_EQ(std::ranges::count_if(d, [](auto& x) { return x.code == DiagnosticCode::UnresolvedReference; }), 2);
    EXPECT_TRUE(has_code(d, DiagnosticCode::LookupMisuse));
}

TEST(ValidateModel, LookupTables) {
    Model m("l", {0, 1, 0.5});
    m.add_lookup("Empty", LookupTable{});
    m.add_lookup("Unsorted", LookupTable({{1, 0}, {0, 0}}));
    m.add_lookup("FromFile", LookupTable{}, "x.csv");
    const auto d = validate_model(m);
    EXPECT_EQ(std::ranges::count_if(d, [](auto& x) { return x.code == DiagnosticCode::InvalidLookup; }), 2);
}

TEST(ValidateModel, ReservedAndNonFinite) {
    Model m("r", {0, 1, 0.5});
    m.add_parameter("time", 1).add_stock("S", INFINITY);
    const auto d = validate_model(m);
    EXPECT_TRUE(has_code(d, DiagnosticCode::ReservedIdentifier));
    EXPECT_TRUE(has_code(d, DiagnosticCode::NonFiniteValue));
}

TEST(NetDerivatives, SingleBoundaryInflow) {
    Model m("in", {0, 1, 0.1});
    m.add_stock("S", 0).add_flow("f", std::nullopt, "S", lit(5));
    const auto d = net_derivatives(m, {{"S", 0}}, 0);
    EXPECT_EQ(d.at("S"), 5.0);
}

TEST(NetDerivatives, InternalTransferIsAntisymmetric) {
    Model m("in", {0, 1, 0.1});
    m.add_stock("A", 1).add_stock("B", 1).add_flow("f", "A", "B", lit(2));
    const auto d = net_derivatives(m, {{"A", 1}, {"B", 1}}, 0);
    EXPECT_EQ(d.at("A"), -2.0);
    EXPECT_EQ(d.at("B"), 2.0);
}

TEST(NetDerivatives, InflowMinusOutflowWithLookup) {
    // 0.025 * 100 - 0.017 * 40 = 2.5 - 0.68 = 1.82
    Model m("np", {0, 60, 0.05});
    m.add_parameter("k", 0.025)
        .add_parameter("d", 0.017)
        .add_lookup("L", LookupTable({{0, 100}, {60, 100}}))
        .add_stock("S", 40)
        .add_flow("in", std::nullopt, "S", mul(ref("k"), lookup("L", time())))
        .add_flow("out", "S", std::nullopt, mul(ref("d"), ref("S")));
    const auto d = net_derivatives(m, {{"S", 40}}, 12.0);
    EXPECT_NEAR(d.at("S"), 1.82, 1e-14);
}

TEST(NetDerivatives, ErrorsCarryFlowName) {
    Model m("e", {0, 1, 0.1});
    m.add_parameter("z", 0).add_stock("S", 1).add_flow("ratio", "S", std::nullopt, div(ref("S"), ref("z")));
    try {
        net_derivatives(m, {{"S", 1}}, 0);
        FAIL();
    } catch (const FlowEvalError& e) {
        EXPECT_EQ(e.flow(), "ratio");
        EXPECT_EQ(e.kind(), EvalErrorKind::DivisionByZero);
    }
}

TEST(NetDerivatives, MissingStockValueIsAnError) {
    EXPECT_THROW(net_derivatives(two_stock(), {{"A", 1}}, 0), EvalError);
}

// Closed random networks: contributions cancel exactly and repeated
// evaluation is bit-identical.
TEST(NetDerivatives, ClosedSystemConservationProperty) {
    test_support::ModelGenerator gen(11);
    for (int iter = 0; iter < 200; ++iter) {
        Model m("closed", {0, 1, 0.1});
        const int n = 2 + gen.pick(4);
        std::vector<std::string> stocks;
        ValueMap values;
        for (int i = 0; i < n; ++i) {
            stocks.push_back("S" + std::to_string(i));
            m.add_stock(stocks.back(), 1.0);
            values[stocks.back()] = std::uniform_real_distribution<double>(0.0, 100.0)(gen.rng());
        }
        m.add_parameter("k", 0.3);
        const int flows = 1 + gen.pick(6);
        for (int f = 0; f < flows; ++f) {
            const int a = gen.pick(n);
            const int b = (a + 1 + gen.pick(n - 1)) % n;
            m.add_flow("f" + std::to_string(f), stocks[a], stocks[b], mul(ref("k"), ref(stocks[a])));
        }
        ASSERT_TRUE(validate_model(m).empty());
        const auto d1 = net_derivatives(m, values, 0.5);
        const auto d2 = net_derivatives(m, values, 0.5);
        double total = 0.0, scale = 0.0;
        for (const auto& [name, v] : d1) {
            EXPECT_EQ(std::bit_cast<std::uint64_t>(v), std::bit_cast<std::uint64_t>(d2.at(name)));
            total += v;
            scale += std::abs(v);
        }
        // Each rate enters once with + and once with -, so the sum only
        // carries rounding from the per-stock accumulation.
        EXPECT_LE(std::abs(total), 1e-13 * std::max(1.0, scale));
    }
}

TEST(NetDerivatives, TwoStockClosedSumIsExactlyZero) {
    Model m = two_stock();
    for (double a : {0.1, 3.7, 1e6, 123.456}) {
        const auto d = net_derivatives(m, {{"A", a}, {"B", 2.0}}, 0);
        EXPECT_EQ(d.at("A") + d.at("B"), 0.0);
    }
}

TEST(Model, StructuralEqualityTracksDeclarationOrder) {
    Model a("m", {0, 1, 0.5}), b("m", {0, 1, 0.5});
    a.add_parameter("k", 1).add_stock("S", 0);
    b.add_stock("S", 0).add_parameter("k", 1);
    EXPECT_FALSE(structurally_equal(a, b));
    Model c("m", {0, 1, 0.5});
    c.add_parameter("k", 1).add_stock("S", 0);
    EXPECT_TRUE(structurally_equal(a, c));
}
