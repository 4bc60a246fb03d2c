#include <gtest/gtest.h>

#include <cmath>

#include "sdkit/expression.hpp"
#include "sdkit/lookup.hpp"
#include "test_support.hpp"

using namespace sdkit;
using namespace sdkit::expr;

TEST(Lookup, InterpolatesInsideRange) {
    LookupTable t({{0, 10}, {10, 20}});
    EXPECT_DOUBLE_EQ(interpolate_lookup(t, 5), 15.0);
    EXPECT_DOUBLE_EQ(interpolate_lookup(t, 0), 10.0);
    EXPECT_DOUBLE_EQ(interpolate_lookup(t, 10), 20.0);
    EXPECT_DOUBLE_EQ(interpolate_lookup(t, 2.5), 12.5);
}

TEST(Lookup, ClampsOutsideRange) {
    LookupTable t({{1, 4}, {55, 8}});
    EXPECT_EQ(interpolate_lookup(t, 60), 8.0);
    EXPECT_EQ(interpolate_lookup(t, 0), 4.0);
    EXPECT_FALSE(t.covers(60));
    EXPECT_FALSE(t.covers(0));
    EXPECT_TRUE(t.covers(1));
}

TEST(Lookup, SinglePointIsConstant) {
    LookupTable t({{3, 7}});
    EXPECT_EQ(interpolate_lookup(t, -100), 7.0);
    EXPECT_EQ(interpolate_lookup(t, 3), 7.0);
    EXPECT_EQ(interpolate_lookup(t, 100), 7.0);
}

TEST(Lookup, PiecewiseLinearAndContinuous) {
    LookupTable t({{0, 1}, {1, 3}, {4, -2}, {5, 0}});
    // Exact at knots, continuous across them, linear between.
    for (const auto& p : t.points()) {
        EXPECT_DOUBLE_EQ(interpolate_lookup(t, p.t), p.value);
        EXPECT_NEAR(interpolate_lookup(t, p.t - 1e-9), p.value, 1e-7);
        EXPECT_NEAR(interpolate_lookup(t, p.t + 1e-9), p.value, 1e-7);
    }
    const double a = interpolate_lookup(t, 1.5), b = interpolate_lookup(t, 2.5), c = interpolate_lookup(t, 3.5);
    EXPECT_NEAR(b - a, c - b, 1e-12);
}

TEST(Lookup, DetectsInvalidPoints) {
    EXPECT_EQ(LookupTable({{0, 1}, {0, 2}}).first_invalid_point(), 1u);
    EXPECT_EQ(LookupTable({{0, 1}, {1, NAN}}).first_invalid_point(), 1u);
    EXPECT_EQ(LookupTable({{0, 1}, {1, 2}}).first_invalid_point(), 2u);
}

TEST(Expression, Arithmetic) {
    Environment env{{"k", 3.0}};
    EXPECT_EQ(eval_expression(add(mul(lit(2), ref("k")), lit(1)), env, {}), 7.0);
    EXPECT_EQ(eval_expression(sub(lit(1), div(ref("k"), lit(2))), env, {}), -0.5);
    EXPECT_EQ(eval_expression(neg(ref("k")), env, {}), -3.0);
}

TEST(Expression, Builtins) {
    Environment env{{"a", 2.0}, {"b", -1.0}};
    EXPECT_DOUBLE_EQ(eval_expression(call(Builtin::Exp, {lit(1)}), env, {}), std::exp(1.0));
    EXPECT_EQ(eval_expression(call(Builtin::Min, {ref("a"), ref("b")}), env, {}), -1.0);
    EXPECT_EQ(eval_expression(call(Builtin::Max, {ref("a"), ref("b")}), env, {}), 2.0);
}

TEST(Expression, LookupApplicationUsesTime) {
    LookupSet lookups{{"RealNaives", LookupTable({{0, 10}, {10, 20}})}};
    Environment env{{"time", 5.0}};
    EXPECT_EQ(eval_expression(lookup("RealNaives", time()), env, lookups), 15.0);
}

TEST(Expression, Errors) {
    Environment env{{"x", 1.0}, {"y", 0.0}};
    try {
        eval_expression(div(ref("x"), ref("y")), env, {});
        FAIL();
    } catch (const EvalError& e) {
        EXPECT_EQ(e.kind(), EvalErrorKind::DivisionByZero);
    }
    try {
        eval_expression(ref("z"), env, {});
        FAIL();
    } catch (const EvalError& e) {
        EXPECT_EQ(e.kind(), EvalErrorKind::UnboundIdentifier);
    }
    try {
        eval_expression(time(), env, {});
        FAIL();
    } catch (const EvalError& e) {
        EXPECT_EQ(e.kind(), EvalErrorKind::UnboundIdentifier);
    }
    try {
        eval_expression(call(Builtin::Exp, {lit(1000)}), env, {});
        FAIL();
    } catch (const EvalError& e) {
        EXPECT_EQ(e.kind(), EvalErrorKind::NonFiniteResult);
    }
    try {
        eval_expression(lookup("L", lit(0)), env, {});
        FAIL();
    } catch (const EvalError& e) {
        EXPECT_EQ(e.kind(), EvalErrorKind::UnknownLookup);
    }
}

TEST(Expression, StructuralEqualityIsBitwiseOnLiterals) {
    EXPECT_TRUE(structurally_equal(add(lit(1), ref("a")), add(lit(1), ref("a"))));
    EXPECT_FALSE(structurally_equal(lit(0.0), lit(-0.0)));
    EXPECT_FALSE(structurally_equal(add(lit(1), ref("a")), sub(lit(1), ref("a"))));
    EXPECT_FALSE(structurally_equal(neg(lit(2)), lit(-2)));
}

// The compiled postfix form must agree bit-for-bit with the tree walker.
TEST(Expression, CompiledMatchesTreeWalkProperty) {
    test_support::ModelGenerator gen(7);
    const std::vector<std::string> names{"a", "b", "c"};
    const std::vector<std::string> lookup_names{"L"};
    LookupTable table({{-1, 2}, {0.5, -3}, {4, 1}});
    LookupSet lookups{{"L", table}};
    std::vector<const LookupTable*> lookup_ptrs{&table};
    auto slot_of = [&](const std::string& n) -> int {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == n) return static_cast<int>(i);
        return -1;
    };
    auto lookup_of = [](const std::string& n) { return n == "L" ? 0 : -1; };

    int compared = 0;
    for (int iter = 0; iter < 2000; ++iter) {
        Expr e = gen.expression(names, lookup_names);
        std::vector<double> slots{gen.real(), gen.real(), gen.real()};
        const double t = gen.real();
        Environment env{{"a", slots[0]}, {"b", slots[1]}, {"c", slots[2]}, {"time", t}};
        const auto compiled = CompiledExpr::compile(e, slot_of, lookup_of);
        std::vector<char> clamped(1, 0);
        std::optional<double> tree, flat;
        std::optional<EvalErrorKind> tree_err, flat_err;
        try {
            tree = eval_expression(e, env, lookups);
        } catch (const EvalError& err) {
            tree_err = err.kind();
        }
        try {
            flat = compiled.evaluate(slots, t, lookup_ptrs, clamped);
        } catch (const EvalError& err) {
            flat_err = err.kind();
        }
        ASSERT_EQ(tree.has_value(), flat.has_value()) << "iteration " << iter;
        if (tree) {
            ASSERT_EQ(std::bit_cast<std::uint64_t>(*tree), std::bit_cast<std::uint64_t>(*flat));
            ++compared;
        }
    }
    EXPECT_GT(compared, 1000);
}
