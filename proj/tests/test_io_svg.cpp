#include <gtest/gtest.h>

#include <random>
#include <regex>
#include <set>

#include "sdkit/io.hpp"
#include "sdkit/svg.hpp"
#include "test_support.hpp"

using namespace sdkit;

namespace {

std::size_t count(const std::string& haystack, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = haystack.find(needle); pos != std::string::npos; pos = haystack.find(needle, pos + 1)) ++n;
    return n;
}

}  // namespace

TEST(Csv, ParsesSeriesWithCommentsAndBlankLines) {
    const auto pts = parse_series_csv("# SYNTHETIC\n\nt,value\n1,100\n 2 , 99.5 \r\n\n3,1e2\n");
    ASSERT_EQ(pts.size(), 3u);
    EXPECT_EQ(pts[1].t, 2.0);
    EXPECT_EQ(pts[1].value, 99.5);
    EXPECT_EQ(pts[2].value, 100.0);
}

TEST(Csv, ErrorsCarryLineNumbers) {
    struct Case {
        const char* text;
        int line;
    };
    for (const Case& c : {Case{"t,v\n1,2\n", 1}, Case{"t,value\n1,2\n1,3\n", 3}, Case{"t,value\n1,abc\n", 2},
                          Case{"t,value\n1,2,3\n", 2}, Case{"t,value\n", 2}, Case{"", 1}, Case{"t,value\n1,inf\n", 2}}) {
        try {
            parse_series_csv(c.text, "f.csv");
            ADD_FAILURE() << c.text;
        } catch (const CsvError& e) {
            EXPECT_EQ(e.line(), c.line) << c.text;
            EXPECT_NE(std::string(e.what()).find("f.csv:"), std::string::npos);
        }
    }
}

TEST(Csv, SeriesRoundTripIsExact) {
    std::mt19937_64 rng(1);
    std::vector<LookupPoint> pts;
    double t = -3.0;
    for (int i = 0; i < 200; ++i) {
        t += std::uniform_real_distribution<double>(1e-6, 2.0)(rng);
        pts.push_back({t, std::uniform_real_distribution<double>(-1e6, 1e6)(rng)});
    }
    const auto back = parse_series_csv(format_series_csv(pts, "line one\nline two"));
    ASSERT_EQ(back.size(), pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        EXPECT_EQ(back[i].t, pts[i].t);
        EXPECT_EQ(back[i].value, pts[i].value);
    }
}

TEST(Csv, ResultLayout) {
    SimulationResult r;
    r.times = {0, 0.5};
    r.series = {{"A", {1, 2}}, {"B", {0.1, 0.25}}};
    EXPECT_EQ(format_result_csv(r), "t,A,B\n0,1,0.1\n0.5,2,0.25\n");
}

TEST(Files, ModelLoadResolvesLookupsRelativeToModel) {
    test_support::TempDir dir("load");
    write_text_file(dir / "data/l.csv", "t,value\n0,1\n10,2\n");
    write_text_file(dir / "models/m.sdl",
                    "model m\ntime 0 .. 10 step 1\nlookup L from \"../data/l.csv\"\noutput o = L(time)\n");
    const Model m = load_model_file(dir / "models/m.sdl");
    EXPECT_EQ(m.lookups()[0].table.size(), 2u);

    write_text_file(dir / "models/bad.sdl", "model m\ntime 0 .. 10 step 1\nlookup L from \"../data/none.csv\"\n");
    EXPECT_THROW(load_model_file(dir / "models/bad.sdl"), ModelLoadError);
    EXPECT_THROW(load_model_file(dir / "missing.sdl"), ModelLoadError);

    write_text_file(dir / "models/syntax.sdl", "model m\ntime 0 .. 10 step 1\nstock = 2\n");
    try {
        load_model_file(dir / "models/syntax.sdl");
        FAIL();
    } catch (const ModelLoadError& e) {
        ASSERT_EQ(e.errors().size(), 1u);
        EXPECT_EQ(e.errors()[0].span.line, 3);
        EXPECT_NE(std::string(e.what()).find("syntax.sdl:3:7: SYNTAX"), std::string::npos) << e.what();
    }
}

TEST(Svg, ConstantSeriesUsesUnitPadding) {
    const auto axis = svg::make_axis(10.0, 10.0);
    EXPECT_EQ(axis.lo, 9.0);
    EXPECT_EQ(axis.hi, 11.0);
    const std::string chart = svg::render_chart({{"S", {0, 1, 2}, {10, 10, 10}}}, {}, "constant");
    EXPECT_EQ(count(chart, "<polyline"), 1u);
    // All polyline points share one y coordinate: a horizontal line.
    std::smatch m;
    ASSERT_TRUE(std::regex_search(chart, m, std::regex("points=\"([^\"]*)\"")));
    std::set<std::string> ys;
    const std::string pts = m[1];
    std::regex pair("[0-9.]+,([0-9.]+)");
    for (auto it = std::sregex_iterator(pts.begin(), pts.end(), pair); it != std::sregex_iterator(); ++it)
        ys.insert((*it)[1]);
    EXPECT_EQ(ys.size(), 1u);
}

TEST(Svg, MarginIsFivePercent) {
    const auto axis = svg::make_axis(0.0, 60.0);
    EXPECT_DOUBLE_EQ(axis.lo, -3.0);
    EXPECT_DOUBLE_EQ(axis.hi, 63.0);
}

TEST(Svg, TwoSeriesTwoPolylinesTwoLegendEntries) {
    const std::string chart =
        svg::render_chart({{"A", {0, 1}, {1, 2}}, {"B", {0, 1}, {3, 1}}}, {}, "two");
    EXPECT_EQ(count(chart, "<polyline"), 2u);
    EXPECT_EQ(count(chart, "class=\"legend-entry\""), 2u);
    EXPECT_NE(chart.find(">A</text>"), std::string::npos);
    EXPECT_NE(chart.find(">B</text>"), std::string::npos);
}

TEST(Svg, ObservationsBecomeMarkers) {
    const std::string chart =
        svg::render_chart({{"sim", {0, 1, 2}, {0, 1, 2}}}, {{"obs", {0.5, 1.5}, {0.4, 1.6}}}, "fit");
    EXPECT_EQ(count(chart, "<polyline"), 1u);
    EXPECT_EQ(count(chart, "<g class=\"markers\""), 1u);
    // two markers plus one legend swatch
    EXPECT_EQ(count(chart, "<circle"), 3u);
    EXPECT_EQ(count(chart, "class=\"legend-entry\""), 2u);
}

TEST(Svg, EscapesText) {
    const std::string chart = svg::render_chart({{"a<b", {0, 1}, {0, 1}}}, {}, "x & y");
    EXPECT_NE(chart.find("a&lt;b"), std::string::npos);
    EXPECT_NE(chart.find("x &amp; y"), std::string::npos);
}

TEST(Svg, NoSeriesIsAnError) { EXPECT_THROW(svg::render_chart({}, {}, "empty"), Error); }

TEST(Svg, TicksAreFewRoundAndInside) {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 2000; ++i) {
        const double scale = std::pow(10.0, std::uniform_int_distribution<int>(-6, 6)(rng));
        double a = std::uniform_real_distribution<double>(-1, 1)(rng) * scale;
        double b = a + std::uniform_real_distribution<double>(0, 1)(rng) * scale;
        if (i % 10 == 0) b = a;
        const auto axis = svg::make_axis(a, b);
        ASSERT_LE(axis.ticks.size(), static_cast<std::size_t>(svg::kMaxTicks)) << a << " " << b;
        ASSERT_GE(axis.ticks.size(), 2u) << a << " " << b;
        const double step = axis.ticks[1] - axis.ticks[0];
        // step = m * 10^k with m in {1, 2, 2.5, 5}
        const double mant = step / std::pow(10.0, std::floor(std::log10(step) + 1e-9));
        bool round = false;
        for (double f : {1.0, 2.0, 2.5, 5.0}) round = round || std::abs(mant - f) < 1e-6;
        EXPECT_TRUE(round) << step;
        for (double t : axis.ticks) {
            EXPECT_GE(t, axis.lo - 1e-9 * scale);
            EXPECT_LE(t, axis.hi + 1e-9 * scale);
        }
    }
}

TEST(Svg, EmitWritesFile) {
    test_support::TempDir dir("svg");
    svg::emit_svg({{"A", {0, 1}, {0, 1}}}, {}, "t", dir / "sub/chart.svg");
    const std::string text = read_text_file(dir / "sub/chart.svg");
    EXPECT_EQ(text.rfind("<svg", 0), 0u);
    EXPECT_NE(text.find("</svg>"), std::string::npos);
}
