#include <gtest/gtest.h>

#include <random>
#include <regex>
#include <sstream>

#include "memoplan/plan_check.hpp"
#include "memoplan/planner.hpp"
#include "oracles.hpp"

using namespace memoplan;

namespace {

Plan manual(std::map<RecordId, Bytes> offsets, Bytes total, Bytes alignment = 1) {
  Plan p;
  p.strategy = "manual";
  p.alignment = alignment;
  p.total_size = total;
  p.offsets = std::move(offsets);
  return p;
}

Errc error_of(const std::function<void()> &fn) {
  try {
    fn();
  } catch (const Error &e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return Errc::parse;
}

} // namespace

TEST(CheckPlan, ValidOptimalPlan) {
  const auto t = oracle::three_record_example();
  const auto r = check_plan(t, manual({{0, 0}, {1, 4}, {2, 0}}, 6));
  EXPECT_TRUE(r.valid);
  EXPECT_EQ(r.peak_live, 6u);
  EXPECT_DOUBLE_EQ(r.utilization, 1.0);
  EXPECT_DOUBLE_EQ(r.fragmentation, 0.0);
  EXPECT_EQ(r.per_timestep_live, (std::vector<Bytes>{4, 6, 6, 4}));
}

TEST(CheckPlan, SharedOffsetViolation) {
  const auto t = oracle::make_trace({{0, 4, 0, 2}, {1, 2, 1, 3}});
  EXPECT_EQ(check_plan(t, manual({{0, 0}, {1, 0}}, 4)).violations, (std::vector<Violation>{{0, 1, 2}}));
}

TEST(CheckPlan, FragmentationZeroIffTotalEqualsPeak) {
  std::mt19937_64 rng(12);
  for (int iter = 0; iter < 300; ++iter) {
    const auto t = oracle::random_small_trace(rng, 8);
    for (auto s : kAllStrategies) {
      StrategyConfig c;
      c.strategy = s;
      c.alignment = 1;
      const auto p = plan(t, c);
      const auto r = check_plan(t, p);
      ASSERT_EQ(r.fragmentation == 0.0, p.total_size == r.peak_live);
      ASSERT_LE(r.utilization, 1.0);
    }
  }
}

TEST(CheckPlan, ReportsEveryViolation) {
  const auto t = oracle::three_record_example();
  const auto r = check_plan(t, manual({{0, 0}, {1, 2}, {2, 0}}, 6));
  EXPECT_FALSE(r.valid);
  EXPECT_EQ(r.violations, (std::vector<Violation>{{0, 1, 2}, {1, 2, 2}}));
}

TEST(CheckPlan, OutOfBoundsAndMisaligned) {
  const auto t = oracle::three_record_example();
  const auto r = check_plan(t, manual({{0, 0}, {1, 4}, {2, 3}}, 6, 2));
  EXPECT_FALSE(r.valid);
  EXPECT_EQ(r.out_of_bounds, std::vector<RecordId>{2});
  EXPECT_EQ(r.misaligned, std::vector<RecordId>{2});
}

TEST(CheckPlan, FragmentationOfBumpPlan) {
  const auto t = oracle::three_record_example();
  const auto r = check_plan(t, manual({{0, 0}, {1, 4}, {2, 6}}, 10));
  EXPECT_TRUE(r.valid);
  EXPECT_DOUBLE_EQ(r.utilization, 0.6);
  EXPECT_DOUBLE_EQ(r.fragmentation, 0.4);
}

TEST(CheckPlan, MissingAndUnknownOffsets) {
  const auto t = oracle::three_record_example();
  EXPECT_EQ(error_of([&] { check_plan(t, manual({{0, 0}, {1, 4}}, 6)); }), Errc::missing_offset);
  EXPECT_EQ(error_of([&] { check_plan(t, manual({{0, 0}, {1, 4}, {2, 0}, {9, 0}}, 6)); }),
            Errc::unknown_offset);
}

TEST(CheckPlan, EmptyTraceEmptyPlan) {
  const auto r = check_plan(validate_trace({}), manual({}, 0));
  EXPECT_TRUE(r.valid);
  EXPECT_DOUBLE_EQ(r.utilization, 1.0);
}

TEST(CheckPlan, UnmanagedRecordsAreSkipped) {
  const auto t = oracle::three_record_example();
  auto p = manual({{0, 0}, {2, 0}}, 4);
  p.unmanaged = {1};
  const auto r = check_plan(t, p);
  EXPECT_TRUE(r.valid);
  EXPECT_EQ(r.peak_live, 4u);
}

TEST(CheckPlan, PairwiseOracleAgreesOnRandomPlans) {
  std::mt19937_64 rng(31);
  for (int iter = 0; iter < 1000; ++iter) {
    const auto t = oracle::random_small_trace(rng, 8);
    std::map<RecordId, Bytes> offsets;
    for (const auto &r : t.records)
      offsets[r.id] = rng() % 24;
    const auto r = check_plan(t, manual(offsets, 1000));
    std::size_t expected = 0;
    for (std::size_t i = 0; i < t.size(); ++i)
      for (std::size_t j = i + 1; j < t.size(); ++j) {
        const auto &a = t.records[i], &b = t.records[j];
        if (oracle::lifetimes_overlap(a, b) && offsets[a.id] < offsets[b.id] + b.size &&
            offsets[b.id] < offsets[a.id] + a.size)
          ++expected;
      }
    ASSERT_EQ(r.violations.size(), expected);
    ASSERT_EQ(r.valid, expected == 0);
  }
}

TEST(HeapMap, OneRectanglePerRecordWithMatchingArea) {
  GeneratorProfile profile;
  profile.num_records = 300;
  profile.rng_seed = 4;
  const auto t = generate_trace(profile);
  const auto p = plan(t);
  const auto map = build_heap_map(t, p);
  ASSERT_EQ(map.rectangles.size(), t.size());
  EXPECT_EQ(map.height, p.total_size);
  EXPECT_EQ(map.width, t.num_timesteps);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto &rect = map.rectangles[i];
    const auto &rec = t.records[i];
    ASSERT_EQ(rect.id, rec.id);
    ASSERT_EQ((rect.address_end - rect.address_begin) * static_cast<Bytes>(rect.time.length()),
              rec.size * static_cast<Bytes>(rec.lifetime.length()));
    ASSERT_LE(rect.address_end, map.height);
  }
}

TEST(HeapMap, SpecGeometry) {
  const auto single = build_heap_map(oracle::make_trace({{0, 4, 0, 2}}), manual({{0, 0}}, 4));
  EXPECT_EQ(single.rectangles, (std::vector<HeapRect>{{0, {0, 2}, 0, 4}}));

  const auto three = build_heap_map(oracle::three_record_example(), manual({{0, 0}, {1, 4}, {2, 0}}, 6));
  EXPECT_EQ(three.rectangles.size(), 3u);
  EXPECT_EQ(three.width, 4);
  EXPECT_EQ(three.height, 6u);

  const auto empty = build_heap_map(validate_trace({}), manual({}, 0));
  EXPECT_TRUE(empty.rectangles.empty());
  std::ostringstream os;
  render_heap_map_svg(empty, os);
  EXPECT_EQ(os.str().find("<rect"), std::string::npos);
  EXPECT_NE(os.str().find("<line"), std::string::npos);
}

TEST(HeapMap, RejectsInvalidPlan) {
  const auto t = oracle::three_record_example();
  EXPECT_EQ(error_of([&] { build_heap_map(t, manual({{0, 0}, {1, 0}, {2, 0}}, 6)); }),
            Errc::invalid_plan);
}

TEST(HeapMap, SvgStructure) {
  const auto t = oracle::three_record_example();
  std::ostringstream os;
  render_heap_map_svg(build_heap_map(t, manual({{0, 0}, {1, 4}, {2, 0}}, 6)), os);
  const auto svg = os.str();
  const std::regex rect("<rect ");
  EXPECT_EQ(std::distance(std::sregex_iterator(svg.begin(), svg.end(), rect), std::sregex_iterator()), 3);
  EXPECT_NE(svg.find("time (timesteps)"), std::string::npos);
  EXPECT_NE(svg.find("address (bytes)"), std::string::npos);
  EXPECT_EQ(svg.rfind("</svg>\n"), svg.size() - 7);

  std::ostringstream again;
  render_heap_map_svg(build_heap_map(t, manual({{0, 0}, {1, 4}, {2, 0}}, 6)), again);
  EXPECT_EQ(again.str(), svg);
}

TEST(HeapMap, ReportJsonFields) {
  const auto j = report_to_json(check_plan(oracle::three_record_example(), manual({{0, 0}, {1, 4}, {2, 0}}, 6)));
  EXPECT_EQ(j.at("valid"), true);
  EXPECT_EQ(j.at("peak_live"), 6);
  EXPECT_EQ(j.at("total_size"), 6);
  EXPECT_TRUE(j.at("violations").empty());
}
