#include <gtest/gtest.h>

#include "insightpilot/tabular.hpp"
#include "support.hpp"

using namespace insightpilot;
using testsupport::TempDir;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST(Csv, QuotedFieldsAndEmbeddedNewlines) {
  auto t = parse_csv("t", "name,note,amount\r\n\"Smith, J\",\"said \"\"hi\"\"\nthen left\",12.5\nLee,,3\n");
  ASSERT_EQ(t.row_count(), 2u);
  EXPECT_EQ(t.column("name").text[0], "Smith, J");
  EXPECT_EQ(t.column("note").text[0], "said \"hi\"\nthen left");
  EXPECT_EQ(t.column("note").text[1], "");
  EXPECT_EQ(t.column("amount").kind, ColumnKind::Number);
  EXPECT_DOUBLE_EQ(t.column("amount").number[0], 12.5);
}

TEST(Csv, ByteOrderMarkIsSkipped) {
  auto t = parse_csv("t", "\xEF\xBB\xBFx,y\n1,2\n");
  EXPECT_TRUE(t.has_column("x"));
}

TEST(Csv, Errors) {
  EXPECT_EQ(code_of([] { parse_csv("t", "a,b\n1,2,3\n"); }), ErrorCode::RaggedRow);
  EXPECT_EQ(code_of([] { parse_csv("t", "a,b\n\"1,2\n"); }), ErrorCode::RaggedRow);
  EXPECT_EQ(code_of([] { parse_csv("t", ""); }), ErrorCode::EmptyFile);
  EXPECT_EQ(code_of([] { parse_csv("t", "a,a\n1,2\n"); }), ErrorCode::SchemaError);
  TempDir dir;
  std::ofstream(dir.path() / "empty.csv") << "  \n";
  EXPECT_EQ(code_of([&] { load_csv(dir.path() / "empty.csv"); }), ErrorCode::EmptyFile);
  EXPECT_EQ(code_of([&] { load_csv(dir.path() / "missing.csv"); }), ErrorCode::IoError);
}

TEST(Csv, KindInference) {
  auto t = parse_csv("t",
                     "m,d,c,free,n\n2022-01,2022-01-03,a,alpha,1\n2022-02,2022-01-04,a,beta,2\n"
                     "2022-03,2022-01-05,a,gamma,\n2022-04,2022-01-06,a,delta,4\n");
  EXPECT_EQ(t.column("m").kind, ColumnKind::Temporal);
  EXPECT_EQ(t.column("d").kind, ColumnKind::Temporal);
  EXPECT_EQ(t.column("c").kind, ColumnKind::Category);
  EXPECT_EQ(t.column("free").kind, ColumnKind::Text);
  EXPECT_EQ(t.column("n").kind, ColumnKind::Number);
  EXPECT_TRUE(std::isnan(t.column("n").number[2]));
}

TEST(Csv, TypeHintsOverrideInference) {
  auto t = parse_csv("t", "zip,v\n02139,1\n10001,2\n", {{"zip", ColumnKind::Category}});
  EXPECT_EQ(t.column("zip").kind, ColumnKind::Category);
  EXPECT_EQ(t.column("zip").text[0], "02139");
}

TEST(Csv, SidecarSchemaIsRead) {
  TempDir dir;
  std::ofstream(dir.path() / "d.csv") << "code,v\n1,2\n2,3\n";
  std::ofstream(dir.path() / "d.schema.json") << R"({"code": "category"})";
  auto t = load_csv(dir.path() / "d.csv");
  EXPECT_EQ(t.name(), "d");
  EXPECT_EQ(t.column("code").kind, ColumnKind::Category);
}

TEST(Temporal, MonthAndDayKeysAreOrdered) {
  auto a = parse_temporal("2022-02"), b = parse_temporal("2022-03");
  ASSERT_TRUE(a && b);
  EXPECT_EQ(a->first, TemporalGrain::Month);
  EXPECT_LT(a->second, b->second);
  EXPECT_EQ(parse_temporal("1970-01-01")->second, 0.0);
  EXPECT_EQ(parse_temporal("2000-03-01")->second - parse_temporal("2000-02-28")->second, 2.0);  // leap year
  EXPECT_FALSE(parse_temporal("2022-13"));
  EXPECT_FALSE(parse_temporal("22-01"));
  EXPECT_FALSE(parse_temporal("2022-01-01x"));
}

TEST(Subspace, ConjunctionOfMemberships) {
  auto t = parse_csv("t", "seg,region,v\nA,N,1\nA,S,2\nB,N,3\nC,N,4\n");
  auto sub = apply_subspace(t, {{{"seg", {"A", "B"}}, {"region", {"N"}}}});
  ASSERT_EQ(sub.row_count(), 2u);
  EXPECT_EQ(sub.column("v").number[1], 3.0);
  EXPECT_DOUBLE_EQ(coverage(sub, t), 0.5);
  EXPECT_EQ(apply_subspace(t, {}).row_count(), 4u);
  EXPECT_EQ(code_of([&] { apply_subspace(t, {{{"nope", {"x"}}}}); }), ErrorCode::UnknownDim);
  EXPECT_EQ(code_of([&] { apply_subspace(t, {{{"seg", {}}}}); }), ErrorCode::InvalidArgument);
}

TEST(Subspace, NumericAndTemporalValuesMatchByKey) {
  auto t = parse_csv("t", "m,n,v\n2022-03,1.0,1\n2022-04,2,2\n");
  EXPECT_EQ(apply_subspace(t, {{{"m", {"2022-03"}}}}).row_count(), 1u);
  EXPECT_EQ(apply_subspace(t, {{{"n", {"1"}}}}).row_count(), 1u);
}

TEST(Subspace, CoverageOfEmptyBase) {
  Table empty = parse_csv("e", "a\n");
  EXPECT_EQ(code_of([&] { coverage(empty, empty); }), ErrorCode::EmptyBase);
}

TEST(Aggregate, TemporalAscendingOthersDescending) {
  auto t = parse_csv("t", "m,c,v\n2022-02,x,1\n2022-01,y,5\n2022-02,y,2\n2022-03,x,1\n");
  auto s = group_aggregate(t, "m", "v", Aggregate::Sum);
  EXPECT_EQ(s.keys, (std::vector<std::string>{"2022-01", "2022-02", "2022-03"}));
  EXPECT_EQ(s.values, (std::vector<double>{5, 3, 1}));
  auto c = group_aggregate(t, "c", "v", Aggregate::Sum);
  EXPECT_EQ(c.keys, (std::vector<std::string>{"y", "x"}));
  auto mean = group_aggregate(t, "c", "v", Aggregate::Mean);
  EXPECT_DOUBLE_EQ(mean.values[0], 3.5);
  auto count = group_aggregate(t, "c", "", Aggregate::Count);
  EXPECT_EQ(count.values, (std::vector<double>{2, 2}));
  EXPECT_EQ(code_of([&] { group_aggregate(t, "v", "v", Aggregate::Sum); }), ErrorCode::TypeMismatch);
  EXPECT_EQ(code_of([&] { group_aggregate(t, "c", "m", Aggregate::Sum); }), ErrorCode::TypeMismatch);
  EXPECT_EQ(code_of([&] { group_aggregate(t, "c", "zz", Aggregate::Sum); }), ErrorCode::UnknownMeasure);
}

TEST(Aggregate, ParsesNames) {
  EXPECT_EQ(aggregate_from("avg"), Aggregate::Mean);
  EXPECT_EQ(aggregate_from("count"), Aggregate::Count);
  EXPECT_FALSE(aggregate_from("median"));
}

TEST(Fixture, SuperstoreShape) {
  const auto& t = testsupport::superstore_table();
  EXPECT_EQ(t.row_count(), 720u);
  EXPECT_EQ(t.column("Month").kind, ColumnKind::Temporal);
  EXPECT_EQ(t.column("Sales").kind, ColumnKind::Number);
  auto months = group_aggregate(t, "Month", "Sales", Aggregate::Count);
  ASSERT_EQ(months.size(), 12u);
  for (double v : months.values) EXPECT_EQ(v, 60.0);
}
