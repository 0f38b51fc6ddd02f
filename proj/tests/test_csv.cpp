#include <gtest/gtest.h>

#include <sstream>

#include "fixtures.hpp"

using namespace hysid;

TEST(Csv, RoundTripIsExact) {
  auto ds = simulate(TankScenario{.n_steps = 500});
  std::stringstream ss;
  write_csv(ss, ds);
  auto back = read_csv(ss);
  ASSERT_EQ(back.names(), ds.names());
  for (const auto& c : ds.channels()) EXPECT_EQ(back[c.name], c.values) << c.name;
  EXPECT_NEAR(back.sample_period(), ds.sample_period(), 1e-15);
}

TEST(Csv, HeaderStartsWithTime) {
  std::stringstream ss;
  write_csv(ss, TimeSeriesDataset(0.5, {{"a", {1, 2}}, {"b", {3, 4}}}));
  std::string header;
  std::getline(ss, header);
  EXPECT_EQ(header, "time,a,b");
}

TEST(Csv, RejectsNaNWithRowContext) {
  std::stringstream ss("time,a\n0,1\n1,nan\n2,3\n");
  try {
    read_csv(ss);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidSample);
  }
}

TEST(Csv, RejectsNonUniformSampling) {
  std::stringstream ss("time,a\n0,1\n1,2\n3,3\n");
  EXPECT_THROW(read_csv(ss), Error);
}

TEST(Csv, RejectsRaggedRows) {
  std::stringstream ss("time,a,b\n0,1,2\n1,2\n");
  EXPECT_THROW(read_csv(ss), Error);
}

TEST(Csv, ShortestRoundTripFormatting) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 12345678.9, 0.0})
    EXPECT_EQ(parse_double(format_double(v)), v);
  EXPECT_EQ(format_double(0.5), "0.5");
}
