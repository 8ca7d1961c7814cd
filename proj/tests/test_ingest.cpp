#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "tcl/ingest.hpp"

using namespace tcl;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& text) {
  auto path = std::filesystem::temp_directory_path() / ("tcl_ingest_" + name);
  std::ofstream(path, std::ios::trunc) << text;
  return path;
}

InteractionLog numbered(int n) {
  std::string text;
  for (int i = 0; i < n; ++i) text += "a" + std::to_string(i % 3) + " b" + std::to_string(i % 4) + " " + std::to_string(i) + "\n";
  return parse_interactions(text);
}

}  // namespace

TEST(Ingest, SortsStablyByTimestamp) {
  const auto log = parse_interactions("x p 5\ny q 1\nz r 1\n");
  ASSERT_EQ(log.size(), 3u);
  EXPECT_EQ(log[0].timestamp, 1.0);
  EXPECT_EQ(log[1].timestamp, 1.0);
  EXPECT_EQ(log[2].timestamp, 5.0);
  EXPECT_EQ(log.vocabulary().name(log[0].source), "y");
  EXPECT_EQ(log.vocabulary().name(log[1].source), "z");
}

TEST(Ingest, ReportsLineOfBadTimestamp) {
  std::string text;
  for (int i = 1; i <= 6; ++i) text += "u v " + std::to_string(i) + "\n";
  text += "u v noon\n";
  const auto path = write_temp("bad_ts.txt", text);
  try {
    load_interactions(path);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 7u);
    EXPECT_NE(std::string(e.what()).find("line 7"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find(path.string()), std::string::npos);
  }
}

TEST(Ingest, RejectsEmptyAndMissingFiles) {
  EXPECT_THROW(load_interactions(write_temp("empty.txt", "")), std::runtime_error);
  EXPECT_THROW(load_interactions("/nonexistent/tcl/file.txt"), std::runtime_error);
  EXPECT_THROW(parse_interactions("# only a comment\n"), std::runtime_error);
}

TEST(Ingest, RejectsNegativeTimestampsAndShortRows) {
  EXPECT_THROW(parse_interactions("a b -1\n"), ParseError);
  EXPECT_THROW(parse_interactions("a b\n"), ParseError);
}

TEST(Ingest, ColumnMappingHeaderAndDelimiter) {
  ColumnSpec spec;
  spec.source = 2;
  spec.target = 0;
  spec.timestamp = 1;
  spec.delimiter = ',';
  spec.skip_header = true;
  const auto log = parse_interactions("dst,time,src,extra\nB,10,A,zzz\nC,3,A,zzz\n", spec);
  ASSERT_EQ(log.size(), 2u);
  EXPECT_EQ(log.vocabulary().name(log[0].source), "A");
  EXPECT_EQ(log.vocabulary().name(log[0].target), "C");
  EXPECT_EQ(log[1].timestamp, 10.0);
}

TEST(Ingest, BipartiteKeepsSourceAndTargetNamespacesApart) {
  ColumnSpec spec;
  spec.bipartite = true;
  const auto log = parse_interactions("x x 1\nx y 2\n", spec);
  EXPECT_NE(log[0].source, log[0].target);
  EXPECT_EQ(log.source_vocab().size(), 1u);
  EXPECT_EQ(log.target_vocab().size(), 2u);
  const auto uni = parse_interactions("x x 1\nx y 2\n");
  EXPECT_EQ(uni[0].source, uni[0].target);
}

TEST(Ingest, VocabulariesCoverEveryEvent) {
  const auto log = numbered(50);
  for (const auto& ev : log.events()) {
    EXPECT_TRUE(std::binary_search(log.source_vocab().begin(), log.source_vocab().end(), ev.source));
    EXPECT_TRUE(std::binary_search(log.target_vocab().begin(), log.target_vocab().end(), ev.target));
  }
  EXPECT_EQ(log.duration(), 49.0);
}

TEST(Split, SizesFollowFloorRule) {
  const auto log = numbered(10);
  auto s = chronological_split(log, SplitSpec::parse("60/20/20"));
  EXPECT_EQ(s.train.size(), 6u);
  EXPECT_EQ(s.val.size(), 2u);
  EXPECT_EQ(s.test.size(), 2u);
  s = chronological_split(log, SplitSpec::parse("80/10/10"));
  EXPECT_EQ(s.train.size(), 8u);
  EXPECT_EQ(s.val.size(), 1u);
  EXPECT_EQ(s.test.size(), 1u);
  s = chronological_split(log, SplitSpec::parse("0.7/0.15/0.15"));
  EXPECT_EQ(s.train.size(), 7u);
}

TEST(Split, EmptyPartitionIsAnError) {
  EXPECT_THROW(chronological_split(numbered(2), SplitSpec::parse("60/20/20")), std::invalid_argument);
  EXPECT_THROW(SplitSpec::parse("60/20"), std::invalid_argument);
  EXPECT_THROW(chronological_split(numbered(10), SplitSpec{0.5, 0.2, 0.2}), std::invalid_argument);
}

TEST(Split, ConcatenationRestoresTheLog) {
  std::mt19937_64 rng(3);
  for (int n : {5, 17, 100, 333}) {
    const auto log = numbered(n);
    const auto s = chronological_split(log, SplitSpec::parse("60/20/20"));
    const auto joined = s.train.concat(s.val).concat(s.test);
    ASSERT_EQ(joined.size(), log.size());
    for (std::size_t i = 0; i < log.size(); ++i) {
      EXPECT_EQ(joined[i].source, log[i].source);
      EXPECT_EQ(joined[i].target, log[i].target);
      EXPECT_EQ(joined[i].timestamp, log[i].timestamp);
    }
  }
}

TEST(Stats, RepetitionDensityCountsTestEvents) {
  const auto log = parse_interactions("a x 1\nb y 2\na x 3\na z 4\n");
  const auto train = log.slice(0, 2);
  const auto test = log.slice(2, 4);
  EXPECT_DOUBLE_EQ(dataset_stats(train, test, log).repetition_density, 0.5);
  EXPECT_DOUBLE_EQ(dataset_stats(train, train, log).repetition_density, 1.0);
  EXPECT_DOUBLE_EQ(dataset_stats(log.slice(0, 1), log.slice(1, 2), log).repetition_density, 0.0);
  EXPECT_THROW(dataset_stats(train, log.slice(2, 2), log), std::invalid_argument);
}

TEST(Stats, CountsAndDuration) {
  const auto log = parse_interactions("a x 0\nb y 86400\nc x 172800\n");
  const auto s = dataset_stats(log.slice(0, 2), log.slice(2, 3), log);
  EXPECT_EQ(s.n_sources, 3u);
  EXPECT_EQ(s.n_targets, 2u);
  EXPECT_EQ(s.n_interactions, 3u);
  EXPECT_DOUBLE_EQ(s.duration_days, 2.0);
}
