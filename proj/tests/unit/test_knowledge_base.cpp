#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "vpsim/knowledge_base.hpp"
#include "vpsim/random.hpp"
#include "vpsim/text.hpp"

using namespace vpsim;
using namespace vpsim::kb;

namespace {

const std::string kFixtures = VPSIM_FIXTURES;

IngestResult ingest_string(const std::string& data, const std::string& descriptor) {
  std::istringstream in(data);
  return ingest_dataset(in, ColumnFormat::parse(descriptor), "test");
}

std::vector<SyndromeRecord> records_from_pairs(const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::string data;
  for (const auto& [s, y] : pairs) data += s + "|" + y + "\n";
  return ingest_string(data, "sep=pipe,header=0").records;
}

}  // namespace

TEST_CASE("normalize lowercases, trims and collapses whitespace") {
  CHECK(text::normalize("  Muscle   Aches\t") == "muscle aches");
  CHECK(text::normalize("") == "");
  for (const std::string s : {"  A  b ", "x", "\tTWO\n words ", "already normal"}) {
    CHECK(text::normalize(text::normalize(s)) == text::normalize(s));
  }
}

TEST_CASE("split_delimited honours quotes and strips a trailing CR") {
  auto cells = text::split_delimited("a,\"b,c\",\"d \"\"q\"\"\"\r", ',');
  REQUIRE(cells.size() == 3);
  CHECK(cells[1] == "b,c");
  CHECK(cells[2] == "d \"q\"");
  CHECK(text::split_delimited("x||y", '|').size() == 3);
}

TEST_CASE("render_template binds placeholders and rejects unknown ones") {
  CHECK(text::render_template("hi {{name}}!", {{"name", "Ann"}}) == "hi Ann!");
  CHECK_THROWS_AS(text::render_template("{{missing}}", {}), Error);
  CHECK_THROWS_AS(text::render_template("{{open", {{"open", "x"}}), Error);
}

TEST_CASE("column descriptors parse") {
  auto f = ColumnFormat::parse("sep=tab,header=0,syndrome=2,symptoms=3-5,split=semicolon,source=columbia");
  CHECK(f.delimiter == '\t');
  CHECK_FALSE(f.has_header);
  CHECK(f.syndrome_column == 2);
  CHECK(f.symptom_columns == std::vector<std::size_t>{3, 4, 5});
  CHECK(f.symptom_delimiter == ';');
  CHECK(f.source == Source::columbia);
  CHECK_THROWS_AS(ColumnFormat::parse("bogus=1"), Error);
  CHECK_THROWS_AS(ColumnFormat::parse("symptoms=5-2"), Error);
}

TEST_CASE("rows for one syndrome are unioned in order") {
  auto r = ingest_string("flu|fever;cough\nflu|fatigue\n", "sep=pipe,header=0,split=semicolon");
  REQUIRE(r.records.size() == 1);
  CHECK(r.records[0].syndrome_name == "flu");
  CHECK(r.records[0].symptoms == std::vector<std::string>{"fever", "cough", "fatigue"});
  CHECK(r.association_count() == 3);
}

TEST_CASE("case and whitespace variants of a symptom collapse") {
  auto r = ingest_string("flu|Fever\nFLU | fever \n", "sep=pipe,header=0");
  REQUIRE(r.records.size() == 1);
  CHECK(r.records[0].symptoms.size() == 1);
}

TEST_CASE("ingest reports every bad row with its number") {
  try {
    ingest_string("a|x\n|y\nb|\nc|z|extra\n", "sep=pipe,header=0,columns=2");
    FAIL("expected IngestError");
  } catch (const IngestError& e) {
    REQUIRE(e.rows().size() == 3);
    CHECK(e.rows()[0].row == 2);
    CHECK(e.rows()[1].row == 3);
    CHECK(e.rows()[2].row == 4);
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }
}

TEST_CASE("fixture files ingest with their own column mappings") {
  auto a = ingest_file(kFixtures + "/kb_a.csv", ColumnFormat::parse("symptoms=1-3,source=mendeley"));
  auto b = ingest_file(kFixtures + "/kb_disjoint.txt", ColumnFormat::parse("sep=pipe,header=0,source=columbia"));
  CHECK(a.association_count() == 10);
  CHECK(b.association_count() == 3);
  auto kb = merge(a.records, b.records);
  CHECK(kb.raw_pair_count() == 13);
  CHECK(kb.pair_count() == 13);
  CHECK(kb.find("asthma")->source == Source::columbia);
  CHECK_THROWS_AS(ingest_file(kFixtures + "/missing.csv", ColumnFormat{}), Error);
}

TEST_CASE("merge of identical records doubles raw but not distinct count") {
  SyndromeRecord r{"flu", {"fever", "cough", "ache"}, Source::mendeley};
  std::vector<SyndromeRecord> one{r};
  auto kb = merge(one, one);
  CHECK(kb.raw_pair_count() == 6);
  CHECK(kb.pair_count() == 3);
  CHECK(kb.size() == 1);
}

TEST_CASE("merge of empty inputs is an empty valid knowledge base") {
  auto kb = merge({}, {});
  CHECK(kb.empty());
  CHECK(kb.raw_pair_count() == 0);
  CHECK(kb.pair_count() == 0);
}

TEST_CASE("merged record keeps the source where the syndrome first appeared") {
  std::vector<SyndromeRecord> a{{"flu", {"fever"}, Source::mendeley}};
  std::vector<SyndromeRecord> b{{"flu", {"chills"}, Source::columbia}};
  CHECK(merge(a, b).find("flu")->source == Source::mendeley);
  CHECK(merge(b, a).find("flu")->source == Source::columbia);
}

TEST_CASE("property: distinct plus cross-input duplicates equals raw count") {
  Rng rng(99);
  const std::vector<std::string> syndromes{"flu", "cold", "asthma", "anemia"};
  const std::vector<std::string> symptoms{"fever", "cough", "wheeze", "pallor", "ache", "chills"};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::pair<std::string, std::string>> pa, pb;
    for (std::size_t i = 0, n = rng.index(12); i < n; ++i) {
      pa.emplace_back(syndromes[rng.index(4)], symptoms[rng.index(6)]);
    }
    for (std::size_t i = 0, n = rng.index(12); i < n; ++i) {
      // Mixed casing exercises normalization.
      pb.emplace_back(rng.index(2) ? syndromes[rng.index(4)] : "  FLU ", symptoms[rng.index(6)]);
    }
    auto ra = records_from_pairs(pa);
    auto rb = records_from_pairs(pb);
    auto kb = merge(ra, rb);

    auto all = pa;
    all.insert(all.end(), pb.begin(), pb.end());
    CHECK(kb.pair_count() == oracle::distinct_pairs(all));
    CHECK(kb.raw_pair_count() == oracle::distinct_pairs(pa) + oracle::distinct_pairs(pb));
    std::size_t sum = 0;
    for (const auto& r : kb.records()) sum += r.symptoms.size();
    CHECK(kb.pair_count() == sum);
    CHECK(kb.pair_count() <= kb.raw_pair_count());
  }
}

TEST_CASE("snapshot round trip keeps records and counts") {
  std::vector<SyndromeRecord> a{{"flu", {"fever", "cough"}, Source::mendeley}};
  std::vector<SyndromeRecord> b{{"flu", {"fever"}, Source::columbia}, {"cold", {"sneezing"}, Source::columbia}};
  auto kb = merge(a, b);
  std::stringstream ss;
  kb.write_snapshot(ss);
  const std::string first = ss.str();
  auto back = KnowledgeBase::read_snapshot(ss);
  CHECK(back.records() == kb.records());
  CHECK(back.raw_pair_count() == 4);
  CHECK(back.pair_count() == 3);
  std::stringstream again;
  back.write_snapshot(again);
  CHECK(again.str() == first);
}

TEST_CASE("sampling") {
  std::vector<SyndromeRecord> one{{"flu", {"fever", "cough"}, Source::other}};
  auto kb1 = KnowledgeBase::from_records(one);
  for (std::uint64_t seed : {0ull, 1ull, 123456789ull}) {
    auto s = sample_scenario(kb1, seed);
    CHECK(s.syndrome_name == "flu");
    CHECK(s.symptoms == one[0].symptoms);
    CHECK(s.seed == seed);
  }
  CHECK_THROWS_AS(sample_scenario(KnowledgeBase{}, 1), Error);

  std::vector<SyndromeRecord> three{{"a", {"x"}, Source::other},
                                    {"b", {"y", "z", "w", "v"}, Source::other},
                                    {"c", {"u"}, Source::other}};
  auto kb3 = KnowledgeBase::from_records(three);
  CHECK(sample_scenario(kb3, 42) == sample_scenario(kb3, 42));

  SUBCASE("uniform over syndromes, not pairs") {
    std::map<std::string, int> counts;
    const int n = 30000;
    for (int seed = 0; seed < n; ++seed) {
      auto s = sample_scenario(kb3, static_cast<std::uint64_t>(seed));
      const auto* rec = kb3.find(s.syndrome_name);
      REQUIRE(rec != nullptr);
      CHECK(rec->symptoms == s.symptoms);
      ++counts[s.syndrome_name];
    }
    double chi2 = 0;
    for (const auto& [name, c] : counts) {
      CHECK(std::abs(c / double(n) - 1.0 / 3) < 0.02);
      const double e = n / 3.0;
      chi2 += (c - e) * (c - e) / e;
    }
    // Critical value of chi-square with 2 degrees of freedom at alpha = 0.01.
    CHECK(chi2 < 9.2103);
  }
}
