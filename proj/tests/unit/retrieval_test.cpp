#include <doctest.h>

#include <fstream>
#include <random>
#include <set>

#include <json.hpp>

#include "../support/oracles.hpp"
#include "kerm/corpus.hpp"
#include "kerm/error.hpp"
#include "kerm/io.hpp"
#include "kerm/retrieval.hpp"
#include "test_util.hpp"

using namespace kerm;

namespace {

KnowledgeCorpus corpus_of(const std::vector<std::string>& texts) {
  std::vector<Fact> facts;
  for (std::size_t i = 0; i < texts.size(); ++i) facts.push_back({i, texts[i], "t"});
  return KnowledgeCorpus::from_facts(std::move(facts));
}

// Distinct random sentences, long enough that hashing collisions are rare.
std::vector<std::string> random_facts(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::set<std::string> seen;
  std::vector<std::string> out;
  while (out.size() < n) {
    std::string s = random_sentence(rng, 7);
    if (seen.insert(s).second) out.push_back(s);
  }
  return out;
}

std::vector<std::string> read_lines(const std::filesystem::path& p) {
  std::vector<std::string> out;
  for (auto& l : io::split_lines(io::read_file(p)))
    if (!l.empty()) out.push_back(l);
  return out;
}

}  // namespace

TEST_SUITE("retrieval") {
  TEST_CASE("three fact index ranks the matching fact first") {
    auto c = corpus_of({"Heart size is normal", "Small left pleural effusion", "No pneumothorax"});
    HashingEmbedder e;
    auto idx = RetrievalIndex::build(c, e);
    CHECK(idx.size() == 3);
    CHECK(idx.dimension() == 256);
    CHECK(idx.corpus_fingerprint() == c.fingerprint());
    auto r = retrieve(idx, e.embed_text("left pleural effusion").values(), 2);
    REQUIRE(r.size() == 2);
    CHECK(r[0].fact_id == 1);
    CHECK(r[0].score >= r[1].score);
  }

  TEST_CASE("index build is deterministic and rows are unit norm") {
    auto c = corpus_of(random_facts(5000, 1));
    HashingEmbedder e;
    auto a = RetrievalIndex::build(c, e), b = RetrievalIndex::build(c, e);
    CHECK(a == b);
    bool all_unit = true;
    for (std::size_t i = 0; i < a.size(); ++i)
      all_unit = all_unit && std::abs(l2_norm(a.row(i)) - 1.0) < 1e-12;
    CHECK(all_unit);
    // A fact's own text retrieves it first with score 1.
    auto r = retrieve(a, e.embed_text(c.at(7).text).values(), 1);
    CHECK(r[0].fact_id == 7);
    CHECK(r[0].score == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("k beyond corpus size and k of zero") {
    auto c = corpus_of({"a b", "c d", "e f"});
    HashingEmbedder e;
    auto idx = RetrievalIndex::build(c, e);
    CHECK(retrieve(idx, e.embed_text("a b").values(), 50).size() == 3);
    CHECK_THROWS_WITH(retrieve(idx, e.embed_text("a b").values(), 0), "k must be positive");
    std::vector<double> short_query(8, 1.0);
    try {
      retrieve(idx, short_query, 2);
      FAIL("expected dimension mismatch");
    } catch (const Error& err) {
      CHECK(err.code() == ErrorCode::kDimensionMismatch);
    }
  }

  TEST_CASE("top-k matches a brute force argsort") {
    auto texts = random_facts(400, 2);
    auto c = corpus_of(texts);
    HashingEmbedder e;
    auto idx = RetrievalIndex::build(c, e);
    std::vector<std::vector<double>> rows;
    for (auto& t : texts) rows.push_back(oracle::hashed_features(t, 256));
    std::mt19937_64 rng(9);
    for (int q = 0; q < 50; ++q) {
      std::string query = random_sentence(rng);
      auto got = retrieve(idx, e.embed_text(query).values(), 10);
      auto want = oracle::brute_force_topk(rows, oracle::hashed_features(query, 256), 10);
      REQUIRE(got.size() == want.size());
      for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].score == doctest::Approx(want[i].second).epsilon(1e-12));
        // Equal scores may legitimately differ by rounding in the last bit;
        // ids must agree whenever the oracle's scores are distinct.
        bool tied = (i > 0 && std::abs(want[i].second - want[i - 1].second) < 1e-12) ||
                    (i + 1 < want.size() && std::abs(want[i].second - want[i + 1].second) < 1e-12);
        if (!tied) CHECK(got[i].fact_id == want[i].first);
      }
    }
  }

  TEST_CASE("ties are broken by ascending fact id") {
    auto c = corpus_of({"one", "two", "three", "four"});
    CallbackEmbedder flat(3, [](std::string_view) { return std::vector<double>{1, 2, 3}; });
    auto idx = RetrievalIndex::build(c, flat);
    auto r = retrieve(idx, std::vector<double>{1, 2, 3}, 4);
    REQUIRE(r.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(r[i].fact_id == i);
  }

  TEST_CASE("larger k extends smaller k") {
    auto c = corpus_of(random_facts(300, 3));
    HashingEmbedder e;
    auto idx = RetrievalIndex::build(c, e);
    auto q = e.embed_text("mild left pleural effusion with atelectasis");
    auto r5 = retrieve(idx, q.values(), 5), r20 = retrieve(idx, q.values(), 20);
    for (std::size_t i = 0; i < r5.size(); ++i) CHECK(r5[i] == r20[i]);
  }

  TEST_CASE("query scaling does not change results") {
    auto c = corpus_of(random_facts(200, 4));
    HashingEmbedder e;
    auto idx = RetrievalIndex::build(c, e);
    auto raw = e.hashed_counts("stable cardiomegaly with small effusion");
    std::vector<double> scaled = raw;
    for (double& x : scaled) x *= 37.5;
    auto a = retrieve(idx, raw, 10), b = retrieve(idx, scaled, 10);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].fact_id == b[i].fact_id);
      CHECK(a[i].score == doctest::Approx(b[i].score).epsilon(1e-12));
    }
  }

  TEST_CASE("index serialization round trips and rejects corruption") {
    auto c = corpus_of(random_facts(50, 5));
    HashingEmbedder e;
    auto idx = RetrievalIndex::build(c, e);
    TempDir d;
    idx.save(d / "i.jsonl");
    CHECK(RetrievalIndex::load(d / "i.jsonl") == idx);
    CHECK(idx.embedder_name() == "hashing-256");
    CHECK_THROWS_AS(RetrievalIndex::parse("{\"broken\": true}\n"), Error);
  }

  TEST_CASE("purify with its own text as context ranks that fact first") {
    auto texts = random_facts(100, 6);
    auto c = corpus_of(texts);
    HashingEmbedder e;
    auto idx = RetrievalIndex::build(c, e);
    auto cands = retrieve(idx, e.embed_text(texts[42]).values(), 10);
    std::string target = c.at(cands[3].fact_id).text;
    auto p = purify(cands, {target, ""}, c, e, 5);
    CHECK_FALSE(p.context_free);
    REQUIRE(p.facts.size() == 5);
    CHECK(p.facts[0].fact_id == cands[3].fact_id);
    CHECK(p.facts[0].score == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(*p.facts[0].retrieval_score == cands[3].score);
  }

  TEST_CASE("purify without context passes candidates through") {
    auto c = corpus_of(random_facts(40, 7));
    HashingEmbedder e;
    auto idx = RetrievalIndex::build(c, e);
    auto cands = retrieve(idx, e.embed_text("small effusion").values(), 10);
    auto p = purify(cands, {"  ", "\t"}, c, e, 5);
    CHECK(p.context_free);
    REQUIRE(p.facts.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(p.facts[i].fact_id == cands[i].fact_id);
      CHECK(p.facts[i].score == cands[i].score);
    }
    CHECK_THROWS_WITH(purify(cands, {"x", ""}, c, e, 0), "m must be positive");
    std::vector<ScoredFact> none;
    CHECK_THROWS_WITH(purify(none, {"x", ""}, c, e, 3), "no candidates to purify");
  }

  TEST_CASE("purify output is a re-ranked subset of its input") {
    auto texts = random_facts(300, 8);
    auto c = corpus_of(texts);
    HashingEmbedder e;
    auto idx = RetrievalIndex::build(c, e);
    std::mt19937_64 rng(12);
    for (int q = 0; q < 30; ++q) {
      auto cands = retrieve(idx, e.embed_text(random_sentence(rng)).values(), 10);
      std::string ind = random_sentence(rng), hist = random_sentence(rng);
      auto p = purify(cands, {ind, hist}, c, e, 5);
      // Oracle: recompute context similarity for each candidate and sort.
      auto ctx = oracle::hashed_features(ind + " " + hist, 256);
      std::vector<std::pair<std::size_t, double>> want;
      for (auto& f : cands) want.emplace_back(f.fact_id, oracle::raw_cosine(oracle::hashed_features(texts[f.fact_id], 256), ctx));
      std::stable_sort(want.begin(), want.end(), [](auto& a, auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
      });
      REQUIRE(p.facts.size() == 5);
      std::set<std::size_t> input;
      for (auto& f : cands) input.insert(f.fact_id);
      for (std::size_t i = 0; i < 5; ++i) {
        CHECK(input.count(p.facts[i].fact_id) == 1);
        CHECK(p.facts[i].score == doctest::Approx(want[i].second).epsilon(1e-12));
        if (i > 0) CHECK(p.facts[i - 1].score >= p.facts[i].score - 1e-15);
      }
    }
  }

  TEST_CASE("mke with k equal m equal one returns the single best fact") {
    auto c = corpus_of(random_facts(60, 9));
    HashingEmbedder e(256, {0.0, 1});
    auto idx = RetrievalIndex::build(c, e);
    ImageRecord img{"i", std::nullopt, c.at(17).text};
    auto facts = mke(img, {"unrelated context words", ""}, idx, c, e, {1, 1});
    REQUIRE(facts.size() == 1);
    CHECK(facts[0].id == 17);
  }

  TEST_CASE("mke equals retrieve followed by purify") {
    auto c = corpus_of(random_facts(200, 10));
    HashingEmbedder e(256, {0.1, 3});
    auto idx = RetrievalIndex::build(c, e);
    std::mt19937_64 rng(4);
    for (int i = 0; i < 20; ++i) {
      ImageRecord img{"img" + std::to_string(i), std::nullopt, random_sentence(rng)};
      ClinicalContext ctx{random_sentence(rng), i % 3 ? random_sentence(rng) : ""};
      auto d = mke_detailed(img, ctx, idx, c, e, {10, 5});
      auto r = retrieve(idx, e.embed_image(img).values(), 10);
      auto p = purify(r, ctx, c, e, 5);
      CHECK(d.retrieved == r);
      CHECK(d.purified.facts == p.facts);
      REQUIRE(d.facts.size() == 5);
      for (std::size_t j = 0; j < 5; ++j) CHECK(d.facts[j] == c.at(p.facts[j].fact_id));
    }
  }

  TEST_CASE("mke refuses an index built for another corpus") {
    auto c1 = corpus_of({"a b", "c d"}), c2 = corpus_of({"e f", "g h"});
    HashingEmbedder e;
    auto idx = RetrievalIndex::build(c1, e);
    ImageRecord img{"i", std::nullopt, "a b"};
    CHECK_THROWS_WITH(mke(img, {}, idx, c2, e), "index was not built for this corpus");
  }

  TEST_CASE("mke matches the recorded fixture") {
    std::filesystem::path dir(KERM_GOLDEN_DIR);
    auto c = corpus_of(read_lines(dir / "mke_fixture_facts.txt"));
    HashingEmbedder e(256, {0.0, 0});
    auto idx = RetrievalIndex::build(c, e);
    auto queries = read_lines(dir / "mke_fixture_queries.jsonl");
    auto expected = read_lines(dir / "mke_fixture_expected.jsonl");
    REQUIRE(queries.size() == expected.size());
    for (std::size_t i = 0; i < queries.size(); ++i) {
      auto q = nlohmann::json::parse(queries[i]);
      auto x = nlohmann::json::parse(expected[i]);
      CAPTURE(q["id"].get<std::string>());
      ImageRecord img{q["id"], std::nullopt, q["report"].get<std::string>()};
      auto d = mke_detailed(img, {q["indication"], q["history"]}, idx, c, e, {10, 5});
      std::vector<std::size_t> got_r, got_f;
      for (auto& f : d.retrieved) got_r.push_back(f.fact_id);
      for (auto& f : d.purified.facts) got_f.push_back(f.fact_id);
      CHECK(got_r == x["retrieved"].get<std::vector<std::size_t>>());
      CHECK(got_f == x["facts"].get<std::vector<std::size_t>>());
      CHECK(d.purified.context_free == x["context_free"].get<bool>());
      auto scores = x["scores"].get<std::vector<double>>();
      for (std::size_t j = 0; j < scores.size(); ++j)
        CHECK(d.purified.facts[j].score == doctest::Approx(scores[j]).epsilon(1e-12));
    }
  }

  TEST_CASE("scored fact lists round trip through JSON lines") {
    std::vector<ScoredFact> f{{3, 0.5, std::nullopt}, {1, 0.25, 0.75}};
    CHECK(scored_facts_from_jsonl(scored_facts_to_jsonl(f)) == f);
    CHECK_THROWS_WITH(scored_facts_from_jsonl("{\"fact_id\":1,\"score\":0.1}\n{}\n"),
                      doctest::Contains("scored fact line 2"));
  }
}
