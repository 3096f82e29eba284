#include <doctest.h>

#include <cmath>
#include <random>

#include "../support/oracles.hpp"
#include "kerm/embedding.hpp"
#include "kerm/error.hpp"
#include "kerm/io.hpp"
#include "test_util.hpp"

using namespace kerm;

#ifndef KERM_GOLDEN_DIR
#error "KERM_GOLDEN_DIR must be defined"
#endif

namespace {

std::vector<double> as_vec(const Embedding& e) { return {e.values().begin(), e.values().end()}; }

}  // namespace

TEST_SUITE("embedding") {
  TEST_CASE("text embeddings are deterministic and unit norm") {
    HashingEmbedder e;
    auto a = e.embed_text("Small left pleural effusion.");
    auto b = e.embed_text("Small left pleural effusion.");
    CHECK(a == b);
    CHECK(a.dimension() == 256);
    CHECK(l2_norm(a.values()) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(dot(a.values(), a.values()) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(e.name() == "hashing-256");
  }

  TEST_CASE("cosine of hashed texts matches a recomputed bag of features") {
    HashingEmbedder e;
    std::mt19937_64 rng(11);
    for (int i = 0; i < 100; ++i) {
      std::string x = random_sentence(rng), y = random_sentence(rng);
      double got = dot(e.embed_text(x).values(), e.embed_text(y).values());
      double want = oracle::raw_cosine(oracle::hashed_features(x, 256), oracle::hashed_features(y, 256));
      CHECK(got == doctest::Approx(want).epsilon(1e-12));
      CHECK(e.hashed_counts(x) == oracle::hashed_features(x, 256));
    }
  }

  TEST_CASE("normalization of a raw vector") {
    auto e = Embedding::normalized({3, 4, 0, 0});
    CHECK(e.values()[0] == doctest::Approx(0.6));
    CHECK(e.values()[1] == doctest::Approx(0.8));
    CHECK(e.values()[2] == 0.0);
    CHECK(e.source_norm() == doctest::Approx(5.0));
    CHECK_THROWS_WITH(Embedding::normalized({0, 0, 0}), "zero-norm embedding");
    CHECK_THROWS_WITH(Embedding::normalized({}), "empty vector");
    CHECK_THROWS_AS(Embedding::normalized({1, NAN}), Error);
  }

  TEST_CASE("image without noise equals the embedding of its report") {
    HashingEmbedder e(256, {0.0, 5});
    ImageRecord r{"img-1", std::nullopt, "Mild cardiomegaly. No effusion."};
    CHECK(e.embed_image(r) == e.embed_text("Mild cardiomegaly. No effusion."));
  }

  TEST_CASE("stored feature vectors are normalized and dimension checked") {
    HashingEmbedder e(4);
    ImageRecord r{"x", std::vector<double>{3, 4, 0, 0}, std::string("ignored report")};
    auto v = e.embed_image(r);
    CHECK(v.values()[0] == doctest::Approx(0.6));
    CHECK(v.values()[1] == doctest::Approx(0.8));
    ImageRecord bad{"y", std::vector<double>{1, 2, 3}, std::nullopt};
    try {
      e.embed_image(bad);
      FAIL("expected a dimension error");
    } catch (const Error& err) {
      CHECK(err.code() == ErrorCode::kDimensionMismatch);
    }
  }

  TEST_CASE("noisy image embeddings follow the configured perturbation") {
    // With isotropic noise of variance s^2 in D dimensions the cosine to the
    // clean vector concentrates near 1/sqrt(1 + D s^2).
    const double sigma = 0.1;
    HashingEmbedder e(256, {sigma, 77});
    std::mt19937_64 rng(5);
    double sum = 0, sum2 = 0;
    const int n = 1000;
    for (int i = 0; i < n; ++i) {
      std::string report = random_sentence(rng, 6);
      ImageRecord r{"rec-" + std::to_string(i), std::nullopt, report};
      auto img = e.embed_image(r);
      CHECK(img == e.embed_image(r));
      CHECK(l2_norm(img.values()) == doctest::Approx(1.0).epsilon(1e-12));
      double c = dot(img.values(), e.embed_text(report).values());
      sum += c;
      sum2 += c * c;
    }
    double mean = sum / n;
    double sd = std::sqrt(sum2 / n - mean * mean);
    double expected = 1.0 / std::sqrt(1.0 + 256 * sigma * sigma);
    CHECK(mean == doctest::Approx(expected).epsilon(0.03));
    CHECK(sd < 0.05);

    ImageRecord a{"a", std::nullopt, "Lungs are clear"}, b{"b", std::nullopt, "Lungs are clear"};
    CHECK_FALSE(e.embed_image(a) == e.embed_image(b));
    HashingEmbedder other_seed(256, {sigma, 78});
    CHECK_FALSE(e.embed_image(a) == other_seed.embed_image(a));
  }

  TEST_CASE("constant callback embedder is accepted and checked") {
    CallbackEmbedder c(4, [](std::string_view) { return std::vector<double>{1, 1, 1, 1}; }, "const");
    CHECK(c.embed_text("anything").values()[0] == doctest::Approx(0.5));
    CHECK(c.name() == "const");
    CallbackEmbedder wrong(4, [](std::string_view) { return std::vector<double>{1, 1}; });
    CHECK_THROWS_WITH(wrong.embed_text("x"), "embedder callback returned dimension 2, expected 4");
  }

  TEST_CASE("empty inputs are rejected") {
    HashingEmbedder e;
    CHECK_THROWS_WITH(e.embed_text(""), "empty text");
    CHECK_THROWS_WITH(e.embed_text("   \n\t"), "empty text");
    CHECK_THROWS_WITH(e.embed_text("... !!"), "empty text");
    ImageRecord r{"lonely", std::nullopt, std::nullopt};
    CHECK_THROWS_WITH(e.embed_image(r), "unembeddable image record");
    CHECK_THROWS_AS(HashingEmbedder(0), Error);
  }

  TEST_CASE("replay embedder serves recorded vectors") {
    auto r = ReplayEmbedder::load(std::filesystem::path(KERM_GOLDEN_DIR) / "replay_fixture.jsonl");
    CHECK(r.dimension() == 4);
    auto v = as_vec(r.embed_text("Lungs are clear"));
    CHECK(v[0] == doctest::Approx(0.6));
    CHECK(v[1] == doctest::Approx(0.8));
    CHECK(as_vec(r.embed_text("  LUNGS are   clear ")) == v);
    CHECK(as_vec(r.embed_text("heart size is normal")) == std::vector<double>{0, 0, -1, 0});
    CHECK(as_vec(r.embed_text("No pleural effusion")) == std::vector<double>{0.5, 0.5, 0.5, 0.5});
    CHECK_THROWS_AS(r.embed_text("unseen sentence"), Error);
  }

  TEST_CASE("recording then replaying reproduces the source embedder") {
    HashingEmbedder h(32);
    std::vector<std::string> texts{"Lungs are clear", "Small left pleural effusion", "No pneumothorax"};
    TempDir dir;
    io::write_file_atomic(dir / "rec.jsonl", ReplayEmbedder::record(h, texts));
    auto r = ReplayEmbedder::load(dir / "rec.jsonl");
    for (const auto& t : texts) {
      auto a = as_vec(h.embed_text(t)), b = as_vec(r.embed_text(t));
      REQUIRE(a.size() == b.size());
      for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-15));
    }
  }

  TEST_CASE("image record files round trip") {
    std::vector<ImageRecord> recs{{"a", std::vector<double>{0.25, -1.5}, std::nullopt},
                                  {"b", std::nullopt, std::string("Lungs are clear.")}};
    auto back = parse_image_records(serialize_image_records(recs));
    REQUIRE(back.size() == 2);
    CHECK(back[0].id == "a");
    CHECK(*back[0].feature_vector == *recs[0].feature_vector);
    CHECK_FALSE(back[0].paired_report);
    CHECK(*back[1].paired_report == "Lungs are clear.");
    CHECK_THROWS_WITH(parse_image_records("{\"id\":\"a\"}\nnot json\n"),
                      doctest::Contains("image record line 2"));
  }
}
