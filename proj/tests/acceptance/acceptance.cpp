// Acceptance checks. Prints one line per criterion and exits non-zero if any
// selected criterion fails.
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "kerm/metrics.hpp"
#include "kerm/pipeline.hpp"
#include "kerm/policy.hpp"
#include "kerm/retrieval.hpp"
#include "kerm/rewards.hpp"
#include "kerm/trainer.hpp"
#include "support/oracles.hpp"
#include "unit/test_util.hpp"

using namespace kerm;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<Fact> random_facts(std::mt19937_64& rng, std::size_t n) {
  std::set<std::string> seen;
  std::vector<Fact> facts;
  while (facts.size() < n) {
    std::string s = random_sentence(rng);
    if (seen.insert(s).second) facts.push_back({facts.size(), s, "random"});
  }
  return facts;
}

// Top-10 retrieval against the exact integer-arithmetic ranking.
Outcome criterion_1() {
  auto start = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<std::size_t> size(10, 2000);
  HashingEmbedder embedder;
  int bad = 0;
  double worst_score = 0.0;
  for (int inst = 0; inst < 200; ++inst) {
    auto facts = random_facts(rng, size(rng));
    auto corpus = KnowledgeCorpus::from_facts(facts);
    auto index = RetrievalIndex::build(corpus, embedder);
    std::string q = random_sentence(rng);
    auto got = retrieve(index, embedder.embed_text(q).values(), 10);

    std::vector<std::vector<double>> rows;
    for (const auto& f : facts) rows.push_back(oracle::hashed_features(f.text, kDefaultDimension));
    auto qv = oracle::hashed_features(q, kDefaultDimension);
    auto want = oracle::exact_topk(rows, qv, 10);
    bool ok = got.size() == want.size();
    for (std::size_t i = 0; ok && i < want.size(); ++i) {
      ok = got[i].fact_id == want[i];
      worst_score = std::max(worst_score, std::abs(got[i].score - oracle::raw_cosine(rows[want[i]], qv)));
    }
    bad += !ok;
  }
  double t = seconds_since(start);
  return {bad == 0 && worst_score <= 1e-12 && t < 10.0,
          fmt("200 instances, %d mismatched, max score error %.2e, %.2f s (limit 10 s)", bad, worst_score, t)};
}

// Purify against a brute-force re-rank of the candidates by context cosine.
Outcome criterion_2() {
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<std::size_t> size(20, 300), k_pick(1, 20);
  std::bernoulli_distribution has_indication(0.8), has_history(0.6);
  HashingEmbedder embedder;
  int bad = 0, not_subset = 0, context_free = 0;
  for (int inst = 0; inst < 100; ++inst) {
    auto facts = random_facts(rng, size(rng));
    auto corpus = KnowledgeCorpus::from_facts(facts);
    auto index = RetrievalIndex::build(corpus, embedder);
    auto candidates = retrieve(index, embedder.embed_text(random_sentence(rng)).values(), k_pick(rng));
    ClinicalContext ctx;
    if (has_indication(rng)) ctx.indication = random_sentence(rng);
    if (has_history(rng)) ctx.history = random_sentence(rng);
    const std::size_t m = kDefaultPurifiedM;
    auto got = purify(candidates, ctx, corpus, embedder, m);

    std::vector<std::size_t> want;
    std::vector<std::vector<double>> rows;
    std::vector<std::size_t> ids;
    for (const auto& c : candidates) {
      rows.push_back(oracle::hashed_features(facts[c.fact_id].text, kDefaultDimension));
      ids.push_back(c.fact_id);
    }
    std::vector<double> cv;
    if (ctx.indication.empty() && ctx.history.empty()) {
      ++context_free;
      for (std::size_t i = 0; i < std::min(m, ids.size()); ++i) want.push_back(ids[i]);
    } else {
      std::string text = ctx.indication.empty() ? ctx.history
                         : ctx.history.empty()  ? ctx.indication
                                                : ctx.indication + " " + ctx.history;
      cv = oracle::hashed_features(text, kDefaultDimension);
      want = oracle::exact_topk(rows, cv, m, ids);
    }
    bool ok = got.facts.size() == want.size() && got.context_free == cv.empty();
    for (std::size_t i = 0; ok && i < want.size(); ++i) {
      ok = got.facts[i].fact_id == want[i];
      if (ok && !cv.empty()) {
        std::size_t pos = std::find(ids.begin(), ids.end(), want[i]) - ids.begin();
        ok = std::abs(got.facts[i].score - oracle::raw_cosine(rows[pos], cv)) <= 1e-12;
      }
    }
    bad += !ok;
    for (const auto& f : got.facts) {
      auto it = std::find_if(candidates.begin(), candidates.end(),
                             [&](const ScoredFact& c) { return c.fact_id == f.fact_id; });
      if (it == candidates.end() || (f.retrieval_score && *f.retrieval_score != it->score)) {
        ++not_subset;
        break;
      }
    }
  }
  return {bad == 0 && not_subset == 0,
          fmt("100 instances, top-5 (%d without context), %d mismatched, %d not a subset of the input", context_free, bad,
              not_subset)};
}

// Disease reward by direct counting, and blend affinity.
Outcome criterion_3() {
  std::mt19937_64 rng(303);
  std::uniform_int_distribution<int> mention(0, 3);
  double worst = 0.0;
  int identity_bad = 0, disjoint_bad = 0;
  for (int i = 0; i < 500; ++i) {
    DiseaseLabels g, r;
    for (std::size_t k = 0; k < kCategoryCount; ++k) {
      g.slots[k] = static_cast<Mention>(mention(rng));
      r.slots[k] = static_cast<Mention>(mention(rng));
    }
    for (auto pol : {UncertaintyPolicy::kUncertainPositive, UncertaintyPolicy::kUncertainNegative}) {
      auto bin = [&](const DiseaseLabels& l) {
        std::array<bool, 14> b{};
        for (std::size_t k = 0; k < kCategoryCount; ++k)
          b[k] = l.slots[k] == Mention::kPositive ||
                 (l.slots[k] == Mention::kUncertain && pol == UncertaintyPolicy::kUncertainPositive);
        return b;
      };
      double want = oracle::micro_f1(oracle::count(bin(g), bin(r)));
      worst = std::max(worst, std::abs(disease_reward_from_labels(g, r, pol) - want));
      identity_bad += disease_reward_from_labels(g, g, pol) != 1.0;
      // Disjoint: positives of g only where r has none.
      DiseaseLabels a, b;
      for (std::size_t k = 0; k < kCategoryCount; ++k) (k % 2 ? a : b).slots[k] = g.slots[k];
      a.slots[1] = Mention::kPositive;
      b.slots[2] = Mention::kPositive;
      disjoint_bad += disease_reward_from_labels(a, b, pol) != 0.0;
    }
  }

  std::uniform_real_distribution<double> u(0.0, 1.0);
  double affine_worst = 0.0, endpoint_worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    std::vector<double> scores{u(rng), u(rng), u(rng)};
    std::vector<std::size_t> tokens{0, 0, 1, 2, 2, 2};
    double rd = u(rng), a = u(rng), b = u(rng), lam = u(rng);
    auto at = [&](double alpha) {
      BlendOptions o;
      o.alpha = alpha;
      return blend(rd, scores, tokens, o);
    };
    auto ra = at(a), rb = at(b), rm = at(lam * a + (1 - lam) * b), r0 = at(0.0), r1 = at(1.0);
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      affine_worst = std::max(affine_worst, std::abs(rm[t] - (lam * ra[t] + (1 - lam) * rb[t])));
      endpoint_worst = std::max(endpoint_worst, std::abs(r0[t] - rd));
      endpoint_worst = std::max(endpoint_worst, std::abs(r1[t] - scores[tokens[t]]));
    }
  }
  bool default_ok = BlendOptions{}.alpha == 0.4 && TrainingConfig{}.alpha == 0.4 &&
                    ExperimentConfig{}.training.alpha == 0.4;
  bool pass = worst <= 1e-12 && identity_bad == 0 && disjoint_bad == 0 && affine_worst <= 1e-12 &&
              endpoint_worst <= 1e-12 && default_ok;
  return {pass, fmt("500 label pairs x 2 policies, max |reward - counted| %.2e, identity failures %d, disjoint "
                    "failures %d, affinity error %.2e, endpoint error %.2e, default alpha %s",
                    worst, identity_bad, disjoint_bad, affine_worst, endpoint_worst, default_ok ? "0.4" : "wrong")};
}

double relative_error(double numeric, double analytic) {
  return std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-3});
}

// Central finite differences for the CE and REINFORCE gradients.
Outcome criterion_4() {
  auto start = Clock::now();
  std::mt19937_64 rng(404);
  std::uniform_int_distribution<std::size_t> v_pick(4, 20), e_pick(2, 8), d_pick(2, 8), len_pick(1, 8);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double h = 1e-5;
  double worst_ce = 0.0, worst_rl = 0.0;
  const int instances = 60;
  for (int inst = 0; inst < instances; ++inst) {
    PolicyShape shape{v_pick(rng), e_pick(rng), d_pick(rng)};
    auto params = PolicyParams::random(shape, rng(), 0.5);
    std::vector<double> cond(shape.cond);
    for (double& c : cond) c = normal(rng);
    std::uniform_int_distribution<TokenId> tok(3, static_cast<TokenId>(shape.vocab - 1));
    std::vector<TokenId> seq{kBos};
    for (std::size_t i = 0, n = len_pick(rng); i < n; ++i) seq.push_back(tok(rng));
    seq.push_back(kEos);
    std::vector<double> rewards(seq.size() - 1);
    for (double& r : rewards) r = u(rng);
    double baseline = u(rng);

    auto ce = ce_loss_and_grad(params, cond, seq);
    auto rl = rl_loss_and_grad(params, cond, seq, rewards, baseline);
    for (std::size_t p = 0; p < params.size(); ++p) {
      PolicyParams plus = params, minus = params;
      plus.data()[p] += h;
      minus.data()[p] -= h;
      double n_ce = (ce_loss_and_grad(plus, cond, seq).loss - ce_loss_and_grad(minus, cond, seq).loss) / (2 * h);
      double n_rl = (rl_loss_and_grad(plus, cond, seq, rewards, baseline).loss -
                     rl_loss_and_grad(minus, cond, seq, rewards, baseline).loss) /
                    (2 * h);
      worst_ce = std::max(worst_ce, relative_error(n_ce, ce.grad.data()[p]));
      worst_rl = std::max(worst_rl, relative_error(n_rl, rl.grad.data()[p]));
    }
  }
  double t = seconds_since(start);
  return {worst_ce <= 1e-4 && worst_rl <= 1e-4 && t < 60.0,
          fmt("%d instances (V<=20, E<=8, h=1e-5), max relative error CE %.2e RL %.2e (limit 1e-4), %.2f s", instances,
              worst_ce, worst_rl, t)};
}

// Held-out improvement over the untrained model at the default settings.
Outcome criterion_5() {
  auto start = Clock::now();
  int reward_up = 0, ce_ok = 0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ExperimentConfig config;
    config.training.seed = seed;
    ExperimentData data{config};
    auto full = run_experiment(data, config.training);
    TrainingConfig base_cfg = config.training;
    base_cfg.switches = ablation_configurations().front().second;
    auto base = run_experiment(data, base_cfg);
    bool up = full.trained.mean_reward > full.initial.mean_reward;
    bool ce = full.trained.report.ce_f1 >= base.trained.report.ce_f1;
    reward_up += up;
    ce_ok += ce;
    per_seed += fmt(" [seed %llu: reward %.4f -> %.4f, CE-F1 full %.4f base %.4f]",
                    static_cast<unsigned long long>(seed), full.initial.mean_reward, full.trained.mean_reward,
                    full.trained.report.ce_f1, base.trained.report.ce_f1);
  }
  double t = seconds_since(start);
  return {reward_up == 5 && ce_ok >= 4 && t < 900.0,
          fmt("reward improved on %d/5 seeds (need 5), full CE-F1 >= base on %d/5 (need 4), %.1f s;", reward_up,
              ce_ok, t) +
              per_seed};
}

// Ablation rows, shared seeds and component counters.
Outcome criterion_6() {
  ExperimentConfig config;
  ExperimentData data{config};
  auto env = data.environment();
  auto result = ablate(data, config.training);
  auto expected = ablation_configurations();
  std::vector<std::string> problems;
  if (result.error) problems.push_back("error: " + *result.error);
  if (result.rows.size() != 6) problems.push_back(fmt("%zu rows", result.rows.size()));
  for (std::size_t i = 0; i < std::min<std::size_t>(6, result.rows.size()); ++i) {
    const auto& row = result.rows[i];
    const auto& s = row.switches;
    const auto& c = row.counters;
    if (row.name != expected[i].first || !(s == expected[i].second)) problems.push_back(row.name + ": wrong settings");
    auto ran = [](std::size_t n) { return n > 0; };
    if (ran(c.mke) != s.use_mke) problems.push_back(row.name + ": mke counter");
    if (ran(c.sampling) != s.use_rl || ran(c.rl_gradient) != s.use_rl) problems.push_back(row.name + ": rl counters");
    if (ran(c.disease_reward) != (s.use_rl && s.use_r_dis)) problems.push_back(row.name + ": r_dis counter");
    if (ran(c.sentence_reward) != (s.use_rl && s.use_r_sen)) problems.push_back(row.name + ": r_sen counter");
    if (c.ce_gradient != result.rows[0].counters.ce_gradient || !ran(c.ce_gradient))
      problems.push_back(row.name + ": ce counter");
    // Same seed as a standalone run with these switches.
    TrainingConfig solo = config.training;
    solo.switches = s;
    auto trained = train(data.train_split(), solo, env, &data.vocab());
    auto eval = evaluate_policy(trained.params, data.vocab(), data.holdout_split(), solo, env);
    if (!(trained.counters == c) || eval.generated != row.evaluation.generated ||
        eval.mean_reward != row.evaluation.mean_reward)
      problems.push_back(row.name + ": differs from a standalone run");
  }
  std::string counters;
  for (const auto& r : result.rows)
    counters += fmt(" [%s mke=%zu samp=%zu dis=%zu sen=%zu rl=%zu ce=%zu]", r.name.c_str(), r.counters.mke,
                    r.counters.sampling, r.counters.disease_reward, r.counters.sentence_reward, r.counters.rl_gradient,
                    r.counters.ce_gradient);
  std::string detail = fmt("%zu rows;", result.rows.size()) + counters;
  for (const auto& p : problems) detail += "; " + p;
  return {problems.empty(), detail};
}

// Text metric fixtures, identity corpora and BLEU order monotonicity.
Outcome criterion_7() {
  std::vector<std::string> problems;
  auto one = [](std::string s) { return std::vector<std::string>{std::move(s)}; };
  auto near = [](double a, double b) { return std::abs(a - b) <= 1e-9; };
  if (!near(bleu(one("the the the the"), one("the cat sat"), 1), 0.25)) problems.push_back("clipped unigram fixture");
  if (!near(bleu(one("the cat"), one("the cat sat on the mat"), 1), std::exp(1.0 - 6.0 / 2.0)))
    problems.push_back("brevity penalty fixture");
  if (!near(rouge_l_pair("a b c d", "a c d e"), 0.75)) problems.push_back("rouge-l fixture");
  if (!near(bleu(one("lungs clear heart normal"), one("heart normal lungs clear"), 4, {true}),
            std::pow(1.0 * 0.75 * (1.0 / 3.0) * 0.5, 0.25)))
    problems.push_back("smoothed fixture");
  if (bleu(one("x y z"), one("a b c"), 1) != 0.0 || rouge_l_pair("x y z", "a b c") != 0.0)
    problems.push_back("disjoint fixture");

  std::mt19937_64 rng(707);
  const auto& lex = default_lexicon();
  int identity_bad = 0;
  for (int i = 0; i < 20; ++i) {
    std::vector<std::string> r;
    for (int k = 0; k < 5; ++k) r.push_back(random_sentence(rng, 4 + k) + ". " + sentence_pool()[rng() % 20] + ".");
    auto e = evaluate_reports(r, r, lex, UncertaintyPolicy::kUncertainPositive);
    for (double x : {e.bleu_1, e.bleu_2, e.bleu_3, e.bleu_4, e.rouge_l, e.ce_precision, e.ce_recall, e.ce_f1})
      if (!near(x, 1.0)) {
        ++identity_bad;
        break;
      }
  }
  if (identity_bad) problems.push_back(fmt("%d identity corpora below 1", identity_bad));

  int mono_bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> c, r;
    for (int i = 0; i < 6; ++i) {
      std::string ref = random_sentence(rng);
      r.push_back(ref);
      auto words = oracle::words(ref);
      std::string cand;
      for (std::size_t k = 0; k < words.size(); ++k)
        cand += (k ? " " : "") + (rng() % 3 == 0 ? random_sentence(rng, 1) : words[k]);
      c.push_back(cand);
    }
    double prev = bleu(c, r, 1);
    for (int n = 2; n <= 4; ++n) {
      double b = bleu(c, r, n);
      if (b > prev + 1e-12) {
        ++mono_bad;
        break;
      }
      prev = b;
    }
  }
  if (mono_bad) problems.push_back(fmt("BLEU-n increased with n on %d corpora", mono_bad));
  std::string detail = "5 fixtures within 1e-9, 20 identity corpora, 100 monotonicity corpora";
  for (const auto& p : problems) detail += "; " + p;
  return {problems.empty(), detail};
}

// Determinism of training artifacts, and a full alpha sweep.
Outcome criterion_8() {
  std::vector<std::string> problems;
  ExperimentConfig config;
  std::string logs[2], checkpoints[2];
  for (int run = 0; run < 2; ++run) {
    ExperimentData data{config};
    auto trained = train(data.train_split(), config.training, data.environment(), &data.vocab());
    logs[run] = training_log_to_jsonl(trained.log);
    checkpoints[run] = serialize_checkpoint({trained.params, trained.vocab, config.training.seed});
  }
  if (logs[0] != logs[1]) problems.push_back("training logs differ");
  if (checkpoints[0] != checkpoints[1]) problems.push_back("checkpoints differ");
  if (logs[0].empty() || checkpoints[0].empty()) problems.push_back("empty artifacts");

  ExperimentData data{config};
  auto grid = default_alpha_grid();
  std::vector<double> want{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  bool grid_ok = grid.size() == want.size();
  for (std::size_t i = 0; grid_ok && i < grid.size(); ++i) grid_ok = std::abs(grid[i] - want[i]) < 1e-12;
  if (!grid_ok) problems.push_back("alpha grid is not {0, 0.2, ..., 1}");
  auto rows = sweep_alpha(data, config.training, grid);
  try {
    auto j = nlohmann::json::parse(sweep_to_json(rows));
    const auto& arr = j.at("rows");
    if (arr.size() != grid.size()) problems.push_back("sweep row count");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      for (const char* key : {"alpha", "ce_f1", "bleu_4", "mean_reward"}) {
        double x = arr[i].at(key).get<double>();
        if (!std::isfinite(x) || x < 0.0 || x > 1.0) problems.push_back(fmt("row %zu %s out of range", i, key));
      }
      if (std::abs(arr[i].at("alpha").get<double>() - grid[i]) > 1e-12) problems.push_back("row alpha");
    }
    if (!rows.empty() && !rows.front().constant_token_reward) problems.push_back("alpha 0 rewards vary by token");
  } catch (const std::exception& e) {
    problems.push_back(std::string("malformed sweep output: ") + e.what());
  }
  auto lines = std::count(logs[0].begin(), logs[0].end(), '\n');
  std::string detail = fmt("two runs: %ld log lines, %zu checkpoint bytes, %s; sweep rows %zu", lines,
                           checkpoints[0].size(), problems.empty() ? "byte-identical" : "see problems", rows.size());
  for (const auto& p : problems) detail += "; " + p;
  return {problems.empty(), detail};
}

// Local judge endpoint.
struct Stub {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  explicit Stub(httplib::Server::Handler handler) {
    server.Post("/judge", std::move(handler));
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~Stub() {
    server.stop();
    thread.join();
  }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port) + "/judge"; }
};

// Remote judge against a stub, and its fallback when the stub is gone.
Outcome criterion_9() {
  std::vector<std::string> problems;
  const std::map<std::string, double> canned{{"effusion", 0.137}, {"pneumothorax", 0.91}, {"heart", 0.5}};
  auto handler = [&](const httplib::Request& req, httplib::Response& res) {
    std::string prompt = nlohmann::json::parse(req.body).at("prompt");
    double score = 0.0;
    for (const auto& [word, s] : canned)
      if (prompt.find(word) != std::string::npos) score = s;
    res.set_content(nlohmann::json{{"text", fmt("Score: %.3f", score)}}.dump(), "application/json");
  };
  JudgeConfig jc;
  jc.mode = JudgeMode::kRemote;
  jc.timeout_seconds = 1.0;
  jc.retries = 2;
  std::string endpoint;
  {
    Stub stub(handler);
    endpoint = stub.endpoint();
    jc.endpoint = endpoint;
    RemoteJudge judge(jc);
    for (const auto& [word, s] : canned) {
      auto v = judge.judge("small " + word, "large " + word);
      if (v.score != s || v.degraded) problems.push_back("stub score for " + word + " not returned verbatim");
    }
    std::vector<std::string> sentences{"small effusion", "tiny pneumothorax", "heart normal"};
    auto scored = sentence_reward(sentences, "Left effusion. Right pneumothorax. Heart size normal.", judge);
    if (scored.size() != 3 || scored[0].score != 0.137 || scored[1].score != 0.91 || scored[2].score != 0.5)
      problems.push_back("sentence_reward did not return stub scores verbatim");
    auto trace = score_report("Small effusion. Heart is normal.", "Tiny effusion. Normal heart.", default_lexicon(),
                              judge, {}, UncertaintyPolicy::kUncertainPositive);
    if (trace.degraded || trace.sentence_scores.size() != 2 || trace.sentence_scores[0].score != 0.137 ||
        trace.sentence_scores[1].score != 0.5)
      problems.push_back("trace with stub up");
  }
  // The stub is stopped; the same port now refuses connections.
  RemoteJudge down(jc);
  auto start = Clock::now();
  auto v = down.judge("small left effusion", "left effusion");
  double refused = seconds_since(start);
  if (!v.degraded || v.score != lexical_f_measure("small left effusion", "left effusion"))
    problems.push_back("refused connection did not fall back");
  start = Clock::now();
  auto trace = score_report("Small effusion. Heart is normal.", "Tiny effusion. Normal heart.", default_lexicon(), down,
                            {}, UncertaintyPolicy::kUncertainPositive);
  double refused_trace = seconds_since(start);
  if (!trace.degraded || trace_to_json(trace).find("\"degraded\":true") == std::string::npos)
    problems.push_back("trace not marked degraded");

  // A stub that accepts but never answers in time.
  Stub slow([](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(2500));
    res.set_content(R"({"text":"0.99"})", "application/json");
  });
  JudgeConfig sc = jc;
  sc.endpoint = slow.endpoint();
  sc.timeout_seconds = 0.5;
  start = Clock::now();
  auto sv = RemoteJudge(sc).judge("a b", "a c");
  double hung = seconds_since(start);
  if (!sv.degraded || sv.score != lexical_f_measure("a b", "a c")) problems.push_back("slow stub did not fall back");
  if (refused > jc.timeout_seconds) problems.push_back("refused fallback exceeded the timeout");
  if (refused_trace > 2 * jc.timeout_seconds) problems.push_back("degraded trace exceeded two sentence timeouts");
  if (hung > sc.timeout_seconds + 0.1) problems.push_back("slow fallback exceeded the timeout");
  std::string detail = fmt("3 stub scores, fallback after %.3f s (refused, timeout %.1f s) and %.3f s (hung, timeout "
                           "%.1f s)",
                           refused, jc.timeout_seconds, hung, sc.timeout_seconds);
  for (const auto& p : problems) detail += "; " + p;
  return {problems.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> selected;
  app.add_option("--criterion", selected, "Criterion to run (repeatable; default: all)")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);
  if (selected.empty()) selected = {1, 2, 3, 4, 5, 6, 7, 8, 9};

  const std::vector<std::function<Outcome()>> checks{criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
                                                     criterion_6, criterion_7, criterion_8, criterion_9};
  int failed = 0;
  for (int n : selected) {
    Outcome o;
    try {
      o = checks[n - 1]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %d: %s %s\n", n, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed ? 1 : 0;
}
