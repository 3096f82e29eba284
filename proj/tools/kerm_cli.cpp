// kerm command line: corpus, retrieval, labeling, rewards, training and
// evaluation over the C interface.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kerm/kerm.h"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check(kerm_status st) {
  if (st != KERM_OK) throw Failure(std::string(kerm_status_name(st)) + ": " + kerm_last_error());
}

struct OwnedString {
  char* p = nullptr;
  ~OwnedString() { kerm_string_free(p); }
  std::string str() const { return p ? std::string(p) : std::string(); }
};

template <typename T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
};

using Corpus = Handle<kerm_corpus, kerm_corpus_free>;
using Embedder = Handle<kerm_embedder, kerm_embedder_free>;
using Index = Handle<kerm_index, kerm_index_free>;
using Lexicon = Handle<kerm_lexicon, kerm_lexicon_free>;
using Judge = Handle<kerm_judge, kerm_judge_free>;
using Experiment = Handle<kerm_experiment, kerm_experiment_free>;

std::string read_text(const std::string& path) {
  std::ostringstream ss;
  if (path == "-") {
    ss << std::cin.rdbuf();
    return ss.str();
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure("cannot read " + path);
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    std::cout.flush();
    return;
  }
  std::filesystem::path target(path);
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Failure("cannot write " + path);
    out << content;
    if (!out.flush()) throw Failure("cannot write " + path);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) throw Failure("cannot replace " + path + ": " + ec.message());
}

std::vector<std::string> nonempty_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") != std::string::npos) out.push_back(line);
  }
  return out;
}

// JSON Lines of strings or of objects carrying "report" or "text".
std::vector<std::string> read_reports(const std::string& path) {
  std::vector<std::string> out;
  auto lines = nonempty_lines(read_text(path));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto j = nlohmann::json::parse(lines[i], nullptr, false);
    if (j.is_string()) {
      out.push_back(j.get<std::string>());
    } else if (j.is_object() && j.contains("report") && j["report"].is_string()) {
      out.push_back(j["report"].get<std::string>());
    } else if (j.is_object() && j.contains("text") && j["text"].is_string()) {
      out.push_back(j["text"].get<std::string>());
    } else {
      throw Failure(path + " line " + std::to_string(i + 1) + ": expected a string or an object with \"report\"");
    }
  }
  return out;
}

void load_lexicon(Lexicon& lex, const std::string& path) {
  if (path.empty()) check(kerm_lexicon_default(&lex.p));
  else check(kerm_lexicon_load(path.c_str(), &lex.p));
}

void load_experiment(Experiment& exp, const std::string& config, const std::vector<std::string>& overrides) {
  if (config.empty()) check(kerm_experiment_create(nullptr, nullptr, &exp.p));
  else check(kerm_experiment_load(config.c_str(), &exp.p));
  for (const auto& kv : overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--set", "expected key=value, got '" + kv + "'");
    check(kerm_experiment_set(exp.p, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()));
  }
}

std::string output_dir_check(const std::string& path) {
  if (path.empty() || path == "-") return path;
  auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty() && !std::filesystem::is_directory(parent))
    throw Failure("output directory does not exist: " + parent.string());
  return path;
}

std::vector<kerm_scored_fact> parse_facts(const std::string& text) {
  std::size_t count = 0;
  std::size_t lines = nonempty_lines(text).size();
  std::vector<kerm_scored_fact> facts(lines);
  check(kerm_scored_facts_parse(text.c_str(), facts.data(), facts.size(), &count));
  facts.resize(count);
  return facts;
}

std::string facts_jsonl(const std::vector<kerm_scored_fact>& facts, const kerm_corpus* corpus) {
  OwnedString s;
  check(kerm_scored_facts_jsonl(facts.data(), facts.size(), corpus, &s.p));
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge-enhanced report generation toolkit: corpus, retrieval, labeling, rewards, training."};
  app.name("kerm");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kerm_version()));

  std::function<void()> action;

  // build-corpus
  std::vector<std::string> bc_inputs;
  std::string bc_out;
  auto* bc = app.add_subcommand("build-corpus", "Split documents into sentences and build a deduplicated fact corpus");
  bc->add_option("--input", bc_inputs, "Text file with one document per line ('-' reads stdin)")->required();
  bc->add_option("--out", bc_out, "Corpus file to write (JSON Lines)")->required();
  bc->callback([&] {
    action = [&] {
      output_dir_check(bc_out);
      std::vector<std::string> docs;
      for (const auto& f : bc_inputs)
        for (auto& l : nonempty_lines(read_text(f))) docs.push_back(std::move(l));
      std::vector<const char*> ptrs;
      for (const auto& d : docs) ptrs.push_back(d.c_str());
      Corpus corpus;
      check(kerm_corpus_build(ptrs.data(), ptrs.size(), &corpus.p));
      check(kerm_corpus_save(corpus.p, bc_out.c_str()));
      std::cerr << "corpus: " << kerm_corpus_size(corpus.p) << " facts\n";
    };
  });

  // index
  std::string ix_corpus, ix_out;
  std::size_t ix_dim = 256;
  auto* ix = app.add_subcommand("index", "Embed every fact of a corpus into a retrieval index");
  ix->add_option("--corpus", ix_corpus, "Corpus file")->required()->check(CLI::ExistingFile);
  ix->add_option("--out", ix_out, "Index file to write (JSON Lines)")->required();
  ix->add_option("--dim", ix_dim, "Hashing embedder dimension")->capture_default_str()->check(CLI::PositiveNumber);
  ix->callback([&] {
    action = [&] {
      output_dir_check(ix_out);
      Corpus corpus;
      Embedder emb;
      Index index;
      check(kerm_corpus_load(ix_corpus.c_str(), &corpus.p));
      check(kerm_embedder_hashing(ix_dim, 0.1, 0, &emb.p));
      check(kerm_index_build(corpus.p, emb.p, &index.p));
      check(kerm_index_save(index.p, ix_out.c_str()));
      std::cerr << "index: " << kerm_index_size(index.p) << " rows, dimension " << ix_dim << "\n";
    };
  });

  // retrieve
  std::string rt_index, rt_corpus, rt_text, rt_image, rt_image_id, rt_out;
  std::size_t rt_k = 10;
  auto* rt = app.add_subcommand("retrieve", "Exact top-k cosine retrieval of facts for a text or image query");
  rt->add_option("--index", rt_index, "Index file")->required()->check(CLI::ExistingFile);
  rt->add_option("--corpus", rt_corpus, "Corpus file; adds fact texts to the output")->check(CLI::ExistingFile);
  auto* q_text = rt->add_option("--query-text", rt_text, "Query text");
  auto* q_image =
      rt->add_option("--query-image", rt_image, "Image feature file (JSON Lines with id, features, report)")
          ->check(CLI::ExistingFile);
  q_text->excludes(q_image);
  rt->add_option("--image-id", rt_image_id, "Record to use from --query-image (default: first)");
  rt->add_option("--k", rt_k, "Number of facts to return")->capture_default_str()->check(CLI::PositiveNumber);
  rt->add_option("--out", rt_out, "Output file (default: stdout)");
  rt->callback([&] {
    if (rt_text.empty() && rt_image.empty()) throw CLI::RequiredError("--query-text or --query-image");
    action = [&] {
      output_dir_check(rt_out);
      Index index;
      check(kerm_index_load(rt_index.c_str(), &index.p));
      std::size_t dim = kerm_index_dimension(index.p);
      Embedder emb;
      check(kerm_embedder_hashing(dim, 0.1, 0, &emb.p));
      std::vector<double> query(dim);
      if (!rt_text.empty()) {
        check(kerm_embed_text(emb.p, rt_text.c_str(), query.data(), dim));
      } else {
        std::optional<nlohmann::json> chosen;
        for (const auto& line : nonempty_lines(read_text(rt_image))) {
          auto j = nlohmann::json::parse(line);
          if (rt_image_id.empty() || j.value("id", std::string()) == rt_image_id) {
            chosen = j;
            break;
          }
        }
        if (!chosen) throw Failure("image record not found");
        std::string id = chosen->value("id", std::string());
        std::vector<double> features;
        bool has_features = chosen->contains("features");
        if (has_features) features = (*chosen)["features"].get<std::vector<double>>();
        std::string report = chosen->value("report", std::string());
        check(kerm_embed_image(emb.p, id.c_str(), has_features ? features.data() : nullptr, features.size(),
                               chosen->contains("report") ? report.c_str() : nullptr, query.data(), dim));
      }
      std::vector<kerm_scored_fact> facts(rt_k);
      std::size_t n = 0;
      check(kerm_retrieve(index.p, query.data(), dim, rt_k, facts.data(), facts.size(), &n));
      facts.resize(n);
      Corpus corpus;
      if (!rt_corpus.empty()) check(kerm_corpus_load(rt_corpus.c_str(), &corpus.p));
      write_text(rt_out, facts_jsonl(facts, corpus.p));
    };
  });

  // purify
  std::string pf_corpus, pf_candidates = "-", pf_indication, pf_history, pf_out;
  std::size_t pf_m = 5, pf_dim = 256;
  auto* pf = app.add_subcommand("purify", "Re-rank retrieved facts against the clinical context and keep the top m");
  pf->add_option("--corpus", pf_corpus, "Corpus file")->required()->check(CLI::ExistingFile);
  pf->add_option("--candidates", pf_candidates, "Retrieved facts (JSON Lines, '-' reads stdin)")->capture_default_str();
  pf->add_option("--indication", pf_indication, "Indication text");
  pf->add_option("--history", pf_history, "Clinical history text");
  pf->add_option("--m", pf_m, "Number of facts to keep")->capture_default_str()->check(CLI::PositiveNumber);
  pf->add_option("--dim", pf_dim, "Hashing embedder dimension")->capture_default_str()->check(CLI::PositiveNumber);
  pf->add_option("--out", pf_out, "Output file (default: stdout)");
  pf->callback([&] {
    action = [&] {
      output_dir_check(pf_out);
      Corpus corpus;
      Embedder emb;
      check(kerm_corpus_load(pf_corpus.c_str(), &corpus.p));
      check(kerm_embedder_hashing(pf_dim, 0.1, 0, &emb.p));
      auto cands = parse_facts(read_text(pf_candidates));
      std::vector<kerm_scored_fact> out(cands.size());
      std::size_t n = 0;
      int context_free = 0;
      check(kerm_purify(cands.data(), cands.size(), pf_indication.c_str(), pf_history.c_str(), corpus.p, emb.p, pf_m,
                        out.data(), out.size(), &n, &context_free));
      out.resize(n);
      if (context_free) std::cerr << "purify: context-free (no indication or history), candidates passed through\n";
      write_text(pf_out, facts_jsonl(out, corpus.p));
    };
  });

  // label
  std::string lb_report, lb_lexicon;
  auto* lb = app.add_subcommand("label", "Extract the 14 disease labels from a report");
  lb->add_option("--report-file", lb_report, "Report text file ('-' reads stdin)")->required();
  lb->add_option("--lexicon", lb_lexicon, "Lexicon file (default: built-in)")->check(CLI::ExistingFile);
  lb->callback([&] {
    action = [&] {
      Lexicon lex;
      load_lexicon(lex, lb_lexicon);
      OwnedString s;
      check(kerm_label_report_json(lex.p, read_text(lb_report).c_str(), &s.p));
      std::cout << s.str() << "\n";
    };
  });

  // lexicon
  std::string lx_out;
  auto* lx = app.add_subcommand("lexicon", "Write the built-in label lexicon");
  lx->add_option("--out", lx_out, "Output file (default: stdout)");
  lx->callback([&] {
    action = [&] {
      output_dir_check(lx_out);
      Lexicon lex;
      check(kerm_lexicon_default(&lex.p));
      OwnedString s;
      check(kerm_lexicon_serialize(lex.p, &s.p));
      write_text(lx_out, s.str());
    };
  });

  // reward
  std::string rw_gen, rw_ref, rw_judge = "offline", rw_endpoint, rw_lexicon, rw_prompt, rw_out;
  double rw_alpha = 0.4, rw_timeout = 10.0;
  int rw_retries = 2;
  bool rw_no_dis = false, rw_no_sen = false, rw_report_mean = false, rw_unc_neg = false, rw_macro = false;
  auto* rw = app.add_subcommand("reward", "Score a generated report against a reference and print the reward trace");
  rw->add_option("--generated", rw_gen, "Generated report file")->required()->check(CLI::ExistingFile);
  rw->add_option("--reference", rw_ref, "Reference report file")->required()->check(CLI::ExistingFile);
  rw->add_option("--alpha", rw_alpha, "Blend weight of the sentence-level reward")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  rw->add_option("--judge", rw_judge, "Sentence judge")->capture_default_str()->check(CLI::IsMember({"offline", "remote"}));
  rw->add_option("--endpoint", rw_endpoint, "Remote judge URL");
  rw->add_option("--timeout", rw_timeout, "Remote judge timeout in seconds")->capture_default_str();
  rw->add_option("--retries", rw_retries, "Remote judge retries")->capture_default_str();
  rw->add_option("--prompt-file", rw_prompt, "Remote judge prompt template file")->check(CLI::ExistingFile);
  rw->add_flag("--no-r-dis", rw_no_dis, "Drop the disease-level reward");
  rw->add_flag("--no-r-sen", rw_no_sen, "Drop the sentence-level reward");
  rw->add_flag("--report-mean", rw_report_mean, "Use the mean sentence score for every token");
  rw->add_flag("--uncertain-negative", rw_unc_neg, "Count uncertain mentions as negative");
  rw->add_flag("--macro", rw_macro, "Macro-averaged disease F1");
  rw->add_option("--lexicon", rw_lexicon, "Lexicon file (default: built-in)")->check(CLI::ExistingFile);
  rw->add_option("--out", rw_out, "Output file (default: stdout)");
  rw->callback([&] {
    if (rw_judge == "remote" && rw_endpoint.empty()) throw CLI::RequiredError("--endpoint");
    action = [&] {
      output_dir_check(rw_out);
      Lexicon lex;
      load_lexicon(lex, rw_lexicon);
      std::string prompt = rw_prompt.empty() ? std::string() : read_text(rw_prompt);
      kerm_judge_config jc{rw_judge == "remote" ? 1 : 0, rw_endpoint.c_str(), rw_timeout, rw_retries,
                           rw_prompt.empty() ? nullptr : prompt.c_str()};
      Judge judge;
      check(kerm_judge_create(&jc, &judge.p));
      kerm_reward_options opts{rw_alpha, rw_no_dis ? 0 : 1, rw_no_sen ? 0 : 1, rw_report_mean ? 1 : 0,
                               rw_unc_neg ? 1 : 0, rw_macro ? 1 : 0};
      OwnedString s;
      check(kerm_reward_trace(lex.p, judge.p, read_text(rw_gen).c_str(), read_text(rw_ref).c_str(), &opts, &s.p));
      write_text(rw_out, s.str() + "\n");
    };
  });

  // synth-data
  std::size_t sd_n = 2000, sd_dim = 256;
  std::uint64_t sd_seed = 1;
  double sd_sigma = 0.1;
  std::string sd_out, sd_lexicon;
  auto* sd = app.add_subcommand("synth-data", "Generate a synthetic image/context/report dataset");
  sd->add_option("--n", sd_n, "Number of records")->capture_default_str()->check(CLI::PositiveNumber);
  sd->add_option("--seed", sd_seed, "Top-level seed")->capture_default_str();
  sd->add_option("--dim", sd_dim, "Embedding dimension")->capture_default_str()->check(CLI::PositiveNumber);
  sd->add_option("--sigma", sd_sigma, "Image synthesis noise")->capture_default_str()->check(CLI::NonNegativeNumber);
  sd->add_option("--lexicon", sd_lexicon, "Lexicon file (default: built-in)")->check(CLI::ExistingFile);
  sd->add_option("--out", sd_out, "Dataset file to write (JSON Lines)")->required();
  sd->callback([&] {
    action = [&] {
      output_dir_check(sd_out);
      Lexicon lex;
      load_lexicon(lex, sd_lexicon);
      Embedder emb;
      check(kerm_embedder_hashing(sd_dim, sd_sigma, kerm_derive_seed(sd_seed, "image"), &emb.p));
      check(kerm_synth_dataset(sd_n, kerm_derive_seed(sd_seed, "data"), lex.p, emb.p, sd_out.c_str()));
    };
  });

  // train
  std::string tr_config, tr_out, tr_log, tr_summary;
  std::vector<std::string> tr_set;
  auto* tr = app.add_subcommand("train", "Train the report policy with L = L_CE + L_RL");
  tr->add_option("--config", tr_config, "Experiment config (JSON or key=value; default: built-in defaults)")
      ->check(CLI::ExistingFile);
  tr->add_option("--set", tr_set, "Override a config key, e.g. --set alpha=0.2 (repeatable)");
  tr->add_option("--out", tr_out, "Checkpoint file to write")->required();
  tr->add_option("--log", tr_log, "Training log to write (JSON Lines)");
  tr->add_option("--summary", tr_summary, "Held-out summary file (default: stdout)");
  tr->callback([&] {
    action = [&] {
      output_dir_check(tr_out);
      output_dir_check(tr_log);
      output_dir_check(tr_summary);
      Experiment exp;
      load_experiment(exp, tr_config, tr_set);
      OwnedString summary;
      check(kerm_train(exp.p, tr_out.c_str(), tr_log.empty() ? nullptr : tr_log.c_str(), &summary.p));
      write_text(tr_summary, summary.str());
    };
  });

  // generate
  std::string gn_config, gn_ckpt, gn_dataset, gn_out;
  std::vector<std::string> gn_set;
  auto* gn = app.add_subcommand("generate", "Greedy-decode reports with a trained checkpoint");
  gn->add_option("--config", gn_config, "Experiment config used for training")->check(CLI::ExistingFile);
  gn->add_option("--set", gn_set, "Override a config key (repeatable)");
  gn->add_option("--checkpoint", gn_ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  gn->add_option("--dataset", gn_dataset, "Records to decode (default: the held-out split)")->check(CLI::ExistingFile);
  gn->add_option("--out", gn_out, "Output file (default: stdout)");
  gn->callback([&] {
    action = [&] {
      output_dir_check(gn_out);
      Experiment exp;
      load_experiment(exp, gn_config, gn_set);
      OwnedString s;
      check(kerm_generate(exp.p, gn_ckpt.c_str(), gn_dataset.empty() ? nullptr : gn_dataset.c_str(), &s.p));
      write_text(gn_out, s.str());
    };
  });

  // eval
  std::string ev_cand, ev_ref, ev_lexicon, ev_out;
  bool ev_per_example = false, ev_unc_neg = false;
  auto* ev = app.add_subcommand("eval", "BLEU-1..4, ROUGE-L and clinical efficacy of candidate reports");
  ev->add_option("--candidates", ev_cand, "Candidate reports (JSON Lines of strings or {\"report\"})")
      ->required()
      ->check(CLI::ExistingFile);
  ev->add_option("--references", ev_ref, "Reference reports (JSON Lines of strings or {\"report\"})")
      ->required()
      ->check(CLI::ExistingFile);
  ev->add_flag("--per-example", ev_per_example, "Include the per-example breakdown");
  ev->add_flag("--uncertain-negative", ev_unc_neg, "Count uncertain mentions as negative");
  ev->add_option("--lexicon", ev_lexicon, "Lexicon file (default: built-in)")->check(CLI::ExistingFile);
  ev->add_option("--out", ev_out, "Output file (default: stdout)");
  ev->callback([&] {
    action = [&] {
      output_dir_check(ev_out);
      auto cands = read_reports(ev_cand);
      auto refs = read_reports(ev_ref);
      if (cands.size() != refs.size()) throw Failure("candidate and reference counts differ");
      std::vector<const char*> c, r;
      for (const auto& s : cands) c.push_back(s.c_str());
      for (const auto& s : refs) r.push_back(s.c_str());
      Lexicon lex;
      load_lexicon(lex, ev_lexicon);
      OwnedString s;
      check(kerm_evaluate(c.data(), r.data(), c.size(), lex.p, ev_unc_neg ? 1 : 0, ev_per_example ? 1 : 0, &s.p));
      write_text(ev_out, s.str());
    };
  });

  // ablate
  std::string ab_config, ab_out, ab_table;
  std::vector<std::string> ab_set;
  auto* ab = app.add_subcommand("ablate", "Train and evaluate the six ablation configurations on shared seeds");
  ab->add_option("--config", ab_config, "Experiment config (default: built-in defaults)")->check(CLI::ExistingFile);
  ab->add_option("--set", ab_set, "Override a config key (repeatable)");
  ab->add_option("--out", ab_out, "JSON result file (default: stdout)");
  ab->add_option("--table", ab_table, "Text table file (default: stderr)");
  ab->callback([&] {
    action = [&] {
      output_dir_check(ab_out);
      output_dir_check(ab_table);
      Experiment exp;
      load_experiment(exp, ab_config, ab_set);
      OwnedString json, table;
      kerm_status st = kerm_ablate(exp.p, &json.p, &table.p);
      std::string err = kerm_last_error();
      if (json.p) write_text(ab_out, json.str());
      if (table.p) {
        if (ab_table.empty()) std::cerr << table.str();
        else write_text(ab_table, table.str());
      }
      if (st != KERM_OK) throw Failure(std::string(kerm_status_name(st)) + ": " + err);
    };
  });

  // sweep-alpha
  std::string sw_config, sw_out, sw_csv;
  std::vector<std::string> sw_set;
  std::vector<double> sw_values{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  auto* sw = app.add_subcommand("sweep-alpha", "Train once per blend weight and record CE-F1 and BLEU-4");
  sw->add_option("--config", sw_config, "Experiment config (default: built-in defaults)")->check(CLI::ExistingFile);
  sw->add_option("--set", sw_set, "Override a config key (repeatable)");
  sw->add_option("--values", sw_values, "Alpha values")
      ->delimiter(',')
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  sw->add_option("--out", sw_out, "JSON result file (default: stdout)");
  sw->add_option("--csv", sw_csv, "CSV result file");
  sw->callback([&] {
    action = [&] {
      output_dir_check(sw_out);
      output_dir_check(sw_csv);
      Experiment exp;
      load_experiment(exp, sw_config, sw_set);
      OwnedString json, csv;
      check(kerm_sweep_alpha(exp.p, sw_values.data(), sw_values.size(), &json.p, &csv.p));
      write_text(sw_out, json.str());
      if (!sw_csv.empty()) write_text(sw_csv, csv.str());
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }
  try {
    if (action) action();
  } catch (const CLI::ValidationError& e) {
    std::cerr << "kerm: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "kerm: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
