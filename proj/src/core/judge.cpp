#include <algorithm>
#include <chrono>
#include <cmath>
#include <regex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "kerm/error.hpp"
#include "kerm/rewards.hpp"

namespace kerm {
namespace {

using Clock = std::chrono::steady_clock;

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
    s.replace(pos, from.size(), to);
}

}  // namespace

const std::string& default_judge_prompt() {
  static const std::string prompt =
      "You are an experienced radiologist comparing two sentences from chest X-ray reports.\n"
      "Sentence A comes from a generated report and sentence B from the reference report.\n"
      "Rate how well sentence A agrees with sentence B in clinical content: the findings, their\n"
      "presence or absence, location and severity. Wording and style do not matter. A statement\n"
      "that contradicts B or adds a finding that B does not support should receive a low score.\n"
      "Answer with a single number between 0 and 1, where 1 means clinically equivalent.\n\n"
      "Sentence A: {generated}\n"
      "Sentence B: {reference}\n"
      "Score:";
  return prompt;
}

std::string render_judge_prompt(std::string_view templ, std::string_view generated,
                                std::string_view reference) {
  std::string out(templ);
  replace_all(out, "{generated}", generated);
  replace_all(out, "{reference}", reference);
  return out;
}

std::optional<double> parse_first_decimal(std::string_view text) {
  static const std::regex number(R"([-+]?(\d+(\.\d*)?|\.\d+)([eE][-+]?\d+)?)");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(text.begin(), text.end(), m, number)) return std::nullopt;
  try {
    return std::stod(m.str());
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::optional<std::string> extract_reply_text(std::string_view body) {
  auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  if (j.contains("text") && j["text"].is_string()) return j["text"].get<std::string>();
  if (j.contains("choices") && j["choices"].is_array() && !j["choices"].empty()) {
    const auto& c = j["choices"][0];
    if (c.contains("message") && c["message"].contains("content") && c["message"]["content"].is_string())
      return c["message"]["content"].get<std::string>();
    if (c.contains("text") && c["text"].is_string()) return c["text"].get<std::string>();
  }
  return std::nullopt;
}

RemoteJudge::RemoteJudge(JudgeConfig config) : config_(std::move(config)) {
  if (config_.endpoint.empty()) fail(ErrorCode::kInvalidArgument, "remote judge requires an endpoint");
  if (config_.timeout_seconds <= 0) fail(ErrorCode::kInvalidArgument, "judge timeout must be positive");
  if (config_.retries < 0) fail(ErrorCode::kInvalidArgument, "judge retries must be non-negative");
  if (config_.prompt_template.empty()) config_.prompt_template = default_judge_prompt();

  static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(config_.endpoint, m, url))
    fail(ErrorCode::kInvalidArgument, "malformed judge endpoint: " + config_.endpoint);
  scheme_host_port_ = m[1].str();
  path_ = m[2].matched ? m[2].str() : "/";
}

JudgeVerdict RemoteJudge::judge(std::string_view generated, std::string_view reference) const {
  const auto deadline =
      Clock::now() + std::chrono::duration_cast<Clock::duration>(
                         std::chrono::duration<double>(config_.timeout_seconds));
  nlohmann::json body = {{"prompt", render_judge_prompt(config_.prompt_template, generated, reference)}};
  const std::string payload = body.dump();

  std::optional<std::string> reply;
  for (int attempt = 0; attempt <= config_.retries && !reply; ++attempt) {
    auto remaining = deadline - Clock::now();
    if (remaining <= Clock::duration::zero()) break;
    auto remaining_us = std::chrono::duration_cast<std::chrono::microseconds>(remaining);

    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(remaining_us).count(),
                                  remaining_us.count() % 1000000);
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(remaining_us).count(),
                            remaining_us.count() % 1000000);
    client.set_write_timeout(std::chrono::duration_cast<std::chrono::seconds>(remaining_us).count(),
                             remaining_us.count() % 1000000);
    auto res = client.Post(path_, payload, "application/json");
    if (res && res->status >= 200 && res->status < 300) {
      reply = res->body;
      break;
    }
    auto backoff = std::chrono::milliseconds(50 * (attempt + 1));
    if (Clock::now() + backoff >= deadline) break;
    std::this_thread::sleep_for(backoff);
  }

  JudgeVerdict fallback{lexical_f_measure(generated, reference), true, false};
  if (!reply) return fallback;
  auto text = extract_reply_text(*reply);
  if (!text) return fallback;
  auto score = parse_first_decimal(*text);
  if (!score || !std::isfinite(*score)) return fallback;

  JudgeVerdict v;
  v.score = std::clamp(*score, 0.0, 1.0);
  v.clamped = v.score != *score;
  return v;
}

std::unique_ptr<SentenceJudge> make_judge(const JudgeConfig& config) {
  if (config.mode == JudgeMode::kRemote) return std::make_unique<RemoteJudge>(config);
  return std::make_unique<OfflineJudge>();
}

}  // namespace kerm
