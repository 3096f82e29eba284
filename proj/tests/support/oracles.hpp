// Straight-line reference implementations used as test oracles. Nothing here
// calls into the library's own hashing, ranking or counting code.
#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::vector<std::string> words(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    std::size_t a = 0, b = cur.size();
    while (a < b && !std::isalnum(static_cast<unsigned char>(cur[a]))) ++a;
    while (b > a && !std::isalnum(static_cast<unsigned char>(cur[b - 1]))) --b;
    if (b > a) {
      std::string w = cur.substr(a, b - a);
      for (char& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      out.push_back(w);
    }
    cur.clear();
  };
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) flush();
    else cur.push_back(c);
  }
  flush();
  return out;
}

// Dense signed bag of unigram and bigram features.
inline std::vector<double> hashed_features(const std::string& text, std::size_t dim) {
  std::vector<double> v(dim, 0.0);
  auto w = words(text);
  std::vector<std::string> feats;
  for (std::size_t i = 0; i < w.size(); ++i) {
    feats.push_back("u:" + w[i]);
    if (i + 1 < w.size()) feats.push_back("b:" + w[i] + " " + w[i + 1]);
  }
  for (const auto& f : feats) {
    std::uint64_t h = fnv1a(f);
    v[h % dim] += ((h >> 32) & 1U) ? -1.0 : 1.0;
  }
  return v;
}

inline double raw_dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double raw_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  return raw_dot(a, b) / std::sqrt(raw_dot(a, a) * raw_dot(b, b));
}

inline std::vector<double> unit(std::vector<double> v) {
  double n = std::sqrt(raw_dot(v, v));
  for (double& x : v) x /= n;
  return v;
}

// Full argsort of every row against the query, score descending then id
// ascending, truncated to k.
inline std::vector<std::pair<std::size_t, double>> brute_force_topk(const std::vector<std::vector<double>>& rows,
                                                                    const std::vector<double>& query, std::size_t k) {
  std::vector<std::pair<std::size_t, double>> all;
  for (std::size_t i = 0; i < rows.size(); ++i) all.emplace_back(i, raw_cosine(rows[i], query));
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

// Exact top-k for integer-valued feature vectors. cos(a,q) > cos(b,q) iff
// d_a|d_a| n_b > d_b|d_b| n_a with d the raw dot and n the squared norm, so
// ties are decided exactly and fall back to the id. ids defaults to the row
// index.
inline std::vector<std::size_t> exact_topk(const std::vector<std::vector<double>>& rows,
                                           const std::vector<double>& query, std::size_t k,
                                           const std::vector<std::size_t>& ids = {}) {
  struct Row {
    std::size_t id;
    long long d, n;
  };
  std::vector<Row> all;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    long long d = 0, n = 0;
    for (std::size_t j = 0; j < query.size(); ++j) {
      d += static_cast<long long>(rows[i][j]) * static_cast<long long>(query[j]);
      n += static_cast<long long>(rows[i][j]) * static_cast<long long>(rows[i][j]);
    }
    all.push_back({ids.empty() ? i : ids[i], d, n});
  }
  auto key = [](const Row& a, const Row& b) {
    return static_cast<__int128>(a.d) * (a.d < 0 ? -a.d : a.d) * b.n;
  };
  std::sort(all.begin(), all.end(), [&](const Row& a, const Row& b) {
    __int128 l = key(a, b), r = key(b, a);
    if (l != r) return l > r;
    return a.id < b.id;
  });
  std::vector<std::size_t> top;
  for (std::size_t i = 0; i < std::min(k, all.size()); ++i) top.push_back(all[i].id);
  return top;
}

struct Counts {
  int tp = 0, fp = 0, fn = 0;
};

inline Counts count(const std::array<bool, 14>& g, const std::array<bool, 14>& r) {
  Counts c;
  for (int i = 0; i < 14; ++i) {
    c.tp += g[i] && r[i];
    c.fp += g[i] && !r[i];
    c.fn += !g[i] && r[i];
  }
  return c;
}

inline double micro_f1(const Counts& c) {
  if (c.tp == 0 && c.fp == 0 && c.fn == 0) return 1.0;
  return (2.0 * c.tp) / (2.0 * c.tp + c.fp + c.fn);
}

inline std::size_t lcs(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::vector<std::size_t>> t(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      t[i][j] = a[i - 1] == b[j - 1] ? t[i - 1][j - 1] + 1 : std::max(t[i - 1][j], t[i][j - 1]);
  return t[a.size()][b.size()];
}

inline double rouge_l(const std::string& c, const std::string& r, double beta = 1.2) {
  auto a = words(c), b = words(r);
  double l = static_cast<double>(lcs(a, b));
  if (l == 0) return 0.0;
  double p = l / a.size(), rec = l / b.size();
  return (1 + beta * beta) * p * rec / (rec + beta * beta * p);
}

// Corpus BLEU-n with clipped counts, recomputed from n-gram multisets.
inline double bleu(const std::vector<std::string>& cands, const std::vector<std::string>& refs, int n) {
  std::vector<double> match(n, 0), total(n, 0);
  double c_len = 0, r_len = 0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    auto c = words(cands[i]), r = words(refs[i]);
    c_len += c.size();
    r_len += r.size();
    for (int k = 1; k <= n; ++k) {
      std::map<std::string, int> cc, rc;
      for (std::size_t s = 0; s + k <= c.size(); ++s) {
        std::string g;
        for (int t = 0; t < k; ++t) g += c[s + t] + "\x1f";
        ++cc[g];
      }
      for (std::size_t s = 0; s + k <= r.size(); ++s) {
        std::string g;
        for (int t = 0; t < k; ++t) g += r[s + t] + "\x1f";
        ++rc[g];
      }
      for (auto& [g, cnt] : cc) {
        total[k - 1] += cnt;
        match[k - 1] += std::min(cnt, rc[g]);
      }
    }
  }
  double lp = 0;
  for (int k = 0; k < n; ++k) {
    if (match[k] == 0) return 0.0;
    lp += std::log(match[k] / total[k]) / n;
  }
  double bp = c_len < r_len ? std::exp(1 - r_len / c_len) : 1.0;
  return bp * std::exp(lp);
}

// Token multiset F-measure.
inline double token_f(const std::string& a, const std::string& b) {
  auto x = words(a), y = words(b);
  if (x.empty() || y.empty()) return 0.0;
  std::multiset<std::string> ys(y.begin(), y.end());
  int overlap = 0;
  for (const auto& t : x) {
    auto it = ys.find(t);
    if (it != ys.end()) {
      ys.erase(it);
      ++overlap;
    }
  }
  if (overlap == 0) return 0.0;
  double p = double(overlap) / x.size(), r = double(overlap) / y.size();
  return 2 * p * r / (p + r);
}

}  // namespace oracle
