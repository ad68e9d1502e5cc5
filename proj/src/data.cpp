// Copyright 2026 The SharedMF Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sharedmf/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "sharedmf/errors.hpp"
#include "sharedmf/mf.hpp"

namespace sharedmf {

namespace {

// Unbiased index in [0, n) from raw engine output. Written out rather than
// using std::uniform_int_distribution so results match across standard
// libraries.
std::size_t draw_below(std::mt19937_64& eng, std::size_t n) {
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x;
  do {
    x = eng();
  } while (x >= limit);
  return static_cast<std::size_t>(x % n);
}

template <typename T>
void seeded_shuffle(std::vector<T>& v, std::mt19937_64& eng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[draw_below(eng, i)]);
  }
}

double standard_normal(std::mt19937_64& eng) {
  // Box-Muller on 53-bit uniforms; u1 is kept away from zero.
  const double u1 = (static_cast<double>(eng() >> 11) + 0.5) * 0x1.0p-53;
  const double u2 = static_cast<double>(eng() >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace

LabeledRatings parse_movielens(std::istream& in) {
  struct Raw {
    std::int64_t user;
    std::int64_t item;
    double rating;
  };
  std::vector<Raw> raw;
  std::map<std::pair<std::int64_t, std::int64_t>, std::size_t> index;
  std::size_t duplicates = 0;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::istringstream fields(line);
    std::int64_t user = 0, item = 0, ts = 0;
    double rating = 0.0;
    std::string extra;
    if (!(fields >> user >> item >> rating >> ts) || (fields >> extra)) {
      throw ParseError(line_no, "expected 'user item rating timestamp', got '" +
                                    line + "'");
    }
    if (!std::isfinite(rating)) throw ParseError(line_no, "non-finite rating");
    const auto key = std::make_pair(user, item);
    if (auto it = index.find(key); it != index.end()) {
      raw[it->second].rating = rating;
      ++duplicates;
    } else {
      index.emplace(key, raw.size());
      raw.push_back({user, item, rating});
    }
  }
  if (raw.empty()) throw DegenerateInputError("rating file has no entries");

  LabeledRatings out;
  out.duplicate_warnings = duplicates;
  for (const Raw& r : raw) {
    out.user_ids.push_back(r.user);
    out.item_ids.push_back(r.item);
  }
  for (auto* ids : {&out.user_ids, &out.item_ids}) {
    std::sort(ids->begin(), ids->end());
    ids->erase(std::unique(ids->begin(), ids->end()), ids->end());
  }
  auto dense = [](const std::vector<std::int64_t>& ids, std::int64_t id) {
    return static_cast<std::size_t>(
        std::lower_bound(ids.begin(), ids.end(), id) - ids.begin());
  };
  std::vector<Rating> entries;
  entries.reserve(raw.size());
  for (const Raw& r : raw) {
    entries.push_back(
        {dense(out.user_ids, r.user), dense(out.item_ids, r.item), r.rating});
  }
  out.ratings = RatingMatrix(out.user_ids.size(), out.item_ids.size(),
                             std::move(entries));
  return out;
}

LabeledRatings load_movielens(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return parse_movielens(in);
}

void save_movielens(std::ostream& out, const RatingMatrix& ratings) {
  out.precision(17);
  for (const Rating& r : ratings.entries()) {
    out << (r.user + 1) << '\t' << (r.item + 1) << '\t' << r.value << "\t0\n";
  }
}

void write_ratings_csv(std::ostream& out, const RatingMatrix& ratings) {
  out.precision(17);
  out << "user,item,rating\n";
  for (const Rating& r : ratings.entries()) {
    out << r.user << ',' << r.item << ',' << r.value << '\n';
  }
}

std::pair<RatingMatrix, RatingMatrix> split_train_test(const RatingMatrix& r,
                                                       const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw ConfigError("train fraction must lie in (0, 1)");
  }
  if (r.empty()) throw DegenerateInputError("cannot split empty ratings");
  std::vector<std::size_t> order(r.nnz());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 eng(spec.seed);
  seeded_shuffle(order, eng);
  const auto n_train = static_cast<std::size_t>(
      std::llround(spec.train_fraction * static_cast<double>(r.nnz())));
  // Keep source order inside each half.
  std::sort(order.begin(), order.begin() + n_train);
  std::sort(order.begin() + n_train, order.end());
  std::vector<Rating> train, test;
  for (std::size_t k = 0; k < order.size(); ++k) {
    (k < n_train ? train : test).push_back(r.entries()[order[k]]);
  }
  return {RatingMatrix(r.n_users(), r.n_items(), std::move(train)),
          RatingMatrix(r.n_users(), r.n_items(), std::move(test))};
}

namespace {

std::vector<SourceData> build_sources(
    const RatingMatrix& r, std::vector<std::vector<std::size_t>> groups) {
  std::vector<std::size_t> owner(r.n_users(), SIZE_MAX);
  std::vector<std::size_t> local(r.n_users(), 0);
  for (std::size_t t = 0; t < groups.size(); ++t) {
    std::sort(groups[t].begin(), groups[t].end());
    for (std::size_t k = 0; k < groups[t].size(); ++k) {
      owner[groups[t][k]] = t;
      local[groups[t][k]] = k;
    }
  }
  std::vector<std::vector<Rating>> entries(groups.size());
  for (const Rating& e : r.entries()) {
    if (owner[e.user] == SIZE_MAX) continue;
    entries[owner[e.user]].push_back({local[e.user], e.item, e.value});
  }
  std::vector<SourceData> out;
  for (std::size_t t = 0; t < groups.size(); ++t) {
    out.push_back({RatingMatrix(groups[t].size(), r.n_items(),
                                std::move(entries[t])),
                   std::move(groups[t])});
  }
  return out;
}

}  // namespace

std::vector<SourceData> partition_users(const RatingMatrix& r,
                                        std::size_t sources,
                                        std::uint64_t seed) {
  if (sources == 0 || sources > r.n_users()) {
    throw ConfigError("cannot split " + std::to_string(r.n_users()) +
                      " users across " + std::to_string(sources) +
                      " sources");
  }
  std::vector<std::size_t> users(r.n_users());
  std::iota(users.begin(), users.end(), 0);
  std::mt19937_64 eng(seed);
  seeded_shuffle(users, eng);
  std::vector<std::vector<std::size_t>> groups(sources);
  for (std::size_t k = 0; k < users.size(); ++k) {
    groups[k % sources].push_back(users[k]);
  }
  return build_sources(r, std::move(groups));
}

std::vector<SourceData> partition_user_blocks(const RatingMatrix& r,
                                              std::size_t sources,
                                              std::size_t per_source) {
  if (sources == 0 || per_source == 0 || sources * per_source > r.n_users()) {
    throw ConfigError("need " + std::to_string(sources * per_source) +
                      " users, have " + std::to_string(r.n_users()));
  }
  std::vector<std::vector<std::size_t>> groups(sources);
  for (std::size_t t = 0; t < sources; ++t) {
    for (std::size_t k = 0; k < per_source; ++k) {
      groups[t].push_back(t * per_source + k);
    }
  }
  return build_sources(r, std::move(groups));
}

RatingMatrix pool_sources(const std::vector<SourceData>& parts,
                          std::size_t n_users) {
  if (parts.empty()) throw ConfigError("no sources to pool");
  std::vector<Rating> entries;
  for (const SourceData& p : parts) {
    if (p.global_users.size() != p.ratings.n_users()) {
      throw ShapeError("source user map does not match its ratings");
    }
    for (const Rating& e : p.ratings.entries()) {
      entries.push_back({p.global_users[e.user], e.item, e.value});
    }
  }
  std::sort(entries.begin(), entries.end(), [](const Rating& a, const Rating& b) {
    return a.user != b.user ? a.user < b.user : a.item < b.item;
  });
  return RatingMatrix(n_users, parts.front().ratings.n_items(),
                      std::move(entries));
}

RatingMatrix slice(const RatingMatrix& r, std::size_t n_users,
                   std::size_t n_items) {
  n_users = std::min(n_users, r.n_users());
  n_items = std::min(n_items, r.n_items());
  std::vector<Rating> entries;
  for (const Rating& e : r.entries()) {
    if (e.user < n_users && e.item < n_items) entries.push_back(e);
  }
  return RatingMatrix(n_users, n_items, std::move(entries));
}

SyntheticRatings synth_ratings(std::size_t n_users, std::size_t n_items,
                               std::size_t d_true, double noise_sigma,
                               double fill_fraction, std::uint64_t seed) {
  if (n_users < 1 || n_items < 1 || d_true < 1) {
    throw ConfigError("synthetic dimensions must be >= 1");
  }
  if (!(fill_fraction > 0.0 && fill_fraction <= 1.0)) {
    throw ConfigError("fill fraction must lie in (0, 1]");
  }
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise sigma must be >= 0");

  std::mt19937_64 eng(seed);
  const double scale = 1.0 / std::pow(static_cast<double>(d_true), 0.25);
  SyntheticRatings out;
  out.users = FactorMatrix(n_users, d_true);
  out.items = FactorMatrix(d_true, n_items);
  for (double& x : out.users.data()) x = scale * standard_normal(eng);
  for (double& x : out.items.data()) x = scale * standard_normal(eng);

  const std::size_t cells = n_users * n_items;
  auto count = static_cast<std::size_t>(
      std::llround(fill_fraction * static_cast<double>(cells)));
  count = std::clamp<std::size_t>(count, 1, cells);
  std::vector<std::size_t> idx(cells);
  std::iota(idx.begin(), idx.end(), 0);
  seeded_shuffle(idx, eng);
  idx.resize(count);
  std::sort(idx.begin(), idx.end());

  std::vector<Rating> entries;
  entries.reserve(count);
  for (std::size_t c : idx) {
    const std::size_t i = c / n_items;
    const std::size_t j = c % n_items;
    double v = predict(out.users, out.items, i, j);
    if (noise_sigma > 0.0) v += noise_sigma * standard_normal(eng);
    entries.push_back({i, j, v});
  }
  out.ratings = RatingMatrix(n_users, n_items, std::move(entries));
  return out;
}

double rmse(const FactorMatrix& users, const FactorMatrix& items,
            const RatingMatrix& test) {
  if (test.empty()) throw DegenerateInputError("rmse of empty test set");
  return std::sqrt(squared_error(users, items, test) /
                   static_cast<double>(test.nnz()));
}

double global_mean_rmse(const RatingMatrix& train, const RatingMatrix& test) {
  if (test.empty()) throw DegenerateInputError("rmse of empty test set");
  const double mean = train.mean_rating();
  double acc = 0.0;
  for (const Rating& r : test.entries()) acc += (r.value - mean) * (r.value - mean);
  return std::sqrt(acc / static_cast<double>(test.nnz()));
}

}  // namespace sharedmf
