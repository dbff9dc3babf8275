// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssodlab/split.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <nlohmann/json.hpp>

#include "ssodlab/errors.hpp"
#include "ssodlab/rng.hpp"

namespace ssod {

void to_json(nlohmann::json& j, const SplitManifest& m) {
  j = nlohmann::json{{"labeled", m.labeled},
                     {"unlabeled", m.unlabeled},
                     {"validation", m.validation},
                     {"labeled_pct", m.labeled_pct},
                     {"fold_seed", m.fold_seed}};
}

void from_json(const nlohmann::json& j, SplitManifest& m) {
  j.at("labeled").get_to(m.labeled);
  j.at("unlabeled").get_to(m.unlabeled);
  j.at("validation").get_to(m.validation);
  j.at("labeled_pct").get_to(m.labeled_pct);
  j.at("fold_seed").get_to(m.fold_seed);
}

namespace {

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i - 1)));
    std::swap(v[i - 1], v[j]);
  }
}

std::uint32_t signature(const DatasetImage& im) {
  std::uint32_t s = 0;
  for (const Box& b : im.boxes) s |= 1u << std::min(b.class_id, 31);
  return s;
}

}  // namespace

SplitManifest make_split(const Dataset& ds, const SplitOptions& opts) {
  if (!(opts.labeled_pct > 0.0 && opts.labeled_pct <= 100.0)) {
    throw ConfigError("labeled_pct must lie in (0, 100]");
  }
  const auto n = static_cast<int>(ds.images.size());
  int n_val = opts.val_count >= 0
                  ? opts.val_count
                  : static_cast<int>(std::lround(opts.val_fraction * n));
  if (n_val < 0 || n_val >= n) throw ConfigError("validation split leaves no training images");

  SplitManifest m;
  m.labeled_pct = opts.labeled_pct;
  m.fold_seed = opts.fold_seed;

  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng vrng(opts.val_seed);
  shuffle(order, vrng);
  std::vector<std::size_t> val(order.begin(), order.begin() + n_val);
  std::vector<std::size_t> train(order.begin() + n_val, order.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());

  const int n_train = static_cast<int>(train.size());
  const int n_lab = std::clamp(
      static_cast<int>(std::lround(opts.labeled_pct / 100.0 * n_train)), 1, n_train);

  // Strata by class-presence signature, each shuffled by the fold seed.
  Rng rng(derive_seed({opts.fold_seed, 0x51u}));
  std::map<std::uint32_t, std::vector<std::size_t>> strata;
  for (std::size_t i : train) strata[signature(ds.images[i])].push_back(i);
  for (auto& [sig, members] : strata) shuffle(members, rng);

  // Largest-remainder quota allocation.
  struct Quota { std::uint32_t sig; int take; double rem; };
  std::vector<Quota> quotas;
  int assigned = 0;
  for (const auto& [sig, members] : strata) {
    const double exact = static_cast<double>(members.size()) * n_lab / n_train;
    const int base = static_cast<int>(std::floor(exact));
    quotas.push_back({sig, base, exact - base});
    assigned += base;
  }
  std::vector<std::size_t> by_rem(quotas.size());
  for (std::size_t i = 0; i < by_rem.size(); ++i) by_rem[i] = i;
  std::stable_sort(by_rem.begin(), by_rem.end(), [&](std::size_t a, std::size_t b) {
    return quotas[a].rem > quotas[b].rem;
  });
  for (std::size_t k = 0; assigned < n_lab && k < by_rem.size(); ++k) {
    ++quotas[by_rem[k]].take;
    ++assigned;
  }

  std::vector<std::size_t> labeled, unlabeled;
  for (const auto& q : quotas) {
    const auto& members = strata[q.sig];
    for (std::size_t i = 0; i < members.size(); ++i) {
      (static_cast<int>(i) < q.take ? labeled : unlabeled).push_back(members[i]);
    }
  }

  // Coverage patch: swap in an image for each missing class if a labeled
  // image can be given up without uncovering another class.
  const int C = ds.num_classes();
  auto coverage = [&]() {
    std::vector<int> cov(static_cast<std::size_t>(std::max(C, 1)), 0);
    for (std::size_t i : labeled)
      for (int c = 0; c < C; ++c)
        if (signature(ds.images[i]) >> c & 1u) ++cov[static_cast<std::size_t>(c)];
    return cov;
  };
  for (int c = 0; c < C && c < 32; ++c) {
    std::vector<int> cov = coverage();
    if (cov[static_cast<std::size_t>(c)] > 0) continue;
    auto in = std::find_if(unlabeled.begin(), unlabeled.end(), [&](std::size_t i) {
      return (signature(ds.images[i]) >> c & 1u) != 0;
    });
    if (in == unlabeled.end()) continue;
    for (auto out = labeled.rbegin(); out != labeled.rend(); ++out) {
      const std::uint32_t sig = signature(ds.images[*out]);
      bool safe = true;
      for (int k = 0; k < C && k < 32; ++k) {
        if ((sig >> k & 1u) && cov[static_cast<std::size_t>(k)] < 2) safe = false;
      }
      if (!safe) continue;
      std::swap(*out, *in);
      break;
    }
  }

  auto ids = [&](std::vector<std::size_t> idx) {
    std::sort(idx.begin(), idx.end());
    std::vector<std::int64_t> out;
    for (std::size_t i : idx) out.push_back(ds.images[i].id);
    return out;
  };
  m.labeled = ids(labeled);
  m.unlabeled = ids(unlabeled);
  m.validation = ids(val);
  return m;
}

}  // namespace ssod
