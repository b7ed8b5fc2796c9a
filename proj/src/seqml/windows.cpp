/*
 * Copyright 2026 The NeuroLOS Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "neurolos/seqml.hpp"

namespace neurolos::seq {

std::vector<std::string> channel_names(const mart::MartMeta& meta) {
  std::vector<std::string> names;
  for (const auto& t : meta.tests) {
    names.push_back(t.abbreviation + "__value");
    names.push_back(t.abbreviation + "__in_norm");
    names.push_back(t.abbreviation + "__mask");
  }
  names.push_back("elapsed_days");
  return names;
}

std::vector<double> population_fill(const mart::SeriesMart& mart) {
  std::vector<double> fill(mart.n_tests(), 0.0);
  for (std::size_t j = 0; j < mart.n_tests(); ++j) {
    std::vector<double> obs;
    for (std::size_t r = 0; r < mart.rows(); ++r) {
      if (mart.mask(r, j) > 0.0) obs.push_back(mart.values(r, j));
    }
    if (obs.empty()) continue;
    std::sort(obs.begin(), obs.end());
    if (mart.meta.tests[j].kind == mart::TestKind::kCategorical) {
      std::map<double, std::size_t> freq;
      for (double v : obs) ++freq[v];
      std::size_t best = 0;
      for (const auto& [code, n] : freq) {
        if (n > best) {
          best = n;
          fill[j] = code;
        }
      }
    } else {
      const std::size_t n = obs.size();
      fill[j] = n % 2 ? obs[n / 2] : (obs[n / 2 - 1] + obs[n / 2]) / 2.0;
    }
  }
  return fill;
}

FilledStay fill_series(const mart::SeriesMart& mart, std::size_t begin, std::size_t end,
                       std::span<const double> fill) {
  require(end > begin && end <= mart.rows(), ErrorKind::kData, "cannot fill an empty stay");
  const std::size_t n = end - begin, tests = mart.n_tests();
  require(fill.size() == tests, ErrorKind::kValidation, "fill values do not match the test count");
  FilledStay out;
  out.stay_id = mart.stay_id[begin];
  out.channels = Matrix(n, 3 * tests + 1);
  const double t0 = static_cast<double>(mart.charttime[begin]);
  for (std::size_t i = 0; i < n; ++i) {
    require(mart.stay_id[begin + i] == out.stay_id, ErrorKind::kData, "rows span more than one stay");
    require(i == 0 || mart.charttime[begin + i] >= mart.charttime[begin + i - 1], ErrorKind::kData,
            "stay rows are not time ordered");
    out.remaining_los_days.push_back(mart.remaining_los_days[begin + i]);
    out.channels(i, 3 * tests) = (static_cast<double>(mart.charttime[begin + i]) - t0) / kSecondsPerDay;
  }

  std::vector<std::size_t> seen;
  for (std::size_t j = 0; j < tests; ++j) {
    seen.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (mart.mask(begin + i, j) > 0.0) seen.push_back(i);
    }
    const std::size_t cv = 3 * j, cn = 3 * j + 1, cm = 3 * j + 2;
    if (seen.empty()) {
      for (std::size_t i = 0; i < n; ++i) {
        out.channels(i, cv) = fill[j];
        out.channels(i, cn) = 1.0;
        out.channels(i, cm) = 0.0;
      }
      continue;
    }
    const bool categorical = mart.meta.tests[j].kind == mart::TestKind::kCategorical;
    std::size_t k = 0;  // index into seen of the last observation at or before i
    for (std::size_t i = 0; i < n; ++i) {
      while (k + 1 < seen.size() && seen[k + 1] <= i) ++k;
      const std::size_t a = seen[k];
      const double va = mart.values(begin + a, j);
      double value = va;
      double norm = mart.in_norm(begin + a, j);
      if (i < seen.front()) {
        norm = mart.in_norm(begin + seen.front(), j);
      } else if (!categorical && i > a && k + 1 < seen.size()) {
        const std::size_t b = seen[k + 1];
        const double ta = static_cast<double>(mart.charttime[begin + a]);
        const double tb = static_cast<double>(mart.charttime[begin + b]);
        const double ti = static_cast<double>(mart.charttime[begin + i]);
        const double vb = mart.values(begin + b, j);
        value = tb > ta ? va + (vb - va) * (ti - ta) / (tb - ta) : va;
      }
      out.channels(i, cv) = value;
      out.channels(i, cn) = std::isnan(norm) ? 1.0 : norm;
      out.channels(i, cm) = mart.mask(begin + i, j);
    }
  }
  return out;
}

WindowSet WindowSet::subset(std::span<const std::size_t> idx) const {
  WindowSet out;
  out.window = window;
  out.channel_names = channel_names;
  for (auto i : idx) {
    out.x.push_back(x[i]);
    out.y.push_back(y[i]);
    out.stay_id.push_back(stay_id[i]);
    out.start.push_back(start[i]);
  }
  return out;
}

std::array<std::size_t, kNumClasses> WindowSet::class_counts() const {
  std::array<std::size_t, kNumClasses> c{};
  for (int v : y) ++c[v];
  return c;
}

void make_windows(const FilledStay& stay, std::size_t window, std::size_t step, WindowSet& out,
                  const BinEdges& edges) {
  require(window >= 1 && step >= 1, ErrorKind::kValidation, "window and step must be >= 1");
  const std::size_t n = stay.channels.rows();
  const std::size_t count = window_count(n, window, step);
  std::vector<std::size_t> rows(window);
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t s = w * step;
    std::iota(rows.begin(), rows.end(), s);
    out.x.push_back(stay.channels.select_rows(rows));
    out.y.push_back(static_cast<int>(bin_los(stay.remaining_los_days[s + window - 1], edges)));
    out.stay_id.push_back(stay.stay_id);
    out.start.push_back(s);
  }
}

WindowSet build_windows(const mart::SeriesMart& mart, std::size_t window, std::size_t step,
                        int threads) {
  require(window >= 1 && step >= 1, ErrorKind::kValidation, "window and step must be >= 1");
  const auto fill = population_fill(mart);
  const auto ranges = mart.stay_ranges();
  std::vector<WindowSet> per_stay(ranges.size());
  parallel_for(ranges.size(), threads, [&](std::size_t s) {
    auto filled = fill_series(mart, ranges[s].first, ranges[s].second, fill);
    make_windows(filled, window, step, per_stay[s], mart.meta.bin_edges);
  });
  WindowSet out;
  out.window = window;
  out.channel_names = channel_names(mart.meta);
  for (auto& w : per_stay) {
    if (w.size() == 0) ++out.stays_too_short;
    std::move(w.x.begin(), w.x.end(), std::back_inserter(out.x));
    out.y.insert(out.y.end(), w.y.begin(), w.y.end());
    out.stay_id.insert(out.stay_id.end(), w.stay_id.begin(), w.stay_id.end());
    out.start.insert(out.start.end(), w.start.begin(), w.start.end());
  }
  return out;
}

std::pair<WindowSet, WindowSet> split_by_stay(const WindowSet& all, double val_fraction,
                                              std::uint64_t seed) {
  require(val_fraction > 0.0 && val_fraction < 1.0, ErrorKind::kValidation,
          "validation fraction must lie in (0, 1)");
  std::vector<std::int64_t> stays(all.stay_id.begin(), all.stay_id.end());
  std::sort(stays.begin(), stays.end());
  stays.erase(std::unique(stays.begin(), stays.end()), stays.end());
  require(stays.size() >= 2, ErrorKind::kData, "need windows from at least two stays to split");
  Rng rng = make_rng(seed, 0x57a7);
  std::shuffle(stays.begin(), stays.end(), rng);
  auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(stays.size())));
  n_val = std::clamp<std::size_t>(n_val, 1, stays.size() - 1);
  std::set<std::int64_t> val_stays(stays.begin(), stays.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> tr, va;
  for (std::size_t i = 0; i < all.size(); ++i) (val_stays.count(all.stay_id[i]) ? va : tr).push_back(i);
  return {all.subset(tr), all.subset(va)};
}

WindowSet cap_windows(const WindowSet& set, std::size_t max, std::uint64_t seed) {
  if (max == 0 || set.size() <= max) return set;
  std::vector<std::size_t> idx(set.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = make_rng(seed, 0xcab);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(max);
  std::sort(idx.begin(), idx.end());
  auto out = set.subset(idx);
  out.stays_too_short = set.stays_too_short;
  return out;
}

WindowSet planted_windows(std::size_t n, std::size_t window, std::size_t channels,
                          double separation, std::uint64_t seed) {
  require(channels >= 1 && window >= 1, ErrorKind::kValidation, "planted windows need a channel");
  WindowSet out;
  out.window = window;
  for (std::size_t c = 0; c < channels; ++c) out.channel_names.push_back("c" + std::to_string(c));
  Rng rng = make_rng(seed, 0x91a);
  std::normal_distribution<double> n01;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % kNumClasses);
    Matrix x(window, channels);
    for (std::size_t t = 0; t < window; ++t) {
      for (std::size_t c = 0; c < channels; ++c) {
        x(t, c) = n01(rng) + (c == 0 ? (label - 1) * separation : 0.0);
      }
    }
    out.x.push_back(std::move(x));
    out.y.push_back(label);
    out.stay_id.push_back(static_cast<std::int64_t>(i));
    out.start.push_back(0);
  }
  return out;
}

}  // namespace neurolos::seq
