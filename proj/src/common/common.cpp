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

#include "neurolos/common.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <thread>

namespace neurolos {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kValidation: return "validation error";
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kData: return "data error";
    case ErrorKind::kIo: return "I/O error";
    case ErrorKind::kSchema: return "schema error";
    case ErrorKind::kTraining: return "training failure";
    case ErrorKind::kUnsupported: return "unsupported";
    case ErrorKind::kInternal: return "internal error";
  }
  return "error";
}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

void Matrix::append_row(std::span<const double> values) {
  if (rows_ == 0 && cols_ == 0) cols_ = values.size();
  require(values.size() == cols_, ErrorKind::kInternal, "row width mismatch");
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

Matrix Matrix::select_rows(std::span<const std::size_t> rows) const {
  Matrix out(rows.size(), cols_);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(rows[i] * cols_), cols_,
                out.data_.begin() + static_cast<std::ptrdiff_t>(i * cols_));
  }
  return out;
}

Matrix Matrix::select_cols(std::span<const std::size_t> cols) const {
  Matrix out(rows_, cols.size());
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t j = 0; j < cols.size(); ++j) out(r, j) = (*this)(r, cols[j]);
  }
  return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 over the combined key
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

std::chrono::sys_days day_of(Timestamp t) {
  auto days = t >= 0 ? t / kSecondsPerDay : -((-t + kSecondsPerDay - 1) / kSecondsPerDay);
  return std::chrono::sys_days(std::chrono::days(days));
}

}  // namespace

Timestamp make_timestamp(int year, unsigned month, unsigned day, int hour, int minute,
                         int second) {
  using namespace std::chrono;
  year_month_day ymd{std::chrono::year(year), std::chrono::month(month), std::chrono::day(day)};
  require(ymd.ok(), ErrorKind::kData, "invalid calendar date");
  auto days = sys_days(ymd).time_since_epoch().count();
  return static_cast<Timestamp>(days) * kSecondsPerDay + hour * 3600 + minute * 60 + second;
}

std::string format_timestamp(Timestamp t) {
  using namespace std::chrono;
  auto d = day_of(t);
  year_month_day ymd(d);
  auto secs = t - static_cast<Timestamp>(d.time_since_epoch().count()) * kSecondsPerDay;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(secs / 3600), static_cast<int>(secs / 60 % 60),
                static_cast<int>(secs % 60));
  return buf;
}

Timestamp parse_timestamp(std::string_view text) {
  int y = 0, hh = 0, mm = 0, ss = 0;
  unsigned mo = 0, d = 0;
  char sep = 0;
  std::string s(text);
  int n = std::sscanf(s.c_str(), "%d-%u-%u%c%d:%d:%d", &y, &mo, &d, &sep, &hh, &mm, &ss);
  if (n == 3) return make_timestamp(y, mo, d);
  require(n == 7 && (sep == 'T' || sep == ' '), ErrorKind::kData,
          "malformed timestamp '" + s + "'");
  require(hh >= 0 && hh < 24 && mm >= 0 && mm < 60 && ss >= 0 && ss < 60, ErrorKind::kData,
          "malformed timestamp '" + s + "'");
  return make_timestamp(y, mo, d, hh, mm, ss);
}

int hour_of(Timestamp t) {
  auto d = day_of(t);
  auto secs = t - static_cast<Timestamp>(d.time_since_epoch().count()) * kSecondsPerDay;
  return static_cast<int>(secs / 3600);
}

unsigned month_of(Timestamp t) {
  std::chrono::year_month_day ymd(day_of(t));
  return static_cast<unsigned>(ymd.month());
}

std::string format_double(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    // from_chars rejects a leading '+'; accept it for hand-edited inputs.
    if (!text.empty() && text.front() == '+') return parse_double(text.substr(1));
    fail(ErrorKind::kData, "not a number: '" + std::string(text) + "'");
  }
  return v;
}

std::int64_t parse_int(std::string_view text) {
  std::int64_t v = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  require(res.ec == std::errc() && res.ptr == text.data() + text.size(), ErrorKind::kData,
          "not an integer: '" + std::string(text) + "'");
  return v;
}

int hardware_threads() {
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace neurolos
