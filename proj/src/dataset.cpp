// SPDX-License-Identifier: Apache-2.0
#include "recap/dataset.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace recap {

using nlohmann::json;

namespace {

std::vector<std::string> split_fields(const std::string& line, char delimiter) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, delimiter)) out.push_back(field);
  if (!line.empty() && line.back() == delimiter) out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

bool parse_double(const std::string& text, double& out) {
  if (text.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtod(text.c_str(), &end);
  return errno == 0 && end == text.c_str() + text.size() && std::isfinite(out);
}

bool parse_int64(const std::string& text, std::int64_t& out) {
  if (text.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtoll(text.c_str(), &end, 10);
  return errno == 0 && end == text.c_str() + text.size();
}

// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

bool valid_clock(int hh, int mm, int ss) {
  return hh >= 0 && hh < 24 && mm >= 0 && mm < 60 && ss >= 0 && ss <= 60;
}

int month_from_abbrev(const std::string& m) {
  static const char* kMonths[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                  "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
  for (int i = 0; i < 12; ++i)
    if (m == kMonths[i]) return i + 1;
  return 0;
}

}  // namespace

TimestampFormat parse_timestamp_format(const std::string& name) {
  if (name == "epoch") return TimestampFormat::kEpoch;
  if (name == "iso8601") return TimestampFormat::kIso8601;
  if (name == "foursquare") return TimestampFormat::kFoursquare;
  throw DataError("unknown timestamp format '" + name + "' (expected epoch, iso8601 or foursquare)");
}

bool parse_timestamp(const std::string& text, TimestampFormat format, std::int64_t& out) {
  switch (format) {
    case TimestampFormat::kEpoch:
      return parse_int64(text, out);
    case TimestampFormat::kIso8601: {
      int y = 0, mo = 0, d = 0, hh = 0, mm = 0, ss = 0;
      char sep = 0;
      int consumed = 0;
      if (std::sscanf(text.c_str(), "%4d-%2d-%2d%c%2d:%2d:%2d%n", &y, &mo, &d, &sep, &hh, &mm, &ss,
                      &consumed) != 7)
        return false;
      if (sep != 'T' && sep != ' ') return false;
      const std::string rest = text.substr(static_cast<std::size_t>(consumed));
      if (!rest.empty() && rest != "Z") return false;
      if (mo < 1 || mo > 12 || d < 1 || d > 31 || !valid_clock(hh, mm, ss)) return false;
      out = days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d)) * 86400 +
            hh * 3600 + mm * 60 + ss;
      return true;
    }
    case TimestampFormat::kFoursquare: {
      // e.g. "Tue Apr 03 18:00:09 +0000 2012"
      std::istringstream ss(text);
      std::string dow, mon, clock, offset;
      int day = 0, year = 0;
      if (!(ss >> dow >> mon >> day >> clock >> offset >> year)) return false;
      int hh = 0, mm = 0, sec = 0;
      if (std::sscanf(clock.c_str(), "%2d:%2d:%2d", &hh, &mm, &sec) != 3) return false;
      const int month = month_from_abbrev(mon);
      if (month == 0 || day < 1 || day > 31 || !valid_clock(hh, mm, sec)) return false;
      if (offset.size() != 5 || (offset[0] != '+' && offset[0] != '-')) return false;
      const int off_h = std::atoi(offset.substr(1, 2).c_str());
      const int off_m = std::atoi(offset.substr(3, 2).c_str());
      const int off = (offset[0] == '-' ? -1 : 1) * (off_h * 3600 + off_m * 60);
      out = days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day)) * 86400 +
            hh * 3600 + mm * 60 + sec - off;
      return true;
    }
  }
  return false;
}

const std::vector<std::string>& checkin_columns() {
  static const std::vector<std::string> kColumns = {"user_id",  "poi_id",    "category_id",
                                                    "latitude", "longitude", "timestamp"};
  return kColumns;
}

LoadResult parse_checkins(std::istream& in, const LoadOptions& options) {
  const auto& columns = checkin_columns();
  std::vector<std::size_t> position(columns.size());
  std::iota(position.begin(), position.end(), 0);

  LoadResult result;
  std::string line;
  std::size_t line_no = 0;
  std::size_t data_rows = 0;
  bool first_data_row = true;

  if (options.has_header) {
    if (!std::getline(in, line)) return result;
    ++line_no;
    auto names = split_fields(line, options.delimiter);
    for (auto& n : names) n = trim(n);
    for (std::size_t c = 0; c < columns.size(); ++c) {
      auto it = std::find(names.begin(), names.end(), columns[c]);
      if (it == names.end()) throw DataError("missing column '" + columns[c] + "' in header");
      position[c] = static_cast<std::size_t>(it - names.begin());
    }
  }
  const std::size_t needed = *std::max_element(position.begin(), position.end()) + 1;

  auto warn = [&](const std::string& msg) {
    ++result.skipped;
    result.warnings.push_back("line " + std::to_string(line_no) + ": " + msg);
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    ++data_rows;
    auto fields = split_fields(line, options.delimiter);
    if (fields.size() < needed) {
      if (first_data_row && !options.has_header) {
        throw DataError("missing column '" + columns[std::min(fields.size(), columns.size() - 1)] +
                        "' (row has " + std::to_string(fields.size()) + " of " +
                        std::to_string(columns.size()) + " fields)");
      }
      warn("expected " + std::to_string(needed) + " fields, got " + std::to_string(fields.size()));
      continue;
    }
    first_data_row = false;
    CheckIn c;
    c.user_id = trim(fields[position[0]]);
    c.poi_id = trim(fields[position[1]]);
    c.category_id = trim(fields[position[2]]);
    if (c.user_id.empty() || c.poi_id.empty()) {
      warn("empty user or poi id");
      continue;
    }
    if (!parse_double(trim(fields[position[3]]), c.lat) || c.lat < -90.0 || c.lat > 90.0) {
      warn("malformed latitude '" + fields[position[3]] + "'");
      continue;
    }
    if (!parse_double(trim(fields[position[4]]), c.lon) || c.lon < -180.0 || c.lon > 180.0) {
      warn("malformed longitude '" + fields[position[4]] + "'");
      continue;
    }
    if (!parse_timestamp(trim(fields[position[5]]), options.timestamp_format, c.timestamp) ||
        c.timestamp <= 0) {
      warn("malformed timestamp '" + fields[position[5]] + "'");
      continue;
    }
    result.records.push_back(std::move(c));
  }

  if (data_rows >= options.skip_rule_min_rows &&
      static_cast<double>(result.skipped) > options.max_skip_fraction * static_cast<double>(data_rows)) {
    throw DataError("too many malformed rows: " + std::to_string(result.skipped) + " of " +
                    std::to_string(data_rows) + " skipped");
  }
  return result;
}

LoadResult load_checkins(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open check-in file '" + path.string() + "'");
  return parse_checkins(in, options);
}

double time_of_day_fraction(std::int64_t timestamp) {
  std::int64_t s = timestamp % 86400;
  if (s < 0) s += 86400;
  return static_cast<double>(s) / 86400.0;
}

int hour_of_day(std::int64_t timestamp) {
  std::int64_t s = timestamp % 86400;
  if (s < 0) s += 86400;
  return static_cast<int>(s / 3600);
}

int day_of_week(std::int64_t timestamp) {
  std::int64_t days = timestamp / 86400;
  if (timestamp < 0 && timestamp % 86400 != 0) --days;
  // 1970-01-01 was a Thursday.
  std::int64_t dow = (days + 3) % 7;
  if (dow < 0) dow += 7;
  return static_cast<int>(dow);
}

PoiIndex Vocabulary::find_poi(const std::string& id) const {
  auto it = poi_index.find(id);
  return it == poi_index.end() ? kUnknownPoi : it->second;
}

UserIndex Vocabulary::find_user(const std::string& id) const {
  auto it = user_index.find(id);
  return it == user_index.end() ? -1 : it->second;
}

void Vocabulary::reindex() {
  poi_index.clear();
  user_index.clear();
  category_index.clear();
  for (std::size_t i = 0; i < poi_ids.size(); ++i) poi_index[poi_ids[i]] = static_cast<PoiIndex>(i);
  for (std::size_t i = 0; i < user_ids.size(); ++i) user_index[user_ids[i]] = static_cast<UserIndex>(i);
  for (std::size_t i = 0; i < category_ids.size(); ++i)
    category_index[category_ids[i]] = static_cast<std::int32_t>(i);
}

Vocabulary build_vocabulary(std::span<const CheckIn> train) {
  Vocabulary v;
  for (const auto& c : train) {
    if (!v.user_index.count(c.user_id)) {
      v.user_index[c.user_id] = v.num_users();
      v.user_ids.push_back(c.user_id);
    }
    if (!v.category_index.count(c.category_id)) {
      v.category_index[c.category_id] = v.num_categories();
      v.category_ids.push_back(c.category_id);
    }
    if (!v.poi_index.count(c.poi_id)) {
      v.poi_index[c.poi_id] = v.num_pois();
      v.poi_ids.push_back(c.poi_id);
      v.poi_meta.push_back({v.category_index.at(c.category_id), c.lat, c.lon});
    }
  }
  if (!v.poi_meta.empty()) {
    const double n = static_cast<double>(v.poi_meta.size());
    double lat_sum = 0, lon_sum = 0;
    for (const auto& m : v.poi_meta) {
      lat_sum += m.lat;
      lon_sum += m.lon;
    }
    v.lat_mean = lat_sum / n;
    v.lon_mean = lon_sum / n;
    double lat_var = 0, lon_var = 0;
    for (const auto& m : v.poi_meta) {
      lat_var += (m.lat - v.lat_mean) * (m.lat - v.lat_mean);
      lon_var += (m.lon - v.lon_mean) * (m.lon - v.lon_mean);
    }
    v.lat_std = std::sqrt(lat_var / n);
    v.lon_std = std::sqrt(lon_var / n);
    if (v.lat_std < 1e-12) v.lat_std = 1.0;
    if (v.lon_std < 1e-12) v.lon_std = 1.0;
  }
  return v;
}

ChronologicalSplit chronological_split(std::vector<CheckIn> checkins, const SplitRatios& ratios) {
  if (ratios.train <= 0 || ratios.val <= 0 || ratios.test <= 0 ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9)
    throw DataError("split ratios must be positive and sum to 1");
  if (checkins.size() < 10)
    throw DataError("need at least 10 check-ins to form train/val/test splits, got " +
                    std::to_string(checkins.size()));
  std::stable_sort(checkins.begin(), checkins.end(),
                   [](const CheckIn& a, const CheckIn& b) { return a.timestamp < b.timestamp; });
  const double n = static_cast<double>(checkins.size());
  const auto cut1 = static_cast<std::size_t>(std::floor(ratios.train * n + 1e-9));
  const auto cut2 = static_cast<std::size_t>(std::floor((ratios.train + ratios.val) * n + 1e-9));
  ChronologicalSplit out;
  auto begin = std::make_move_iterator(checkins.begin());
  out.train.assign(begin, begin + static_cast<std::ptrdiff_t>(cut1));
  out.val.assign(begin + static_cast<std::ptrdiff_t>(cut1), begin + static_cast<std::ptrdiff_t>(cut2));
  out.test.assign(begin + static_cast<std::ptrdiff_t>(cut2), std::make_move_iterator(checkins.end()));
  return out;
}

void segment_trajectories(UserSequence& sequence, std::int64_t gap_threshold_seconds) {
  sequence.boundaries.clear();
  const auto& c = sequence.checkins;
  for (std::size_t i = 1; i < c.size(); ++i)
    if (c[i].timestamp - c[i - 1].timestamp > gap_threshold_seconds) sequence.boundaries.push_back(i);
}

std::vector<Range> trajectories(const UserSequence& sequence) {
  std::vector<Range> out;
  const auto& c = sequence.checkins;
  if (c.empty()) return out;
  std::size_t start = 0;
  std::size_t next_boundary = 0;
  for (std::size_t i = 1; i < c.size(); ++i) {
    bool cut = c[i].split != c[i - 1].split;
    while (next_boundary < sequence.boundaries.size() && sequence.boundaries[next_boundary] < i)
      ++next_boundary;
    if (next_boundary < sequence.boundaries.size() && sequence.boundaries[next_boundary] == i)
      cut = true;
    if (cut) {
      out.push_back({start, i});
      start = i;
    }
  }
  out.push_back({start, c.size()});
  return out;
}

namespace {

PredictionInstance make_instance(const UserSequence& seq, std::size_t t, int k, PoiIndex pad) {
  PredictionInstance inst;
  inst.user = seq.user;
  inst.step = static_cast<std::int32_t>(t);
  inst.source = seq.checkins[t - 1].poi;
  inst.target = seq.checkins[t].poi;
  inst.query_time = seq.checkins[t - 1].timestamp;
  inst.suffix.assign(static_cast<std::size_t>(k), pad);
  for (int j = 0; j < k; ++j) {
    const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t) - k + j;
    if (pos < 0) continue;
    const PoiIndex p = seq.checkins[static_cast<std::size_t>(pos)].poi;
    if (p == kUnknownPoi) continue;
    inst.suffix[static_cast<std::size_t>(j)] = p;
    ++inst.suffix_len;
  }
  return inst;
}

}  // namespace

std::vector<PredictionInstance> build_instances(std::span<const UserSequence> sequences,
                                                const Vocabulary& vocab, int k,
                                                InstanceMode mode, Split split,
                                                InstanceBuildStats* stats) {
  if (k <= 0) throw std::invalid_argument("build_instances: k must be positive");
  InstanceBuildStats local;
  std::vector<PredictionInstance> out;
  const PoiIndex pad = vocab.pad_poi();
  for (const auto& seq : sequences) {
    for (const Range& r : trajectories(seq)) {
      if (seq.checkins[r.begin].split != split) continue;
      if (mode == InstanceMode::kTrain) {
        for (std::size_t t = r.begin + 1; t < r.end; ++t) {
          const auto& prev = seq.checkins[t - 1];
          const auto& cur = seq.checkins[t];
          if (cur.poi == kUnknownPoi) {
            ++local.dropped_unknown_target;
            continue;
          }
          if (prev.poi == kUnknownPoi) {
            ++local.dropped_unknown_source;
            continue;
          }
          out.push_back(make_instance(seq, t, k, pad));
        }
      } else {
        if (r.size() < 2) {
          ++local.short_trajectories;
          continue;
        }
        const std::size_t t = r.end - 1;
        if (seq.checkins[t].poi == kUnknownPoi) {
          ++local.dropped_unknown_target;
          continue;
        }
        if (seq.checkins[t - 1].poi == kUnknownPoi) {
          ++local.dropped_unknown_source;
          continue;
        }
        out.push_back(make_instance(seq, t, k, pad));
      }
    }
  }
  if (stats) *stats = local;
  return out;
}

InstanceStore prepare_dataset(std::vector<CheckIn> checkins, const DatasetOptions& options) {
  InstanceStore store;
  store.options = options;
  store.summary.checkins = checkins.size();
  ChronologicalSplit parts = chronological_split(std::move(checkins), options.ratios);
  store.vocab = build_vocabulary(parts.train);
  store.summary.train_checkins = parts.train.size();
  store.summary.val_checkins = parts.val.size();
  store.summary.test_checkins = parts.test.size();

  store.sequences.resize(static_cast<std::size_t>(store.vocab.num_users()));
  for (UserIndex u = 0; u < store.vocab.num_users(); ++u) store.sequences[u].user = u;
  auto append = [&](const std::vector<CheckIn>& part, Split split) {
    for (const auto& c : part) {
      const UserIndex u = store.vocab.find_user(c.user_id);
      if (u < 0) {
        ++store.summary.dropped_unknown_user;
        continue;
      }
      store.sequences[u].checkins.push_back({store.vocab.find_poi(c.poi_id), c.timestamp, split});
    }
  };
  append(parts.train, Split::kTrain);
  append(parts.val, Split::kVal);
  append(parts.test, Split::kTest);
  for (auto& seq : store.sequences) segment_trajectories(seq, options.gap_threshold_seconds);

  store.train = build_instances(store.sequences, store.vocab, options.k, InstanceMode::kTrain, Split::kTrain);
  store.val = build_instances(store.sequences, store.vocab, options.k, InstanceMode::kEval, Split::kVal,
                              &store.summary.val_stats);
  store.test = build_instances(store.sequences, store.vocab, options.k, InstanceMode::kEval, Split::kTest,
                               &store.summary.test_stats);

  store.summary.users = static_cast<std::size_t>(store.vocab.num_users());
  store.summary.pois = static_cast<std::size_t>(store.vocab.num_pois());
  store.summary.categories = static_cast<std::size_t>(store.vocab.num_categories());
  store.summary.train_instances = store.train.size();
  store.summary.val_instances = store.val.size();
  store.summary.test_instances = store.test.size();
  return store;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr const char* kStoreFormat = "recap-instance-store";
constexpr int kStoreVersion = 1;

json instances_to_json(const std::vector<PredictionInstance>& v) {
  json j;
  std::vector<std::int32_t> user, step, source, target, len;
  std::vector<std::int64_t> qt;
  std::vector<std::vector<PoiIndex>> suffix;
  for (const auto& i : v) {
    user.push_back(i.user);
    step.push_back(i.step);
    source.push_back(i.source);
    target.push_back(i.target);
    len.push_back(i.suffix_len);
    qt.push_back(i.query_time);
    suffix.push_back(i.suffix);
  }
  j["user"] = user;
  j["step"] = step;
  j["source"] = source;
  j["target"] = target;
  j["suffix_len"] = len;
  j["query_time"] = qt;
  j["suffix"] = suffix;
  return j;
}

std::vector<PredictionInstance> instances_from_json(const json& j) {
  std::vector<PredictionInstance> out;
  const auto user = j.at("user").get<std::vector<std::int32_t>>();
  const auto step = j.at("step").get<std::vector<std::int32_t>>();
  const auto source = j.at("source").get<std::vector<std::int32_t>>();
  const auto target = j.at("target").get<std::vector<std::int32_t>>();
  const auto len = j.at("suffix_len").get<std::vector<std::int32_t>>();
  const auto qt = j.at("query_time").get<std::vector<std::int64_t>>();
  const auto suffix = j.at("suffix").get<std::vector<std::vector<PoiIndex>>>();
  for (std::size_t i = 0; i < user.size(); ++i)
    out.push_back({user[i], step[i], source[i], target[i], suffix.at(i), len[i], qt[i]});
  return out;
}

json build_stats_json(const InstanceBuildStats& s) {
  return {{"dropped_unknown_target", s.dropped_unknown_target},
          {"dropped_unknown_source", s.dropped_unknown_source},
          {"short_trajectories", s.short_trajectories}};
}

InstanceBuildStats build_stats_from_json(const json& j) {
  return {j.at("dropped_unknown_target").get<std::size_t>(),
          j.at("dropped_unknown_source").get<std::size_t>(),
          j.at("short_trajectories").get<std::size_t>()};
}

}  // namespace

void save_store(const InstanceStore& store, const std::filesystem::path& path) {
  json j;
  j["format"] = kStoreFormat;
  j["version"] = kStoreVersion;
  j["options"] = {{"split_train", store.options.ratios.train},
                  {"split_val", store.options.ratios.val},
                  {"split_test", store.options.ratios.test},
                  {"gap_threshold_seconds", store.options.gap_threshold_seconds},
                  {"k", store.options.k}};
  const auto& s = store.summary;
  j["summary"] = {{"checkins", s.checkins},
                  {"users", s.users},
                  {"pois", s.pois},
                  {"categories", s.categories},
                  {"train_checkins", s.train_checkins},
                  {"val_checkins", s.val_checkins},
                  {"test_checkins", s.test_checkins},
                  {"train_instances", s.train_instances},
                  {"val_instances", s.val_instances},
                  {"test_instances", s.test_instances},
                  {"dropped_unknown_user", s.dropped_unknown_user},
                  {"val_build", build_stats_json(s.val_stats)},
                  {"test_build", build_stats_json(s.test_stats)}};
  const auto& v = store.vocab;
  std::vector<std::int32_t> cat;
  std::vector<double> lat, lon;
  for (const auto& m : v.poi_meta) {
    cat.push_back(m.category);
    lat.push_back(m.lat);
    lon.push_back(m.lon);
  }
  j["vocabulary"] = {{"poi_ids", v.poi_ids},
                     {"user_ids", v.user_ids},
                     {"category_ids", v.category_ids},
                     {"poi_category", cat},
                     {"poi_lat", lat},
                     {"poi_lon", lon},
                     {"coord_norm", {v.lat_mean, v.lat_std, v.lon_mean, v.lon_std}}};
  json seqs = json::array();
  for (const auto& seq : store.sequences) {
    std::vector<PoiIndex> poi;
    std::vector<std::int64_t> ts;
    std::vector<int> split;
    for (const auto& e : seq.checkins) {
      poi.push_back(e.poi);
      ts.push_back(e.timestamp);
      split.push_back(static_cast<int>(e.split));
    }
    seqs.push_back({{"user", seq.user},
                    {"poi", poi},
                    {"timestamp", ts},
                    {"split", split},
                    {"boundaries", seq.boundaries}});
  }
  j["sequences"] = std::move(seqs);
  j["instances"] = {{"train", instances_to_json(store.train)},
                    {"val", instances_to_json(store.val)},
                    {"test", instances_to_json(store.test)}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot write instance store '" + path.string() + "'");
  out << j.dump();
}

InstanceStore load_store(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open instance store '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("instance store '" + path.string() + "' is not valid JSON: " + e.what());
  }
  if (j.value("format", "") != kStoreFormat || j.value("version", 0) != kStoreVersion)
    throw DataError("'" + path.string() + "' is not a version " + std::to_string(kStoreVersion) +
                    " instance store");
  InstanceStore store;
  const auto& o = j.at("options");
  store.options.ratios = {o.at("split_train").get<double>(), o.at("split_val").get<double>(),
                          o.at("split_test").get<double>()};
  store.options.gap_threshold_seconds = o.at("gap_threshold_seconds").get<std::int64_t>();
  store.options.k = o.at("k").get<int>();

  const auto& s = j.at("summary");
  auto& sm = store.summary;
  sm.checkins = s.at("checkins");
  sm.users = s.at("users");
  sm.pois = s.at("pois");
  sm.categories = s.at("categories");
  sm.train_checkins = s.at("train_checkins");
  sm.val_checkins = s.at("val_checkins");
  sm.test_checkins = s.at("test_checkins");
  sm.train_instances = s.at("train_instances");
  sm.val_instances = s.at("val_instances");
  sm.test_instances = s.at("test_instances");
  sm.dropped_unknown_user = s.at("dropped_unknown_user");
  sm.val_stats = build_stats_from_json(s.at("val_build"));
  sm.test_stats = build_stats_from_json(s.at("test_build"));

  const auto& v = j.at("vocabulary");
  auto& vocab = store.vocab;
  vocab.poi_ids = v.at("poi_ids").get<std::vector<std::string>>();
  vocab.user_ids = v.at("user_ids").get<std::vector<std::string>>();
  vocab.category_ids = v.at("category_ids").get<std::vector<std::string>>();
  const auto cat = v.at("poi_category").get<std::vector<std::int32_t>>();
  const auto lat = v.at("poi_lat").get<std::vector<double>>();
  const auto lon = v.at("poi_lon").get<std::vector<double>>();
  for (std::size_t i = 0; i < cat.size(); ++i) vocab.poi_meta.push_back({cat[i], lat[i], lon[i]});
  const auto norm = v.at("coord_norm").get<std::vector<double>>();
  vocab.lat_mean = norm.at(0);
  vocab.lat_std = norm.at(1);
  vocab.lon_mean = norm.at(2);
  vocab.lon_std = norm.at(3);
  vocab.reindex();

  for (const auto& sj : j.at("sequences")) {
    UserSequence seq;
    seq.user = sj.at("user");
    const auto poi = sj.at("poi").get<std::vector<PoiIndex>>();
    const auto ts = sj.at("timestamp").get<std::vector<std::int64_t>>();
    const auto split = sj.at("split").get<std::vector<int>>();
    for (std::size_t i = 0; i < poi.size(); ++i)
      seq.checkins.push_back({poi[i], ts[i], static_cast<Split>(split[i])});
    seq.boundaries = sj.at("boundaries").get<std::vector<std::size_t>>();
    store.sequences.push_back(std::move(seq));
  }
  const auto& inst = j.at("instances");
  store.train = instances_from_json(inst.at("train"));
  store.val = instances_from_json(inst.at("val"));
  store.test = instances_from_json(inst.at("test"));
  return store;
}

}  // namespace recap
