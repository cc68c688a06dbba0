// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace recap {

using PoiIndex = std::int32_t;
using UserIndex = std::int32_t;
inline constexpr PoiIndex kUnknownPoi = -1;

/// Raised for unreadable or structurally invalid input.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CheckIn {
  std::string user_id;
  std::string poi_id;
  std::string category_id;
  double lat = 0.0;
  double lon = 0.0;
  std::int64_t timestamp = 0;
};

enum class TimestampFormat { kEpoch, kIso8601, kFoursquare };
TimestampFormat parse_timestamp_format(const std::string& name);
/// Parses one timestamp field; returns false on malformed input.
bool parse_timestamp(const std::string& text, TimestampFormat format, std::int64_t& out);

struct LoadOptions {
  char delimiter = '\t';
  TimestampFormat timestamp_format = TimestampFormat::kEpoch;
  bool has_header = false;
  double max_skip_fraction = 0.10;
  /// The skip-fraction rule only applies from this many data rows on.
  std::size_t skip_rule_min_rows = 10;
};

struct LoadResult {
  std::vector<CheckIn> records;
  std::size_t skipped = 0;
  std::vector<std::string> warnings;
};

/// Column names recognised in a header row, in default positional order.
const std::vector<std::string>& checkin_columns();

LoadResult load_checkins(const std::filesystem::path& path, const LoadOptions& options);
LoadResult parse_checkins(std::istream& in, const LoadOptions& options);

// ---------------------------------------------------------------------------
// Time features

double time_of_day_fraction(std::int64_t timestamp);  // [0, 1)
int hour_of_day(std::int64_t timestamp);              // [0, 24)
int day_of_week(std::int64_t timestamp);              // Monday = 0

// ---------------------------------------------------------------------------
// Vocabulary

struct PoiMeta {
  std::int32_t category = 0;
  double lat = 0.0;
  double lon = 0.0;
};

struct Vocabulary {
  std::vector<std::string> poi_ids;
  std::vector<std::string> user_ids;
  std::vector<std::string> category_ids;
  std::unordered_map<std::string, PoiIndex> poi_index;
  std::unordered_map<std::string, UserIndex> user_index;
  std::unordered_map<std::string, std::int32_t> category_index;
  std::vector<PoiMeta> poi_meta;
  double lat_mean = 0.0, lat_std = 1.0, lon_mean = 0.0, lon_std = 1.0;

  PoiIndex num_pois() const { return static_cast<PoiIndex>(poi_ids.size()); }
  UserIndex num_users() const { return static_cast<UserIndex>(user_ids.size()); }
  std::int32_t num_categories() const { return static_cast<std::int32_t>(category_ids.size()); }
  /// Reserved index one past the last real POI.
  PoiIndex pad_poi() const { return num_pois(); }

  PoiIndex find_poi(const std::string& id) const;
  UserIndex find_user(const std::string& id) const;

  /// Rebuilds the lookup maps from the id vectors.
  void reindex();
};

/// Entities are indexed in first-appearance order over the training split.
Vocabulary build_vocabulary(std::span<const CheckIn> train);

// ---------------------------------------------------------------------------
// Splitting and segmentation

enum class Split : std::uint8_t { kTrain = 0, kVal = 1, kTest = 2 };

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct ChronologicalSplit {
  std::vector<CheckIn> train;
  std::vector<CheckIn> val;
  std::vector<CheckIn> test;
};

/// Stable sort by timestamp, then contiguous cut at floor(train*n) and
/// floor((train+val)*n).
ChronologicalSplit chronological_split(std::vector<CheckIn> checkins, const SplitRatios& ratios);

struct SequenceEntry {
  PoiIndex poi = kUnknownPoi;
  std::int64_t timestamp = 0;
  Split split = Split::kTrain;
};

struct UserSequence {
  UserIndex user = 0;
  std::vector<SequenceEntry> checkins;
  /// Positions i where a new trajectory starts (i > 0).
  std::vector<std::size_t> boundaries;
};

void segment_trajectories(UserSequence& sequence, std::int64_t gap_threshold_seconds);

struct Range {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

/// Trajectories as [begin, end) ranges: cut at time-gap boundaries and
/// wherever the split label changes.
std::vector<Range> trajectories(const UserSequence& sequence);

// ---------------------------------------------------------------------------
// Instances

struct PredictionInstance {
  UserIndex user = 0;
  /// Index of the target in the user's sequence; history is [0, step).
  std::int32_t step = 0;
  PoiIndex source = kUnknownPoi;
  PoiIndex target = kUnknownPoi;
  /// Exactly k entries, left-padded with the pad index.
  std::vector<PoiIndex> suffix;
  std::int32_t suffix_len = 0;
  std::int64_t query_time = 0;
};

enum class InstanceMode { kTrain, kEval };

struct InstanceBuildStats {
  std::size_t dropped_unknown_target = 0;
  std::size_t dropped_unknown_source = 0;
  std::size_t short_trajectories = 0;
};

/// Train mode: every within-trajectory successor of a training trajectory.
/// Eval mode: the last check-in of each trajectory of `split`.
std::vector<PredictionInstance> build_instances(std::span<const UserSequence> sequences,
                                                const Vocabulary& vocab, int k,
                                                InstanceMode mode, Split split,
                                                InstanceBuildStats* stats = nullptr);

// ---------------------------------------------------------------------------
// End-to-end store

struct DatasetOptions {
  SplitRatios ratios;
  std::int64_t gap_threshold_seconds = 24 * 3600;
  int k = 10;
};

struct DatasetSummary {
  std::size_t checkins = 0;
  std::size_t users = 0;
  std::size_t pois = 0;
  std::size_t categories = 0;
  std::size_t train_checkins = 0, val_checkins = 0, test_checkins = 0;
  std::size_t train_instances = 0, val_instances = 0, test_instances = 0;
  std::size_t dropped_unknown_user = 0;
  InstanceBuildStats val_stats, test_stats;
};

struct InstanceStore {
  Vocabulary vocab;
  std::vector<UserSequence> sequences;  // indexed by user
  std::vector<PredictionInstance> train, val, test;
  DatasetOptions options;
  DatasetSummary summary;

  const UserSequence& sequence(UserIndex user) const { return sequences.at(user); }
};

InstanceStore prepare_dataset(std::vector<CheckIn> checkins, const DatasetOptions& options);

/// JSON container with an embedded vocabulary; see README for the layout.
void save_store(const InstanceStore& store, const std::filesystem::path& path);
InstanceStore load_store(const std::filesystem::path& path);

}  // namespace recap
